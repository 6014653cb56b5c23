// Emits the interface manifest of the flat C surface plus a header carrying
// its digest, so the shared library and the manifest cannot drift apart.
//
// usage: gen_interface_manifest <c_api.h> <manifest.json> <digest.h>

#include "transim/common.hpp"
#include "transim/dynamics.hpp"
#include "transim/engine.hpp"
#include "transim/sampling.hpp"

#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "json.hpp"

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

nlohmann::json parse_params(const std::string& list) {
    nlohmann::json params = nlohmann::json::array();
    if (trim(list) == "void" || trim(list).empty()) {
        return params;
    }
    std::stringstream ss(list);
    std::string item;
    static const std::regex param(R"(^(.*[\s\*])(\w+)$)");
    while (std::getline(ss, item, ',')) {
        std::smatch m;
        const auto t = trim(item);
        if (!std::regex_match(t, m, param)) {
            throw std::runtime_error("cannot parse parameter '" + t + "'");
        }
        params.push_back({{"name", m[2].str()}, {"type", trim(m[1].str())}});
    }
    return params;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: " << argv[0] << " <c_api.h> <manifest.json> <digest.h>\n";
        return 2;
    }
    std::ifstream header(argv[1]);
    if (!header) {
        std::cerr << "cannot read " << argv[1] << '\n';
        return 2;
    }
    static const std::regex decl(R"(^TRANSIM_API\s+(.+?)\s*\b(transim_\w+)\((.*)\);\s*$)");
    nlohmann::json functions = nlohmann::json::array();
    std::string line;
    try {
        while (std::getline(header, line)) {
            std::smatch m;
            if (std::regex_match(line, m, decl)) {
                functions.push_back({{"name", m[2].str()}, {"returns", trim(m[1].str())}, {"params", parse_params(m[3].str())}});
            }
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }

    nlohmann::json errors = nlohmann::json::object();
    for (int code = 0; code <= static_cast<int>(transim::ErrorCode::InvalidArgument); ++code) {
        errors[std::string(transim::to_string(static_cast<transim::ErrorCode>(code)))] = code;
    }
    nlohmann::json components = nlohmann::json::object();
    for (const char* kind : {"bus", "branch", "generator", "load", "config"}) {
        components[kind] = transim::EngineSession::field_names(kind);
    }
    nlohmann::json manifest{
        {"abi_version", 1},
        {"functions", functions},
        {"error_codes", errors},
        {"components", components},
        {"query_items", transim::EngineSession::query_items()},
        {"result_columns", transim::SimulationResult::columns()},
        {"session_states", {"loaded", "solved", "simulated"}},
        {"state_layout", {"delta[n_gen]", "omega[n_gen]", "e_prime[n_gen]", "v_re[n_bus]", "v_im[n_bus]"}},
    };
    const auto digest = transim::fnv1a_hex(manifest.dump());
    manifest["digest"] = digest;

    std::ofstream out(argv[2]);
    out << manifest.dump(2) << '\n';
    std::ofstream dh(argv[3]);
    dh << "#pragma once\n#define TRANSIM_INTERFACE_DIGEST \"" << digest << "\"\n";
    return out && dh ? 0 : 1;
}
