#include "transim/case.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace transim {

using nlohmann::json;

std::string_view to_string(BusType t) noexcept {
    switch (t) {
        case BusType::Slack: return "Slack";
        case BusType::PV: return "PV";
        case BusType::PQ: return "PQ";
    }
    return "PQ";
}

std::optional<Index> PowerSystemCase::find_bus(int id) const noexcept {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) {
            return static_cast<Index>(i);
        }
    }
    return std::nullopt;
}

Index PowerSystemCase::bus_index(int id) const {
    if (auto i = find_bus(id)) {
        return *i;
    }
    throw Error(ErrorCode::UnknownBus, "bus " + std::to_string(id) + " does not exist");
}

std::vector<std::string> validation_errors(const PowerSystemCase& c) {
    std::vector<std::string> errors;
    auto complain = [&](const std::string& where, const std::string& what) { errors.push_back(where + ": " + what); };

    if (c.buses.empty()) {
        complain("buses", "case has no buses");
    }
    if (!(c.base_mva > 0.0)) {
        complain("base_mva", "must be positive");
    }
    std::set<int> ids;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        if (!ids.insert(c.buses[i].id).second) {
            complain("buses[" + std::to_string(i) + "]", "duplicate bus id " + std::to_string(c.buses[i].id));
        }
    }
    for (std::size_t i = 0; i < c.branches.size(); ++i) {
        const auto& br = c.branches[i];
        const std::string where = "branches[" + std::to_string(i) + "]";
        if (!ids.contains(br.from)) {
            complain(where, "unknown from bus " + std::to_string(br.from));
        }
        if (!ids.contains(br.to)) {
            complain(where, "unknown to bus " + std::to_string(br.to));
        }
        if (br.from == br.to) {
            complain(where, "branch connects bus " + std::to_string(br.from) + " to itself");
        }
        if (std::hypot(br.r, br.x) <= 0.0) {
            complain(where, "zero series impedance");
        }
        if (br.tap < 0.0) {
            complain(where, "negative tap ratio");
        }
    }

    std::vector<int> slack_buses;
    for (std::size_t i = 0; i < c.generators.size(); ++i) {
        const auto& g = c.generators[i];
        const std::string where = "generators[" + std::to_string(i) + "]";
        const auto bus = c.find_bus(g.bus);
        if (!bus) {
            complain(where, "unknown bus " + std::to_string(g.bus));
        }
        if (!(g.xd_prime > 0.0)) {
            complain(where, "xd_prime must be > 0");
        }
        if (!(g.h > 0.0)) {
            complain(where, "h must be > 0");
        }
        if (g.d < 0.0) {
            complain(where, "d must be >= 0");
        }
        if (g.q_min > g.q_max) {
            complain(where, "q_min > q_max");
        }
        if (g.p_min > g.p_max) {
            complain(where, "p_min > p_max");
        }
        if (!(g.v > 0.0)) {
            complain(where, "voltage setpoint must be > 0");
        }
        if (g.slack) {
            slack_buses.push_back(g.bus);
            if (bus && c.buses[*bus].type != BusType::Slack) {
                complain(where, "slack generator on non-slack bus " + std::to_string(g.bus));
            }
        }
    }
    for (const auto& b : c.buses) {
        if (b.type == BusType::PQ) {
            continue;
        }
        const bool has_gen = std::any_of(c.generators.begin(), c.generators.end(), [&](const Generator& g) {
            return g.bus == b.id && (b.type == BusType::PV || g.slack);
        });
        if (!has_gen) {
            complain("bus " + std::to_string(b.id),
                     b.type == BusType::Slack ? "slack bus without slack generator" : "PV bus without generator");
        }
    }
    if (slack_buses.empty() && !c.buses.empty()) {
        complain("generators", "no slack generator");
    }
    for (std::size_t i = 0; i < c.loads.size(); ++i) {
        const auto& l = c.loads[i];
        const std::string where = "loads[" + std::to_string(i) + "]";
        if (!ids.contains(l.bus)) {
            complain(where, "unknown bus " + std::to_string(l.bus));
        }
        if (l.p_min > l.p_max) {
            complain(where, "p_min > p_max");
        }
        if (l.q_min > l.q_max) {
            complain(where, "q_min > q_max");
        }
    }
    for (std::size_t i = 0; i < c.neural_devices.size(); ++i) {
        const auto& n = c.neural_devices[i];
        const std::string where = "neural_devices[" + std::to_string(i) + "]";
        if (n.generator < 0 || n.generator >= static_cast<int>(c.generators.size())) {
            complain(where, "generator index " + std::to_string(n.generator) + " out of range");
        }
        std::set<std::string> seen;
        for (const auto& s : n.state_layout) {
            if (s != "delta" && s != "omega" && s != "e_prime") {
                complain(where, "unknown state channel '" + s + "'");
            }
            if (!seen.insert(s).second) {
                complain(where, "duplicate state channel '" + s + "'");
            }
        }
        if (!seen.contains("delta")) {
            complain(where, "state layout must include 'delta'");
        }
    }
    if (!(c.config.step > 0.0) || c.config.step > c.config.horizon) {
        complain("config", "require 0 < step <= horizon");
    }
    if (!(c.config.frequency_hz > 0.0)) {
        complain("config", "frequency_hz must be > 0");
    }
    return errors;
}

void validate(const PowerSystemCase& c) {
    const auto errors = validation_errors(c);
    if (errors.empty()) {
        return;
    }
    std::string msg = std::to_string(errors.size()) + " violation(s)";
    for (const auto& e : errors) {
        msg += "\n  " + e;
    }
    throw Error(ErrorCode::ValidationError, msg);
}

namespace {

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(ErrorCode::ParseError, where + "." + key + ": missing required field");
    }
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, where + "." + key + ": " + e.what());
    }
}

template <typename T>
T field_or(const json& obj, const char* key, const std::string& where, T fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    return field<T>(obj, key, where);
}

const json& array_field(const json& root, const char* key, bool required) {
    static const json empty = json::array();
    const auto it = root.find(key);
    if (it == root.end()) {
        if (required) {
            throw Error(ErrorCode::ParseError, std::string(key) + ": missing required section");
        }
        return empty;
    }
    if (!it->is_array()) {
        throw Error(ErrorCode::ParseError, std::string(key) + ": expected an array");
    }
    return *it;
}

BusType parse_bus_type(const std::string& s, const std::string& where) {
    if (s == "Slack" || s == "slack" || s == "REF") return BusType::Slack;
    if (s == "PV" || s == "pv") return BusType::PV;
    if (s == "PQ" || s == "pq") return BusType::PQ;
    throw Error(ErrorCode::ParseError, where + ".type: unknown bus type '" + s + "'");
}

}  // namespace

PowerSystemCase case_from_json(const json& j) {
    if (!j.is_object()) {
        throw Error(ErrorCode::ParseError, "case root must be a JSON object");
    }
    PowerSystemCase c;
    c.name = field_or<std::string>(j, "name", "case", "");
    c.base_mva = field_or<double>(j, "base_mva", "case", 100.0);

    const auto& buses = array_field(j, "buses", true);
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const auto& o = buses[i];
        const std::string w = "buses[" + std::to_string(i) + "]";
        Bus b;
        b.id = field<int>(o, "id", w);
        b.type = parse_bus_type(field_or<std::string>(o, "type", w, "PQ"), w);
        b.base_kv = field_or<double>(o, "base_kv", w, 0.0);
        b.gs = field_or<double>(o, "gs", w, 0.0);
        b.bs = field_or<double>(o, "bs", w, 0.0);
        c.buses.push_back(b);
    }
    const auto& branches = array_field(j, "branches", true);
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const auto& o = branches[i];
        const std::string w = "branches[" + std::to_string(i) + "]";
        Branch br;
        br.from = field<int>(o, "from", w);
        br.to = field<int>(o, "to", w);
        br.r = field_or<double>(o, "r", w, 0.0);
        br.x = field<double>(o, "x", w);
        br.b = field_or<double>(o, "b", w, 0.0);
        br.tap = field_or<double>(o, "tap", w, 1.0);
        br.shift_deg = field_or<double>(o, "shift_deg", w, 0.0);
        br.in_service = field_or<bool>(o, "in_service", w, true);
        br.circuit = field_or<int>(o, "circuit", w, 1);
        c.branches.push_back(br);
    }
    const auto& gens = array_field(j, "generators", true);
    for (std::size_t i = 0; i < gens.size(); ++i) {
        const auto& o = gens[i];
        const std::string w = "generators[" + std::to_string(i) + "]";
        Generator g;
        g.bus = field<int>(o, "bus", w);
        g.p = field_or<double>(o, "p", w, 0.0);
        g.v = field_or<double>(o, "v", w, 1.0);
        g.q_min = field_or<double>(o, "q_min", w, g.q_min);
        g.q_max = field_or<double>(o, "q_max", w, g.q_max);
        g.p_min = field_or<double>(o, "p_min", w, g.p_min);
        g.p_max = field_or<double>(o, "p_max", w, g.p_max);
        g.h = field<double>(o, "h", w);
        g.d = field_or<double>(o, "d", w, 0.0);
        g.xd_prime = field<double>(o, "xd_prime", w);
        g.slack = field_or<bool>(o, "slack", w, false);
        c.generators.push_back(g);
    }
    const auto& loads = array_field(j, "loads", false);
    for (std::size_t i = 0; i < loads.size(); ++i) {
        const auto& o = loads[i];
        const std::string w = "loads[" + std::to_string(i) + "]";
        Load l;
        l.bus = field<int>(o, "bus", w);
        l.p = field_or<double>(o, "p", w, 0.0);
        l.q = field_or<double>(o, "q", w, 0.0);
        l.p_min = field_or<double>(o, "p_min", w, l.p);
        l.p_max = field_or<double>(o, "p_max", w, l.p);
        l.q_min = field_or<double>(o, "q_min", w, l.q);
        l.q_max = field_or<double>(o, "q_max", w, l.q);
        c.loads.push_back(l);
    }
    const auto& neural = array_field(j, "neural_devices", false);
    for (std::size_t i = 0; i < neural.size(); ++i) {
        const auto& o = neural[i];
        const std::string w = "neural_devices[" + std::to_string(i) + "]";
        NeuralDeviceSpec n;
        n.generator = field<int>(o, "generator", w);
        n.spec_path = field<std::string>(o, "spec", w);
        n.blob_path = field<std::string>(o, "blob", w);
        n.state_layout = field_or<std::vector<std::string>>(o, "state_layout", w, n.state_layout);
        c.neural_devices.push_back(n);
    }
    if (const auto it = j.find("config"); it != j.end()) {
        const auto& o = *it;
        const std::string w = "config";
        auto& cfg = c.config;
        cfg.power_flow_method = field_or<std::string>(o, "power_flow_method", w, cfg.power_flow_method);
        cfg.integration_method = field_or<std::string>(o, "integration_method", w, cfg.integration_method);
        cfg.ordering = field_or<std::string>(o, "ordering", w, cfg.ordering);
        cfg.frequency_hz = field_or<double>(o, "frequency_hz", w, cfg.frequency_hz);
        cfg.step = field_or<double>(o, "step", w, cfg.step);
        cfg.horizon = field_or<double>(o, "horizon", w, cfg.horizon);
        if (cfg.power_flow_method != "newton") {
            throw Error(ErrorCode::ParseError, "config.power_flow_method: only 'newton' is available");
        }
        if (cfg.integration_method != "trapezoidal") {
            throw Error(ErrorCode::ParseError, "config.integration_method: only 'trapezoidal' is available");
        }
        if (cfg.ordering != "min_degree" && cfg.ordering != "natural") {
            throw Error(ErrorCode::ParseError, "config.ordering: expected 'min_degree' or 'natural'");
        }
    }
    return c;
}

json case_to_json(const PowerSystemCase& c) {
    json j;
    j["name"] = c.name;
    j["base_mva"] = c.base_mva;
    json buses = json::array();
    for (const auto& b : c.buses) {
        buses.push_back({{"id", b.id}, {"type", std::string(to_string(b.type))}, {"base_kv", b.base_kv},
                         {"gs", b.gs}, {"bs", b.bs}});
    }
    j["buses"] = std::move(buses);
    json branches = json::array();
    for (const auto& br : c.branches) {
        branches.push_back({{"from", br.from}, {"to", br.to}, {"r", br.r}, {"x", br.x}, {"b", br.b},
                            {"tap", br.tap}, {"shift_deg", br.shift_deg}, {"in_service", br.in_service},
                            {"circuit", br.circuit}});
    }
    j["branches"] = std::move(branches);
    json gens = json::array();
    for (const auto& g : c.generators) {
        gens.push_back({{"bus", g.bus}, {"p", g.p}, {"v", g.v}, {"q_min", g.q_min}, {"q_max", g.q_max},
                        {"p_min", g.p_min}, {"p_max", g.p_max}, {"h", g.h}, {"d", g.d},
                        {"xd_prime", g.xd_prime}, {"slack", g.slack}});
    }
    j["generators"] = std::move(gens);
    json loads = json::array();
    for (const auto& l : c.loads) {
        loads.push_back({{"bus", l.bus}, {"p", l.p}, {"q", l.q}, {"p_min", l.p_min}, {"p_max", l.p_max},
                         {"q_min", l.q_min}, {"q_max", l.q_max}});
    }
    j["loads"] = std::move(loads);
    json neural = json::array();
    for (const auto& n : c.neural_devices) {
        neural.push_back(
            {{"generator", n.generator}, {"spec", n.spec_path}, {"blob", n.blob_path}, {"state_layout", n.state_layout}});
    }
    j["neural_devices"] = std::move(neural);
    j["config"] = {{"power_flow_method", c.config.power_flow_method},
                   {"integration_method", c.config.integration_method},
                   {"ordering", c.config.ordering},
                   {"frequency_hz", c.config.frequency_hz},
                   {"step", c.config.step},
                   {"horizon", c.config.horizon}};
    return j;
}

PowerSystemCase load_case_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open case file '" + path.string() + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
    PowerSystemCase c;
    try {
        c = case_from_json(j);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
    validate(c);
    return c;
}

void save_case_file(const PowerSystemCase& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write case file '" + path.string() + "'");
    }
    out << case_to_json(c).dump(1) << '\n';
}

}  // namespace transim
