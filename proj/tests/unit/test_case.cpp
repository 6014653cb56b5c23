#include "doctest.h"
#include "support.hpp"

#include <fstream>

using namespace testing;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "transim_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Ok;
}

/// Synthetic case with the component counts of a large Polish system.
PowerSystemCase synthetic(int buses, int branches, int gens, int loads) {
    PowerSystemCase c;
    c.name = "synthetic";
    for (int i = 1; i <= buses; ++i) c.buses.push_back({i, BusType::PQ, 110.0, 0.0, 0.0});
    c.buses[0].type = BusType::Slack;
    for (int k = 0; k < branches; ++k) {
        const int from = k < buses - 1 ? k + 1 : 1 + (k * 7) % buses;
        const int to = k < buses - 1 ? k + 2 : 1 + (k * 13 + 5) % buses;
        c.branches.push_back({from, to == from ? (to % buses) + 1 : to, 0.01, 0.1, 0.02, 1.0, 0.0, true, 1 + k});
    }
    for (int g = 0; g < gens; ++g) {
        Generator gen;
        gen.bus = 1 + g * (buses / gens);
        gen.slack = g == 0;
        if (g > 0) c.buses[static_cast<std::size_t>(gen.bus - 1)].type = BusType::PV;
        c.generators.push_back(gen);
    }
    for (int l = 0; l < loads; ++l) c.loads.push_back({1 + l % buses, 0.1, 0.05, 0.08, 0.11, 0.04, 0.055});
    return c;
}

}  // namespace

TEST_CASE("bundled 39-bus fixture has the standard component counts") {
    const auto c = ieee39();
    CHECK(c.buses.size() == 39);
    CHECK(c.branches.size() == 46);
    CHECK(c.generators.size() == 10);
    CHECK(c.loads.size() == 19);
    CHECK(validation_errors(c).empty());
}

TEST_CASE("export then load is the identity") {
    const auto c = ieee39();
    const auto p = temp_path("roundtrip.json");
    save_case_file(c, p);
    const auto back = load_case_file(p);
    CHECK(back == c);
    save_case_file(back, temp_path("roundtrip2.json"));
    std::ifstream a(p), b(temp_path("roundtrip2.json"));
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("large synthetic case counts echo exactly") {
    const auto c = synthetic(2383, 2892, 327, 1822);
    REQUIRE(validation_errors(c).empty());
    const auto p = temp_path("synthetic.json");
    save_case_file(c, p);
    const auto back = load_case_file(p);
    CHECK(back.buses.size() == 2383);
    CHECK(back.branches.size() == 2892);
    CHECK(back.generators.size() == 327);
    CHECK(back.loads.size() == 1822);
}

TEST_CASE("parse errors name the field") {
    auto j = case_to_json(ieee39());
    j["branches"][3].erase("x");
    try {
        (void)case_from_json(j);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("branches[3].x") != std::string::npos);
    }
}

TEST_CASE("syntax errors carry the line") {
    const auto p = temp_path("broken.json");
    std::ofstream(p) << "{\n \"buses\": [\n  {\"id\": 1,,}\n ]\n}\n";
    try {
        (void)load_case_file(p);
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("missing file is an I/O error naming the path") {
    try {
        (void)load_case_file("/nonexistent/case.json");
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
        CHECK(std::string(e.what()).find("/nonexistent/case.json") != std::string::npos);
    }
}

TEST_CASE("validation lists every violation") {
    auto c = ieee39();
    c.generators[2].xd_prime = 0.0;
    c.generators[3].h = -1.0;
    c.branches[5].to = 999;
    const auto errors = validation_errors(c);
    CHECK(errors.size() >= 3);
    try {
        validate(c);
        FAIL("expected ValidationError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ValidationError);
        const std::string msg = e.what();
        CHECK(msg.find("generators[2]") != std::string::npos);
        CHECK(msg.find("generators[3]") != std::string::npos);
        CHECK(msg.find("999") != std::string::npos);
    }
}

TEST_CASE("structural checks") {
    auto c = ieee39();
    c.buses.push_back(c.buses.front());
    CHECK_FALSE(validation_errors(c).empty());

    c = ieee39();
    c.branches[0].r = 0.0;
    c.branches[0].x = 0.0;
    CHECK_FALSE(validation_errors(c).empty());

    c = ieee39();
    c.generators[1].slack = false;
    CHECK_FALSE(validation_errors(c).empty());

    c = ieee39();
    c.loads[0].p_min = 10.0;
    CHECK_FALSE(validation_errors(c).empty());

    c = ieee39();
    c.neural_devices.push_back({0, "a.json", "a.bin", {"omega"}});
    CHECK_FALSE(validation_errors(c).empty());

    c = ieee39();
    c.config.step = 20.0;
    CHECK_FALSE(validation_errors(c).empty());
}

TEST_CASE("unknown bus lookup") {
    const auto c = ieee39();
    CHECK(c.bus_index(39) == 38);
    CHECK_FALSE(c.find_bus(40).has_value());
    CHECK(code_of([&] { (void)c.bus_index(40); }) == ErrorCode::UnknownBus);
}

TEST_CASE("config selectors accept only the implemented methods") {
    auto j = case_to_json(ieee39());
    j["config"]["ordering"] = "natural";
    CHECK(case_from_json(j).config.ordering == "natural");
    j["config"]["power_flow_method"] = "fast_decoupled";
    CHECK(code_of([&] { (void)case_from_json(j); }) == ErrorCode::ParseError);
}
