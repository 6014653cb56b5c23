#include "doctest.h"
#include "support.hpp"

#include "transim/sampling.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace testing;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Ok;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "transim_sampling_tests" / name;
    std::filesystem::remove_all(dir);
    return dir;
}

/// Constraint and re-solve check written against the case, not the sampler.
void revalidate(const PowerSystemCase& c, const SamplerSpec& spec, const SampleRecord& r) {
    REQUIRE(r.pf.converged);
    REQUIRE(r.p_d.size() == c.loads.size());
    for (std::size_t i = 0; i < c.loads.size(); ++i) {
        CHECK(spec.load_p[i].contains(r.p_d[i]));
        CHECK(spec.load_q[i].contains(r.q_d[i]));
    }
    double fixed = 0, lo = 0, hi = 0, load = 0;
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        CHECK(spec.gen_v.contains(r.v_g[g]));
        if (c.generators[g].slack) {
            lo += spec.gen_p[g].lo;
            hi += spec.gen_p[g].hi;
        } else {
            CHECK(spec.gen_p[g].contains(r.p_g[g]));
            fixed += r.p_g[g];
        }
    }
    for (const double p : r.p_d) load += p;
    CHECK(fixed + lo < load);
    CHECK(load < fixed + hi);
    CHECK(slack_window_holds(c, spec, r));

    const auto applied = apply_sample(c, r);
    for (std::size_t i = 0; i < c.loads.size(); ++i) CHECK(applied.loads[i].p == r.p_d[i]);
    const auto again = solve_power_flow(applied, spec.pf);
    CHECK(again.converged);
    for (std::size_t b = 0; b < again.vm.size(); ++b) {
        CHECK(std::abs(again.vm[b] - r.pf.vm[b]) <= 1e-8);
        CHECK(std::abs(again.va[b] - r.pf.va[b]) <= 1e-8);
    }
    double worst = 0;
    for (const double m : compute_mismatch(applied, again.voltages())) worst = std::max(worst, std::abs(m));
    CHECK(worst <= 1e-6);
}

}  // namespace

TEST_CASE("keyed generators are independent of call history") {
    auto a = keyed_rng(7, 3, 0);
    auto b = keyed_rng(7, 3, 0);
    (void)keyed_rng(7, 2, 0)();
    CHECK(a() == b());
    CHECK(keyed_rng(7, 3, 0)() != keyed_rng(7, 4, 0)());
    CHECK(keyed_rng(7, 3, 0)() != keyed_rng(7, 3, 1)());
    CHECK(keyed_rng(7, 3, 0)() != keyed_rng(8, 3, 0)());
}

TEST_CASE("zero samples requested") {
    const auto c = ieee39();
    CHECK(sample_power_flow_cases(c, SamplerSpec::from_case(c, 0, 1)).empty());
}

TEST_CASE("sampled operating points re-validate") {
    const auto c = ieee39();
    const auto spec = SamplerSpec::from_case(c, 100, 2024);
    const auto recs = sample_power_flow_cases(c, spec);
    REQUIRE(recs.size() == 100);
    std::set<std::uint64_t> attempts;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(recs[i].index == i);
        attempts.insert(recs[i].attempt);
        revalidate(c, spec, recs[i]);
    }
    CHECK(attempts.size() == 100);
    CHECK(std::is_sorted(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.attempt < b.attempt; }));
    // Same bus, same voltage.
    for (const auto& r : recs) {
        for (std::size_t g = 0; g < c.generators.size(); ++g)
            for (std::size_t h = 0; h < c.generators.size(); ++h)
                if (c.generators[g].bus == c.generators[h].bus) CHECK(r.v_g[g] == r.v_g[h]);
    }
}

TEST_CASE("worker count does not change the records") {
    const auto c = ieee39();
    const auto spec = SamplerSpec::from_case(c, 40, 99);
    const auto one = sample_power_flow_cases(c, spec, 1);
    const auto eight = sample_power_flow_cases(c, spec, 8);
    REQUIRE(one.size() == eight.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].attempt == eight[i].attempt);
        CHECK(one[i].p_d == eight[i].p_d);
        CHECK(one[i].q_d == eight[i].q_d);
        CHECK(one[i].p_g == eight[i].p_g);
        CHECK(one[i].v_g == eight[i].v_g);
        CHECK(one[i].pf == eight[i].pf);
    }
    auto other = spec;
    other.seed = 100;
    CHECK(sample_power_flow_cases(c, other).front().p_d != one.front().p_d);
}

TEST_CASE("sampler spec validation") {
    const auto c = ieee39();
    auto spec = SamplerSpec::from_case(c, 10, 1);
    CHECK(code_of([&] { spec.validate(c); }) == ErrorCode::Ok);
    auto bad = spec;
    bad.load_p.pop_back();
    CHECK(code_of([&] { bad.validate(c); }) == ErrorCode::InvalidArgument);
    bad = spec;
    bad.gen_v = {1.1, 0.9};
    CHECK(code_of([&] { bad.validate(c); }) == ErrorCode::InvalidArgument);
    bad = spec;
    for (auto& r : bad.load_p) r = {10.0, 11.0};
    CHECK(code_of([&] { bad.validate(c); }) == ErrorCode::InfeasibleSpec);
    CHECK(code_of([&] { (void)sample_power_flow_cases(c, bad); }) == ErrorCode::InfeasibleSpec);
}

TEST_CASE("contingency draws") {
    auto two = ieee39();
    for (std::size_t k = 1; k < two.branches.size(); ++k) two.branches[k].in_service = false;
    for (std::uint64_t key = 0; key < 20; ++key) CHECK(sample_contingency(two, 3, key).branch == 0);

    auto none = two;
    none.branches[0].in_service = false;
    CHECK(code_of([&] { (void)sample_contingency(none, 3, 0); }) == ErrorCode::NoBranches);

    const auto c = ieee39();
    ContingencyOptions opts;
    opts.t_clear = {0.1, 0.2};
    const int draws = 10000;
    std::vector<int> counts(c.branches.size(), 0);
    for (int k = 0; k < draws; ++k) {
        const auto f = sample_contingency(c, 11, static_cast<std::uint64_t>(k), opts);
        ++counts[static_cast<std::size_t>(f.branch)];
        CHECK(opts.location.contains(f.location));
        CHECK(opts.t_clear.contains(f.t_clear));
        CHECK(f.t_fault == 0.0);
        CHECK(f.trip_branch);
    }
    const double p = 1.0 / static_cast<double>(c.branches.size());
    const double expect = draws * p;
    const double sigma = std::sqrt(draws * p * (1 - p));
    double chi2 = 0;
    for (const int n : counts) {
        chi2 += (n - expect) * (n - expect) / expect;
        CHECK(std::abs(n - expect) <= 3 * sigma);
    }
    // 45 degrees of freedom, upper 0.1% point
    CHECK(chi2 < 80.08);
    CHECK(sample_contingency(c, 11, 5, opts) == sample_contingency(c, 11, 5, opts));
}

TEST_CASE("dataset output is independent of the worker count") {
    const auto c = ieee39();
    const auto spec = SamplerSpec::from_case(c, 4, 5);
    DatasetOptions opts;
    opts.contingencies_per_point = 2;
    opts.simulation.horizon = 2.0;
    opts.shard_rows = 3;
    opts.output_dir = fresh_dir("w1");
    const auto a = generate_dataset(c, spec, opts);
    opts.workers = 4;
    opts.output_dir = fresh_dir("w4");
    const auto b = generate_dataset(c, spec, opts);

    CHECK(a.manifest.to_json() == b.manifest.to_json());
    REQUIRE(a.manifest.shard_files.size() >= 2);
    const auto root = std::filesystem::temp_directory_path() / "transim_sampling_tests";
    for (const auto& f : a.manifest.shard_files) {
        CHECK(std::filesystem::exists(root / "w1" / f));
        CHECK(slurp(root / "w1" / f) == slurp(root / "w4" / f));
    }
    CHECK(slurp(root / "w1" / "manifest.json") == slurp(root / "w4" / "manifest.json"));
    REQUIRE(a.rows.size() == 8);
    for (std::size_t t = 0; t < a.rows.size(); ++t) {
        CHECK(a.rows[t].sample == t / 2);
        CHECK(a.rows[t].contingency == t % 2);
        CHECK(a.rows[t].fault == b.rows[t].fault);
        CHECK(a.rows[t].max_separation_deg == b.rows[t].max_separation_deg);
    }
    const auto& m = a.manifest;
    CHECK(m.n_requested == 4);
    CHECK(m.n_saved == 4);
    CHECK(m.label_counts.at("stable") + m.label_counts.at("unstable") == 8 - m.n_failed);
    CHECK(m.config_digest.size() == 16);
}

TEST_CASE("failed simulations are flagged and counted") {
    const auto c = ieee39();
    const auto spec = SamplerSpec::from_case(c, 3, 8);
    DatasetOptions opts;
    opts.contingencies_per_point = 2;
    opts.simulation.horizon = 1.0;
    opts.simulation.inner_tolerance = 1e-300;
    opts.simulation.inner_max_iterations = 1;
    const auto d = generate_dataset(c, spec, opts);
    CHECK(d.manifest.n_failed == 6);
    for (const auto& r : d.rows) {
        CHECK_FALSE(r.label.has_value());
        CHECK(r.error == "InnerLoopDiverged");
    }
    CHECK(d.manifest.label_counts.at("stable") + d.manifest.label_counts.at("unstable") == 0);
}

TEST_CASE("digest follows the configuration") {
    const auto c = ieee39();
    const auto spec = SamplerSpec::from_case(c, 1, 8);
    DatasetOptions opts;
    opts.simulation.horizon = 0.5;
    const auto a = generate_dataset(c, spec, opts);
    opts.workers = 3;
    CHECK(generate_dataset(c, spec, opts).manifest.config_digest == a.manifest.config_digest);
    opts.contingency.t_clear = {0.1, 0.2};
    CHECK(generate_dataset(c, spec, opts).manifest.config_digest != a.manifest.config_digest);
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("default ranges keep most power flows convergent") {
    const auto c = ieee39();
    const auto spec = SamplerSpec::from_case(c, 50, 31);
    DatasetOptions opts;
    opts.contingencies_per_point = 2;
    opts.simulation.horizon = 1.0;
    const auto d = generate_dataset(c, spec, opts);
    REQUIRE(d.points.size() == 50);
    const double attempts = static_cast<double>(d.points.back().attempt + 1);
    CHECK(50.0 / attempts >= 0.95);
    CHECK(d.rows.size() == 100);
}
