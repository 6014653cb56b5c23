#pragma once

#include "transim/case.hpp"
#include "transim/dynamics.hpp"
#include "transim/network.hpp"
#include "transim/powerflow.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace transim {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    friend bool operator==(const Range&, const Range&) = default;
};

/// Counter-keyed generator: the draws of (seed, counter, stream) never depend
/// on what other keys were used before.
[[nodiscard]] std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t counter, std::uint32_t stream);

struct SamplerSpec {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::vector<Range> load_p;  // per load, pu
    std::vector<Range> load_q;
    std::vector<Range> gen_p;   // per generator; slack entries bound the slack output
    Range gen_v{0.95, 1.10};
    int max_gen_draws = 1000;   // P_G redraws before the loads are redrawn
    int max_load_draws = 100;   // load redraws before the attempt is abandoned
    /// Attempts allowed per requested sample before the sampler gives up.
    std::size_t max_attempts_per_sample = 50;
    PfOptions pf;

    /// Ranges taken from the limits stored in the case.
    [[nodiscard]] static SamplerSpec from_case(const PowerSystemCase& c, std::size_t n, std::uint64_t seed);
    /// InvalidArgument for malformed ranges, InfeasibleSpec when the slack
    /// window can never contain the total load.
    void validate(const PowerSystemCase& c) const;
    [[nodiscard]] nlohmann::json to_json() const;
};

struct SampleRecord {
    std::size_t index = 0;
    std::uint64_t attempt = 0;
    std::vector<double> p_d;
    std::vector<double> q_d;
    std::vector<double> p_g;  // drawn set points; slack entries hold the solved output
    std::vector<double> v_g;
    PowerFlowSolution pf;
    std::optional<FaultEvent> contingency;
    std::optional<StabilityLabel> label;
};

/// The case with the record's loads and generator set points applied.
[[nodiscard]] PowerSystemCase apply_sample(const PowerSystemCase& c, const SampleRecord& r);

/// Sum of non-slack P_G plus the slack lower bounds lies strictly below the
/// total load, and the total load lies strictly below the same sum with the
/// slack upper bounds.
[[nodiscard]] bool slack_window_holds(const PowerSystemCase& c, const SamplerSpec& spec, const SampleRecord& r);

/// First `spec.n` converged attempts in attempt order. The result is the same
/// for every worker count. Throws NotConverged if the attempt budget runs out.
[[nodiscard]] std::vector<SampleRecord> sample_power_flow_cases(const PowerSystemCase& c, const SamplerSpec& spec,
                                                               unsigned workers = 1);

struct ContingencyOptions {
    double t_fault = 0.0;
    Range t_clear{0.06, 0.5};
    Range location{0.0, 1.0};
};

/// Uniform in-service branch, location and clearing time. Throws NoBranches.
[[nodiscard]] FaultEvent sample_contingency(const PowerSystemCase& c, std::uint64_t seed, std::uint64_t key,
                                            const ContingencyOptions& options = {});

struct DatasetOptions {
    std::size_t contingencies_per_point = 1;
    unsigned workers = 1;
    std::size_t shard_rows = 1000;
    ContingencyOptions contingency;
    SimulationConfig simulation;
    std::filesystem::path output_dir;  // nothing is written when empty
};

struct DatasetRow {
    std::size_t sample = 0;
    std::size_t contingency = 0;
    FaultEvent fault;
    std::optional<StabilityLabel> label;  // empty when the simulation failed
    double max_separation_deg = 0.0;
    std::string error;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    std::size_t n_requested = 0;
    std::size_t n_saved = 0;
    std::size_t n_failed = 0;
    std::map<std::string, std::size_t> label_counts;
    std::string config_digest;
    std::vector<std::string> shard_files;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct Dataset {
    std::vector<SampleRecord> points;
    std::vector<DatasetRow> rows;  // sample-major, contingency-minor
    DatasetManifest manifest;
};

/// Samples operating points, simulates the contingencies of each, and writes
/// CSV shards plus manifest.json when an output directory is given.
[[nodiscard]] Dataset generate_dataset(const PowerSystemCase& c, const SamplerSpec& spec,
                                       const DatasetOptions& options);

/// 64-bit FNV-1a, rendered as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(std::string_view bytes);

}  // namespace transim
