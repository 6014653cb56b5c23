#pragma once

#include "transim/common.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace transim {

enum class BusType { Slack, PV, PQ };

struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double base_kv = 0.0;
    double gs = 0.0;  // shunt conductance, pu
    double bs = 0.0;  // shunt susceptance, pu

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;          // total line charging, pu
    double tap = 1.0;        // off-nominal ratio at the from side; 0 means nominal
    double shift_deg = 0.0;  // phase shift, degrees
    bool in_service = true;
    int circuit = 1;

    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Generator {
    int bus = 0;
    double p = 0.0;  // scheduled active power, pu
    double v = 1.0;  // voltage setpoint, pu
    double q_min = -9999.0;
    double q_max = 9999.0;
    double p_min = 0.0;
    double p_max = 9999.0;
    double h = 5.0;           // inertia constant, s
    double d = 0.0;           // damping, pu
    double xd_prime = 0.3;    // transient reactance, pu
    bool slack = false;

    friend bool operator==(const Generator&, const Generator&) = default;
};

struct Load {
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;

    friend bool operator==(const Load&, const Load&) = default;
};

/// Attaches a feed-forward network as the derivative model of one generator.
struct NeuralDeviceSpec {
    int generator = 0;
    std::string spec_path;
    std::string blob_path;
    std::vector<std::string> state_layout{"delta", "omega"};

    friend bool operator==(const NeuralDeviceSpec&, const NeuralDeviceSpec&) = default;
};

struct CaseConfig {
    std::string power_flow_method = "newton";
    std::string integration_method = "trapezoidal";
    std::string ordering = "min_degree";
    double frequency_hz = 50.0;
    double step = 0.01;
    double horizon = 10.0;

    friend bool operator==(const CaseConfig&, const CaseConfig&) = default;
};

struct PowerSystemCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;
    std::vector<NeuralDeviceSpec> neural_devices;
    CaseConfig config;

    /// Position of bus `id` in `buses`; throws UnknownBus.
    [[nodiscard]] Index bus_index(int id) const;
    [[nodiscard]] std::optional<Index> find_bus(int id) const noexcept;
    [[nodiscard]] Index bus_count() const noexcept { return static_cast<Index>(buses.size()); }

    friend bool operator==(const PowerSystemCase&, const PowerSystemCase&) = default;
};

/// Every structural violation found, in one pass; empty when the case is valid.
[[nodiscard]] std::vector<std::string> validation_errors(const PowerSystemCase& c);

/// Throws ValidationError listing every violation.
void validate(const PowerSystemCase& c);

[[nodiscard]] PowerSystemCase case_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json case_to_json(const PowerSystemCase& c);

/// Parses and validates. ParseError carries line/column or the offending field.
[[nodiscard]] PowerSystemCase load_case_file(const std::filesystem::path& path);
void save_case_file(const PowerSystemCase& c, const std::filesystem::path& path);

[[nodiscard]] std::string_view to_string(BusType t) noexcept;

}  // namespace transim
