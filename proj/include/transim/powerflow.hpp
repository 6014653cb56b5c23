#pragma once

#include "transim/case.hpp"
#include "transim/sparse.hpp"

#include <optional>
#include <span>
#include <vector>

namespace transim {

struct PfOptions {
    double tolerance = 1e-6;
    int max_iterations = 30;
    /// First iteration at which PV buses are checked against their Q limits.
    int switch_start_iteration = 2;
    bool enforce_q_limits = true;
    Ordering ordering = Ordering::MinimumDegree;
    /// Initial bus voltages; flat start when absent.
    std::optional<std::vector<Complex>> warm_start;
};

enum class SwitchDirection { ToPqAtUpper, ToPqAtLower, BackToPv };

struct PvPqSwitch {
    int bus = 0;  // bus id
    int iteration = 0;
    SwitchDirection direction = SwitchDirection::ToPqAtUpper;

    friend bool operator==(const PvPqSwitch&, const PvPqSwitch&) = default;
};

struct PowerFlowSolution {
    std::vector<double> vm;     // per bus, pu
    std::vector<double> va;     // per bus, rad
    std::vector<double> gen_p;  // per generator, pu
    std::vector<double> gen_q;
    int iterations = 0;
    bool converged = false;
    double max_mismatch = 0.0;
    std::vector<PvPqSwitch> switches;
    std::vector<BusType> final_types;

    [[nodiscard]] std::vector<Complex> voltages() const;

    friend bool operator==(const PowerFlowSolution&, const PowerFlowSolution&) = default;
};

/// Never throws on non-convergence; `converged` carries the outcome. Throws
/// InvalidCase for structural defects (missing or duplicate slack per island).
[[nodiscard]] PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const PfOptions& options = {});

/// Scheduled minus computed injections: dP for every non-slack bus, then dQ for
/// every PQ bus, both in bus order. Uses the case's declared bus types.
[[nodiscard]] std::vector<double> compute_mismatch(const PowerSystemCase& c, std::span<const Complex> v);

/// Polar Jacobian of the computed injections, rows/cols ordered like
/// compute_mismatch (theta of non-slack buses, then |V| of PQ buses).
[[nodiscard]] RealMatrix assemble_jacobian(const PowerSystemCase& c, std::span<const Complex> v);

/// Complex power injected into the network at every bus, S = V conj(Y V).
[[nodiscard]] std::vector<Complex> bus_injections(const PowerSystemCase& c, std::span<const Complex> v);

/// Aggregate load per bus position.
[[nodiscard]] std::vector<Complex> bus_loads(const PowerSystemCase& c);

[[nodiscard]] std::string_view to_string(SwitchDirection d) noexcept;

}  // namespace transim
