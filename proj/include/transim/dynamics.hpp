#pragma once

#include "transim/case.hpp"
#include "transim/network.hpp"
#include "transim/powerflow.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace transim {

struct SimulationConfig {
    double step = 0.01;
    double horizon = 10.0;
    double inner_tolerance = 1e-6;
    int inner_max_iterations = 20;
    double frequency_hz = 50.0;
    double instability_threshold_deg = 360.0;
    Ordering ordering = Ordering::MinimumDegree;

    [[nodiscard]] double synchronous_speed() const noexcept { return 2.0 * kPi * frequency_hz; }
    /// floor(horizon / step), tolerant to representation error.
    [[nodiscard]] std::int64_t step_count() const;
    void validate() const;

    [[nodiscard]] static SimulationConfig from_case(const PowerSystemCase& c);
};

/// Per-machine slice of the state vector.
struct MachineState {
    double delta = 0.0;    // rad
    double omega = 1.0;    // pu
    double e_prime = 0.0;  // pu

    friend bool operator==(const MachineState&, const MachineState&) = default;
};

struct MachineDerivative {
    double d_delta = 0.0;
    double d_omega = 0.0;
    double d_e_prime = 0.0;
};

struct DynamicState {
    std::vector<double> delta;
    std::vector<double> omega;
    std::vector<double> e_prime;
    std::vector<Complex> v;  // per bus
    double t = 0.0;
    std::int64_t k = 0;

    [[nodiscard]] MachineState machine(std::size_t g) const { return {delta[g], omega[g], e_prime[g]}; }
    void set_machine(std::size_t g, const MachineState& m) {
        delta[g] = m.delta;
        omega[g] = m.omega;
        e_prime[g] = m.e_prime;
    }

    friend bool operator==(const DynamicState&, const DynamicState&) = default;
};

/// A dynamic device seen by the alternating solver: a derivative function of
/// its own states and terminal voltage, plus a Norton equivalent.
class DeviceModel {
public:
    virtual ~DeviceModel() = default;

    [[nodiscard]] virtual MachineDerivative derivative(const MachineState& x, Complex v_terminal) const = 0;
    [[nodiscard]] virtual Complex injection(const MachineState& x) const = 0;
    [[nodiscard]] virtual Complex norton_admittance() const = 0;
    /// Short model name used in reports.
    [[nodiscard]] virtual std::string_view kind() const noexcept = 0;
};

/// Constant EMF behind transient reactance with the swing equation.
class ClassicMachine final : public DeviceModel {
public:
    ClassicMachine(double h, double d, double xd_prime, double p_mech, double omega_sync)
        : h_(h), d_(d), xd_(xd_prime), p_mech_(p_mech), omega_sync_(omega_sync) {}

    [[nodiscard]] MachineDerivative derivative(const MachineState& x, Complex v_terminal) const override;
    [[nodiscard]] Complex injection(const MachineState& x) const override;
    [[nodiscard]] Complex norton_admittance() const override { return 1.0 / Complex{0.0, xd_}; }
    [[nodiscard]] std::string_view kind() const noexcept override { return "classic"; }

    [[nodiscard]] double electrical_power(const MachineState& x, Complex v_terminal) const;
    [[nodiscard]] double mechanical_power() const noexcept { return p_mech_; }
    [[nodiscard]] double inertia() const noexcept { return h_; }
    [[nodiscard]] double xd_prime() const noexcept { return xd_; }

private:
    double h_;
    double d_;
    double xd_;
    double p_mech_;
    double omega_sync_;
};

/// Current delivered to the network at the terminal of a source E'∠δ behind jx'd.
[[nodiscard]] Complex terminal_current(const MachineState& x, double xd_prime, Complex v_terminal);

/// Devices plus the wiring needed to build the network injection vector.
struct DeviceSet {
    Index bus_count = 0;
    std::vector<Index> gen_bus;
    std::vector<std::shared_ptr<const DeviceModel>> models;

    /// Norton current vector of length `dimension` (>= bus_count).
    void injections(const DynamicState& s, std::span<Complex> out) const;
};

/// Generator E'∠δ from the power-flow point, ω = 1. V is the network solution
/// of the augmented pre-fault matrix, so the returned state is an equilibrium
/// of the classic model. Throws NotConverged.
[[nodiscard]] DynamicState init_dynamic_state(const PowerSystemCase& c, const PowerFlowSolution& pf);

/// Generator Norton shunts and constant-impedance loads derived from the
/// power-flow voltages.
[[nodiscard]] std::vector<NortonShunt> norton_shunts(const PowerSystemCase& c, const PowerFlowSolution& pf,
                                                     const std::vector<std::shared_ptr<const DeviceModel>>& models);

/// Classic models for every generator with P_m equal to the initial P_e.
[[nodiscard]] std::vector<std::shared_ptr<const DeviceModel>> classic_models(const PowerSystemCase& c,
                                                                             const DynamicState& initial,
                                                                             double omega_sync);

class InnerLoopDivergedError : public Error {
public:
    InnerLoopDivergedError(const std::string& message, DynamicState last_iterate)
        : Error(ErrorCode::InnerLoopDiverged, message), last_iterate_(std::move(last_iterate)) {}

    [[nodiscard]] const DynamicState& last_iterate() const noexcept { return last_iterate_; }

private:
    DynamicState last_iterate_;
};

struct StepOutcome {
    DynamicState state;
    int iterations = 0;
};

/// Solves Y'V = I'(x) for the network behind `factors`, returning the first
/// `bus_count` node voltages and the full vector in `full` when provided.
[[nodiscard]] std::vector<Complex> solve_network(const DeviceSet& devices, const ComplexLu& factors,
                                                 const DynamicState& s, std::vector<Complex>* full = nullptr);

/// One implicit-trapezoidal step by the alternating scheme. The starting
/// voltages are recomputed from the state against `factors`.
[[nodiscard]] StepOutcome step(const DeviceSet& devices, const ComplexLu& factors, const DynamicState& state,
                               const SimulationConfig& config);

enum class StabilityLabel { Stable, Unstable };

struct SimulationResult {
    std::vector<double> time;
    std::vector<DynamicState> states;
    std::vector<std::vector<double>> p_e;  // per step, per generator
    std::vector<std::vector<double>> q_e;
    std::vector<int> inner_iterations;     // per step; 0 for the initial snapshot
    StabilityLabel label = StabilityLabel::Stable;
    double max_separation_deg = 0.0;

    [[nodiscard]] std::size_t steps() const noexcept { return states.size(); }

    /// Column extraction: rotor_angles, speeds, e_prime, active_power,
    /// reactive_power, bus_voltages, regulator_outputs. Rows are steps.
    [[nodiscard]] std::vector<std::vector<double>> extract(std::string_view column) const;
    [[nodiscard]] static std::vector<std::string> columns();
};

struct StabilityVerdict {
    StabilityLabel label = StabilityLabel::Stable;
    double max_separation_deg = 0.0;
};

/// Unstable iff the largest pairwise rotor-angle spread exceeds the threshold.
[[nodiscard]] StabilityVerdict label_stability(const SimulationResult& result, double threshold_deg = 360.0);

/// Owns a staged network and the recorded trajectory. Single-threaded.
class Simulator {
public:
    /// `overrides` replaces the classic model of selected generators.
    Simulator(PowerSystemCase c, const PowerFlowSolution& pf, std::optional<FaultEvent> fault,
              SimulationConfig config,
              std::vector<std::pair<Index, std::shared_ptr<const DeviceModel>>> overrides = {});

    /// Runs from the current step to the horizon.
    const SimulationResult& run();
    /// Advances one step; returns false at the horizon.
    bool advance();

    [[nodiscard]] const DynamicState& get_state(std::int64_t k) const;
    /// Replaces the snapshot at step k and discards everything after it.
    void set_state(std::int64_t k, DynamicState state);

    [[nodiscard]] const SimulationResult& result() const noexcept { return result_; }
    [[nodiscard]] const DynamicState& current() const { return result_.states.back(); }
    [[nodiscard]] std::int64_t first_step() const noexcept { return first_step_; }
    [[nodiscard]] const DeviceSet& devices() const noexcept { return devices_; }
    [[nodiscard]] const std::vector<NortonShunt>& shunts() const noexcept { return shunts_; }
    [[nodiscard]] const SimulationConfig& config() const noexcept { return config_; }

    [[nodiscard]] StageKind stage_at(std::int64_t k) const;
    /// Factors of the augmented matrix of a stage (factorized on first use).
    [[nodiscard]] const ComplexLu& factors(StageKind stage);
    [[nodiscard]] ComplexMatrix augmented_matrix(StageKind stage) const;
    [[nodiscard]] int factorization_count() const noexcept { return factorizations_; }

private:
    void record(DynamicState s, int iterations);

    PowerSystemCase case_;
    std::optional<FaultEvent> fault_;
    SimulationConfig config_;
    DeviceSet devices_;
    std::vector<NortonShunt> shunts_;
    std::optional<ComplexLu> stage_factors_[3];
    std::int64_t fault_step_ = 0;
    std::int64_t clear_step_ = 0;
    std::int64_t first_step_ = 0;
    int factorizations_ = 0;
    SimulationResult result_;
};

/// Convenience wrapper: build a simulator, run to the horizon, label.
[[nodiscard]] SimulationResult simulate(const PowerSystemCase& c, const PowerFlowSolution& pf,
                                        const std::optional<FaultEvent>& fault, const SimulationConfig& config);

[[nodiscard]] std::string_view to_string(StabilityLabel l) noexcept;

}  // namespace transim
