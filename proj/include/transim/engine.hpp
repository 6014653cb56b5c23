#pragma once

#include "transim/case.hpp"
#include "transim/dynamics.hpp"
#include "transim/network.hpp"
#include "transim/nn.hpp"
#include "transim/powerflow.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace transim {

enum class SessionState { Loaded, Solved, Simulated };

[[nodiscard]] std::string_view to_string(SessionState s) noexcept;

struct IslandReport {
    std::vector<std::vector<int>> islands;  // bus ids
    std::vector<std::size_t> without_slack;  // positions in `islands`
    [[nodiscard]] bool flagged() const noexcept { return islands.size() > 1 && !without_slack.empty(); }
};

using QueryValue = std::variant<std::int64_t, double, bool, ComplexMatrix, std::vector<Index>,
                                std::vector<std::vector<int>>, std::vector<FaultEvent>>;

/// One logged facade call; replaying the log reproduces the session.
struct SessionCall {
    std::string op;
    nlohmann::json args;
    friend bool operator==(const SessionCall&, const SessionCall&) = default;
};

/// Facade over case data, parameters, power flow, simulation and results.
/// Parameter and topology changes drop any solution (back to Loaded).
class EngineSession {
public:
    explicit EngineSession(PowerSystemCase c, std::filesystem::path base_dir = {});

    [[nodiscard]] static EngineSession load_case(const std::filesystem::path& path);
    void export_case(const std::filesystem::path& path) const;

    [[nodiscard]] const PowerSystemCase& case_data() const noexcept { return case_; }
    [[nodiscard]] SessionState state() const noexcept { return state_; }

    // Parameter API. Kinds: bus, branch, generator, load, config.
    [[nodiscard]] std::size_t component_count(std::string_view kind) const;
    [[nodiscard]] static std::vector<std::string> field_names(std::string_view kind);
    [[nodiscard]] double get_parameter(std::string_view kind, Index index, std::string_view field) const;
    void set_parameter(std::string_view kind, Index index, std::string_view field, double value, bool force = false);
    IslandReport set_branch_status(Index branch, bool in_service);
    [[nodiscard]] IslandReport island_report() const;

    // Function API.
    const PowerFlowSolution& run_power_flow(const PfOptions& options = {});
    /// Declares the disturbance used by simulation and the Y1/Y2 queries.
    void set_fault(std::optional<FaultEvent> fault);
    /// Builds a simulator at t = 0 without integrating.
    Simulator& prepare_simulation();
    const SimulationResult& run_simulation();
    /// Integrates up to `steps` further steps; returns the number taken.
    std::int64_t advance(std::int64_t steps);
    void set_state(std::int64_t k, const DynamicState& state);

    // Solution API.
    [[nodiscard]] QueryValue query(std::string_view item) const;
    [[nodiscard]] static std::vector<std::string> query_items();
    [[nodiscard]] const PowerFlowSolution& power_flow() const;
    [[nodiscard]] const Simulator& simulator() const;
    [[nodiscard]] const SimulationResult& result() const;
    [[nodiscard]] const std::optional<FaultEvent>& fault() const noexcept { return fault_; }
    [[nodiscard]] SimulationConfig simulation_config() const;

    [[nodiscard]] const std::vector<SessionCall>& call_log() const noexcept { return log_; }
    /// Applies a logged call to this session.
    void apply(const SessionCall& call);
    [[nodiscard]] static EngineSession replay(PowerSystemCase c, const std::vector<SessionCall>& log,
                                              std::filesystem::path base_dir = {});

private:
    void invalidate();
    [[nodiscard]] std::vector<std::pair<Index, std::shared_ptr<const DeviceModel>>> neural_overrides();
    [[nodiscard]] std::vector<NortonShunt> solved_shunts() const;
    [[nodiscard]] const ComplexLu& pre_fault_factors() const;

    PowerSystemCase case_;
    std::filesystem::path base_dir_;
    SessionState state_ = SessionState::Loaded;
    std::optional<PowerFlowSolution> pf_;
    std::optional<FaultEvent> fault_;
    std::unique_ptr<Simulator> sim_;
    double inner_tolerance_ = 1e-6;
    int inner_max_iterations_ = 20;
    mutable std::optional<ComplexLu> y0_factors_;
    std::map<std::string, std::shared_ptr<const nn::Network>> networks_;
    std::vector<SessionCall> log_;
};

[[nodiscard]] nlohmann::json fault_to_json(const FaultEvent& f);
[[nodiscard]] FaultEvent fault_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json state_to_json(const DynamicState& s);
[[nodiscard]] DynamicState state_from_json(const nlohmann::json& j);

}  // namespace transim
