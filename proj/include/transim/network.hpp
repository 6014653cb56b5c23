#pragma once

#include "transim/case.hpp"
#include "transim/sparse.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace transim {

/// Three-phase metallic short on a branch at fraction `location` from the
/// from-bus, applied at `t_fault` and cleared at `t_clear`.
struct FaultEvent {
    Index branch = 0;
    double location = 0.0;
    double t_fault = 0.0;
    double t_clear = 0.1;
    /// Clearing trips the faulted branch. `false` is a diagnostic mode that
    /// removes only the short.
    bool trip_branch = true;

    friend bool operator==(const FaultEvent&, const FaultEvent&) = default;
};

enum class StageKind { PreFault, DuringFault, PostFault };

struct NetworkStage {
    StageKind kind = StageKind::PreFault;
    std::optional<FaultEvent> fault;

    static NetworkStage pre_fault() { return {}; }
    static NetworkStage during(const FaultEvent& f) { return {StageKind::DuringFault, f}; }
    static NetworkStage post(const FaultEvent& f) { return {StageKind::PostFault, f}; }
};

/// Shunt admittance added on the diagonal of the network matrix: a
/// generator's Norton admittance or a load converted to constant impedance.
struct NortonShunt {
    Index bus = 0;  // position in PowerSystemCase::buses
    Complex admittance{};
};

/// Shunt used to ground the fault point.
inline constexpr double kFaultShuntAdmittance = 1e7;

/// Throws InvalidArgument when the fault does not reference an in-service
/// branch or its location is outside [0, 1].
void check_fault(const PowerSystemCase& c, const FaultEvent& fault);

/// Index of the temporary fault node in the during-fault matrix, if the fault
/// lies strictly inside the branch.
[[nodiscard]] std::optional<Index> fault_node(const PowerSystemCase& c, const FaultEvent& fault);

/// Bus admittance matrix of the given stage, without dynamic-device shunts.
[[nodiscard]] ComplexMatrix build_admittance(const PowerSystemCase& c, const NetworkStage& stage);

/// Y + diag(shunts). The input is left untouched.
[[nodiscard]] ComplexMatrix augment_admittance(const ComplexMatrix& y, std::span<const NortonShunt> shunts);

/// Connected components of the in-service branch graph, as sorted bus-id sets
/// ordered by their smallest member.
[[nodiscard]] std::vector<std::vector<int>> find_islands(const PowerSystemCase& c,
                                                         const NetworkStage& stage = NetworkStage::pre_fault());

struct TopologySnapshots {
    ComplexMatrix pre_fault;     // Y0
    ComplexMatrix during_fault;  // Y1
    ComplexMatrix post_fault;    // Y2
};

[[nodiscard]] TopologySnapshots export_topology_snapshots(const PowerSystemCase& c,
                                                          std::span<const NortonShunt> shunts,
                                                          const FaultEvent& fault);

/// Coordinate-triplet form: (row, col, re, im) per stored entry, row-major
/// sorted. CSV carries a header line; JSON is an array of records.
void write_triplets_csv(const ComplexMatrix& m, std::ostream& out);
[[nodiscard]] nlohmann::json triplets_to_json(const ComplexMatrix& m);

[[nodiscard]] Ordering ordering_from_string(std::string_view name);

}  // namespace transim
