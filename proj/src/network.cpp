#include "transim/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

namespace transim {

namespace {

void stamp_pi(std::vector<Triplet<Complex>>& t, Index f, Index to, Complex z, double charging, double tap,
              double shift_deg) {
    const Complex ys = 1.0 / z;
    const Complex half_b{0.0, charging / 2.0};
    const double ratio = tap == 0.0 ? 1.0 : tap;
    const Complex a = std::polar(ratio, shift_deg * kPi / 180.0);
    t.push_back({f, f, (ys + half_b) / (ratio * ratio)});
    t.push_back({to, to, ys + half_b});
    t.push_back({f, to, -ys / std::conj(a)});
    t.push_back({to, f, -ys / a});
}

void stamp_branch(std::vector<Triplet<Complex>>& t, const PowerSystemCase& c, const Branch& br) {
    const Complex z{br.r, br.x};
    if (std::abs(z) <= 0.0) {
        throw Error(ErrorCode::ZeroImpedanceBranch,
                    "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + " has zero impedance");
    }
    stamp_pi(t, c.bus_index(br.from), c.bus_index(br.to), z, br.b, br.tap, br.shift_deg);
}

bool interior(double location) { return location > 0.0 && location < 1.0; }

}  // namespace

void check_fault(const PowerSystemCase& c, const FaultEvent& fault) {
    if (fault.branch < 0 || fault.branch >= static_cast<Index>(c.branches.size())) {
        throw Error(ErrorCode::InvalidArgument, "fault references unknown branch " + std::to_string(fault.branch));
    }
    if (!c.branches[fault.branch].in_service) {
        throw Error(ErrorCode::InvalidArgument,
                    "fault references out-of-service branch " + std::to_string(fault.branch));
    }
    if (!(fault.location >= 0.0 && fault.location <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "fault location must lie in [0, 1]");
    }
    if (!(fault.t_clear >= fault.t_fault) || fault.t_fault < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "fault times must satisfy 0 <= t_fault <= t_clear");
    }
}

std::optional<Index> fault_node(const PowerSystemCase& c, const FaultEvent& fault) {
    if (interior(fault.location)) {
        return c.bus_count();
    }
    return std::nullopt;
}

ComplexMatrix build_admittance(const PowerSystemCase& c, const NetworkStage& stage) {
    const Index n = c.bus_count();
    if (n <= 0) {
        throw Error(ErrorCode::InvalidCase, "case has no buses");
    }
    std::optional<Index> skip;
    if (stage.kind != StageKind::PreFault) {
        if (!stage.fault) {
            throw Error(ErrorCode::InvalidArgument, "fault stage requires a fault descriptor");
        }
        check_fault(c, *stage.fault);
        const bool removes = stage.kind == StageKind::PostFault ? stage.fault->trip_branch
                                                                : interior(stage.fault->location);
        if (removes) {
            skip = stage.fault->branch;
        }
    }

    std::vector<Triplet<Complex>> t;
    t.reserve(c.branches.size() * 4 + static_cast<std::size_t>(n) + 8);
    for (const auto& b : c.buses) {
        if (b.gs != 0.0 || b.bs != 0.0) {
            const Index i = c.bus_index(b.id);
            t.push_back({i, i, Complex{b.gs, b.bs}});
        }
    }
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& br = c.branches[k];
        if (!br.in_service || (skip && static_cast<Index>(k) == *skip)) {
            continue;
        }
        stamp_branch(t, c, br);
    }

    Index dimension = n;
    if (stage.kind == StageKind::DuringFault) {
        const auto& f = *stage.fault;
        const auto& br = c.branches[f.branch];
        const Index from = c.bus_index(br.from);
        const Index to = c.bus_index(br.to);
        if (interior(f.location)) {
            const Index mid = n;
            dimension = n + 1;
            const Complex z{br.r, br.x};
            stamp_pi(t, from, mid, f.location * z, f.location * br.b, br.tap, br.shift_deg);
            stamp_pi(t, mid, to, (1.0 - f.location) * z, (1.0 - f.location) * br.b, 1.0, 0.0);
            t.push_back({mid, mid, Complex{kFaultShuntAdmittance, 0.0}});
        } else {
            const Index at = f.location == 0.0 ? from : to;
            t.push_back({at, at, Complex{kFaultShuntAdmittance, 0.0}});
        }
    }
    return ComplexMatrix::from_triplets(dimension, t);
}

ComplexMatrix augment_admittance(const ComplexMatrix& y, std::span<const NortonShunt> shunts) {
    if (shunts.empty()) {
        return y;
    }
    auto t = y.triplets();
    for (const auto& s : shunts) {
        if (s.bus < 0 || s.bus >= y.dimension()) {
            throw Error(ErrorCode::UnknownBus, "Norton shunt targets node " + std::to_string(s.bus) +
                                                   " outside dimension " + std::to_string(y.dimension()));
        }
        t.push_back({s.bus, s.bus, s.admittance});
    }
    return ComplexMatrix::from_triplets(y.dimension(), t);
}

std::vector<std::vector<int>> find_islands(const PowerSystemCase& c, const NetworkStage& stage) {
    const Index n = c.bus_count();
    std::vector<Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto root = [&](Index i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    std::optional<Index> tripped;
    if (stage.kind == StageKind::PostFault && stage.fault && stage.fault->trip_branch) {
        tripped = stage.fault->branch;
    }
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& br = c.branches[k];
        if (!br.in_service || (tripped && static_cast<Index>(k) == *tripped)) {
            continue;
        }
        const auto a = c.find_bus(br.from);
        const auto b = c.find_bus(br.to);
        if (!a || !b) {
            continue;
        }
        const Index ra = root(*a);
        const Index rb = root(*b);
        if (ra != rb) {
            parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        groups[root(i)].push_back(c.buses[i].id);
    }
    std::vector<std::vector<int>> islands;
    for (auto& g : groups) {
        if (!g.empty()) {
            std::sort(g.begin(), g.end());
            islands.push_back(std::move(g));
        }
    }
    std::sort(islands.begin(), islands.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return islands;
}

TopologySnapshots export_topology_snapshots(const PowerSystemCase& c, std::span<const NortonShunt> shunts,
                                            const FaultEvent& fault) {
    check_fault(c, fault);
    return {augment_admittance(build_admittance(c, NetworkStage::pre_fault()), shunts),
            augment_admittance(build_admittance(c, NetworkStage::during(fault)), shunts),
            augment_admittance(build_admittance(c, NetworkStage::post(fault)), shunts)};
}

void write_triplets_csv(const ComplexMatrix& m, std::ostream& out) {
    out << "row,col,re,im\n";
    for (const auto& t : m.triplets()) {
        out << fmt::format("{},{},{:.17g},{:.17g}\n", t.row, t.col, t.value.real(), t.value.imag());
    }
}

nlohmann::json triplets_to_json(const ComplexMatrix& m) {
    auto arr = nlohmann::json::array();
    for (const auto& t : m.triplets()) {
        arr.push_back({{"row", t.row}, {"col", t.col}, {"re", t.value.real()}, {"im", t.value.imag()}});
    }
    return arr;
}

Ordering ordering_from_string(std::string_view name) {
    if (name == "natural") {
        return Ordering::Natural;
    }
    return Ordering::MinimumDegree;
}

}  // namespace transim
