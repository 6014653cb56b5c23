#include "transim/powerflow.hpp"

#include "transim/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace transim {

std::string_view to_string(SwitchDirection d) noexcept {
    switch (d) {
        case SwitchDirection::ToPqAtUpper: return "to_pq_upper";
        case SwitchDirection::ToPqAtLower: return "to_pq_lower";
        case SwitchDirection::BackToPv: return "back_to_pv";
    }
    return "";
}

std::vector<Complex> PowerFlowSolution::voltages() const {
    std::vector<Complex> v(vm.size());
    for (std::size_t i = 0; i < vm.size(); ++i) {
        v[i] = std::polar(vm[i], va[i]);
    }
    return v;
}

std::vector<Complex> bus_loads(const PowerSystemCase& c) {
    std::vector<Complex> s(c.buses.size());
    for (const auto& l : c.loads) {
        s[c.bus_index(l.bus)] += Complex{l.p, l.q};
    }
    return s;
}

namespace {

std::vector<Complex> injections(const ComplexMatrix& y, std::span<const Complex> v) {
    const auto current = y.multiply(v);
    std::vector<Complex> s(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        s[i] = v[i] * std::conj(current[i]);
    }
    return s;
}

void check_voltage_length(const PowerSystemCase& c, std::span<const Complex> v) {
    if (static_cast<Index>(v.size()) != c.bus_count()) {
        throw Error(ErrorCode::DimensionMismatch, "voltage vector has " + std::to_string(v.size()) +
                                                      " entries for " + std::to_string(c.bus_count()) + " buses");
    }
}

// Equation layout shared by the mismatch and the Jacobian.
struct EquationSet {
    std::vector<Index> angle_col;      // per bus, -1 for slack
    std::vector<Index> magnitude_col;  // per bus, -1 unless PQ
    Index size = 0;

    explicit EquationSet(std::span<const BusType> types) {
        const auto n = static_cast<Index>(types.size());
        angle_col.assign(types.size(), -1);
        magnitude_col.assign(types.size(), -1);
        for (Index i = 0; i < n; ++i) {
            if (types[i] != BusType::Slack) {
                angle_col[i] = size++;
            }
        }
        for (Index i = 0; i < n; ++i) {
            if (types[i] == BusType::PQ) {
                magnitude_col[i] = size++;
            }
        }
    }
};

std::vector<double> mismatch_vector(const EquationSet& eq, std::span<const Complex> scheduled,
                                    std::span<const Complex> computed) {
    std::vector<double> m(static_cast<std::size_t>(eq.size));
    for (std::size_t i = 0; i < scheduled.size(); ++i) {
        if (eq.angle_col[i] >= 0) {
            m[eq.angle_col[i]] = scheduled[i].real() - computed[i].real();
        }
        if (eq.magnitude_col[i] >= 0) {
            m[eq.magnitude_col[i]] = scheduled[i].imag() - computed[i].imag();
        }
    }
    return m;
}

RealMatrix jacobian(const ComplexMatrix& y, const EquationSet& eq, std::span<const Complex> v) {
    const auto s = injections(y, v);
    std::vector<Triplet<Real>> t;
    t.reserve(y.nnz() * 4);
    const auto row_ptr = y.row_ptr();
    const auto col_idx = y.col_idx();
    const auto vals = y.values();
    const auto n = static_cast<Index>(v.size());
    for (Index i = 0; i < n; ++i) {
        const Index rp = eq.angle_col[i];
        const Index rq = eq.magnitude_col[i];
        if (rp < 0 && rq < 0) {
            continue;
        }
        const double vi = std::abs(v[i]);
        const double ti = std::arg(v[i]);
        for (Index p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            const Index j = col_idx[p];
            const double g = vals[p].real();
            const double b = vals[p].imag();
            const Index ca = eq.angle_col[j];
            const Index cm = eq.magnitude_col[j];
            double dp_dt = 0.0;
            double dp_dv = 0.0;
            double dq_dt = 0.0;
            double dq_dv = 0.0;
            if (j == i) {
                const double pi = s[i].real();
                const double qi = s[i].imag();
                dp_dt = -qi - b * vi * vi;
                dp_dv = pi / vi + g * vi;
                dq_dt = pi - g * vi * vi;
                dq_dv = qi / vi - b * vi;
            } else {
                const double vj = std::abs(v[j]);
                const double tij = ti - std::arg(v[j]);
                const double c = std::cos(tij);
                const double sn = std::sin(tij);
                dp_dt = vi * vj * (g * sn - b * c);
                dp_dv = vi * (g * c + b * sn);
                dq_dt = -vi * vj * (g * c + b * sn);
                dq_dv = vi * (g * sn - b * c);
            }
            if (rp >= 0 && ca >= 0) t.push_back({rp, ca, dp_dt});
            if (rp >= 0 && cm >= 0) t.push_back({rp, cm, dp_dv});
            if (rq >= 0 && ca >= 0) t.push_back({rq, ca, dq_dt});
            if (rq >= 0 && cm >= 0) t.push_back({rq, cm, dq_dv});
        }
    }
    return RealMatrix::from_triplets(eq.size, t);
}

std::vector<BusType> declared_types(const PowerSystemCase& c) {
    std::vector<BusType> types(c.buses.size());
    std::transform(c.buses.begin(), c.buses.end(), types.begin(), [](const Bus& b) { return b.type; });
    return types;
}

// Scheduled injections with generators at their P setpoints; Q entries hold the
// negated load (generator Q is free at PV and slack buses).
std::vector<Complex> scheduled_injections(const PowerSystemCase& c) {
    std::vector<Complex> s = bus_loads(c);
    for (auto& x : s) {
        x = -x;
    }
    for (const auto& g : c.generators) {
        if (!g.slack) {
            s[c.bus_index(g.bus)] += Complex{g.p, 0.0};
        }
    }
    return s;
}

struct BusReactiveLimits {
    double q_min = 0.0;
    double q_max = 0.0;
    double v_set = 1.0;
    bool has_gen = false;
};

std::vector<BusReactiveLimits> reactive_limits(const PowerSystemCase& c) {
    std::vector<BusReactiveLimits> lim(c.buses.size());
    for (const auto& g : c.generators) {
        auto& l = lim[c.bus_index(g.bus)];
        if (!l.has_gen) {
            l.v_set = g.v;
            l.has_gen = true;
        }
        l.q_min += g.q_min;
        l.q_max += g.q_max;
    }
    return lim;
}

void check_islands(const PowerSystemCase& c) {
    const auto errors = validation_errors(c);
    if (!errors.empty()) {
        throw Error(ErrorCode::InvalidCase, errors.front());
    }
    for (const auto& island : find_islands(c)) {
        int slack_count = 0;
        for (const int id : island) {
            if (c.buses[c.bus_index(id)].type == BusType::Slack) {
                ++slack_count;
            }
        }
        if (slack_count != 1) {
            throw Error(ErrorCode::InvalidCase, "island containing bus " + std::to_string(island.front()) + " has " +
                                                    std::to_string(slack_count) + " slack buses (need exactly 1)");
        }
    }
}

}  // namespace

std::vector<Complex> bus_injections(const PowerSystemCase& c, std::span<const Complex> v) {
    check_voltage_length(c, v);
    return injections(build_admittance(c, NetworkStage::pre_fault()), v);
}

std::vector<double> compute_mismatch(const PowerSystemCase& c, std::span<const Complex> v) {
    check_voltage_length(c, v);
    const auto y = build_admittance(c, NetworkStage::pre_fault());
    const auto types = declared_types(c);
    return mismatch_vector(EquationSet(types), scheduled_injections(c), injections(y, v));
}

RealMatrix assemble_jacobian(const PowerSystemCase& c, std::span<const Complex> v) {
    check_voltage_length(c, v);
    const auto y = build_admittance(c, NetworkStage::pre_fault());
    const auto types = declared_types(c);
    return jacobian(y, EquationSet(types), v);
}

PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const PfOptions& options) {
    check_islands(c);
    const Index n = c.bus_count();
    const auto y = build_admittance(c, NetworkStage::pre_fault());
    const auto limits = reactive_limits(c);
    const auto declared = declared_types(c);
    auto types = declared;
    auto scheduled = scheduled_injections(c);
    const auto load = bus_loads(c);

    std::vector<Complex> v(static_cast<std::size_t>(n), Complex{1.0, 0.0});
    if (options.warm_start) {
        if (static_cast<Index>(options.warm_start->size()) != n) {
            throw Error(ErrorCode::DimensionMismatch, "warm start length does not match bus count");
        }
        v = *options.warm_start;
    }
    for (Index i = 0; i < n; ++i) {
        if (types[i] != BusType::PQ && limits[i].has_gen) {
            v[i] = std::polar(limits[i].v_set, std::arg(v[i]));
        }
    }

    PowerFlowSolution sol;
    // +1 at the upper Q limit, -1 at the lower, 0 otherwise
    std::vector<int> clamped(static_cast<std::size_t>(n), 0);
    for (int it = 1; it <= options.max_iterations; ++it) {
        const auto s = injections(y, v);
        bool switched = false;
        if (options.enforce_q_limits && it >= options.switch_start_iteration) {
            std::vector<char> barred(static_cast<std::size_t>(n), 0);
            for (Index i = 0; i < n; ++i) {
                if (clamped[i] == 0) {
                    continue;
                }
                const double vm = std::abs(v[i]);
                if ((clamped[i] > 0 && vm > limits[i].v_set) || (clamped[i] < 0 && vm < limits[i].v_set)) {
                    clamped[i] = 0;
                    types[i] = BusType::PV;
                    v[i] = std::polar(limits[i].v_set, std::arg(v[i]));
                    barred[i] = 1;
                    switched = true;
                    sol.switches.push_back({c.buses[i].id, it, SwitchDirection::BackToPv});
                }
            }
            for (Index i = 0; i < n; ++i) {
                if (declared[i] != BusType::PV || types[i] != BusType::PV || barred[i]) {
                    continue;
                }
                const double qg = s[i].imag() + load[i].imag();
                if (qg > limits[i].q_max) {
                    clamped[i] = 1;
                    scheduled[i].imag(limits[i].q_max - load[i].imag());
                    sol.switches.push_back({c.buses[i].id, it, SwitchDirection::ToPqAtUpper});
                } else if (qg < limits[i].q_min) {
                    clamped[i] = -1;
                    scheduled[i].imag(limits[i].q_min - load[i].imag());
                    sol.switches.push_back({c.buses[i].id, it, SwitchDirection::ToPqAtLower});
                } else {
                    continue;
                }
                types[i] = BusType::PQ;
                switched = true;
            }
        }

        const EquationSet eq(types);
        const auto s_now = switched ? injections(y, v) : s;
        const auto mis = mismatch_vector(eq, scheduled, s_now);
        double worst = 0.0;
        for (const double m : mis) {
            worst = std::max(worst, std::abs(m));
        }
        if (!std::isfinite(worst)) {
            worst = std::numeric_limits<double>::infinity();
        }
        sol.iterations = it;
        sol.max_mismatch = worst;
        if (worst <= options.tolerance && !switched) {
            sol.converged = true;
            break;
        }
        if (it == options.max_iterations || !std::isfinite(worst) || worst > 1e10) {
            break;
        }

        std::vector<double> dx;
        try {
            dx = order_and_factorize(jacobian(y, eq, v), options.ordering).solve(mis);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::SingularMatrix) {
                break;
            }
            throw;
        }
        for (Index i = 0; i < n; ++i) {
            double angle = std::arg(v[i]);
            double mag = std::abs(v[i]);
            if (eq.angle_col[i] >= 0) angle += dx[eq.angle_col[i]];
            if (eq.magnitude_col[i] >= 0) mag += dx[eq.magnitude_col[i]];
            v[i] = std::polar(mag, angle);
        }
    }

    sol.final_types = types;
    sol.vm.resize(static_cast<std::size_t>(n));
    sol.va.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        sol.vm[i] = std::abs(v[i]);
        sol.va[i] = std::arg(v[i]);
    }

    // generator outputs from the final injections
    const auto s = injections(y, v);
    sol.gen_p.assign(c.generators.size(), 0.0);
    sol.gen_q.assign(c.generators.size(), 0.0);
    std::vector<std::vector<std::size_t>> at_bus(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < c.generators.size(); ++k) {
        at_bus[c.bus_index(c.generators[k].bus)].push_back(k);
    }
    for (Index i = 0; i < n; ++i) {
        const auto& gens = at_bus[i];
        if (gens.empty()) {
            continue;
        }
        const Complex sg = s[i] + load[i];
        double fixed_p = 0.0;
        std::size_t slack_units = 0;
        for (const auto k : gens) {
            if (c.generators[k].slack) {
                ++slack_units;
            } else {
                sol.gen_p[k] = c.generators[k].p;
                fixed_p += c.generators[k].p;
            }
        }
        for (const auto k : gens) {
            if (c.generators[k].slack) {
                sol.gen_p[k] = (sg.real() - fixed_p) / static_cast<double>(slack_units);
            }
        }
        const double range = limits[i].q_max - limits[i].q_min;
        for (const auto k : gens) {
            const auto& g = c.generators[k];
            if (std::isfinite(range) && range > 0.0) {
                sol.gen_q[k] = g.q_min + (sg.imag() - limits[i].q_min) * (g.q_max - g.q_min) / range;
            } else {
                sol.gen_q[k] = sg.imag() / static_cast<double>(gens.size());
            }
        }
    }
    return sol;
}

}  // namespace transim
