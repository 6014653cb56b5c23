#include "transim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace transim {

std::string_view to_string(StabilityLabel l) noexcept {
    return l == StabilityLabel::Stable ? "stable" : "unstable";
}

std::int64_t SimulationConfig::step_count() const {
    return static_cast<std::int64_t>(std::floor(horizon / step + 1e-9));
}

void SimulationConfig::validate() const {
    if (!(step > 0.0) || !(step <= horizon)) {
        throw Error(ErrorCode::InvalidArgument, "simulation requires 0 < step <= horizon");
    }
    if (!(inner_tolerance > 0.0) || inner_max_iterations < 1) {
        throw Error(ErrorCode::InvalidArgument, "inner-loop tolerance and iteration cap must be positive");
    }
    if (!(frequency_hz > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "frequency must be positive");
    }
}

SimulationConfig SimulationConfig::from_case(const PowerSystemCase& c) {
    SimulationConfig cfg;
    cfg.step = c.config.step;
    cfg.horizon = c.config.horizon;
    cfg.frequency_hz = c.config.frequency_hz;
    cfg.ordering = ordering_from_string(c.config.ordering);
    return cfg;
}

Complex terminal_current(const MachineState& x, double xd_prime, Complex v_terminal) {
    return (std::polar(x.e_prime, x.delta) - v_terminal) / Complex{0.0, xd_prime};
}

double ClassicMachine::electrical_power(const MachineState& x, Complex v_terminal) const {
    const Complex e = std::polar(x.e_prime, x.delta);
    return (e * std::conj(terminal_current(x, xd_, v_terminal))).real();
}

MachineDerivative ClassicMachine::derivative(const MachineState& x, Complex v_terminal) const {
    const double slip = x.omega - 1.0;
    return {omega_sync_ * slip, (p_mech_ - electrical_power(x, v_terminal) - d_ * slip) / (2.0 * h_), 0.0};
}

Complex ClassicMachine::injection(const MachineState& x) const {
    return std::polar(x.e_prime, x.delta) / Complex{0.0, xd_};
}

void DeviceSet::injections(const DynamicState& s, std::span<Complex> out) const {
    std::fill(out.begin(), out.end(), Complex{});
    for (std::size_t g = 0; g < models.size(); ++g) {
        out[gen_bus[g]] += models[g]->injection(s.machine(g));
    }
}

namespace {

std::vector<NortonShunt> load_shunts(const PowerSystemCase& c, const std::vector<Complex>& v) {
    std::vector<NortonShunt> shunts;
    for (const auto& l : c.loads) {
        const Index i = c.bus_index(l.bus);
        const double vm2 = std::norm(v[i]);
        shunts.push_back({i, std::conj(Complex{l.p, l.q}) / vm2});
    }
    return shunts;
}

}  // namespace

std::vector<NortonShunt> norton_shunts(const PowerSystemCase& c, const PowerFlowSolution& pf,
                                       const std::vector<std::shared_ptr<const DeviceModel>>& models) {
    std::vector<NortonShunt> shunts;
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        shunts.push_back({c.bus_index(c.generators[g].bus), models[g]->norton_admittance()});
    }
    const auto loads = load_shunts(c, pf.voltages());
    shunts.insert(shunts.end(), loads.begin(), loads.end());
    return shunts;
}

DynamicState init_dynamic_state(const PowerSystemCase& c, const PowerFlowSolution& pf) {
    if (!pf.converged) {
        throw Error(ErrorCode::NotConverged, "dynamic initialization requires a converged power flow");
    }
    if (pf.vm.size() != c.buses.size() || pf.gen_p.size() != c.generators.size()) {
        throw Error(ErrorCode::DimensionMismatch, "power-flow solution does not match the case");
    }
    const auto v = pf.voltages();
    const std::size_t ng = c.generators.size();
    DynamicState s;
    s.delta.resize(ng);
    s.omega.assign(ng, 1.0);
    s.e_prime.resize(ng);
    std::vector<NortonShunt> shunts;
    DeviceSet devices;
    devices.bus_count = c.bus_count();
    for (std::size_t g = 0; g < ng; ++g) {
        const auto& gen = c.generators[g];
        const Index bus = c.bus_index(gen.bus);
        const Complex vt = v[bus];
        const Complex current = std::conj(Complex{pf.gen_p[g], pf.gen_q[g]} / vt);
        const Complex e = vt + Complex{0.0, gen.xd_prime} * current;
        s.delta[g] = std::arg(e);
        s.e_prime[g] = std::abs(e);
        auto model = std::make_shared<ClassicMachine>(gen.h, gen.d, gen.xd_prime, 0.0, 1.0);
        shunts.push_back({bus, model->norton_admittance()});
        devices.gen_bus.push_back(bus);
        devices.models.push_back(std::move(model));
    }
    const auto loads = load_shunts(c, v);
    shunts.insert(shunts.end(), loads.begin(), loads.end());
    const auto y = augment_admittance(build_admittance(c, NetworkStage::pre_fault()), shunts);
    const auto lu = order_and_factorize(y, ordering_from_string(c.config.ordering));
    s.v = solve_network(devices, lu, s);
    return s;
}

std::vector<std::shared_ptr<const DeviceModel>> classic_models(const PowerSystemCase& c, const DynamicState& initial,
                                                               double omega_sync) {
    std::vector<std::shared_ptr<const DeviceModel>> models;
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        const auto& gen = c.generators[g];
        const ClassicMachine probe(gen.h, gen.d, gen.xd_prime, 0.0, omega_sync);
        const double pm = probe.electrical_power(initial.machine(g), initial.v[c.bus_index(gen.bus)]);
        models.push_back(std::make_shared<ClassicMachine>(gen.h, gen.d, gen.xd_prime, pm, omega_sync));
    }
    return models;
}

std::vector<Complex> solve_network(const DeviceSet& devices, const ComplexLu& factors, const DynamicState& s,
                                   std::vector<Complex>* full) {
    std::vector<Complex> rhs(static_cast<std::size_t>(factors.dimension()));
    devices.injections(s, rhs);
    auto x = factors.solve(rhs);
    std::vector<Complex> v(x.begin(), x.begin() + devices.bus_count);
    if (full) {
        *full = std::move(x);
    }
    return v;
}

StepOutcome step(const DeviceSet& devices, const ComplexLu& factors, const DynamicState& state,
                 const SimulationConfig& config) {
    const std::size_t ng = devices.models.size();
    const double h = config.step;

    DynamicState start = state;
    start.v = solve_network(devices, factors, start);
    std::vector<MachineDerivative> f0(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        f0[g] = devices.models[g]->derivative(start.machine(g), start.v[devices.gen_bus[g]]);
    }

    DynamicState iterate = start;
    iterate.k = state.k + 1;
    iterate.t = static_cast<double>(iterate.k) * h;
    std::vector<Complex> rhs(static_cast<std::size_t>(factors.dimension()));
    std::vector<Complex> full(rhs.size());
    std::vector<Complex> work;
    double dv = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= config.inner_max_iterations; ++it) {
        DynamicState next = iterate;
        for (std::size_t g = 0; g < ng; ++g) {
            const auto f1 = devices.models[g]->derivative(iterate.machine(g), iterate.v[devices.gen_bus[g]]);
            const auto x0 = start.machine(g);
            next.set_machine(g, {x0.delta + 0.5 * h * (f0[g].d_delta + f1.d_delta),
                                 x0.omega + 0.5 * h * (f0[g].d_omega + f1.d_omega),
                                 x0.e_prime + 0.5 * h * (f0[g].d_e_prime + f1.d_e_prime)});
        }
        devices.injections(next, rhs);
        factors.solve_into(rhs, full, work);
        dv = 0.0;
        for (Index i = 0; i < devices.bus_count; ++i) {
            dv = std::max(dv, std::abs(full[i] - iterate.v[i]));
            next.v[i] = full[i];
        }
        iterate = std::move(next);
        if (!std::isfinite(dv)) {
            break;
        }
        if (dv <= config.inner_tolerance) {
            return {std::move(iterate), it};
        }
    }
    throw InnerLoopDivergedError("inner loop did not converge at t=" + std::to_string(iterate.t) +
                                     " (last |dV|=" + std::to_string(dv) + ")",
                                 std::move(iterate));
}

StabilityVerdict label_stability(const SimulationResult& result, double threshold_deg) {
    double worst = 0.0;
    for (const auto& s : result.states) {
        if (s.delta.empty()) {
            continue;
        }
        const auto [lo, hi] = std::minmax_element(s.delta.begin(), s.delta.end());
        worst = std::max(worst, (*hi - *lo) * 180.0 / kPi);
    }
    return {worst > threshold_deg ? StabilityLabel::Unstable : StabilityLabel::Stable, worst};
}

std::vector<std::string> SimulationResult::columns() {
    return {"rotor_angles", "speeds", "e_prime", "active_power", "reactive_power", "bus_voltages", "regulator_outputs"};
}

std::vector<std::vector<double>> SimulationResult::extract(std::string_view column) const {
    std::vector<std::vector<double>> out;
    out.reserve(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto& s = states[k];
        if (column == "rotor_angles") {
            out.push_back(s.delta);
        } else if (column == "speeds") {
            out.push_back(s.omega);
        } else if (column == "e_prime") {
            out.push_back(s.e_prime);
        } else if (column == "active_power") {
            out.push_back(p_e[k]);
        } else if (column == "reactive_power") {
            out.push_back(q_e[k]);
        } else if (column == "bus_voltages") {
            std::vector<double> vm(s.v.size());
            std::transform(s.v.begin(), s.v.end(), vm.begin(), [](Complex x) { return std::abs(x); });
            out.push_back(std::move(vm));
        } else if (column == "regulator_outputs") {
            out.emplace_back();  // no regulators in the classic model
        } else {
            throw Error(ErrorCode::UnknownField, "unknown result column '" + std::string(column) + "'");
        }
    }
    return out;
}

Simulator::Simulator(PowerSystemCase c, const PowerFlowSolution& pf, std::optional<FaultEvent> fault,
                     SimulationConfig config, std::vector<std::pair<Index, std::shared_ptr<const DeviceModel>>> overrides)
    : case_(std::move(c)), fault_(fault), config_(config) {
    config_.validate();
    if (fault_) {
        check_fault(case_, *fault_);
        if (fault_->t_clear > config_.horizon + 1e-9 * config_.step) {
            throw Error(ErrorCode::InvalidArgument, "fault clearing time lies beyond the horizon");
        }
        auto first_grid_step = [&](double t) {
            return static_cast<std::int64_t>(std::ceil(t / config_.step - 1e-9));
        };
        fault_step_ = first_grid_step(fault_->t_fault);
        clear_step_ = first_grid_step(fault_->t_clear);
    }
    DynamicState initial = init_dynamic_state(case_, pf);
    devices_.bus_count = case_.bus_count();
    for (const auto& g : case_.generators) {
        devices_.gen_bus.push_back(case_.bus_index(g.bus));
    }
    devices_.models = classic_models(case_, initial, config_.synchronous_speed());
    for (auto& [g, model] : overrides) {
        if (g < 0 || g >= static_cast<Index>(devices_.models.size()) || !model) {
            throw Error(ErrorCode::InvalidArgument, "device override targets unknown generator " + std::to_string(g));
        }
        devices_.models[g] = std::move(model);
    }
    shunts_ = norton_shunts(case_, pf, devices_.models);
    record(std::move(initial), 0);
}

StageKind Simulator::stage_at(std::int64_t k) const {
    if (!fault_ || k < fault_step_) {
        return StageKind::PreFault;
    }
    return k < clear_step_ ? StageKind::DuringFault : StageKind::PostFault;
}

ComplexMatrix Simulator::augmented_matrix(StageKind stage) const {
    NetworkStage s{stage, fault_};
    if (stage != StageKind::PreFault && !fault_) {
        throw Error(ErrorCode::NotYetComputed, "no fault is defined for this simulation");
    }
    return augment_admittance(build_admittance(case_, s), shunts_);
}

const ComplexLu& Simulator::factors(StageKind stage) {
    auto& slot = stage_factors_[static_cast<int>(stage)];
    if (!slot) {
        slot = order_and_factorize(augmented_matrix(stage), config_.ordering);
        ++factorizations_;
    }
    return *slot;
}

void Simulator::record(DynamicState s, int iterations) {
    const std::size_t ng = devices_.models.size();
    std::vector<double> p(ng);
    std::vector<double> q(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        const auto& model = *devices_.models[g];
        const Complex vt = s.v[devices_.gen_bus[g]];
        const Complex current = model.injection(s.machine(g)) - model.norton_admittance() * vt;
        const Complex sg = vt * std::conj(current);
        p[g] = sg.real();
        q[g] = sg.imag();
    }
    result_.time.push_back(s.t);
    result_.p_e.push_back(std::move(p));
    result_.q_e.push_back(std::move(q));
    result_.inner_iterations.push_back(iterations);
    result_.states.push_back(std::move(s));
}

bool Simulator::advance() {
    const auto& now = current();
    if (now.k >= config_.step_count()) {
        return false;
    }
    const auto& lu = factors(stage_at(now.k));
    auto outcome = step(devices_, lu, now, config_);
    record(std::move(outcome.state), outcome.iterations);
    return true;
}

const SimulationResult& Simulator::run() {
    while (advance()) {
    }
    const auto verdict = label_stability(result_, config_.instability_threshold_deg);
    result_.label = verdict.label;
    result_.max_separation_deg = verdict.max_separation_deg;
    return result_;
}

const DynamicState& Simulator::get_state(std::int64_t k) const {
    const std::int64_t offset = k - first_step_;
    if (offset < 0 || offset >= static_cast<std::int64_t>(result_.states.size())) {
        throw Error(ErrorCode::OutOfRange, "step " + std::to_string(k) + " is outside the recorded range [" +
                                               std::to_string(first_step_) + ", " +
                                               std::to_string(first_step_ + static_cast<std::int64_t>(result_.states.size()) - 1) +
                                               "]");
    }
    return result_.states[static_cast<std::size_t>(offset)];
}

void Simulator::set_state(std::int64_t k, DynamicState state) {
    const std::size_t ng = devices_.models.size();
    if (k < 0 || state.delta.size() != ng || state.omega.size() != ng || state.e_prime.size() != ng ||
        static_cast<Index>(state.v.size()) != devices_.bus_count) {
        throw Error(ErrorCode::DimensionMismatch, "state does not match the simulated system");
    }
    const std::int64_t offset = k - first_step_;
    const auto recorded = static_cast<std::int64_t>(result_.states.size());
    auto truncate = [](auto& v, std::size_t n) { v.resize(std::min(v.size(), n)); };
    std::size_t keep = 0;
    if (offset >= 0 && offset <= recorded) {
        keep = static_cast<std::size_t>(offset);
    } else {
        first_step_ = k;
    }
    truncate(result_.states, keep);
    truncate(result_.time, keep);
    truncate(result_.p_e, keep);
    truncate(result_.q_e, keep);
    truncate(result_.inner_iterations, keep);
    state.k = k;
    state.t = static_cast<double>(k) * config_.step;
    record(std::move(state), 0);
}

SimulationResult simulate(const PowerSystemCase& c, const PowerFlowSolution& pf, const std::optional<FaultEvent>& fault,
                          const SimulationConfig& config) {
    Simulator sim(c, pf, fault, config);
    return sim.run();
}

}  // namespace transim
