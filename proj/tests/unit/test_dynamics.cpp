#include "doctest.h"
#include "support.hpp"

using namespace testing;

namespace {

SimulationConfig config(double step, double horizon) {
    SimulationConfig cfg;
    cfg.step = step;
    cfg.horizon = horizon;
    return cfg;
}

Index branch_of(const PowerSystemCase& c, int from, int to) {
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        if (c.branches[k].from == from && c.branches[k].to == to) return static_cast<Index>(k);
    }
    return -1;
}

/// Largest deviation of the SMIB rotor angle from the RK4 oracle over 1 s,
/// starting 0.05 rad off equilibrium.
double smib_rk4_error(double h) {
    const auto c = smib();
    const auto pf = solve_power_flow(c);
    auto cfg = config(h, 1.0);
    cfg.inner_tolerance = 1e-13;
    cfg.inner_max_iterations = 100;
    Simulator sim(c, pf, std::nullopt, cfg);
    auto s0 = sim.get_state(0);
    const auto reduced = reduce_smib(c, s0);
    s0.delta[0] += 0.05;
    sim.set_state(0, s0);
    const auto& res = sim.run();
    const auto ref = reduced.rk4(s0.delta[0], 1.0, 1e-5, h, 1.0);
    REQUIRE(ref.size() == res.states.size());
    double err = 0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        err = std::max(err, std::abs(res.states[k].delta[0] - ref[k]));
    }
    return err;
}

SimulationResult smib_fault_run(double t_clear, double h) {
    const auto c = smib();
    const auto pf = solve_power_flow(c);
    return simulate(c, pf, FaultEvent{0, 0.0, 0.0, t_clear}, config(h, 3.0));
}

}  // namespace

TEST_CASE("machine initialization closed forms") {
    PowerSystemCase c;
    c.buses = {{1, BusType::Slack, 1.0, 0, 0}};
    Generator g;
    g.bus = 1;
    g.slack = true;
    g.xd_prime = 0.3;
    g.p_min = -10;
    c.generators = {g};
    c.loads = {{1, 0.8, 0.2, 0.8, 0.8, 0.2, 0.2}};
    PowerFlowSolution pf;
    pf.vm = {1.0};
    pf.va = {0.0};
    pf.gen_p = {0.8};
    pf.gen_q = {0.2};
    pf.converged = true;
    pf.final_types = {BusType::Slack};
    auto s = init_dynamic_state(c, pf);
    const Complex e = 1.0 + Complex{0, 0.3} * Complex{0.8, -0.2};
    CHECK(s.e_prime[0] == doctest::Approx(std::abs(e)).epsilon(1e-12));
    CHECK(s.delta[0] == doctest::Approx(std::arg(e)).epsilon(1e-12));
    CHECK(s.e_prime[0] == doctest::Approx(1.0868).epsilon(1e-4));
    CHECK(s.delta[0] == doctest::Approx(0.2226).epsilon(1e-3));
    CHECK(s.omega[0] == 1.0);
    CHECK(std::abs(s.v[0] - 1.0) < 1e-12);

    c.loads.clear();
    pf.gen_p = {0.0};
    pf.gen_q = {0.0};
    s = init_dynamic_state(c, pf);
    CHECK(s.e_prime[0] == doctest::Approx(1.0));
    CHECK(s.delta[0] == 0.0);

    pf.converged = false;
    CHECK_THROWS_AS((void)init_dynamic_state(c, pf), Error);
}

TEST_CASE("classic machine derivative and injection") {
    const double ws = 2 * kPi * 50;
    const ClassicMachine m(3.0, 0.0, 0.2, 0.5, ws);
    CHECK(std::abs(m.injection({0.0, 1.0, 1.0}) - Complex{0, -5}) < 1e-12);
    CHECK(std::abs(m.injection({kPi / 2, 1.0, 1.0}) - Complex{5, 0}) < 1e-12);
    CHECK(std::abs(m.norton_admittance() - Complex{0, -5}) < 1e-12);

    // Pick V so that P_e equals P_m, then spin at 1.01.
    const Complex e = std::polar(1.1, 0.3);
    const double angle = 0.3 - std::asin(0.5 * 0.2 / 1.1);
    const Complex v = std::polar(1.0, angle);
    CHECK(m.electrical_power({0.3, 1.0, 1.1}, v) == doctest::Approx(0.5).epsilon(1e-12));
    const auto d = m.derivative({0.3, 1.01, 1.1}, v);
    CHECK(d.d_delta == doctest::Approx(0.01 * ws).epsilon(1e-12));
    CHECK(std::abs(d.d_omega) < 1e-12);
    CHECK(d.d_e_prime == 0.0);

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 100; ++t) {
        const MachineState x{u(rng), 1.0 + 0.01 * u(rng), 1.0 + 0.2 * u(rng)};
        const Complex vt = std::polar(1.0 + 0.1 * u(rng), u(rng));
        // Power delivered through the reactance, from the bus side.
        const Complex i = (std::polar(x.e_prime, x.delta) - vt) / Complex{0, 0.2};
        const double pe = (std::polar(x.e_prime, x.delta) * std::conj(i)).real();
        CHECK(m.electrical_power(x, vt) == doctest::Approx(pe).epsilon(1e-12));
        CHECK(std::abs(terminal_current(x, 0.2, vt) - i) < 1e-12);
        const auto dx = m.derivative(x, vt);
        CHECK(dx.d_omega == doctest::Approx((0.5 - pe) / 6.0).epsilon(1e-12));
    }
}

TEST_CASE("39-bus initialization is an equilibrium") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    Simulator sim(c, pf, std::nullopt, SimulationConfig::from_case(c));
    const auto& s = sim.get_state(0);
    CHECK(s == init_dynamic_state(c, pf));
    const auto& dev = sim.devices();
    for (std::size_t g = 0; g < dev.models.size(); ++g) {
        const auto d = dev.models[g]->derivative(s.machine(g), s.v[dev.gen_bus[g]]);
        CHECK(std::abs(d.d_delta) <= 1e-8);
        CHECK(std::abs(d.d_omega) <= 1e-8);
        CHECK(std::abs(d.d_e_prime) <= 1e-8);
    }
    const auto next = step(dev, sim.factors(StageKind::PreFault), s, sim.config());
    for (std::size_t g = 0; g < s.delta.size(); ++g) {
        CHECK(std::abs(next.state.delta[g] - s.delta[g]) <= 1e-10);
        CHECK(std::abs(next.state.omega[g] - s.omega[g]) <= 1e-10);
        CHECK(std::abs(next.state.e_prime[g] - s.e_prime[g]) <= 1e-10);
    }
    for (std::size_t b = 0; b < s.v.size(); ++b) CHECK(std::abs(next.state.v[b] - s.v[b]) <= 1e-10);
    CHECK(next.state.t == doctest::Approx(0.01));
    CHECK(next.state.k == 1);
}

TEST_CASE("39-bus no-fault run stays put") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    Simulator sim(c, pf, std::nullopt, config(0.01, 10.0));
    const auto& res = sim.run();
    CHECK(res.steps() == 1001);
    const auto& s0 = res.states.front();
    double drift = 0;
    for (const auto& s : res.states) {
        for (std::size_t g = 0; g < s.delta.size(); ++g) {
            drift = std::max({drift, std::abs(s.delta[g] - s0.delta[g]), std::abs(s.omega[g] - s0.omega[g]),
                              std::abs(s.e_prime[g] - s0.e_prime[g])});
        }
    }
    CHECK(drift < 1e-3);
    CHECK(res.label == StabilityLabel::Stable);
    double spread0 = 0;
    for (const double a : s0.delta)
        for (const double b : s0.delta) spread0 = std::max(spread0, (a - b) * 180 / kPi);
    CHECK(res.max_separation_deg == doctest::Approx(spread0).epsilon(1e-3));
    CHECK(sim.factorization_count() == 1);
    for (std::size_t k = 1; k < res.inner_iterations.size(); ++k) CHECK(res.inner_iterations[k] <= 20);
}

TEST_CASE("Norton equivalence at every accepted step") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    const FaultEvent f{branch_of(c, 16, 17), 0.3, 0.05, 0.15};
    Simulator sim(c, pf, f, config(0.01, 0.5));
    const auto& res = sim.run();
    const auto& dev = sim.devices();
    double worst = 0;
    for (const auto& s : res.states) {
        const auto stage = sim.stage_at(s.k);
        const Eigen::MatrixXcd y = dense(sim.augmented_matrix(stage));
        std::vector<Complex> full;
        const auto v = solve_network(dev, sim.factors(stage), s, &full);
        Eigen::VectorXcd vv(static_cast<Index>(full.size()));
        for (std::size_t i = 0; i < full.size(); ++i) vv(static_cast<Index>(i)) = full[i];
        const Eigen::VectorXcd injected = y * vv;
        for (std::size_t g = 0; g < dev.models.size(); ++g) {
            const Index b = dev.gen_bus[g];
            const auto& model = *dev.models[g];
            const Complex network_side = injected(b) - model.norton_admittance() * vv(b);
            // Generator buses carry no load in this case, so all of it is the machine's.
            const Complex thevenin = terminal_current(s.machine(g), c.generators[g].xd_prime, v[b]);
            worst = std::max(worst, std::abs(network_side - thevenin));
        }
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("stage boundaries and refactorization") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    const FaultEvent f{branch_of(c, 16, 17), 0.5, 0.1, 0.25};
    Simulator sim(c, pf, f, config(0.01, 1.0));
    CHECK(sim.stage_at(9) == StageKind::PreFault);
    CHECK(sim.stage_at(10) == StageKind::DuringFault);
    CHECK(sim.stage_at(24) == StageKind::DuringFault);
    CHECK(sim.stage_at(25) == StageKind::PostFault);
    sim.run();
    CHECK(sim.factorization_count() == 3);
    CHECK(sim.augmented_matrix(StageKind::DuringFault).dimension() == 40);
}

TEST_CASE("zero-duration fault without trip reproduces the no-fault run") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    FaultEvent f{branch_of(c, 16, 17), 0.5, 0.2, 0.2};
    f.trip_branch = false;
    const auto a = simulate(c, pf, std::nullopt, config(0.01, 2.0));
    const auto b = simulate(c, pf, f, config(0.01, 2.0));
    REQUIRE(a.steps() == b.steps());
    double worst = 0;
    for (std::size_t k = 0; k < a.steps(); ++k) {
        for (std::size_t g = 0; g < a.states[k].delta.size(); ++g) {
            worst = std::max({worst, std::abs(a.states[k].delta[g] - b.states[k].delta[g]),
                              std::abs(a.states[k].omega[g] - b.states[k].omega[g])});
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("SMIB tracks the RK4 oracle with second-order accuracy") {
    const double coarse = smib_rk4_error(0.01);
    const double fine = smib_rk4_error(0.005);
    CHECK(coarse <= 1e-3);
    const double ratio = coarse / fine;
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}

TEST_CASE("SMIB critical clearing time is bracketed by the simulator") {
    const auto c = smib();
    const auto pf = solve_power_flow(c);
    const auto init = init_dynamic_state(c, pf);
    const auto reduced = reduce_smib(c, init);
    const double cct = reduced.critical_clearing_time(init.delta[0]);
    REQUIRE(cct > 0.05);
    REQUIRE(cct < 1.0);
    const double h = 0.001;
    const double below = std::floor(cct / h) * h - h;
    const double above = std::ceil(cct / h) * h + h;
    CHECK(smib_fault_run(below, h).label == StabilityLabel::Stable);
    CHECK(smib_fault_run(above, h).label == StabilityLabel::Unstable);
}

TEST_CASE("stability labelling") {
    SimulationResult r;
    DynamicState s;
    s.delta = {0.0, 359.9 * kPi / 180};
    r.states = {s};
    auto v = label_stability(r);
    CHECK(v.label == StabilityLabel::Stable);
    CHECK(v.max_separation_deg == doctest::Approx(359.9));
    s.delta = {-1.0, 360.1 * kPi / 180 - 1.0};
    r.states.push_back(s);
    v = label_stability(r);
    CHECK(v.label == StabilityLabel::Unstable);
    CHECK(v.max_separation_deg == doctest::Approx(360.1));
    CHECK(label_stability(r, 400.0).label == StabilityLabel::Stable);
}

TEST_CASE("identical machines keep a constant separation") {
    PowerSystemCase c;
    c.buses = {{1, BusType::Slack, 1.0, 0, 0}, {2, BusType::PV, 1.0, 0, 0}, {3, BusType::PQ, 1.0, 0, 0}};
    c.branches = {{1, 3, 0.0, 0.1, 0.0, 1.0, 0.0, true, 1}, {2, 3, 0.0, 0.1, 0.0, 1.0, 0.0, true, 1}};
    Generator g;
    g.bus = 1;
    g.slack = true;
    g.p = 0.5;
    g.h = 4.0;
    c.generators = {g, g};
    c.generators[1].bus = 2;
    c.generators[1].slack = false;
    c.loads = {{3, 1.0, 0.2, 1.0, 1.0, 0.2, 0.2}};
    const auto pf = solve_power_flow(c);
    REQUIRE(pf.converged);
    FaultEvent f{0, 1.0, 0.0, 0.1};
    f.trip_branch = false;
    const auto res = simulate(c, pf, f, config(0.01, 2.0));
    CHECK(res.label == StabilityLabel::Stable);
    double moved = 0;
    for (const auto& s : res.states) moved = std::max(moved, std::abs(s.delta[0] - s.delta[1]));
    CHECK(moved < 1e-9);
    CHECK(std::abs(res.states.back().delta[0] - res.states.front().delta[0]) > 1e-3);
}

TEST_CASE("state access") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    const FaultEvent f{branch_of(c, 16, 17), 0.5, 0.1, 0.2};
    Simulator original(c, pf, f, config(0.01, 1.0));
    const auto full = original.run();
    CHECK(full.steps() == 101);

    Simulator replay(c, pf, f, config(0.01, 1.0));
    for (int k = 0; k < 40; ++k) replay.advance();
    replay.set_state(40, replay.get_state(40));
    replay.run();
    CHECK(replay.result().states == full.states);

    Simulator bumped(c, pf, f, config(0.01, 1.0));
    for (int k = 0; k < 40; ++k) bumped.advance();
    auto s = bumped.get_state(40);
    s.delta[3] += 0.1;
    bumped.set_state(40, s);
    CHECK(bumped.get_state(40) == s);
    bumped.run();
    CHECK(bumped.result().states.back().delta[3] != full.states.back().delta[3]);

    try {
        (void)original.get_state(500);
        FAIL("expected OutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfRange);
    }
    CHECK_THROWS_AS(original.set_state(3, DynamicState{}), Error);
}

TEST_CASE("runs are bit-deterministic") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    const FaultEvent f{branch_of(c, 3, 4), 0.2, 0.0, 0.08};
    const auto a = simulate(c, pf, f, config(0.01, 2.0));
    const auto b = simulate(c, pf, f, config(0.01, 2.0));
    CHECK(a.states == b.states);
    CHECK(a.p_e == b.p_e);
    CHECK(a.max_separation_deg == b.max_separation_deg);
}

TEST_CASE("snapshot count follows the horizon") {
    const auto c = smib();
    const auto pf = solve_power_flow(c);
    CHECK(simulate(c, pf, std::nullopt, config(0.03, 1.0)).steps() == 34);
    CHECK(simulate(c, pf, std::nullopt, config(0.1, 1.0)).steps() == 11);
    CHECK_THROWS_AS((void)simulate(c, pf, std::nullopt, config(0.0, 1.0)), Error);
    CHECK_THROWS_AS((void)simulate(c, pf, FaultEvent{0, 0.5, 0.1, 2.0}, config(0.01, 1.0)), Error);
}

TEST_CASE("accelerating power integrates to the kinetic energy change") {
    auto c = ieee39();
    for (auto& br : c.branches) br.r = 0.0;
    const auto pf = solve_power_flow(c);
    REQUIRE(pf.converged);
    auto cfg = config(0.01, 3.0);
    cfg.inner_tolerance = 1e-10;
    Simulator sim(c, pf, std::nullopt, cfg);
    auto s = sim.get_state(0);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (auto& d : s.delta) d += u(rng);
    s.v = solve_network(sim.devices(), sim.factors(StageKind::PreFault), s);
    sim.set_state(0, s);
    const auto& res = sim.run();
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        const auto& m = dynamic_cast<const ClassicMachine&>(*sim.devices().models[g]);
        double integral = 0;
        double worst = 0;
        double scale = 0;
        for (std::size_t k = 1; k < res.steps(); ++k) {
            integral += 0.5 * cfg.step * ((m.mechanical_power() - res.p_e[k - 1][g]) + (m.mechanical_power() - res.p_e[k][g]));
            const double w = res.states[k].omega[g];
            // d(H w^2)/dt = w (Pm - Pe) and w stays near 1
            const double kinetic = m.inertia() * (w * w - 1.0);
            worst = std::max(worst, std::abs(integral * (1.0 + (w - 1.0) / 2.0) - kinetic));
            scale = std::max(scale, std::abs(kinetic));
        }
        CHECK(scale > 1e-4);
        CHECK(worst <= 0.01 * scale);
    }
}

TEST_CASE("inner loop failure carries the last iterate") {
    const auto c = ieee39();
    const auto pf = solve_power_flow(c);
    auto cfg = config(0.05, 1.0);
    cfg.inner_tolerance = 1e-300;
    cfg.inner_max_iterations = 1;
    Simulator sim(c, pf, FaultEvent{branch_of(c, 16, 17), 0.5, 0.0, 0.1}, cfg);
    try {
        // The first faulted step leaves delta untouched, so V is already exact.
        sim.advance();
        sim.advance();
        FAIL("expected InnerLoopDiverged");
    } catch (const InnerLoopDivergedError& e) {
        CHECK(e.code() == ErrorCode::InnerLoopDiverged);
        CHECK(e.last_iterate().delta.size() == 10);
    }
}

TEST_CASE("result columns") {
    const auto c = smib();
    const auto res = simulate(c, solve_power_flow(c), std::nullopt, config(0.1, 1.0));
    for (const auto& name : SimulationResult::columns()) {
        const auto data = res.extract(name);
        CHECK(data.size() == res.steps());
    }
    CHECK(res.extract("rotor_angles").front().size() == 2);
    CHECK(res.extract("bus_voltages").front().size() == 2);
    CHECK(res.extract("regulator_outputs").front().empty());
    CHECK_THROWS_AS((void)res.extract("nope"), Error);
}
