#pragma once

#include "transim/case.hpp"
#include "transim/dynamics.hpp"
#include "transim/network.hpp"
#include "transim/nn.hpp"
#include "transim/powerflow.hpp"
#include "transim/sparse.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

using namespace transim;

inline std::filesystem::path data_dir() {
    return TRANSIM_SOURCE_DIR "/data";
}

inline std::filesystem::path fixture_dir() {
    return TRANSIM_SOURCE_DIR "/tests/fixtures";
}

inline PowerSystemCase ieee39() {
    return load_case_file(data_dir() / "ieee39.json");
}

inline Eigen::MatrixXcd dense(const ComplexMatrix& m) {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(m.dimension(), m.dimension());
    for (const auto& t : m.triplets()) {
        d(t.row, t.col) = t.value;
    }
    return d;
}

inline Eigen::MatrixXd dense(const RealMatrix& m) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.dimension(), m.dimension());
    for (const auto& t : m.triplets()) {
        d(t.row, t.col) = t.value;
    }
    return d;
}

/// Dense bus admittance assembled straight from the branch list, written
/// independently of the sparse builder.
inline Eigen::MatrixXcd dense_admittance(const PowerSystemCase& c, const NetworkStage& stage,
                                         std::span<const NortonShunt> shunts = {}) {
    const Index nb = c.bus_count();
    std::optional<FaultEvent> f = stage.fault;
    const bool interior = stage.kind == StageKind::DuringFault && f->location > 0.0 && f->location < 1.0;
    const Index n = nb + (interior ? 1 : 0);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    auto add_pi = [&](Index i, Index j, Complex z, double b, Complex a) {
        const Complex ys = 1.0 / z;
        const Complex half{0.0, b / 2.0};
        y(i, i) += (ys + half) / std::norm(a);
        y(j, j) += ys + half;
        y(i, j) += -ys / std::conj(a);
        y(j, i) += -ys / a;
    };
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& br = c.branches[k];
        if (!br.in_service) continue;
        const bool faulted = f && static_cast<std::size_t>(f->branch) == k;
        if (faulted && stage.kind == StageKind::PostFault && f->trip_branch) continue;
        const Index i = c.bus_index(br.from);
        const Index j = c.bus_index(br.to);
        const double tap = br.tap == 0.0 ? 1.0 : br.tap;
        const Complex a = std::polar(tap, br.shift_deg * kPi / 180.0);
        const Complex z{br.r, br.x};
        if (faulted && interior) {
            const double lam = f->location;
            add_pi(i, nb, lam * z, lam * br.b, a);
            add_pi(nb, j, (1.0 - lam) * z, (1.0 - lam) * br.b, 1.0);
        } else {
            add_pi(i, j, z, br.b, a);
        }
    }
    for (Index i = 0; i < nb; ++i) {
        y(i, i) += Complex{c.buses[i].gs, c.buses[i].bs};
    }
    if (stage.kind == StageKind::DuringFault) {
        const auto& br = c.branches[static_cast<std::size_t>(f->branch)];
        const Index at = interior ? nb : c.bus_index(f->location == 0.0 ? br.from : br.to);
        y(at, at) += kFaultShuntAdmittance;
    }
    for (const auto& s : shunts) {
        y(s.bus, s.bus) += s.admittance;
    }
    return y;
}

/// Scheduled minus computed injections from a dense admittance, written
/// independently of the solver.
inline std::vector<double> oracle_mismatch(const PowerSystemCase& c, const std::vector<Complex>& v) {
    const auto y = dense_admittance(c, NetworkStage::pre_fault());
    const auto n = static_cast<Index>(v.size());
    Eigen::VectorXcd vv(n);
    for (Index i = 0; i < n; ++i) vv(i) = v[i];
    const Eigen::VectorXcd current = y * vv;
    std::vector<Complex> sched(static_cast<std::size_t>(n));
    for (const auto& g : c.generators) {
        if (!g.slack) sched[c.bus_index(g.bus)] += g.p;
    }
    for (const auto& l : c.loads) sched[c.bus_index(l.bus)] -= Complex{l.p, l.q};
    std::vector<double> dp;
    std::vector<double> dq;
    for (Index i = 0; i < n; ++i) {
        const Complex s = vv(i) * std::conj(current(i));
        if (c.buses[i].type != BusType::Slack) dp.push_back(sched[i].real() - s.real());
        if (c.buses[i].type == BusType::PQ) dq.push_back(sched[i].imag() - s.imag());
    }
    dp.insert(dp.end(), dq.begin(), dq.end());
    return dp;
}

inline double max_abs(const Eigen::MatrixXcd& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Random structurally symmetric, diagonally dominant complex matrix.
inline ComplexMatrix random_sparse(std::mt19937_64& rng, Index n, double density) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> p(0.0, 1.0);
    std::vector<Triplet<Complex>> t;
    std::vector<double> row_sum(static_cast<std::size_t>(n), 0.0);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (p(rng) < density) {
                const Complex a{u(rng), u(rng)};
                const Complex b{u(rng), u(rng)};
                t.push_back({i, j, a});
                t.push_back({j, i, b});
                row_sum[i] += std::abs(a);
                row_sum[j] += std::abs(b);
            }
        }
    }
    for (Index i = 0; i < n; ++i) {
        t.push_back({i, i, Complex{row_sum[i] + 1.0 + p(rng), u(rng)}});
    }
    return ComplexMatrix::from_triplets(n, t);
}

/// Single machine against an infinite bus through two parallel lines. The
/// infinite bus is a slack machine with enormous inertia.
inline PowerSystemCase smib(double p_mech = 0.8, double h = 3.5, double xd = 0.3, double x_line = 0.4,
                            double v_gen = 1.05) {
    PowerSystemCase c;
    c.name = "smib";
    c.buses = {{1, BusType::PV, 230.0, 0.0, 0.0}, {2, BusType::Slack, 230.0, 0.0, 0.0}};
    Branch line{1, 2, 0.0, x_line, 0.0, 1.0, 0.0, true, 1};
    c.branches = {line, line};
    c.branches[1].circuit = 2;
    Generator g;
    g.bus = 1;
    g.p = p_mech;
    g.v = v_gen;
    g.h = h;
    g.xd_prime = xd;
    Generator inf;
    inf.bus = 2;
    inf.v = 1.0;
    inf.h = 1e12;
    inf.xd_prime = 1e-6;
    inf.slack = true;
    inf.p_min = -9999.0;
    c.generators = {g, inf};
    return c;
}

/// Reduced single-machine model of smib(): E'∠δ against E_inf∠δ_inf through
/// one reactance. The infinite machine is frozen.
struct ReducedSmib {
    double e = 0.0;
    double e_inf = 0.0;
    double delta_inf = 0.0;
    double p_mech = 0.0;
    double h = 0.0;
    double omega_sync = 2.0 * kPi * 50.0;
    double x_pre = 0.0;
    double x_post = 0.0;

    [[nodiscard]] double p_max(double x) const { return e * e_inf / x; }

    /// Explicit RK4 on the reduced swing equation with the pre-fault network.
    /// Returns δ at every multiple of `sample` up to `horizon`.
    [[nodiscard]] std::vector<double> rk4(double delta0, double omega0, double dt, double sample,
                                          double horizon) const {
        auto f = [&](double d, double w) {
            return std::pair{omega_sync * (w - 1.0), (p_mech - p_max(x_pre) * std::sin(d - delta_inf)) / (2.0 * h)};
        };
        const auto per_sample = static_cast<int>(std::lround(sample / dt));
        const auto samples = static_cast<int>(std::floor(horizon / sample + 1e-9));
        std::vector<double> out{delta0};
        double d = delta0;
        double w = omega0;
        for (int s = 0; s < samples; ++s) {
            for (int i = 0; i < per_sample; ++i) {
                const auto [k1d, k1w] = f(d, w);
                const auto [k2d, k2w] = f(d + dt / 2 * k1d, w + dt / 2 * k1w);
                const auto [k3d, k3w] = f(d + dt / 2 * k2d, w + dt / 2 * k2w);
                const auto [k4d, k4w] = f(d + dt * k3d, w + dt * k3w);
                d += dt / 6 * (k1d + 2 * k2d + 2 * k3d + k4d);
                w += dt / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
            }
            out.push_back(d);
        }
        return out;
    }

    /// Equal-area critical clearing time for a bolted fault at the machine
    /// terminal (zero electrical power while faulted) followed by x_post.
    [[nodiscard]] double critical_clearing_time(double delta0) const {
        const double pm = p_max(x_post);
        const double d0 = delta0 - delta_inf;
        const double dmax = kPi - std::asin(p_mech / pm);
        const double cos_dc = (p_mech * (dmax - d0) + pm * std::cos(dmax)) / pm;
        const double dc = std::acos(cos_dc);
        return std::sqrt(4.0 * h * (dc - d0) / (omega_sync * p_mech));
    }
};

/// Reduced model of smib() at its initial point.
inline ReducedSmib reduce_smib(const PowerSystemCase& c, const DynamicState& init) {
    const auto& g = c.generators[0];
    const auto& inf = c.generators[1];
    const double x_line = c.branches[0].x;
    ReducedSmib r;
    r.e = init.e_prime[0];
    r.e_inf = init.e_prime[1];
    r.delta_inf = init.delta[1];
    r.p_mech = r.e * r.e_inf / (g.xd_prime + x_line / 2 + inf.xd_prime) * std::sin(init.delta[0] - init.delta[1]);
    r.h = g.h;
    r.x_pre = g.xd_prime + x_line / 2 + inf.xd_prime;
    r.x_post = g.xd_prime + x_line + inf.xd_prime;
    return r;
}

/// Single dense layer reproducing the classic swing equation linearized
/// about (x0, v0). Inputs are (delta, omega, Re V, Im V).
inline std::shared_ptr<const nn::Network> linearized_classic(const MachineState& x0, Complex v0, double h,
                                                             double xd, double omega_sync) {
    // P_e = E (sin d Vr - cos d Vi) / x'd
    const double e = x0.e_prime;
    const double gd = e * (std::cos(x0.delta) * v0.real() + std::sin(x0.delta) * v0.imag()) / xd;
    const double gr = e * std::sin(x0.delta) / xd;
    const double gi = -e * std::cos(x0.delta) / xd;
    const double k = -1.0 / (2.0 * h);
    nn::NetworkSpec spec{4, {{"swing", nn::LayerKind::Dense, 4, 2, nn::Activation::Identity}}};
    const std::vector<double> params{
        0.0,    omega_sync, 0.0,    0.0,     //
        k * gd, 0.0,        k * gr, k * gi,  //
        -omega_sync,                         //
        -k * (gd * x0.delta + gr * v0.real() + gi * v0.imag()),
    };
    return std::make_shared<const nn::Network>(spec, params);
}

inline nlohmann::json dense_json(const std::string& name, int in, int out, const std::string& act = "identity") {
    return {{"name", name}, {"kind", "dense"}, {"in", in}, {"out", out}, {"activation", act}};
}

inline nlohmann::json act_json(const std::string& name, int n, const std::string& act) {
    return {{"name", name}, {"kind", "activation"}, {"in", n}, {"out", n}, {"activation", act}};
}

struct RandomNet {
    nn::NetworkSpec spec;
    std::vector<double> params;
};

/// Three dense layers with random widths and activations in between.
inline RandomNet random_net(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> width(1, 12);
    std::uniform_int_distribution<int> pick(0, 2);
    std::normal_distribution<double> w(0.0, 0.7);
    const char* acts[] = {"identity", "tanh", "relu"};
    nlohmann::json j{{"input_dim", width(rng)}, {"layers", nlohmann::json::array()}};
    int in = j["input_dim"];
    std::size_t count = 0;
    for (int l = 0; l < 3; ++l) {
        const int out = width(rng);
        j["layers"].push_back(dense_json("d" + std::to_string(l), in, out, acts[pick(rng)]));
        if (l < 2) j["layers"].push_back(act_json("a" + std::to_string(l), out, acts[pick(rng)]));
        count += static_cast<std::size_t>(in * out + out);
        in = out;
    }
    RandomNet r{nn::parse_spec(j), {}};
    for (std::size_t i = 0; i < count; ++i) r.params.push_back(w(rng));
    return r;
}

inline double apply(nn::Activation a, double x) {
    switch (a) {
        case nn::Activation::Tanh:
            return std::tanh(x);
        case nn::Activation::Relu:
            return x > 0 ? x : 0.0;
        case nn::Activation::Identity:
            break;
    }
    return x;
}

/// Plain loops over the flat parameter vector.
inline std::vector<double> oracle_forward(const nn::NetworkSpec& spec, const std::vector<double>& p, std::vector<double> x) {
    std::size_t at = 0;
    for (const auto& l : spec.layers) {
        if (l.kind == nn::LayerKind::Dense) {
            std::vector<double> y(static_cast<std::size_t>(l.out));
            const std::size_t bias = at + static_cast<std::size_t>(l.in * l.out);
            for (Index r = 0; r < l.out; ++r) {
                double acc = p[bias + static_cast<std::size_t>(r)];
                for (Index c = 0; c < l.in; ++c) acc += p[at + static_cast<std::size_t>(r * l.in + c)] * x[c];
                y[r] = acc;
            }
            at = bias + static_cast<std::size_t>(l.out);
            x = std::move(y);
        }
        for (auto& v : x) v = apply(l.activation, v);
    }
    return x;
}

}  // namespace testing
