// Command-line front end: powerflow, simulate, sample, topology, nn-check.
//
// Exit status: 0 success, 1 computational failure (results still written),
// 2 usage, validation or input errors.

#include "transim/engine.hpp"
#include "transim/nn.hpp"
#include "transim/sampling.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace transim;

namespace {

struct Options {
    std::string case_path;
    std::string output_dir;
    std::string output_format = "csv";
    std::string error_format = "text";
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::vector<std::string> overrides;
    bool force = false;

    std::string fault;
    std::optional<double> step;
    std::optional<double> horizon;
    std::size_t n = 10;
    std::size_t contingencies = 0;
    std::size_t shard_rows = 1000;
    std::vector<double> v_range;
    std::vector<double> load_scale;
    std::vector<double> t_clear;

    std::string nn_spec;
    std::string nn_blob;
    std::vector<double> nn_input;
};

/// Outcome of a subcommand that ran to completion but may report a
/// computational failure.
struct ComputationFailed {
    std::string message;
};

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotConverged:
        case ErrorCode::InnerLoopDiverged:
        case ErrorCode::SingularMatrix:
            return 1;
        default:
            return 2;
    }
}

void report_error(const Options& o, ErrorCode code, const std::string& message) {
    if (o.error_format == "json") {
        std::cerr << json{{"error", std::string(to_string(code))}, {"code", static_cast<int>(code)}, {"message", message}}.dump()
                  << '\n';
    } else {
        std::cerr << "error: " << message << '\n';
    }
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    }
    return out;
}

/// `kind.index.field=value`, e.g. generator.0.h=4.5 or config.step=0.005.
void apply_overrides(EngineSession& s, const Options& o) {
    for (const auto& item : o.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, "override '" + item + "' is not key=value");
        }
        const auto key = item.substr(0, eq);
        const auto value_text = item.substr(eq + 1);
        std::vector<std::string> parts;
        std::stringstream ss(key);
        for (std::string p; std::getline(ss, p, '.');) {
            parts.push_back(p);
        }
        if (parts.size() == 2) {
            parts.insert(parts.begin() + 1, "0");
        }
        if (parts.size() != 3) {
            throw Error(ErrorCode::InvalidArgument, "override key '" + key + "' is not kind.index.field");
        }
        double value = 0.0;
        Index index = 0;
        try {
            std::size_t used = 0;
            value = std::stod(value_text, &used);
            if (used != value_text.size()) throw std::invalid_argument(value_text);
            index = static_cast<Index>(std::stoi(parts[1], &used));
            if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidArgument, "override '" + item + "' has a malformed number");
        }
        s.set_parameter(parts[0], index, parts[2], value, o.force);
    }
}

EngineSession open_session(const Options& o) {
    auto s = EngineSession::load_case(o.case_path);
    apply_overrides(s, o);
    // Step must not exceed the horizon at any point, so order the two writes.
    const bool step_first = o.step && *o.step <= s.simulation_config().horizon;
    if (o.step && step_first) s.set_parameter("config", 0, "step", *o.step, o.force);
    if (o.horizon) s.set_parameter("config", 0, "horizon", *o.horizon, o.force);
    if (o.step && !step_first) s.set_parameter("config", 0, "step", *o.step, o.force);
    return s;
}

/// `from-to[#circuit],location,t_fault,t_clear`
FaultEvent parse_fault(const PowerSystemCase& c, const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
        parts.push_back(p);
    }
    if (parts.size() != 4) {
        throw Error(ErrorCode::InvalidArgument, "fault '" + text + "' is not from-to[#circuit],location,t_fault,t_clear");
    }
    int from = 0;
    int to = 0;
    std::optional<int> circuit;
    FaultEvent f;
    try {
        auto ends = parts[0];
        if (const auto hash = ends.find('#'); hash != std::string::npos) {
            circuit = std::stoi(ends.substr(hash + 1));
            ends.resize(hash);
        }
        const auto dash = ends.find('-');
        if (dash == std::string::npos) throw std::invalid_argument(ends);
        from = std::stoi(ends.substr(0, dash));
        to = std::stoi(ends.substr(dash + 1));
        f.location = std::stod(parts[1]);
        f.t_fault = std::stod(parts[2]);
        f.t_clear = std::stod(parts[3]);
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidArgument, "fault '" + text + "' has a malformed field");
    }
    std::vector<Index> matches;
    for (std::size_t b = 0; b < c.branches.size(); ++b) {
        const auto& br = c.branches[b];
        const bool ends_match = (br.from == from && br.to == to) || (br.from == to && br.to == from);
        if (ends_match && (!circuit || br.circuit == *circuit)) {
            matches.push_back(static_cast<Index>(b));
        }
    }
    if (matches.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no branch " + parts[0] + " in the case");
    }
    if (matches.size() > 1) {
        throw Error(ErrorCode::InvalidArgument,
                    "branch " + parts[0] + " is ambiguous between parallel circuits; add #circuit");
    }
    f.branch = matches.front();
    if (c.branches[static_cast<std::size_t>(f.branch)].from != from) {
        f.location = 1.0 - f.location;  // measured from the bus named first
    }
    return f;
}

std::string num(double x) {
    return fmt::format("{:.17g}", x);
}

json power_flow_json(const PowerSystemCase& c, const PowerFlowSolution& pf) {
    json buses = json::array();
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        buses.push_back({{"id", c.buses[i].id},
                         {"vm", pf.vm[i]},
                         {"va_deg", pf.va[i] * 180.0 / kPi},
                         {"type", std::string(to_string(pf.final_types[i]))}});
    }
    json gens = json::array();
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        gens.push_back({{"bus", c.generators[g].bus}, {"p", pf.gen_p[g]}, {"q", pf.gen_q[g]}});
    }
    json switches = json::array();
    for (const auto& s : pf.switches) {
        switches.push_back({{"bus", s.bus}, {"iteration", s.iteration}, {"direction", std::string(to_string(s.direction))}});
    }
    return {{"converged", pf.converged},
            {"iterations", pf.iterations},
            {"max_mismatch", pf.max_mismatch},
            {"buses", buses},
            {"generators", gens},
            {"switches", switches}};
}

void power_flow_csv(const PowerSystemCase& c, const PowerFlowSolution& pf, std::ostream& out) {
    out << "bus,type,vm,va_deg\n";
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        out << c.buses[i].id << ',' << to_string(pf.final_types[i]) << ',' << num(pf.vm[i]) << ','
            << num(pf.va[i] * 180.0 / kPi) << '\n';
    }
}

int run_powerflow(const Options& o) {
    auto s = open_session(o);
    const auto& pf = s.run_power_flow();
    const auto& c = s.case_data();
    if (o.output_dir.empty()) {
        if (o.output_format == "json") {
            std::cout << power_flow_json(c, pf).dump(2) << '\n';
        } else {
            power_flow_csv(c, pf, std::cout);
        }
    } else {
        fs::create_directories(o.output_dir);
        if (o.output_format == "json") {
            open_output(fs::path(o.output_dir) / "powerflow.json") << power_flow_json(c, pf).dump(2) << '\n';
        } else {
            auto out = open_output(fs::path(o.output_dir) / "powerflow.csv");
            power_flow_csv(c, pf, out);
        }
    }
    if (!pf.converged) {
        throw ComputationFailed{fmt::format("power flow did not converge in {} iterations (mismatch {:.3e})",
                                            pf.iterations, pf.max_mismatch)};
    }
    return 0;
}

void trajectory_csv(const PowerSystemCase& c, const SimulationResult& r, std::ostream& out) {
    const std::size_t ng = c.generators.size();
    out << "t";
    for (const char* name : {"delta", "omega", "pe", "qe"}) {
        for (std::size_t g = 0; g < ng; ++g) {
            out << ',' << name << "_g" << g;
        }
    }
    for (const auto& b : c.buses) {
        out << ",vm_" << b.id;
    }
    out << '\n';
    for (std::size_t k = 0; k < r.states.size(); ++k) {
        const auto& st = r.states[k];
        std::string line = num(r.time[k]);
        for (const auto* v : {&st.delta, &st.omega, &r.p_e[k], &r.q_e[k]}) {
            for (const double x : *v) {
                line += ',' + num(x);
            }
        }
        for (const auto& v : st.v) {
            line += ',' + num(std::abs(v));
        }
        out << line << '\n';
    }
}

int run_simulate(const Options& o) {
    auto s = open_session(o);
    const auto& pf = s.run_power_flow();
    if (!pf.converged) {
        throw ComputationFailed{"power flow did not converge; nothing to simulate"};
    }
    if (!o.fault.empty()) {
        s.set_fault(parse_fault(s.case_data(), o.fault));
    }
    std::optional<std::string> failure;
    try {
        (void)s.run_simulation();
    } catch (const Error& e) {
        if (exit_code_for(e.code()) != 1) {
            throw;
        }
        failure = e.what();
    }
    const auto& sim = s.simulator();
    const auto& r = sim.result();
    const auto verdict = label_stability(r, sim.config().instability_threshold_deg);
    json summary{{"case", s.case_data().name},
                 {"completed", !failure},
                 {"label", std::string(to_string(verdict.label))},
                 {"max_separation_deg", verdict.max_separation_deg},
                 {"steps", r.steps() - 1},
                 {"step", sim.config().step},
                 {"horizon", sim.config().horizon},
                 {"final_time", r.time.back()},
                 {"factorizations", sim.factorization_count()}};
    int inner_max = 0;
    long inner_total = 0;
    for (std::size_t k = 1; k < r.inner_iterations.size(); ++k) {
        inner_max = std::max(inner_max, r.inner_iterations[k]);
        inner_total += r.inner_iterations[k];
    }
    const auto n_steps = r.inner_iterations.size() > 1 ? r.inner_iterations.size() - 1 : 0;
    summary["inner_iterations"] = {{"max", inner_max},
                                   {"total", inner_total},
                                   {"mean", n_steps ? static_cast<double>(inner_total) / n_steps : 0.0}};
    if (s.fault()) {
        const auto& f = *s.fault();
        const auto& br = s.case_data().branches[static_cast<std::size_t>(f.branch)];
        summary["fault"] = fault_to_json(f);
        summary["fault"]["from"] = br.from;
        summary["fault"]["to"] = br.to;
    }
    if (failure) {
        summary["error"] = *failure;
    }
    if (o.output_dir.empty()) {
        if (o.output_format == "json") {
            std::cout << summary.dump(2) << '\n';
        } else {
            trajectory_csv(s.case_data(), r, std::cout);
        }
    } else {
        fs::create_directories(o.output_dir);
        auto traj = open_output(fs::path(o.output_dir) / "trajectory.csv");
        trajectory_csv(s.case_data(), r, traj);
        open_output(fs::path(o.output_dir) / "summary.json") << summary.dump(2) << '\n';
        std::cout << summary.dump(2) << '\n';
    }
    if (failure) {
        throw ComputationFailed{*failure};
    }
    return 0;
}

Range pair_range(const std::vector<double>& v, Range fallback) {
    return v.size() == 2 ? Range{v[0], v[1]} : fallback;
}

int run_sample(const Options& o) {
    auto s = open_session(o);
    const auto& c = s.case_data();
    auto spec = SamplerSpec::from_case(c, o.n, o.seed);
    spec.gen_v = pair_range(o.v_range, spec.gen_v);
    if (o.load_scale.size() == 2) {
        for (std::size_t i = 0; i < c.loads.size(); ++i) {
            const auto& l = c.loads[i];
            spec.load_p[i] = {std::min(o.load_scale[0] * l.p, o.load_scale[1] * l.p),
                              std::max(o.load_scale[0] * l.p, o.load_scale[1] * l.p)};
            spec.load_q[i] = {std::min(o.load_scale[0] * l.q, o.load_scale[1] * l.q),
                              std::max(o.load_scale[0] * l.q, o.load_scale[1] * l.q)};
        }
    }
    DatasetOptions d;
    d.contingencies_per_point = o.contingencies;
    d.workers = o.workers;
    d.shard_rows = o.shard_rows;
    d.contingency.t_clear = pair_range(o.t_clear, d.contingency.t_clear);
    d.simulation = s.simulation_config();
    d.output_dir = o.output_dir.empty() ? fs::path("dataset") : fs::path(o.output_dir);
    const auto ds = generate_dataset(c, spec, d);
    std::cout << ds.manifest.to_json().dump(2) << '\n';
    return 0;
}

void write_matrix(const ComplexMatrix& m, const fs::path& stem, const std::string& format) {
    if (format == "json") {
        open_output(stem.string() + ".json") << triplets_to_json(m).dump(1) << '\n';
    } else {
        auto out = open_output(stem.string() + ".csv");
        write_triplets_csv(m, out);
    }
}

int run_topology(const Options& o) {
    auto s = open_session(o);
    const auto& pf = s.run_power_flow();
    if (!pf.converged) {
        throw ComputationFailed{"power flow did not converge; Norton shunts are undefined"};
    }
    const fs::path dir = o.output_dir.empty() ? fs::path(".") : fs::path(o.output_dir);
    fs::create_directories(dir);
    write_matrix(std::get<ComplexMatrix>(s.query("Y0")), dir / "Y0", o.output_format);
    json summary{{"dimension_Y0", std::get<ComplexMatrix>(s.query("Y0")).dimension()},
                 {"fill_ins", std::get<std::int64_t>(s.query("fill_ins"))},
                 {"islands", std::get<std::vector<std::vector<int>>>(s.query("islands"))}};
    if (!o.fault.empty()) {
        s.set_fault(parse_fault(s.case_data(), o.fault));
        const auto y1 = std::get<ComplexMatrix>(s.query("Y1"));
        const auto y2 = std::get<ComplexMatrix>(s.query("Y2"));
        write_matrix(y1, dir / "Y1", o.output_format);
        write_matrix(y2, dir / "Y2", o.output_format);
        summary["dimension_Y1"] = y1.dimension();
        summary["dimension_Y2"] = y2.dimension();
    }
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int run_nn_check(const Options& o) {
    const auto net = nn::load_network(o.nn_spec, o.nn_blob);
    json report{{"input_dim", net.input_dim()},
                {"output_dim", net.output_dim()},
                {"parameters", net.spec().parameter_count()},
                {"layers", net.spec().layers.size()}};
    if (!o.nn_input.empty()) {
        const auto y = net.forward(o.nn_input);
        if (o.output_format == "json") {
            report["output"] = y;
        } else {
            std::string line;
            for (std::size_t i = 0; i < y.size(); ++i) {
                line += (i ? "," : "") + num(y[i]);
            }
            std::cout << line << '\n';
            return 0;
        }
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Transient stability simulator"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.add_option("--output-format", o.output_format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--error-format", o.error_format, "Error report format")->check(CLI::IsMember({"text", "json"}));
    app.add_option("--seed", o.seed, "Random seed");
    app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--override", o.overrides, "kind.index.field=value parameter override")->take_all();
    app.add_flag("--force", o.force, "Apply overrides outside their declared limits");
    app.fallthrough();

    auto add_case = [&](CLI::App* sub) {
        sub->add_option("--case", o.case_path, "Case file")->required();
        sub->add_option("--output,-o", o.output_dir, "Output directory");
    };
    auto* pf = app.add_subcommand("powerflow", "Solve the power flow");
    add_case(pf);
    auto* sim = app.add_subcommand("simulate", "Run a transient simulation");
    add_case(sim);
    sim->add_option("--fault", o.fault, "from-to[#circuit],location,t_fault,t_clear");
    sim->add_option("--step", o.step, "Integration step in seconds");
    sim->add_option("--horizon", o.horizon, "Simulated time in seconds");
    auto* sample = app.add_subcommand("sample", "Generate a sampled dataset");
    add_case(sample);
    sample->add_option("--n", o.n, "Operating points to save");
    sample->add_option("--contingencies", o.contingencies, "Contingencies per operating point");
    sample->add_option("--shard-rows", o.shard_rows, "Rows per CSV shard")->check(CLI::PositiveNumber);
    sample->add_option("--v-range", o.v_range, "Generator voltage range lo,hi")->delimiter(',')->expected(2);
    sample->add_option("--load-scale", o.load_scale, "Load range as multiples of the base lo,hi")
        ->delimiter(',')
        ->expected(2);
    sample->add_option("--t-clear", o.t_clear, "Clearing-time range lo,hi")->delimiter(',')->expected(2);
    auto* topo = app.add_subcommand("topology", "Export Y0, Y1 and Y2 triplets");
    add_case(topo);
    topo->add_option("--fault", o.fault, "from-to[#circuit],location,t_fault,t_clear");
    auto* nnc = app.add_subcommand("nn-check", "Validate a network spec and blob");
    nnc->add_option("--spec", o.nn_spec, "Network JSON")->required();
    nnc->add_option("--blob", o.nn_blob, "Parameter blob")->required();
    nnc->add_option("--input", o.nn_input, "Input vector")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error(o, ErrorCode::InvalidArgument, e.what());
        return 2;
    }

    try {
        if (pf->parsed()) return run_powerflow(o);
        if (sim->parsed()) return run_simulate(o);
        if (sample->parsed()) return run_sample(o);
        if (topo->parsed()) return run_topology(o);
        if (nnc->parsed()) return run_nn_check(o);
    } catch (const ComputationFailed& f) {
        report_error(o, ErrorCode::NotConverged, f.message);
        return 1;
    } catch (const Error& e) {
        report_error(o, e.code(), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        report_error(o, ErrorCode::IoError, e.what());
        return 2;
    }
    return 2;
}
