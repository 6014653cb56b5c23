#include "transim/engine.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>

namespace transim {

using nlohmann::json;

std::string_view to_string(SessionState s) noexcept {
    switch (s) {
        case SessionState::Loaded: return "loaded";
        case SessionState::Solved: return "solved";
        case SessionState::Simulated: return "simulated";
    }
    return "loaded";
}

namespace {

[[noreturn]] void rethrow_in(std::string_view context, const Error& e) {
    std::string msg = e.what();
    if (const auto pos = msg.find(": "); pos != std::string::npos) {
        msg.erase(0, pos + 2);
    }
    throw Error(e.code(), std::string(context) + ": " + msg);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Bound {
    double value;
    std::string name;  // empty for a fixed constant
    bool open = false;
};

/// Mutable view of one numeric field plus the limits a non-forced write must
/// respect.
struct Field {
    std::function<double()> get;
    std::function<void(double)> set;
    std::optional<Bound> lo;
    std::optional<Bound> hi;
    bool read_only = false;
    bool integral = false;
};

const std::map<std::string, std::vector<std::string>>& field_table() {
    static const std::map<std::string, std::vector<std::string>> table{
        {"bus", {"id", "type", "base_kv", "gs", "bs"}},
        {"branch", {"from", "to", "r", "x", "b", "tap", "shift_deg", "in_service", "circuit"}},
        {"generator", {"bus", "p", "v", "q_min", "q_max", "p_min", "p_max", "h", "d", "xd_prime", "slack"}},
        {"load", {"bus", "p", "q", "p_min", "p_max", "q_min", "q_max"}},
        {"config", {"step", "horizon", "frequency_hz", "inner_tolerance", "inner_max_iterations"}},
    };
    return table;
}

Field ref(double& x) {
    return {[&x] { return x; }, [&x](double v) { x = v; }, {}, {}, false, false};
}

Field ref_int(int& x) {
    return {[&x] { return static_cast<double>(x); }, [&x](double v) { x = static_cast<int>(v); }, {}, {}, false, true};
}

Field ref_bool(bool& x) {
    Field f{[&x] { return x ? 1.0 : 0.0; }, [&x](double v) { x = v != 0.0; }, Bound{0.0, ""}, Bound{1.0, ""}, false, true};
    return f;
}

Field read_only(double v) {
    return {[v] { return v; }, [](double) {}, {}, {}, true, false};
}

Field make_field(PowerSystemCase& c, double& inner_tol, int& inner_iter, std::string_view kind_in, Index index,
                 std::string_view field_in) {
    const auto kind = lower(kind_in);
    const auto field = lower(field_in);
    const auto& table = field_table();
    const auto it = table.find(kind);
    if (it == table.end()) {
        throw Error(ErrorCode::UnknownComponent, fmt::format("unknown component kind '{}'", kind_in));
    }
    if (std::find(it->second.begin(), it->second.end(), field) == it->second.end()) {
        throw Error(ErrorCode::UnknownField, fmt::format("{} has no field '{}'", kind, field_in));
    }
    auto check_index = [&](std::size_t n) {
        if (index < 0 || static_cast<std::size_t>(index) >= n) {
            throw Error(ErrorCode::UnknownComponent, fmt::format("{} {} does not exist ({} present)", kind, index, n));
        }
        return static_cast<std::size_t>(index);
    };
    if (kind == "bus") {
        auto& b = c.buses[check_index(c.buses.size())];
        if (field == "id") return read_only(b.id);
        if (field == "type") {
            Field f{[&b] { return static_cast<double>(static_cast<int>(b.type)); },
                    [&b](double v) { b.type = static_cast<BusType>(static_cast<int>(v)); }, Bound{0.0, ""}, Bound{2.0, ""},
                    false, true};
            return f;
        }
        if (field == "base_kv") {
            auto f = ref(b.base_kv);
            f.lo = Bound{0.0, ""};
            return f;
        }
        return field == "gs" ? ref(b.gs) : ref(b.bs);
    }
    if (kind == "branch") {
        auto& br = c.branches[check_index(c.branches.size())];
        if (field == "from") return read_only(br.from);
        if (field == "to") return read_only(br.to);
        if (field == "in_service") return ref_bool(br.in_service);
        if (field == "circuit") {
            auto f = ref_int(br.circuit);
            f.lo = Bound{1.0, ""};
            return f;
        }
        if (field == "tap") {
            auto f = ref(br.tap);
            f.lo = Bound{0.0, "", true};
            return f;
        }
        if (field == "r") {
            auto f = ref(br.r);
            f.lo = Bound{0.0, ""};
            return f;
        }
        if (field == "x") return ref(br.x);
        if (field == "b") return ref(br.b);
        return ref(br.shift_deg);
    }
    if (kind == "generator") {
        auto& g = c.generators[check_index(c.generators.size())];
        if (field == "bus") return read_only(g.bus);
        if (field == "slack") return read_only(g.slack ? 1.0 : 0.0);
        if (field == "p") {
            auto f = ref(g.p);
            f.lo = Bound{g.p_min, "p_min"};
            f.hi = Bound{g.p_max, "p_max"};
            return f;
        }
        if (field == "v") {
            auto f = ref(g.v);
            f.lo = Bound{0.0, "", true};
            return f;
        }
        if (field == "q_min") {
            auto f = ref(g.q_min);
            f.hi = Bound{g.q_max, "q_max"};
            return f;
        }
        if (field == "q_max") {
            auto f = ref(g.q_max);
            f.lo = Bound{g.q_min, "q_min"};
            return f;
        }
        if (field == "p_min") {
            auto f = ref(g.p_min);
            f.hi = Bound{std::min(g.p, g.p_max), g.p <= g.p_max ? "p" : "p_max"};
            return f;
        }
        if (field == "p_max") {
            auto f = ref(g.p_max);
            f.lo = Bound{std::max(g.p, g.p_min), g.p >= g.p_min ? "p" : "p_min"};
            return f;
        }
        if (field == "h" || field == "xd_prime") {
            auto f = ref(field == "h" ? g.h : g.xd_prime);
            f.lo = Bound{0.0, "", true};
            return f;
        }
        auto f = ref(g.d);
        f.lo = Bound{0.0, ""};
        return f;
    }
    if (kind == "load") {
        auto& l = c.loads[check_index(c.loads.size())];
        if (field == "bus") return read_only(l.bus);
        if (field == "p" || field == "q") {
            const bool p = field == "p";
            auto f = ref(p ? l.p : l.q);
            f.lo = Bound{p ? l.p_min : l.q_min, p ? "p_min" : "q_min"};
            f.hi = Bound{p ? l.p_max : l.q_max, p ? "p_max" : "q_max"};
            return f;
        }
        const bool p = field[0] == 'p';
        const double value = p ? l.p : l.q;
        if (field.ends_with("_min")) {
            auto f = ref(p ? l.p_min : l.q_min);
            f.hi = Bound{value, p ? "p" : "q"};
            return f;
        }
        auto f = ref(p ? l.p_max : l.q_max);
        f.lo = Bound{value, p ? "p" : "q"};
        return f;
    }
    // config
    if (index != 0) {
        throw Error(ErrorCode::UnknownComponent, fmt::format("config has a single entry, not {}", index));
    }
    if (field == "step") {
        auto f = ref(c.config.step);
        f.lo = Bound{0.0, "", true};
        f.hi = Bound{c.config.horizon, "horizon"};
        return f;
    }
    if (field == "horizon") {
        auto f = ref(c.config.horizon);
        f.lo = Bound{c.config.step, "step"};
        return f;
    }
    if (field == "frequency_hz") {
        auto f = ref(c.config.frequency_hz);
        f.lo = Bound{0.0, "", true};
        return f;
    }
    if (field == "inner_tolerance") {
        auto f = ref(inner_tol);
        f.lo = Bound{0.0, "", true};
        return f;
    }
    auto f = ref_int(inner_iter);
    f.lo = Bound{1.0, ""};
    return f;
}

}  // namespace

json fault_to_json(const FaultEvent& f) {
    return {{"branch", f.branch},
            {"location", f.location},
            {"t_fault", f.t_fault},
            {"t_clear", f.t_clear},
            {"trip_branch", f.trip_branch}};
}

FaultEvent fault_from_json(const json& j) {
    FaultEvent f;
    f.branch = j.at("branch").get<Index>();
    f.location = j.at("location").get<double>();
    f.t_fault = j.at("t_fault").get<double>();
    f.t_clear = j.at("t_clear").get<double>();
    f.trip_branch = j.value("trip_branch", true);
    return f;
}

json state_to_json(const DynamicState& s) {
    std::vector<double> re(s.v.size());
    std::vector<double> im(s.v.size());
    for (std::size_t i = 0; i < s.v.size(); ++i) {
        re[i] = s.v[i].real();
        im[i] = s.v[i].imag();
    }
    return {{"delta", s.delta}, {"omega", s.omega}, {"e_prime", s.e_prime}, {"v_re", re},
            {"v_im", im},       {"t", s.t},         {"k", s.k}};
}

DynamicState state_from_json(const json& j) {
    DynamicState s;
    s.delta = j.at("delta").get<std::vector<double>>();
    s.omega = j.at("omega").get<std::vector<double>>();
    s.e_prime = j.at("e_prime").get<std::vector<double>>();
    const auto re = j.at("v_re").get<std::vector<double>>();
    const auto im = j.at("v_im").get<std::vector<double>>();
    if (re.size() != im.size()) {
        throw Error(ErrorCode::DimensionMismatch, "voltage parts differ in length");
    }
    for (std::size_t i = 0; i < re.size(); ++i) {
        s.v.emplace_back(re[i], im[i]);
    }
    s.t = j.value("t", 0.0);
    s.k = j.value("k", std::int64_t{0});
    return s;
}

EngineSession::EngineSession(PowerSystemCase c, std::filesystem::path base_dir)
    : case_(std::move(c)), base_dir_(std::move(base_dir)) {
    validate(case_);
}

EngineSession EngineSession::load_case(const std::filesystem::path& path) {
    return EngineSession(load_case_file(path), path.parent_path());
}

void EngineSession::export_case(const std::filesystem::path& path) const {
    save_case_file(case_, path);
}

void EngineSession::invalidate() {
    state_ = SessionState::Loaded;
    pf_.reset();
    sim_.reset();
    y0_factors_.reset();
}

std::size_t EngineSession::component_count(std::string_view kind_in) const {
    const auto kind = lower(kind_in);
    if (kind == "bus") return case_.buses.size();
    if (kind == "branch") return case_.branches.size();
    if (kind == "generator") return case_.generators.size();
    if (kind == "load") return case_.loads.size();
    if (kind == "config") return 1;
    throw Error(ErrorCode::UnknownComponent, fmt::format("unknown component kind '{}'", kind_in));
}

std::vector<std::string> EngineSession::field_names(std::string_view kind) {
    const auto& table = field_table();
    const auto it = table.find(lower(kind));
    if (it == table.end()) {
        throw Error(ErrorCode::UnknownComponent, fmt::format("unknown component kind '{}'", kind));
    }
    return it->second;
}

double EngineSession::get_parameter(std::string_view kind, Index index, std::string_view field) const {
    auto& self = const_cast<EngineSession&>(*this);
    return make_field(self.case_, self.inner_tolerance_, self.inner_max_iterations_, kind, index, field).get();
}

void EngineSession::set_parameter(std::string_view kind, Index index, std::string_view field, double value, bool force) {
    const auto where = fmt::format("{}[{}].{}", lower(kind), index, lower(field));
    PowerSystemCase trial = case_;
    double tol = inner_tolerance_;
    int iters = inner_max_iterations_;
    auto f = make_field(trial, tol, iters, kind, index, field);
    if (f.read_only) {
        throw Error(ErrorCode::ConstraintViolation, where + " is read-only");
    }
    if (!std::isfinite(value)) {
        throw Error(ErrorCode::ConstraintViolation, where + " must be finite");
    }
    if (f.integral && value != std::floor(value)) {
        throw Error(ErrorCode::ConstraintViolation, fmt::format("{} = {} must be an integer", where, value));
    }
    if (!force) {
        auto describe = [](const Bound& b) {
            return b.name.empty() ? fmt::format("{}", b.value) : fmt::format("{} = {}", b.name, b.value);
        };
        if (f.lo && (value < f.lo->value || (f.lo->open && value == f.lo->value))) {
            throw Error(ErrorCode::ConstraintViolation,
                        fmt::format("{} = {} is below the lower limit {}", where, value, describe(*f.lo)));
        }
        if (f.hi && (value > f.hi->value || (f.hi->open && value == f.hi->value))) {
            throw Error(ErrorCode::ConstraintViolation,
                        fmt::format("{} = {} exceeds the upper limit {}", where, value, describe(*f.hi)));
        }
    }
    f.set(value);
    if (!force) {
        const auto errors = validation_errors(trial);
        if (!errors.empty()) {
            std::string msg = where + " would make the case invalid:";
            for (const auto& e : errors) {
                msg += "\n  " + e;
            }
            throw Error(ErrorCode::ConstraintViolation, msg);
        }
    }
    case_ = std::move(trial);
    inner_tolerance_ = tol;
    inner_max_iterations_ = iters;
    invalidate();
    log_.push_back({"set_parameter",
                    {{"kind", lower(kind)}, {"index", index}, {"field", lower(field)}, {"value", value}, {"force", force}}});
}

IslandReport EngineSession::island_report() const {
    IslandReport r;
    r.islands = find_islands(case_);
    for (std::size_t i = 0; i < r.islands.size(); ++i) {
        bool has_slack = false;
        for (const int id : r.islands[i]) {
            has_slack = has_slack || case_.buses[case_.bus_index(id)].type == BusType::Slack;
        }
        if (!has_slack) {
            r.without_slack.push_back(i);
        }
    }
    return r;
}

IslandReport EngineSession::set_branch_status(Index branch, bool in_service) {
    if (branch < 0 || static_cast<std::size_t>(branch) >= case_.branches.size()) {
        throw Error(ErrorCode::UnknownComponent,
                    fmt::format("branch {} does not exist ({} present)", branch, case_.branches.size()));
    }
    case_.branches[static_cast<std::size_t>(branch)].in_service = in_service;
    if (fault_ && fault_->branch == branch && !in_service) {
        fault_.reset();
    }
    invalidate();
    log_.push_back({"set_branch_status", {{"branch", branch}, {"in_service", in_service}}});
    return island_report();
}

const PowerFlowSolution& EngineSession::run_power_flow(const PfOptions& options) {
    invalidate();
    try {
        pf_ = solve_power_flow(case_, options);
    } catch (const Error& e) {
        rethrow_in("run(power_flow)", e);
    }
    if (pf_->converged) {
        state_ = SessionState::Solved;
    }
    json args{{"tolerance", options.tolerance},
              {"max_iterations", options.max_iterations},
              {"switch_start_iteration", options.switch_start_iteration},
              {"enforce_q_limits", options.enforce_q_limits},
              {"ordering", options.ordering == Ordering::Natural ? "natural" : "min_degree"}};
    if (options.warm_start) {
        std::vector<double> re;
        std::vector<double> im;
        for (const auto& v : *options.warm_start) {
            re.push_back(v.real());
            im.push_back(v.imag());
        }
        args["warm_start"] = {{"re", re}, {"im", im}};
    }
    log_.push_back({"run_power_flow", std::move(args)});
    return *pf_;
}

void EngineSession::set_fault(std::optional<FaultEvent> fault) {
    if (fault) {
        check_fault(case_, *fault);
    }
    fault_ = fault;
    sim_.reset();
    if (state_ == SessionState::Simulated) {
        state_ = SessionState::Solved;
    }
    log_.push_back({"set_fault", fault ? fault_to_json(*fault) : json(nullptr)});
}

SimulationConfig EngineSession::simulation_config() const {
    auto cfg = SimulationConfig::from_case(case_);
    cfg.inner_tolerance = inner_tolerance_;
    cfg.inner_max_iterations = inner_max_iterations_;
    return cfg;
}

std::vector<std::pair<Index, std::shared_ptr<const DeviceModel>>> EngineSession::neural_overrides() {
    std::vector<std::pair<Index, std::shared_ptr<const DeviceModel>>> out;
    for (const auto& nd : case_.neural_devices) {
        auto resolve = [&](const std::string& p) {
            const std::filesystem::path path(p);
            return path.is_absolute() || base_dir_.empty() ? path : base_dir_ / path;
        };
        const auto spec = resolve(nd.spec_path);
        const auto blob = resolve(nd.blob_path);
        const auto key = spec.string() + "|" + blob.string();
        auto& net = networks_[key];
        if (!net) {
            net = std::make_shared<const nn::Network>(nn::load_network(spec, blob));
        }
        const auto& gen = case_.generators.at(static_cast<std::size_t>(nd.generator));
        out.emplace_back(nd.generator, nn::as_derivative_model(net, nn::parse_layout(nd.state_layout), gen.xd_prime));
    }
    return out;
}

Simulator& EngineSession::prepare_simulation() {
    if (!pf_) {
        throw Error(ErrorCode::NotYetComputed, "run(simulation) requires run_power_flow first");
    }
    if (!pf_->converged) {
        throw Error(ErrorCode::NotConverged, "run(simulation) requires a converged power flow");
    }
    try {
        sim_ = std::make_unique<Simulator>(case_, *pf_, fault_, simulation_config(), neural_overrides());
    } catch (const Error& e) {
        rethrow_in("run(simulation)", e);
    }
    state_ = SessionState::Simulated;
    log_.push_back({"prepare_simulation", json::object()});
    return *sim_;
}

const SimulationResult& EngineSession::run_simulation() {
    prepare_simulation();
    log_.back().op = "run_simulation";
    try {
        return sim_->run();
    } catch (const Error& e) {
        rethrow_in(fmt::format("run(simulation) at step {}", sim_->current().k), e);
    }
}

std::int64_t EngineSession::advance(std::int64_t steps) {
    if (!sim_) {
        throw Error(ErrorCode::NotYetComputed, "advance requires prepare_simulation first");
    }
    std::int64_t taken = 0;
    try {
        while (taken < steps && sim_->advance()) {
            ++taken;
        }
    } catch (const Error& e) {
        rethrow_in(fmt::format("advance at step {}", sim_->current().k), e);
    }
    log_.push_back({"advance", {{"steps", steps}}});
    return taken;
}

void EngineSession::set_state(std::int64_t k, const DynamicState& state) {
    if (!sim_) {
        throw Error(ErrorCode::NotYetComputed, "set_state requires prepare_simulation first");
    }
    sim_->set_state(k, state);
    log_.push_back({"set_state", {{"k", k}, {"state", state_to_json(state)}}});
}

const PowerFlowSolution& EngineSession::power_flow() const {
    if (!pf_) {
        throw Error(ErrorCode::NotYetComputed, "no power-flow solution; call run_power_flow");
    }
    return *pf_;
}

const Simulator& EngineSession::simulator() const {
    if (!sim_) {
        throw Error(ErrorCode::NotYetComputed, "no simulation; call run_simulation");
    }
    return *sim_;
}

const SimulationResult& EngineSession::result() const {
    return simulator().result();
}

std::vector<NortonShunt> EngineSession::solved_shunts() const {
    if (sim_) {
        return sim_->shunts();
    }
    const auto& pf = power_flow();
    if (!pf.converged) {
        throw Error(ErrorCode::NotConverged, "network snapshots need a converged power flow");
    }
    const auto init = init_dynamic_state(case_, pf);
    return norton_shunts(case_, pf, classic_models(case_, init, simulation_config().synchronous_speed()));
}

const ComplexLu& EngineSession::pre_fault_factors() const {
    if (!y0_factors_) {
        const auto y = augment_admittance(build_admittance(case_, NetworkStage::pre_fault()), solved_shunts());
        y0_factors_ = order_and_factorize(y, ordering_from_string(case_.config.ordering));
    }
    return *y0_factors_;
}

std::vector<std::string> EngineSession::query_items() {
    return {"iterations", "converged", "max_mismatch", "fill_ins", "Y0",     "Y1",
            "Y2",         "L",         "U",            "permutation", "islands", "events",
            "simulation_time", "step", "label",       "max_separation_deg", "state"};
}

QueryValue EngineSession::query(std::string_view item) const {
    auto need_pf = [&]() -> const PowerFlowSolution& {
        if (!pf_) {
            throw Error(ErrorCode::NotYetComputed, fmt::format("query({}) requires run_power_flow", item));
        }
        return *pf_;
    };
    auto need_sim = [&]() -> const Simulator& {
        if (!sim_) {
            throw Error(ErrorCode::NotYetComputed, fmt::format("query({}) requires run_simulation", item));
        }
        return *sim_;
    };
    if (item == "iterations") return static_cast<std::int64_t>(need_pf().iterations);
    if (item == "converged") return need_pf().converged;
    if (item == "max_mismatch") return need_pf().max_mismatch;
    if (item == "islands") return find_islands(case_);
    if (item == "events") {
        return fault_ ? std::vector<FaultEvent>{*fault_} : std::vector<FaultEvent>{};
    }
    if (item == "step") return simulation_config().step;
    if (item == "state") return static_cast<std::int64_t>(state_);
    if (item == "fill_ins" || item == "L" || item == "U" || item == "permutation" || item == "Y0" || item == "Y1" ||
        item == "Y2") {
        need_pf();
        if (item == "Y0") {
            return augment_admittance(build_admittance(case_, NetworkStage::pre_fault()), solved_shunts());
        }
        if (item == "Y1" || item == "Y2") {
            if (!fault_) {
                throw Error(ErrorCode::NotYetComputed, fmt::format("query({}) requires set_fault", item));
            }
            const auto stage = item == "Y1" ? NetworkStage::during(*fault_) : NetworkStage::post(*fault_);
            return augment_admittance(build_admittance(case_, stage), solved_shunts());
        }
        const auto& lu = pre_fault_factors();
        if (item == "fill_ins") return static_cast<std::int64_t>(lu.fill_in_count());
        if (item == "L") return lu.lower();
        if (item == "U") return lu.upper();
        return std::vector<Index>(lu.permutation().begin(), lu.permutation().end());
    }
    if (item == "simulation_time") return need_sim().current().t;
    if (item == "label" || item == "max_separation_deg") {
        const auto& sim = need_sim();
        const auto verdict = label_stability(sim.result(), sim.config().instability_threshold_deg);
        if (item == "label") return static_cast<std::int64_t>(verdict.label);
        return verdict.max_separation_deg;
    }
    throw Error(ErrorCode::UnknownField, fmt::format("unknown query item '{}'", item));
}

void EngineSession::apply(const SessionCall& call) {
    const auto& a = call.args;
    if (call.op == "set_parameter") {
        set_parameter(a.at("kind").get<std::string>(), a.at("index").get<Index>(), a.at("field").get<std::string>(),
                      a.at("value").get<double>(), a.at("force").get<bool>());
    } else if (call.op == "set_branch_status") {
        (void)set_branch_status(a.at("branch").get<Index>(), a.at("in_service").get<bool>());
    } else if (call.op == "run_power_flow") {
        PfOptions o;
        o.tolerance = a.at("tolerance").get<double>();
        o.max_iterations = a.at("max_iterations").get<int>();
        o.switch_start_iteration = a.at("switch_start_iteration").get<int>();
        o.enforce_q_limits = a.at("enforce_q_limits").get<bool>();
        o.ordering = ordering_from_string(a.at("ordering").get<std::string>());
        if (a.contains("warm_start")) {
            const auto re = a["warm_start"].at("re").get<std::vector<double>>();
            const auto im = a["warm_start"].at("im").get<std::vector<double>>();
            std::vector<Complex> v;
            for (std::size_t i = 0; i < re.size() && i < im.size(); ++i) {
                v.emplace_back(re[i], im[i]);
            }
            o.warm_start = std::move(v);
        }
        (void)run_power_flow(o);
    } else if (call.op == "set_fault") {
        set_fault(a.is_null() ? std::nullopt : std::optional<FaultEvent>(fault_from_json(a)));
    } else if (call.op == "prepare_simulation") {
        (void)prepare_simulation();
    } else if (call.op == "run_simulation") {
        (void)run_simulation();
    } else if (call.op == "advance") {
        (void)advance(a.at("steps").get<std::int64_t>());
    } else if (call.op == "set_state") {
        set_state(a.at("k").get<std::int64_t>(), state_from_json(a.at("state")));
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown logged call '" + call.op + "'");
    }
}

EngineSession EngineSession::replay(PowerSystemCase c, const std::vector<SessionCall>& log,
                                    std::filesystem::path base_dir) {
    EngineSession s(std::move(c), std::move(base_dir));
    for (const auto& call : log) {
        s.apply(call);
    }
    return s;
}

}  // namespace transim
