#include "transim/sampling.hpp"

#include "transim/parallel.hpp"

#include <fmt/format.h>

#include <fstream>
#include <numeric>

namespace transim {

using nlohmann::json;

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t counter, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32), stream};
    return std::mt19937_64(seq);
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

namespace {

double draw(std::mt19937_64& rng, Range r) {
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

json ranges_json(const std::vector<Range>& rs) {
    json a = json::array();
    for (const auto& r : rs) {
        a.push_back({r.lo, r.hi});
    }
    return a;
}

}  // namespace

SamplerSpec SamplerSpec::from_case(const PowerSystemCase& c, std::size_t n, std::uint64_t seed) {
    SamplerSpec s;
    s.n = n;
    s.seed = seed;
    for (const auto& l : c.loads) {
        s.load_p.push_back({l.p_min, l.p_max});
        s.load_q.push_back({l.q_min, l.q_max});
    }
    for (const auto& g : c.generators) {
        s.gen_p.push_back({g.p_min, g.p_max});
    }
    return s;
}

void SamplerSpec::validate(const PowerSystemCase& c) const {
    if (load_p.size() != c.loads.size() || load_q.size() != c.loads.size() || gen_p.size() != c.generators.size()) {
        throw Error(ErrorCode::InvalidArgument, "sampler ranges do not match the case components");
    }
    auto check = [](const std::vector<Range>& rs, const char* what) {
        for (std::size_t i = 0; i < rs.size(); ++i) {
            if (!(rs[i].lo <= rs[i].hi)) {
                throw Error(ErrorCode::InvalidArgument, fmt::format("{}[{}] range is not ordered", what, i));
            }
        }
    };
    check(load_p, "load_p");
    check(load_q, "load_q");
    check(gen_p, "gen_p");
    if (!(gen_v.lo > 0.0 && gen_v.lo <= gen_v.hi)) {
        throw Error(ErrorCode::InvalidArgument, "generator voltage range must be positive and ordered");
    }
    if (max_gen_draws < 1 || max_load_draws < 1) {
        throw Error(ErrorCode::InvalidArgument, "draw caps must be positive");
    }
    double load_lo = 0.0;
    double load_hi = 0.0;
    for (std::size_t i = 0; i < load_p.size(); ++i) {
        load_lo += load_p[i].lo;
        load_hi += load_p[i].hi;
    }
    double gen_lo = 0.0;
    double gen_hi = 0.0;
    bool any_slack = false;
    for (std::size_t g = 0; g < gen_p.size(); ++g) {
        gen_lo += gen_p[g].lo;
        gen_hi += gen_p[g].hi;
        any_slack = any_slack || c.generators[g].slack;
    }
    if (!any_slack) {
        throw Error(ErrorCode::InfeasibleSpec, "no slack generator bounds the balance window");
    }
    if (load_lo >= gen_hi) {
        throw Error(ErrorCode::InfeasibleSpec,
                    fmt::format("total load lower bound {:.6g} is not below generation plus slack upper bound {:.6g}",
                                load_lo, gen_hi));
    }
    if (load_hi <= gen_lo) {
        throw Error(ErrorCode::InfeasibleSpec,
                    fmt::format("total load upper bound {:.6g} is not above generation plus slack lower bound {:.6g}",
                                load_hi, gen_lo));
    }
}

json SamplerSpec::to_json() const {
    return {{"n", n},
            {"seed", seed},
            {"load_p", ranges_json(load_p)},
            {"load_q", ranges_json(load_q)},
            {"gen_p", ranges_json(gen_p)},
            {"gen_v", {gen_v.lo, gen_v.hi}},
            {"max_gen_draws", max_gen_draws},
            {"max_load_draws", max_load_draws},
            {"max_attempts_per_sample", max_attempts_per_sample},
            {"pf", {{"tolerance", pf.tolerance},
                    {"max_iterations", pf.max_iterations},
                    {"switch_start_iteration", pf.switch_start_iteration},
                    {"enforce_q_limits", pf.enforce_q_limits}}}};
}

PowerSystemCase apply_sample(const PowerSystemCase& c, const SampleRecord& r) {
    PowerSystemCase out = c;
    for (std::size_t i = 0; i < out.loads.size(); ++i) {
        out.loads[i].p = r.p_d[i];
        out.loads[i].q = r.q_d[i];
    }
    for (std::size_t g = 0; g < out.generators.size(); ++g) {
        out.generators[g].p = r.p_g[g];
        out.generators[g].v = r.v_g[g];
    }
    return out;
}

namespace {

bool window_holds(const PowerSystemCase& c, const SamplerSpec& spec, std::span<const double> p_d,
                  std::span<const double> p_g) {
    const double load = std::accumulate(p_d.begin(), p_d.end(), 0.0);
    double fixed = 0.0;
    double slack_lo = 0.0;
    double slack_hi = 0.0;
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        if (c.generators[g].slack) {
            slack_lo += spec.gen_p[g].lo;
            slack_hi += spec.gen_p[g].hi;
        } else {
            fixed += p_g[g];
        }
    }
    return fixed + slack_lo < load && load < fixed + slack_hi;
}

std::optional<SampleRecord> attempt(const PowerSystemCase& c, const SamplerSpec& spec, std::uint64_t a) {
    auto rng = keyed_rng(spec.seed, a, 0);
    const std::size_t nl = c.loads.size();
    const std::size_t ng = c.generators.size();
    SampleRecord r;
    r.attempt = a;
    r.p_d.resize(nl);
    r.q_d.resize(nl);
    r.p_g.assign(ng, 0.0);
    r.v_g.resize(ng);
    bool accepted = false;
    for (int ld = 0; ld < spec.max_load_draws && !accepted; ++ld) {
        for (std::size_t i = 0; i < nl; ++i) {
            r.p_d[i] = draw(rng, spec.load_p[i]);
            r.q_d[i] = draw(rng, spec.load_q[i]);
        }
        for (int gd = 0; gd < spec.max_gen_draws; ++gd) {
            for (std::size_t g = 0; g < ng; ++g) {
                if (!c.generators[g].slack) {
                    r.p_g[g] = draw(rng, spec.gen_p[g]);
                }
            }
            if (window_holds(c, spec, r.p_d, r.p_g)) {
                accepted = true;
                break;
            }
        }
    }
    if (!accepted) {
        return std::nullopt;
    }
    std::map<int, double> bus_v;
    for (std::size_t g = 0; g < ng; ++g) {
        const double v = draw(rng, spec.gen_v);
        r.v_g[g] = bus_v.emplace(c.generators[g].bus, v).first->second;
    }
    try {
        r.pf = solve_power_flow(apply_sample(c, r), spec.pf);
    } catch (const Error&) {
        return std::nullopt;
    }
    if (!r.pf.converged) {
        return std::nullopt;
    }
    for (std::size_t g = 0; g < ng; ++g) {
        if (c.generators[g].slack) {
            r.p_g[g] = r.pf.gen_p[g];
        }
    }
    return r;
}

}  // namespace

bool slack_window_holds(const PowerSystemCase& c, const SamplerSpec& spec, const SampleRecord& r) {
    return window_holds(c, spec, r.p_d, r.p_g);
}

std::vector<SampleRecord> sample_power_flow_cases(const PowerSystemCase& c, const SamplerSpec& spec, unsigned workers) {
    spec.validate(c);
    std::vector<SampleRecord> saved;
    if (spec.n == 0) {
        return saved;
    }
    saved.reserve(spec.n);
    workers = std::max(1u, workers);
    const std::uint64_t budget = static_cast<std::uint64_t>(spec.n) * spec.max_attempts_per_sample + 16;
    std::uint64_t next = 0;
    while (saved.size() < spec.n) {
        if (next >= budget) {
            throw Error(ErrorCode::NotConverged,
                        fmt::format("only {} of {} samples converged within {} attempts", saved.size(), spec.n, budget));
        }
        // Oversized batches only waste work; results past the n-th success are dropped.
        const std::uint64_t want = spec.n - saved.size();
        const std::uint64_t batch = std::min<std::uint64_t>(budget - next, want + want / 4 + 2 * workers);
        std::vector<std::optional<SampleRecord>> results(batch);
        parallel_for(batch, workers, [&](std::size_t i) { results[i] = attempt(c, spec, next + i); });
        for (auto& r : results) {
            if (r && saved.size() < spec.n) {
                r->index = saved.size();
                saved.push_back(std::move(*r));
            }
        }
        next += batch;
    }
    return saved;
}

FaultEvent sample_contingency(const PowerSystemCase& c, std::uint64_t seed, std::uint64_t key,
                              const ContingencyOptions& options) {
    std::vector<Index> candidates;
    for (std::size_t b = 0; b < c.branches.size(); ++b) {
        if (c.branches[b].in_service) {
            candidates.push_back(static_cast<Index>(b));
        }
    }
    if (candidates.empty()) {
        throw Error(ErrorCode::NoBranches, "no in-service branch to fault");
    }
    auto rng = keyed_rng(seed, key, 1);
    FaultEvent f;
    f.branch = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    f.location = draw(rng, options.location);
    f.t_fault = options.t_fault;
    f.t_clear = draw(rng, options.t_clear);
    return f;
}

json DatasetManifest::to_json() const {
    json labels = json::object();
    for (const auto& [k, v] : label_counts) {
        labels[k] = v;
    }
    return {{"seed", seed},
            {"n_requested", n_requested},
            {"n_saved", n_saved},
            {"n_failed", n_failed},
            {"label_counts", labels},
            {"config_digest", config_digest},
            {"shard_files", shard_files}};
}

namespace {

void write_point_columns(std::string& line, const SampleRecord& r) {
    for (const auto* v : {&r.p_d, &r.q_d, &r.p_g, &r.v_g}) {
        for (const double x : *v) {
            line += fmt::format(",{:.17g}", x);
        }
    }
}

std::string point_header(const PowerSystemCase& c) {
    std::string h;
    for (std::size_t i = 0; i < c.loads.size(); ++i) h += fmt::format(",p_d_{}", i);
    for (std::size_t i = 0; i < c.loads.size(); ++i) h += fmt::format(",q_d_{}", i);
    for (std::size_t i = 0; i < c.generators.size(); ++i) h += fmt::format(",p_g_{}", i);
    for (std::size_t i = 0; i < c.generators.size(); ++i) h += fmt::format(",v_g_{}", i);
    return h;
}

template <class Row>
std::vector<std::string> write_shards(const std::filesystem::path& dir, const std::string& stem, const std::string& header,
                                      const std::vector<Row>& rows, std::size_t shard_rows, auto&& format_row) {
    std::vector<std::string> files;
    shard_rows = std::max<std::size_t>(1, shard_rows);
    for (std::size_t start = 0, s = 0; start < rows.size() || (rows.empty() && s == 0); start += shard_rows, ++s) {
        const auto name = fmt::format("{}_{:05}.csv", stem, s);
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) {
            throw Error(ErrorCode::IoError, "cannot write shard '" + (dir / name).string() + "'");
        }
        out << header << '\n';
        for (std::size_t i = start; i < std::min(rows.size(), start + shard_rows); ++i) {
            out << format_row(rows[i]) << '\n';
        }
        files.push_back(name);
        if (rows.empty()) {
            break;
        }
    }
    return files;
}

}  // namespace

Dataset generate_dataset(const PowerSystemCase& c, const SamplerSpec& spec, const DatasetOptions& options) {
    if (options.workers < 1) {
        throw Error(ErrorCode::InvalidArgument, "at least one worker is required");
    }
    options.simulation.validate();
    Dataset ds;
    ds.points = sample_power_flow_cases(c, spec, options.workers);

    const std::size_t per = options.contingencies_per_point;
    ds.rows.resize(ds.points.size() * per);
    parallel_for(ds.rows.size(), options.workers, [&](std::size_t t) {
        auto& row = ds.rows[t];
        row.sample = t / per;
        row.contingency = t % per;
        row.fault = sample_contingency(c, spec.seed, t, options.contingency);
        const auto& point = ds.points[row.sample];
        try {
            Simulator sim(apply_sample(c, point), point.pf, row.fault, options.simulation);
            const auto& res = sim.run();
            row.label = res.label;
            row.max_separation_deg = res.max_separation_deg;
        } catch (const Error& e) {
            row.error = std::string(to_string(e.code()));
        }
    });

    auto& m = ds.manifest;
    m.seed = spec.seed;
    m.n_requested = spec.n;
    m.n_saved = ds.points.size();
    m.label_counts = {{"stable", 0}, {"unstable", 0}};
    for (const auto& r : ds.rows) {
        if (r.label) {
            ++m.label_counts[std::string(to_string(*r.label))];
        } else {
            ++m.n_failed;
        }
    }
    const json config = {{"case", case_to_json(c)},
                         {"sampler", spec.to_json()},
                         {"contingencies_per_point", per},
                         {"shard_rows", options.shard_rows},
                         {"contingency", {{"t_fault", options.contingency.t_fault},
                                          {"t_clear", {options.contingency.t_clear.lo, options.contingency.t_clear.hi}},
                                          {"location", {options.contingency.location.lo, options.contingency.location.hi}}}},
                         {"simulation", {{"step", options.simulation.step},
                                         {"horizon", options.simulation.horizon},
                                         {"inner_tolerance", options.simulation.inner_tolerance},
                                         {"inner_max_iterations", options.simulation.inner_max_iterations},
                                         {"frequency_hz", options.simulation.frequency_hz},
                                         {"instability_threshold_deg", options.simulation.instability_threshold_deg}}}};
    m.config_digest = fnv1a_hex(config.dump());

    if (!options.output_dir.empty()) {
        std::filesystem::create_directories(options.output_dir);
        const auto pcols = point_header(c);
        m.shard_files = write_shards(options.output_dir, "points", "sample,attempt,iterations,max_mismatch" + pcols,
                                     ds.points, options.shard_rows, [](const SampleRecord& r) {
                                         std::string line = fmt::format("{},{},{},{:.17g}", r.index, r.attempt,
                                                                        r.pf.iterations, r.pf.max_mismatch);
                                         write_point_columns(line, r);
                                         return line;
                                     });
        const auto sims = write_shards(
            options.output_dir, "simulations",
            "sample,contingency,branch,from,to,location,t_fault,t_clear,label,max_separation_deg,status", ds.rows,
            options.shard_rows, [&](const DatasetRow& r) {
                const auto& br = c.branches[static_cast<std::size_t>(r.fault.branch)];
                return fmt::format("{},{},{},{},{},{:.17g},{:.17g},{:.17g},{},{:.17g},{}", r.sample, r.contingency,
                                   r.fault.branch, br.from, br.to, r.fault.location, r.fault.t_fault, r.fault.t_clear,
                                   r.label ? to_string(*r.label) : std::string_view{}, r.max_separation_deg,
                                   r.label ? std::string("ok") : "failed:" + r.error);
            });
        m.shard_files.insert(m.shard_files.end(), sims.begin(), sims.end());
        std::ofstream out(options.output_dir / "manifest.json", std::ios::binary);
        if (!out) {
            throw Error(ErrorCode::IoError, "cannot write manifest in '" + options.output_dir.string() + "'");
        }
        out << m.to_json().dump(2) << '\n';
    }
    return ds;
}

}  // namespace transim
