#include "percamp/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "percamp/disorder.hpp"
#include "percamp/error.hpp"
#include "percamp/parallel.hpp"
#include "percamp/rng.hpp"
#include "percamp/special.hpp"

namespace percamp {

namespace fs = std::filesystem;

std::size_t ModelParams::m() const { return std::size_t(std::floor(alpha * double(n))); }

void ModelParams::validate() const {
    if (!std::isfinite(kappa)) throw ValidationError("params: kappa must be finite");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("params: alpha must be positive");
    if (n < 1 || m() < 1) throw ValidationError("params: need n >= 1 and floor(alpha n) >= 1");
    if (ell_under < 1) throw ValidationError("params: ell_under must be >= 1");
    if (pieces < 1 || budget < 1) throw ValidationError("params: pieces and budget must be >= 1");
    if (nx < 65 || !(dt > 0.0)) throw ValidationError("params: nx >= 65 and dt > 0 required");
    if (sde_paths < 2 || normalizer_samples < 2) throw ValidationError("params: sample counts must be >= 2");
    for (double t : {tol.eps, tol.round_tol, tol.track_tol, tol.threshold, tol.min_jump})
        if (!(t > 0.0)) throw ValidationError("params: tolerances must be positive");
}

std::uint64_t ModelParams::hash() const {
    return Hasher().add(to_json(*this).dump()).value();
}

Json to_json(const ModelParams& p) {
    return Json{{"schema_version", config_schema_version},
                {"kappa", p.kappa},
                {"alpha", p.alpha},
                {"n", p.n},
                {"seed", p.seed},
                {"ell_under", p.ell_under},
                {"pieces", p.pieces},
                {"budget", p.budget},
                {"pde", {{"nx", p.nx}, {"dt", p.dt}}},
                {"sde_paths", p.sde_paths},
                {"normalizer_samples", p.normalizer_samples},
                {"gamma_file", p.gamma_file},
                {"tolerances",
                 {{"eps", p.tol.eps},
                  {"round_tol", p.tol.round_tol},
                  {"track_tol", p.tol.track_tol},
                  {"threshold", p.tol.threshold},
                  {"min_jump", p.tol.min_jump}}}};
}

ModelParams params_from_json(const Json& j) {
    reject_unknown(j, {"schema_version", "kappa", "alpha", "n", "seed", "ell_under", "pieces", "budget", "pde",
                       "sde_paths", "normalizer_samples", "gamma_file", "tolerances"},
                   "config");
    if (!j.contains("schema_version")) throw ValidationError("config: missing schema_version");
    if (j.at("schema_version").get<int>() != config_schema_version)
        throw ValidationError("config: unsupported schema_version " + j.at("schema_version").dump());
    ModelParams p;
    try {
        auto get = [&](const Json& o, const char* k, auto& dst) {
            if (o.contains(k)) dst = o.at(k).get<std::decay_t<decltype(dst)>>();
        };
        get(j, "kappa", p.kappa);
        get(j, "alpha", p.alpha);
        get(j, "n", p.n);
        get(j, "seed", p.seed);
        get(j, "ell_under", p.ell_under);
        get(j, "pieces", p.pieces);
        get(j, "budget", p.budget);
        get(j, "sde_paths", p.sde_paths);
        get(j, "normalizer_samples", p.normalizer_samples);
        get(j, "gamma_file", p.gamma_file);
        if (j.contains("pde")) {
            const Json& s = j.at("pde");
            reject_unknown(s, {"nx", "dt"}, "config.pde");
            get(s, "nx", p.nx);
            get(s, "dt", p.dt);
        }
        if (j.contains("tolerances")) {
            const Json& t = j.at("tolerances");
            reject_unknown(t, {"eps", "round_tol", "track_tol", "threshold", "min_jump"}, "config.tolerances");
            get(t, "eps", p.tol.eps);
            get(t, "round_tol", p.tol.round_tol);
            get(t, "track_tol", p.tol.track_tol);
            get(t, "threshold", p.tol.threshold);
            get(t, "min_jump", p.tol.min_jump);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    p.validate();
    return p;
}

std::uint64_t stage_seed(std::uint64_t seed, const std::string& label) { return substream_key(seed, label, 0); }

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
auto stage(const char* name, Json& times, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            times[name] = seconds_since(t0);
        } else {
            auto r = body();
            times[name] = seconds_since(t0);
            return r;
        }
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

double vec_norm(const std::vector<double>& v) {
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = v[i] * v[i];
    return std::sqrt(stable_sum(sq));
}

}  // namespace

PipelineReport run_pipeline(const ModelParams& p, const std::string& run_dir, const std::string& cache_dir) {
    p.validate();
    fs::create_directories(run_dir);
    auto path = [&](const char* f) { return (fs::path(run_dir) / f).string(); };
    write_json(to_json(p), path("config.json"));
    const std::uint64_t ph = p.hash();
    Json times = Json::object();

    MinimizeOptions mo;
    mo.pieces = p.pieces;
    mo.budget = p.budget;
    mo.nx = p.nx;
    mo.threshold = p.tol.threshold;
    mo.min_jump = p.tol.min_jump;
    mo.seed = stage_seed(p.seed, "optimizer");
    const bool oracle = !p.gamma_file.empty();
    const VariationalResult vr = stage("variational", times, [&] {
        VariationalResult r = oracle ? assess(load_fop(p.gamma_file), p.alpha, p.kappa, mo)
                                     : minimize(p.alpha, p.kappa, mo);
        if (r.infeasible) throw DomainError("alpha exceeds the replica-symmetric capacity");
        save_fop(r.gamma_star, path("gamma.json"));
        return r;
    });
    const Fop& g = vr.gamma_star;

    const PdeSolution sol = stage("pde", times, [&] {
        const PdeSolution coarse = solve(g, p.kappa, PdeGridSpec::coarse(g, p.kappa, p.nx));
        const Schedule c = schedule_constants(coarse, p.alpha, p.ell_under);
        const PdeGridSpec spec = PdeGridSpec::make(g, p.kappa, p.dt, p.nx, c.q_levels);
        PdeSolution s = solve_cached(g, p.kappa, spec, cache_dir);
        save_pde(s, path("pde.cache"), pde_cache_key(g, p.kappa, spec));
        return s;
    });

    Schedule sched;
    SdePaths paths;
    Json se_json;
    stage("state_evolution", times, [&] {
        sched = build_schedule(sol, p.alpha, p.ell_under);
        const Schedule law_sched = sched;
        discrete_normalizers(sol, sched, p.normalizer_samples, stage_seed(p.seed, "normalizer"));
        SdeOptions so;
        so.n_paths = p.sde_paths;
        so.dt = p.dt;
        so.seed = stage_seed(p.seed, "sde");
        so.record_times = sched.q_levels;
        paths = simulate_sde(sol, so);
        const StationarityReport st = stationarity_residuals(sol, p.alpha, paths);
        se_json = Json{{"schedule", to_json(sched)},
                       {"law_normalizers", law_sched.normalizers},
                       {"stationarity", to_json(st)},
                       {"sde", {{"n_paths", so.n_paths}, {"dt", so.dt}, {"antithetic", so.antithetic}}},
                       {"fixed_point", fixed_point_check(sol, p.alpha)}};
        write_json(se_json, path("se.json"));
    });

    AmpOptions ao;
    ao.track_tol = p.tol.track_tol;
    const Disorder dis = stage("disorder", times, [&] {
        return generate_disorder(p.n, p.alpha, stage_seed(p.seed, "disorder"));
    });
    AmpTrace tr;
    Json amp_json;
    stage("amp", times, [&] {
        AmpOptions rso = ao;
        const AmpTrace rs = rs_amp(dis, sol, p.ell_under, rso);
        const OverlapReport ov = rs_overlaps(rs, sched, std::min(10, p.ell_under));
        tr = iamp(dis, sol, sched, rs, ao);
        const IncrementReport inc = increment_report(tr, sched);
        const std::vector<SeCheckRow> checks = empirical_se_check(tr, sched, sol, paths);
        Json warn = rs.warnings;
        for (const auto& w : tr.warnings) warn.push_back(w);
        amp_json = Json{{"n", dis.n},
                        {"m", dis.m},
                        {"ell_under", p.ell_under},
                        {"eps0_used", tr.eps0},
                        {"rs_overlaps", to_json(ov)},
                        {"rs_norm2", rs.norm2},
                        {"increments", to_json(inc)},
                        {"norm2", tr.norm2},
                        {"target", tr.target},
                        {"se_checks", to_json(checks)},
                        {"warnings", warn}};
        write_json(amp_json, path("amp.json"));
        write_container(trace_container(tr, ph), path("amp.bin"));
    });

    PipelineReport out;
    const std::vector<double>& u = tr.u_final();
    out.norm_ratio = vec_norm(u) / std::sqrt(sched.q_bar * double(p.n));
    {
        std::vector<double> sq(tr.au.size());
        for (std::size_t a = 0; a < tr.au.size(); ++a) {
            const double d = std::max(0.0, p.kappa - tr.au[a]);
            sq[a] = d * d;
        }
        out.violation_norm = std::sqrt(stable_sum(sq) / double(p.n));
    }
    out.contract_met = std::abs(out.norm_ratio - 1.0) <= p.tol.eps && out.violation_norm <= p.tol.eps;

    Json round_json;
    stage("rounding", times, [&] {
        RoundingOptions ro;
        ro.tol = p.tol.round_tol;
        RoundedSolution r = project_polytope(dis, u, p.kappa, ro);
        finish_rounding(dis, r, p.kappa, sched.q_bar);
        const double kappa_eff = p.kappa / (1.0 - r.eps3);
        const VerifyReport v = verify_solution(dis, r.sigma_hat, p.kappa, sched.q_bar, kappa_eff,
                                               std::abs(kappa_eff) * 1e-12);
        round_json = Json{{"solution", to_json(r)}, {"verify", to_json(v)}};
        write_json(round_json, path("round.json"));
        Container c;
        c.params_hash = ph;
        c.kind = "rounded";
        c.add("sigma_star", r.sigma_star);
        c.add("sigma_hat", r.sigma_hat);
        c.add("multipliers", r.multipliers);
        write_container(c, path("round.bin"));
    });

    out.json = Json{{"versions",
                     {{"code", code_version},
                      {"config_schema", config_schema_version},
                      {"container", container_version}}},
                    {"config", to_json(p)},
                    {"gamma_source", oracle ? "oracle-supplied γ" : "optimizer"},
                    {"variational", to_json(vr)},
                    {"schedule", to_json(sched)},
                    {"se_checks", amp_json["se_checks"]},
                    {"amp_summary",
                     {{"rs_max_overlap_gap", amp_json["rs_overlaps"]["max_overlap_gap"]},
                      {"rs_max_norm_gap", amp_json["rs_overlaps"]["max_norm_gap"]},
                      {"increments", amp_json["increments"]},
                      {"warnings", amp_json["warnings"]}}},
                    {"contract",
                     {{"eps", p.tol.eps},
                      {"norm_ratio", out.norm_ratio},
                      {"violation_norm", out.violation_norm},
                      {"met", out.contract_met}}},
                    {"rounding", round_json},
                    {"wall_times", times}};
    write_json(out.json, path("report.json"));
    return out;
}

std::vector<ScanRow> rs_capacity_scan(const std::vector<double>& kappas, const std::vector<double>& fractions) {
    std::vector<ScanRow> rows;
    for (double k : kappas) {
        ScanRow r;
        r.kappa = k;
        r.second_moment = rs_second_moment(k);
        r.alpha_rs = rs_capacity(k);
        for (double f : fractions) {
            const GardnerResult g = gardner_rs(f * r.alpha_rs, k);
            r.values.push_back(g.value);
            r.q_star.push_back(g.q_star);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string scan_csv(const std::vector<ScanRow>& rows, const std::vector<double>& fractions) {
    std::ostringstream o;
    o << "kappa,alpha_rs,second_moment";
    for (double f : fractions) o << ",value_at_" << f << ",q_at_" << f;
    o << '\n';
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        o << buf;
    };
    for (const ScanRow& r : rows) {
        put(r.kappa);
        o << ',';
        put(r.alpha_rs);
        o << ',';
        put(r.second_moment);
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            o << ',';
            put(r.values[i]);
            o << ',';
            put(r.q_star[i]);
        }
        o << '\n';
    }
    return o.str();
}

}  // namespace percamp
