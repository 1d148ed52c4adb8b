#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "percamp/disorder.hpp"
#include "percamp/error.hpp"
#include "percamp/parallel.hpp"
#include "percamp/pipeline.hpp"

using namespace percamp;
namespace fs = std::filesystem;

namespace {

constexpr int exit_met = 0, exit_error = 1, exit_missed = 2;

struct Global {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";
};

std::string in_dir(const Global& g, const std::string& file) {
    if (file.empty() || fs::path(file).is_absolute()) return file;
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / file).string();
}

VariationalResult gamma_for(const std::string& gamma_file, double alpha, double kappa, int pieces, int budget,
                            std::uint64_t seed) {
    MinimizeOptions mo;
    mo.pieces = pieces;
    mo.budget = budget;
    mo.seed = stage_seed(seed, "optimizer");
    return gamma_file.empty() ? minimize(alpha, kappa, mo) : assess(load_fop(gamma_file), alpha, kappa, mo);
}

struct SeStage {
    PdeSolution sol;
    Schedule sched;
    SdePaths paths;
};

SeStage se_stage(const Fop& g, double alpha, double kappa, int ell_under, std::size_t n_paths,
                 std::uint64_t seed) {
    const PdeSolution coarse = solve(g, kappa, PdeGridSpec::coarse(g, kappa));
    const Schedule c = schedule_constants(coarse, alpha, ell_under);
    SeStage s;
    s.sol = solve_cached(g, kappa, PdeGridSpec::make(g, kappa, 1e-3, 2049, c.q_levels), "");
    s.sched = build_schedule(s.sol, alpha, ell_under);
    discrete_normalizers(s.sol, s.sched, std::size_t(1) << 20, stage_seed(seed, "normalizer"));
    SdeOptions so;
    so.n_paths = n_paths;
    so.seed = stage_seed(seed, "sde");
    so.record_times = s.sched.q_levels;
    s.paths = simulate_sde(s.sol, so);
    return s;
}

double contract_norm(const std::vector<double>& v) {
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = v[i] * v[i];
    return std::sqrt(stable_sum(sq));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"percamp: Parisi PDE, state evolution, incremental AMP and rounding for the spherical perceptron"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();

    double alpha = 0.0, kappa = 0.0, qbar = 0.0, tol = 1e-8, eps = 0.05;
    int pieces = 2, budget = 400, ell_under = 40;
    std::size_t n = 4000, n_paths = 200000;
    std::string out_ps, out_se, out_ar, out_rd, out_sc, gamma_file, in, bin, config;

    auto* ps = app.add_subcommand("parisi-solve", "minimize the Parisi functional");
    ps->add_option("--alpha", alpha)->required();
    ps->add_option("--kappa", kappa)->required();
    ps->add_option("--pieces", pieces)->capture_default_str();
    ps->add_option("--budget", budget)->capture_default_str();
    ps->add_option("--out", out_ps, "report file")->default_val("parisi.json");
    ps->add_option("--gamma-out", gamma_file, "write gamma_* as {breakpoints, levels}");

    auto* se = app.add_subcommand("se-diagnose", "state-evolution moments, schedule and stationarity");
    se->add_option("--alpha", alpha)->required();
    se->add_option("--kappa", kappa)->required();
    se->add_option("--gamma-file", gamma_file);
    se->add_option("--pieces", pieces)->capture_default_str();
    se->add_option("--budget", budget)->capture_default_str();
    se->add_option("--ell-under", ell_under)->capture_default_str();
    se->add_option("--paths", n_paths)->capture_default_str();
    se->add_option("--out", out_se)->default_val("se.json");

    auto* ar = app.add_subcommand("amp-run", "first-stage and incremental AMP on a fresh disorder");
    ar->add_option("--alpha", alpha)->required();
    ar->add_option("--kappa", kappa)->required();
    ar->add_option("--n", n)->capture_default_str();
    ar->add_option("--ell-under", ell_under)->capture_default_str();
    ar->add_option("--gamma-file", gamma_file);
    ar->add_option("--pieces", pieces)->capture_default_str();
    ar->add_option("--budget", budget)->capture_default_str();
    ar->add_option("--paths", n_paths)->capture_default_str();
    ar->add_option("--eps", eps)->capture_default_str();
    ar->add_option("--out", out_ar)->default_val("amp.json");
    ar->add_option("--bin", bin, "full trace container")->default_val("amp.bin");

    auto* rd = app.add_subcommand("round", "project onto the polytope and rescale to the sphere");
    rd->add_option("--in", in, "trace container or JSON {u: [...]}")->required();
    rd->add_option("--alpha", alpha)->required();
    rd->add_option("--kappa", kappa)->required();
    rd->add_option("--qbar", qbar)->required();
    rd->add_option("--tol", tol)->capture_default_str();
    rd->add_option("--out", out_rd)->default_val("round.json");

    auto* pl = app.add_subcommand("pipeline", "all stages into a run directory");
    pl->add_option("--config", config, "config.json");
    pl->add_option("--alpha", alpha);
    pl->add_option("--kappa", kappa);
    pl->add_option("--n", n);
    pl->add_option("--ell-under", ell_under);
    pl->add_option("--pieces", pieces);
    pl->add_option("--budget", budget);
    pl->add_option("--gamma-file", gamma_file);
    pl->add_option("--eps", eps);

    double kmin = -3.0, kmax = 1.0;
    int steps = 41;
    auto* sc = app.add_subcommand("rs-scan", "replica-symmetric capacity over a kappa grid (CSV)");
    sc->add_option("--kappa-min", kmin)->capture_default_str();
    sc->add_option("--kappa-max", kmax)->capture_default_str();
    sc->add_option("--steps", steps)->capture_default_str()->check(CLI::PositiveNumber);
    sc->add_option("--out", out_sc)->default_val("rs_scan.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_met : exit_error;
    }

    try {
        set_threads(g.threads);
        if (ps->parsed()) {
            const VariationalResult r = gamma_for("", alpha, kappa, pieces, budget, g.seed);
            Json j = to_json(r);
            j["seed"] = g.seed;
            write_json(j, in_dir(g, out_ps));
            if (!gamma_file.empty()) save_fop(r.gamma_star, in_dir(g, gamma_file));
            std::printf("value %.10f rs_value %.10f frsb %s residual %.3e\n", r.value, r.rs_value,
                        r.frsb ? "true" : "false", r.grad_residual);
            return r.converged && !r.infeasible ? exit_met : exit_missed;
        }
        if (se->parsed()) {
            const VariationalResult r = gamma_for(gamma_file, alpha, kappa, pieces, budget, g.seed);
            const SeStage s = se_stage(r.gamma_star, alpha, kappa, ell_under, n_paths, g.seed);
            const StationarityReport st = stationarity_residuals(s.sol, alpha, s.paths);
            Json j{{"gamma", fop_to_json(r.gamma_star)},
                   {"schedule", to_json(s.sched)},
                   {"stationarity", to_json(st)},
                   {"fixed_point", fixed_point_check(s.sol, alpha)},
                   {"threshold", r.threshold}};
            write_json(j, in_dir(g, out_se));
            bool inc = true;
            for (std::size_t k = 1; k < s.sched.a_seq.size(); ++k) inc = inc && s.sched.a_seq[k] > s.sched.a_seq[k - 1];
            const bool ok = inc && st.max_r1 <= r.threshold && st.max_r2 <= r.threshold;
            std::printf("max_r1 %.4f max_r2 %.4f a_last %.5f q_under %.5f\n", st.max_r1, st.max_r2,
                        s.sched.a_seq.back(), s.sched.q_under);
            return ok ? exit_met : exit_missed;
        }
        if (ar->parsed()) {
            const VariationalResult r = gamma_for(gamma_file, alpha, kappa, pieces, budget, g.seed);
            const SeStage s = se_stage(r.gamma_star, alpha, kappa, ell_under, n_paths, g.seed);
            const Disorder dis = generate_disorder(n, alpha, stage_seed(g.seed, "disorder"));
            const AmpTrace rs = rs_amp(dis, s.sol, ell_under);
            const AmpTrace tr = iamp(dis, s.sol, s.sched, rs);
            const double ratio = contract_norm(tr.u_final()) / std::sqrt(s.sched.q_bar * double(n));
            std::vector<double> hinge(tr.au.size());
            for (std::size_t a = 0; a < tr.au.size(); ++a) hinge[a] = std::max(0.0, kappa - tr.au[a]);
            const double viol = contract_norm(hinge) / std::sqrt(double(n));
            Json j{{"n", n},
                   {"m", dis.m},
                   {"ell_under", ell_under},
                   {"rs_overlaps", to_json(rs_overlaps(rs, s.sched, std::min(10, ell_under)))},
                   {"increments", to_json(increment_report(tr, s.sched))},
                   {"se_checks", to_json(empirical_se_check(tr, s.sched, s.sol, s.paths))},
                   {"norm2", tr.norm2},
                   {"target", tr.target},
                   {"norm_ratio", ratio},
                   {"violation_norm", viol},
                   {"q_bar", s.sched.q_bar},
                   {"eps", eps}};
            write_json(j, in_dir(g, out_ar));
            if (!bin.empty()) write_container(trace_container(tr, 0), in_dir(g, bin));
            std::printf("norm_ratio %.5f violation_norm %.5f\n", ratio, viol);
            return std::abs(ratio - 1.0) <= eps && viol <= eps ? exit_met : exit_missed;
        }
        if (rd->parsed()) {
            const std::vector<double> u = load_vector(in);
            const Disorder dis = generate_disorder(u.size(), alpha, stage_seed(g.seed, "disorder"));
            RoundingOptions ro;
            ro.tol = tol;
            RoundedSolution r = project_polytope(dis, u, kappa, ro);
            finish_rounding(dis, r, kappa, qbar);
            const double kappa_eff = kappa / (1.0 - r.eps3);
            const VerifyReport v =
                verify_solution(dis, r.sigma_hat, kappa, qbar, kappa_eff, std::abs(kappa_eff) * 1e-12);
            write_json(Json{{"solution", to_json(r)}, {"verify", to_json(v)}}, in_dir(g, out_rd));
            Container c;
            c.kind = "rounded";
            c.add("sigma_star", r.sigma_star);
            c.add("sigma_hat", r.sigma_hat);
            c.add("multipliers", r.multipliers);
            write_container(c, in_dir(g, fs::path(out_rd).replace_extension(".bin").string()));
            std::printf("kkt %.3e eps3 %.5f violations %zu\n", r.kkt_residual, r.eps3, v.violations);
            return r.converged && v.violations == 0 ? exit_met : exit_missed;
        }
        if (pl->parsed()) {
            ModelParams p;
            if (!config.empty()) p = params_from_json(read_json(config));
            if (pl->count("--alpha")) p.alpha = alpha;
            if (pl->count("--kappa")) p.kappa = kappa;
            if (pl->count("--n")) p.n = n;
            if (pl->count("--ell-under")) p.ell_under = ell_under;
            if (pl->count("--pieces")) p.pieces = pieces;
            if (pl->count("--budget")) p.budget = budget;
            if (pl->count("--gamma-file")) p.gamma_file = gamma_file;
            if (pl->count("--eps")) p.tol.eps = eps;
            if (app.count("--seed") || config.empty()) p.seed = g.seed;
            const PipelineReport r = run_pipeline(p, g.out_dir);
            std::printf("norm_ratio %.5f violation_norm %.5f contract %s\n", r.norm_ratio, r.violation_norm,
                        r.contract_met ? "met" : "missed");
            return r.contract_met ? exit_met : exit_missed;
        }
        if (sc->parsed()) {
            std::vector<double> ks;
            for (int i = 0; i < steps; ++i)
                ks.push_back(steps == 1 ? kmin : kmin + (kmax - kmin) * double(i) / double(steps - 1));
            const std::vector<double> fr{0.25, 0.5, 0.75, 0.9};
            const std::string csv = scan_csv(rs_capacity_scan(ks, fr), fr);
            std::ofstream(in_dir(g, out_sc), std::ios::binary) << csv;
            return exit_met;
        }
    } catch (const StageError& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.stage.c_str(), e.what());
        return exit_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_error;
    }
    return exit_error;
}
