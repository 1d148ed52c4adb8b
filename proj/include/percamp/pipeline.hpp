#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "percamp/io.hpp"

namespace percamp {

inline constexpr int config_schema_version = 1;

struct Tolerances {
    double eps = 0.05;          // contract: norm ratio and violation norm
    double round_tol = 1e-8;    // KKT residual of the projection
    double track_tol = 0.05;    // online norm tracking during the incremental stage
    double threshold = 0.02;    // stationarity threshold for membership
    double min_jump = 1e-3;
};

struct ModelParams {
    double kappa = -1.5;
    double alpha = 20.0;
    std::size_t n = 4000;
    std::uint64_t seed = 1;
    int ell_under = 40;
    int pieces = 2;
    int budget = 400;
    int nx = 2049;
    double dt = 1e-3;
    std::size_t sde_paths = 200000;
    std::size_t normalizer_samples = std::size_t(1) << 20;
    std::string gamma_file;  // empty: run the optimizer
    Tolerances tol;

    std::size_t m() const;
    void validate() const;
    std::uint64_t hash() const;
};

Json to_json(const ModelParams& p);
// Requires the current schema version and rejects unknown fields.
ModelParams params_from_json(const Json& j);

// Labeled substreams of the master seed.
std::uint64_t stage_seed(std::uint64_t seed, const std::string& label);

struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string s, const std::string& what)
        : std::runtime_error(s + ": " + what), stage(std::move(s)) {}
};

struct PipelineReport {
    Json json;
    bool contract_met = false;
    double norm_ratio = 0.0;       // ||u|| / sqrt(q_bar N)
    double violation_norm = 0.0;   // ||(kappa - A u)_+|| / sqrt(N)
};

// Runs every stage, writing config.json, gamma.json, pde.cache, se.json,
// amp.json, amp.bin, round.json, round.bin and report.json into run_dir.
// cache_dir empty: the PERCAMP_CACHE_DIR variable, or no cache.
PipelineReport run_pipeline(const ModelParams& p, const std::string& run_dir,
                            const std::string& cache_dir = "");

struct ScanRow {
    double kappa = 0.0, alpha_rs = 0.0, second_moment = 0.0;
    std::vector<double> values;  // RS value at alpha = f alpha_rs per fraction
    std::vector<double> q_star;
};
std::vector<ScanRow> rs_capacity_scan(const std::vector<double>& kappas,
                                      const std::vector<double>& fractions = {0.25, 0.5, 0.75, 0.9});
std::string scan_csv(const std::vector<ScanRow>& rows, const std::vector<double>& fractions);

}  // namespace percamp
