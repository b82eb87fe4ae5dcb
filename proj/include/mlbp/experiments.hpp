#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mlbp/datagen.hpp"
#include "mlbp/solvers.hpp"

namespace mlbp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string kind;  // lambda-sweep | solver-race | mu-sweep | bound-audit
    std::optional<InstanceSpec> instance;
    std::string instance_path;  // alternative to an inline spec
    int trials = 20;
    std::vector<std::uint64_t> seeds;  // per-instance seeds for bound-audit

    std::vector<double> lambda2_grid;
    std::vector<double> lambda1_grid;   // grid-searched; 0 is added implicitly
    std::vector<double> mu_grid;
    std::vector<double> epsilon_grid;

    double lambda1 = 0.01;  // fixed penalties for race / mu-sweep / bound-audit
    double lambda2 = 0.1;
    double admm_rho = 1.0;
    double t_scale = 0.99;  // t = t_scale * 4 mu / (3 ||D_2||)
    double sfista_smoothing = 1e-4;
    double ml_mu = 0.0;     // 0 -> 0.99 / ||Q||
    int max_iter = 20000;
    double reference_residual = 1e-10;
    std::string out_dir = ".";
};

ExperimentConfig parse_experiment_config(const std::filesystem::path& path);

/// Runs `fn(0..count-1)`; parallelism capped by MLBP_THREADS (default: all cores).
void parallel_for(int count, const std::function<void(int)>& fn);

struct LambdaSweepRow {
    double lambda2;
    double err2_bp, err1_bp;   // lambda_1 = 0 baseline
    double err2_ml, err1_ml;   // best lambda_1 > 0
    double best_lambda1;
};

std::vector<LambdaSweepRow> run_lambda_sweep(const ExperimentConfig& cfg);

struct SolverRaceResult {
    double f_opt;
    Vec reference;
    std::vector<std::string> solver_names;
    std::vector<Trace> traces;
};

SolverRaceResult run_solver_race(const ExperimentConfig& cfg);

struct MuSweepRow {
    double mu, t;
    double gap_ista, gap_fista;
    int iters_ista, iters_fista;
};

std::vector<MuSweepRow> run_mu_sweep(const ExperimentConfig& cfg);

struct BoundAuditRow {
    std::uint64_t seed;
    double mu, epsilon, t;
    double gap;    // F(alpha) - F_opt on the ball-constrained problem
    double bound;  // eta*eps + (beta + kappa*t)*mu
    double slack;  // bound - gap
};

struct BoundAuditResult {
    std::vector<BoundAuditRow> rows;
    bool pass;  // slack >= -1e-6 everywhere
};

BoundAuditResult run_bound_audit(const ExperimentConfig& cfg);

/// Domain radius heuristic: twice the norm of a high-accuracy splitting
/// solution of the unconstrained problem.
double default_theorem_radius(const MultiLayerModel& model, const Vec& y);

/// Dispatch on cfg.kind, write CSV/SVG outputs into cfg.out_dir.
/// Returns the process exit code (0 ok, 3 audit FAIL).
int run_experiment(const ExperimentConfig& cfg);

}  // namespace mlbp
