#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlbp/model.hpp"
#include "mlbp/types.hpp"

namespace mlbp {

struct SolverParams {
    std::vector<double> mu_per_layer;  // empty -> per-layer default 0.99 / ||D_i^T D_i||
    double t = 0.0;                    // outer step; 0 -> default_outer_step(mu, ||D_2||)
    int max_iter = 1000;
    double stop_residual = 0.0;        // 0 disables the residual criterion
    double admm_rho = 1.0;
    bool admm_inner_fista = true;
    int admm_inner_iters = 50;
    double sfista_smoothing = 1e-3;
    bool warm_start = true;
};

struct TraceRecord {
    int k;
    double objective;
    double time_s;
    double residual;
    double dist_ref;  // nan when no reference was supplied
};

struct Trace {
    std::vector<TraceRecord> records;
    Vec final_gamma;              // innermost code gamma_L
    std::vector<Vec> layer_gammas;  // gamma_i = D_(i+1,L) gamma_L, i = 1..L
    std::string stop_reason;      // "residual" or "max_iter"
    std::vector<std::string> warnings;

    double final_objective() const { return records.back().objective; }
    double final_residual() const { return records.back().residual; }

    /// CSV with header k,objective,time_s,residual,dist_ref.
    void save_csv(const std::filesystem::path& path) const;
};

// Optional distance-to-reference column, shared by all solvers.
struct TraceOpts {
    const Vec* reference = nullptr;
    double stop_residual = 0.0;
};

/// Proximal gradient on 1/2||y - D gamma||^2 + lambda ||gamma||_1 from gamma = 0.
/// Residual column holds ||gamma^{k+1} - gamma^k|| / step.
Trace ista(const Mat& D, const Vec& y, double lambda, double step, int K,
           const TraceOpts& opts = {});

/// ista with Nesterov momentum, t_1 = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.
Trace fista(const Mat& D, const Vec& y, double lambda, double step, int K,
            const TraceOpts& opts = {});

/// Two-layer inner-outer thresholding in (mu, t) form:
///   gamma_1 = D_2 gamma_2
///   gamma_2 <- prox_{t g2}( gamma_2 - (t/mu) D_2^T (gamma_1 - T_{mu l1}(gamma_1
///                - mu D_1^T (D_1 gamma_1 - y))) ).
/// Residual column is the fixed-point residual ||gamma^{k+1} - gamma^k|| / t.
Trace ml_ista_canonical(const MultiLayerModel& model, const Vec& y, double mu, double t,
                        int K, const TraceOpts& opts = {});

/// Canonical two-layer form with momentum on gamma_2; the residual column is
/// ||z^k - gamma_2^{k+1}|| / t.
Trace ml_fista_canonical(const MultiLayerModel& model, const Vec& y, double mu, double t,
                         int K, const TraceOpts& opts = {});

/// Layer-recursive form for any L: per iteration, hat_gamma_i = D_(i+1,L) gamma_L,
/// gamma_0 = y, then sequentially
///   gamma_i <- T_{mu_i lambda_i}( hat_gamma_i - mu_i D_i^T (D_i hat_gamma_i - gamma_{i-1}) ).
/// For L = 2 this matches the canonical form under mu_1 = mu, mu_2 = t / mu_1
/// with lambda_2 rescaled to mu_1 * lambda_2.
/// Residual column is ||Delta gamma_L|| / mu_L.
Trace ml_ista_layered(const MultiLayerModel& model, const Vec& y,
                      const SolverParams& params, int K, const TraceOpts& opts = {});

/// Layered form with momentum applied to gamma_L only (z starts at 0).
Trace ml_fista(const MultiLayerModel& model, const Vec& y, const SolverParams& params,
               int K, const TraceOpts& opts = {});

/// Two-layer splitting on gamma_1 = D_2 gamma_2:
///   gamma_2: lasso subproblem (data + coupling term) by warm-started inner
///            ISTA/FISTA; gamma_1: T_{lambda_1/rho}(D_2 gamma_2 - u);
///   u <- u + rho (gamma_1 - D_2 gamma_2).
/// Residual column is max(||gamma_1 - D_2 gamma_2||, ||Delta gamma_2||).
Trace admm(const MultiLayerModel& model, const Vec& y, const SolverParams& params, int K,
           const TraceOpts& opts = {});

/// FISTA on the partially smoothed objective where lambda_1 ||D_2 .||_1 is
/// replaced by its Moreau envelope with the given smoothing parameter.
/// step = 0 picks 1 / (||A^T A|| + ||D_2||^2 / smoothing), A = D_1 D_2.
/// The objective column holds the true (unsmoothed) objective.
Trace s_fista(const MultiLayerModel& model, const Vec& y, double smoothing_mu,
              double step, int K, const TraceOpts& opts = {});

/// Sequential per-layer pursuit: gamma_i solves the single-layer problem
/// 1/2 ||gamma_{i-1} - D_i gamma||^2 + lambda_i ||gamma||_1 with gamma_0 = y.
/// Returns all layer estimates; in general gamma_{i-1} != D_i gamma_i.
std::vector<Vec> layered_bp(const MultiLayerModel& model, const Vec& y,
                            const std::vector<double>& lambdas, int inner_K);

/// One forward pass through the chain: a_i = ReLU(mu_i D_i^T a_{i-1} - mu_i lambda_i).
/// Equals the first iteration of the nonnegative layered update from zero; the
/// canonical first iterate with steps (mu, t) is (t/mu) times this pass run
/// with steps (mu, 1) and lambda_2 rescaled to mu lambda_2.
/// mus empty -> all ones. Requires nonnegative mode.
Vec feed_forward(const MultiLayerModel& model, const Vec& y,
                 std::vector<double> mus = {});

/// Reparameterized two-layer thresholding step with fixed factor matrices:
///   gamma_1 = B_2^T gamma_2
///   hat_gamma_1 = T_{l1}((I - W_1^T W_1) gamma_1 + B_1 y)
///   gamma_2'    = T_{l2}((I - W_2^T W_2) gamma_2 + B_2 hat_gamma_1).
struct MlListaParams {
    std::vector<Mat> W;  // W_1, W_2
    std::vector<Mat> B;  // B_1, B_2
    std::vector<double> lambdas;
};

Vec ml_lista_step(const MlListaParams& params, const Vec& gamma2, const Vec& y);

/// Factor choice reproducing one layered update with steps (mu1, 1):
/// W_1 = sqrt(mu1) D_1, B_1 = mu1 D_1^T, W_2 = D_2, B_2 = D_2^T,
/// thresholds (mu1 lambda_1, lambda_2). The step size multiplies both the
/// operator B and the threshold; placing it on only one of them does not
/// reproduce the thresholding update.
MlListaParams ml_lista_canonical_params(const MultiLayerModel& model, double mu1);

/// 0.99 / ||D_i^T D_i|| for each layer.
std::vector<double> default_mu_per_layer(const MultiLayerModel& model);

/// Default outer step for the two-layer iteration: t_scale times the stated
/// admissible range 4 mu / (3 ||D_2||), capped by the stability bound
/// 3 mu / (4 ||D_2||^2) that follows from the 4/(3 mu)-smoothness of the
/// smoothed data term (without the cap the iteration can diverge whenever
/// ||D_2|| > 9/16).
double default_outer_step(double mu, double norm_D2, double t_scale = 0.99);

}  // namespace mlbp
