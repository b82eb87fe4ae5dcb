#pragma once

#include <filesystem>
#include <vector>

#include "mlbp/linalg.hpp"
#include "mlbp/prox.hpp"
#include "mlbp/types.hpp"

namespace mlbp {

/// Problem instance: ordered dictionaries D_1..D_L with per-layer l1 weights.
/// The chain must be dimension-compatible: cols(D_i) = rows(D_{i+1}).
struct MultiLayerModel {
    std::vector<Mat> dictionaries;
    std::vector<double> lambdas;
    bool nonnegative = false;
    double radius = kInf;

    int layers() const { return static_cast<int>(dictionaries.size()); }

    /// D_(i,L) = D_i ... D_L; i = L+1 yields the identity on the code space.
    Mat composed_from(int i) const;

    /// Dimension of the innermost code gamma_L.
    Index code_dim() const { return dictionaries.back().cols(); }

    /// Prox description of the innermost penalty lambda_L (plus ball / sign
    /// constraints); this is the g_2 of the two-layer analysis.
    ProxSpec inner_prox() const { return ProxSpec(lambdas.back(), nonnegative, radius); }
};

/// Validates dimensions and returns warnings (currently: the ill-posed
/// combination lambda_L = 0 with some earlier lambda_i > 0).
std::vector<std::string> validate_model(const MultiLayerModel& model);

/// Convenience constructor that validates and prints warnings to stderr.
MultiLayerModel make_model(std::vector<Mat> dictionaries, std::vector<double> lambdas,
                           bool nonnegative = false, double radius = kInf);

/// f(gamma_1) = 1/2 gamma_1^T Q gamma_1 + b^T gamma_1 + c with Q = D_1^T D_1,
/// b = -D_1^T y, c = 1/2 ||y||^2, so that f(gamma_1) = 1/2 ||y - D_1 gamma_1||^2.
struct QuadraticData {
    Mat Q;
    Vec b;
    double c = 0.0;
};

QuadraticData make_quadratic(const Mat& D1, const Vec& y);

/// Constants of the suboptimality bound for the two-layer problem.
struct TheoremConstants {
    double M, R, R1, lg1, lg2, eta, beta, kappa, C;
};

/// Full multi-layer objective
///   1/2 ||y - D_(1,L) gamma||^2 + sum_{i<L} lambda_i ||D_(i+1,L) gamma||_1
///     + lambda_L ||gamma||_1,
/// +inf outside the ball when the radius is finite (or off the nonnegative
/// orthant when that mode is on).
double objective(const MultiLayerModel& model, const Vec& y, const Vec& gamma);

/// G^{f,g1}_{1/mu}(gamma_1) = (1/mu) [gamma_1 - prox_{mu g1}(gamma_1 - mu grad f)].
/// grad f = Q gamma_1 + b; the prox is (nonneg) soft thresholding at mu*lambda1.
Vec gradient_mapping(const QuadraticData& quad, double lambda1, double mu,
                     const Vec& gamma1, bool nonnegative = false);

struct FixedPointResult {
    double residual;  // (1/t) || gamma_2 - alpha ||
    Vec alpha;        // prox_{t g2}(gamma_2 - t D_2^T G(D_2 gamma_2))
};

/// Displacement of one inner-outer update step, scaled by 1/t. Zero exactly
/// at fixed points of the two-layer iteration. Two-layer models only.
FixedPointResult fixed_point_residual(const MultiLayerModel& model, const Vec& y,
                                      double mu, double t, const Vec& gamma2);

/// Computes every constant of the suboptimality bound for a finite domain
/// radius R. Two-layer models only.
TheoremConstants theorem_constants(const MultiLayerModel& model, const Vec& y, double R);

/// ||estimate - truth|| / ||truth||; falls back to ||estimate|| at truth = 0.
double recovery_error(const Vec& estimate, const Vec& truth);

// JSON + CSV serialization of a model instance. save_model writes
// <dir>/model.json plus one D<i>.csv per layer; load_model resolves the CSV
// references relative to the JSON file.
void save_model(const MultiLayerModel& model, const std::filesystem::path& dir);
MultiLayerModel load_model(const std::filesystem::path& json_path);

}  // namespace mlbp
