#pragma once

#include "mlbp/types.hpp"

namespace mlbp {

/// Element-wise shrinkage: sign(x_j) * max(|x_j| - tau, 0).
Vec soft_threshold(const Vec& x, double tau);

/// One-sided variant: max(x_j - tau, 0), i.e. ReLU(x - tau * 1).
Vec nonneg_soft_threshold(const Vec& x, double tau);

/// Prox of tau*||.||_1 + indicator of the Euclidean ball of the given radius:
/// shrink first, then scale radially back onto the ball if needed.
/// radius may be +inf, in which case this is plain soft thresholding.
Vec prox_l1_ball(const Vec& x, double tau, double radius);

struct MoreauEnvelope {
    double value;
    Vec gradient;
};

/// Moreau envelope of lambda*||.||_1 with smoothness mu (sum of Huber terms)
/// and its gradient (x - soft_threshold(x, lambda*mu)) / mu.
MoreauEnvelope moreau_envelope_l1(const Vec& x, double lambda, double mu);

/// Penalty-side description of one l1 term: weight, optional sign constraint,
/// optional Euclidean ball. apply(x, scale) evaluates the prox of
/// scale * weight * ||.||_1 (+ indicator terms) at x.
struct ProxSpec {
    double penalty_weight = 0.0;
    bool nonnegative = false;
    double radius = kInf;

    ProxSpec() = default;
    ProxSpec(double weight, bool nonneg, double r);

    Vec apply(const Vec& x, double scale) const;

    /// Penalty value weight*||x||_1; +inf outside the ball / sign constraint.
    double value(const Vec& x) const;
};

}  // namespace mlbp
