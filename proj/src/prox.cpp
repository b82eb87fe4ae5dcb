#include "mlbp/prox.hpp"

#include <cmath>

namespace mlbp {

Vec soft_threshold(const Vec& x, double tau) {
    if (tau < 0) throw std::invalid_argument("soft_threshold: tau must be >= 0");
    return x.array().sign() * (x.array().abs() - tau).max(0.0);
}

Vec nonneg_soft_threshold(const Vec& x, double tau) {
    if (tau < 0) throw std::invalid_argument("nonneg_soft_threshold: tau must be >= 0");
    return (x.array() - tau).max(0.0);
}

Vec prox_l1_ball(const Vec& x, double tau, double radius) {
    if (tau < 0) throw std::invalid_argument("prox_l1_ball: tau must be >= 0");
    if (!(radius > 0)) throw std::invalid_argument("prox_l1_ball: radius must be positive");
    Vec z = soft_threshold(x, tau);
    if (std::isinf(radius)) return z;
    double n = z.norm();
    if (n > radius) z *= radius / n;
    return z;
}

MoreauEnvelope moreau_envelope_l1(const Vec& x, double lambda, double mu) {
    if (lambda < 0) throw std::invalid_argument("moreau_envelope_l1: lambda must be >= 0");
    if (!(mu > 0)) throw std::invalid_argument("moreau_envelope_l1: mu must be positive");
    const double knee = lambda * mu;
    double value = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
        double a = std::abs(x[j]);
        value += (a <= knee) ? a * a / (2.0 * mu) : lambda * a - lambda * knee / 2.0;
    }
    Vec grad = (x - soft_threshold(x, knee)) / mu;
    return {value, std::move(grad)};
}

ProxSpec::ProxSpec(double weight, bool nonneg, double r)
    : penalty_weight(weight), nonnegative(nonneg), radius(r) {
    if (penalty_weight < 0) throw std::invalid_argument("ProxSpec: penalty_weight must be >= 0");
    if (!(radius > 0)) throw std::invalid_argument("ProxSpec: radius must be positive");
}

Vec ProxSpec::apply(const Vec& x, double scale) const {
    if (scale < 0) throw std::invalid_argument("ProxSpec::apply: scale must be >= 0");
    const double tau = scale * penalty_weight;
    Vec z = nonnegative ? nonneg_soft_threshold(x, tau) : soft_threshold(x, tau);
    if (!std::isinf(radius)) {
        double n = z.norm();
        if (n > radius) z *= radius / n;
    }
    return z;
}

double ProxSpec::value(const Vec& x) const {
    if (nonnegative && (x.array() < 0.0).any()) return kInf;
    if (!std::isinf(radius)) {
        // Tiny slack so iterates radially projected onto the ball do not
        // fall outside by one rounding ulp.
        if (x.norm() > radius * (1.0 + 1e-12)) return kInf;
    }
    return penalty_weight * x.lpNorm<1>();
}

}  // namespace mlbp
