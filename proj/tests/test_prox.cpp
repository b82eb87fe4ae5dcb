#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mlbp/prox.hpp"

using namespace mlbp;

namespace {

std::mt19937_64 gen(777);

Vec random_vec(int n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(gen);
    return v;
}

// Brute-force scalar prox oracle: argmin over a fine grid of
// 1/2 (z - x)^2 + tau |z|  (optionally restricted to z >= 0).
double grid_prox_1d(double x, double tau, bool nonneg) {
    double best_z = 0, best_f = 0.5 * x * x;
    double lo = nonneg ? 0.0 : -std::abs(x) - 1.0;
    double hi = std::abs(x) + 1.0;
    const int N = 2000000;
    for (int i = 0; i <= N; ++i) {
        double z = lo + (hi - lo) * i / N;
        double f = 0.5 * (z - x) * (z - x) + tau * std::abs(z);
        if (f < best_f) {
            best_f = f;
            best_z = z;
        }
    }
    return best_z;
}

double ball_objective(const Vec& z, const Vec& x, double tau) {
    return 0.5 * (z - x).squaredNorm() + tau * z.lpNorm<1>();
}

}  // namespace

TEST_CASE("soft_threshold matches the scalar grid oracle") {
    for (double x : {-2.3, -0.4, 0.0, 0.15, 1.7}) {
        for (double tau : {0.0, 0.3, 1.0}) {
            Vec v(1);
            v[0] = x;
            double got = soft_threshold(v, tau)[0];
            CHECK(got == doctest::Approx(grid_prox_1d(x, tau, false)).epsilon(1e-4));
        }
    }
}

TEST_CASE("soft_threshold closed form on pinned values") {
    Vec x(5);
    x << -2.0, -0.5, 0.0, 0.5, 2.0;
    Vec got = soft_threshold(x, 1.0);
    Vec want(5);
    want << -1.0, 0.0, 0.0, 0.0, 1.0;
    CHECK((got - want).norm() == doctest::Approx(0.0));
}

TEST_CASE("nonneg_soft_threshold matches the constrained grid oracle") {
    for (double x : {-1.2, 0.0, 0.4, 2.5}) {
        for (double tau : {0.0, 0.3, 1.0}) {
            Vec v(1);
            v[0] = x;
            double got = nonneg_soft_threshold(v, tau)[0];
            CHECK(got == doctest::Approx(grid_prox_1d(x, tau, true)).epsilon(1e-4));
            CHECK(got >= 0.0);
        }
    }
}

TEST_CASE("soft threshold is positively homogeneous: T_{c tau}(c x) = c T_tau(x)") {
    for (int trial = 0; trial < 100; ++trial) {
        Vec x = random_vec(8);
        double tau = 0.1 + 0.5 * trial / 100.0;
        for (double c : {0.5, 2.0, 7.3}) {
            Vec lhs = soft_threshold(c * x, c * tau);
            Vec rhs = c * soft_threshold(x, tau);
            CHECK((lhs - rhs).norm() == doctest::Approx(0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("soft threshold is non-expansive") {
    for (int trial = 0; trial < 500; ++trial) {
        Vec x = random_vec(12), y = random_vec(12);
        double tau = 0.01 + trial * 0.002;
        CHECK((soft_threshold(x, tau) - soft_threshold(y, tau)).norm() <=
              (x - y).norm() + 1e-14);
        CHECK((prox_l1_ball(x, tau, 1.5) - prox_l1_ball(y, tau, 1.5)).norm() <=
              (x - y).norm() + 1e-12);
    }
}

TEST_CASE("prox_l1_ball with infinite radius is plain soft thresholding") {
    Vec x = random_vec(10, 3.0);
    CHECK((prox_l1_ball(x, 0.4, kInf) - soft_threshold(x, 0.4)).norm() ==
          doctest::Approx(0.0));
}

TEST_CASE("prox_l1_ball lands in the ball and minimizes the penalized distance") {
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vec x = random_vec(6, 2.0);
        double tau = 0.2, R = 1.0;
        Vec z = prox_l1_ball(x, tau, R);
        CHECK(z.norm() <= R * (1 + 1e-12));
        double fz = ball_objective(z, x, tau);
        // No feasible perturbation may do better (local optimality of a convex
        // problem implies global optimality).
        for (int p = 0; p < 200; ++p) {
            Vec d(6);
            for (int i = 0; i < 6; ++i) d[i] = ud(gen);
            Vec w = z + 1e-4 * d;
            if (w.norm() > R) w *= R / w.norm();
            CHECK(ball_objective(w, x, tau) >= fz - 1e-9);
        }
    }
}

TEST_CASE("moreau envelope value matches the scalar infimum on a grid") {
    double lambda = 0.7, mu = 0.3;
    for (double x : {-1.8, -0.1, 0.0, 0.25, 2.4}) {
        Vec v(1);
        v[0] = x;
        double got = moreau_envelope_l1(v, lambda, mu).value;
        double best = kInf;
        const int N = 400000;
        for (int i = 0; i <= N; ++i) {
            double z = -3.0 + 6.0 * i / N;
            best = std::min(best,
                            lambda * std::abs(z) + (z - x) * (z - x) / (2.0 * mu));
        }
        CHECK(got == doctest::Approx(best).epsilon(1e-6));
    }
}

TEST_CASE("moreau envelope gradient matches central finite differences") {
    double lambda = 0.5, mu = 0.2;
    Vec x = random_vec(7, 2.0);
    // Keep away from the Huber knee |x_i| = lambda*mu where the second
    // derivative jumps and the FD error is larger.
    for (int i = 0; i < 7; ++i)
        if (std::abs(std::abs(x[i]) - lambda * mu) < 1e-2) x[i] += 0.05;
    Vec g = moreau_envelope_l1(x, lambda, mu).gradient;
    double h = 1e-6;
    for (int i = 0; i < 7; ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double fd = (moreau_envelope_l1(xp, lambda, mu).value -
                     moreau_envelope_l1(xm, lambda, mu).value) /
                    (2 * h);
        CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("moreau envelope sandwich: g - lambda^2 mu m / 2 <= M <= g") {
    double lambda = 0.9, mu = 0.15;
    for (int trial = 0; trial < 50; ++trial) {
        Vec x = random_vec(10);
        double M = moreau_envelope_l1(x, lambda, mu).value;
        double g = lambda * x.lpNorm<1>();
        CHECK(M <= g + 1e-12);
        CHECK(M >= g - lambda * lambda * mu * 10 / 2 - 1e-12);
    }
}

TEST_CASE("ProxSpec::apply composes threshold, sign constraint, and ball") {
    Vec x = random_vec(9, 2.0);
    ProxSpec plain(0.3, false, kInf);
    CHECK((plain.apply(x, 2.0) - soft_threshold(x, 0.6)).norm() == doctest::Approx(0.0));
    ProxSpec ball(0.3, false, 1.2);
    CHECK((ball.apply(x, 1.0) - prox_l1_ball(x, 0.3, 1.2)).norm() ==
          doctest::Approx(0.0));
    ProxSpec nn(0.3, true, kInf);
    Vec z = nn.apply(x, 1.0);
    CHECK(z.minCoeff() >= 0.0);
    CHECK((z - nonneg_soft_threshold(x, 0.3)).norm() == doctest::Approx(0.0));
}

TEST_CASE("ProxSpec::value is +inf off the constraint set") {
    ProxSpec ball(1.0, false, 1.0);
    Vec inside = Vec::Constant(4, 0.4);
    Vec outside = Vec::Constant(4, 10.0);
    CHECK(std::isfinite(ball.value(inside)));
    CHECK(ball.value(inside) == doctest::Approx(inside.lpNorm<1>()));
    CHECK(std::isinf(ball.value(outside)));
    ProxSpec nn(1.0, true, kInf);
    Vec neg = Vec::Constant(3, -0.1);
    CHECK(std::isinf(nn.value(neg)));
}
