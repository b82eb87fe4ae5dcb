#include "mlbp/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace mlbp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double dist_to(const Vec* ref, const Vec& x) {
    return ref ? (x - *ref).norm() : std::numeric_limits<double>::quiet_NaN();
}

void finish_layers(Trace& trace, const MultiLayerModel& model) {
    const int L = model.layers();
    trace.layer_gammas.assign(L, Vec());
    trace.layer_gammas[L - 1] = trace.final_gamma;
    for (int i = L - 1; i >= 1; --i)
        trace.layer_gammas[i - 1] = model.dictionaries[i] * trace.layer_gammas[i];
}

// Proximal gradient on 1/2 x^T G x - h^T x + penalty, grad = G x - h.
// Runs at most K iterations, stops early when the displacement drops to
// stop_disp; returns the last displacement.
double prox_grad_gram(const Mat& G, const Vec& h, const ProxSpec& prox, double step,
                      int K, bool momentum, Vec& x, double stop_disp) {
    Vec z = x;
    double tk = 1.0;
    double disp = kInf;
    for (int k = 0; k < K; ++k) {
        Vec x_new = prox.apply(z - step * (G * z - h), step);
        disp = (x_new - x).norm();
        if (momentum) {
            double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
            z = x_new + ((tk - 1.0) / t_next) * (x_new - x);
            tk = t_next;
        } else {
            z = x_new;
        }
        x = std::move(x_new);
        if (disp <= stop_disp) break;
    }
    return disp;
}

Trace single_layer(const Mat& D, const Vec& y, double lambda, double step, int K,
                   bool momentum, const TraceOpts& opts) {
    if (!(step > 0)) throw std::invalid_argument("ista/fista: step must be positive");
    if (lambda < 0) throw std::invalid_argument("ista/fista: lambda must be >= 0");
    if (D.rows() != y.size()) throw DimensionError("ista/fista: D rows must match y dim");

    auto start = Clock::now();
    auto F = [&](const Vec& g) {
        return 0.5 * (y - D * g).squaredNorm() + lambda * g.lpNorm<1>();
    };

    Trace trace;
    Vec x = Vec::Zero(D.cols());
    Vec z = x;
    double tk = 1.0;
    trace.records.push_back({0, F(x), seconds_since(start), kInf, dist_to(opts.reference, x)});
    trace.stop_reason = "max_iter";
    for (int k = 0; k < K; ++k) {
        Vec x_new = soft_threshold(z - step * (D.transpose() * (D * z - y)), step * lambda);
        double residual = (x_new - x).norm() / step;
        if (momentum) {
            double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
            z = x_new + ((tk - 1.0) / t_next) * (x_new - x);
            tk = t_next;
        } else {
            z = x_new;
        }
        x = std::move(x_new);
        trace.records.push_back(
            {k + 1, F(x), seconds_since(start), residual, dist_to(opts.reference, x)});
        if (opts.stop_residual > 0 && residual <= opts.stop_residual) {
            trace.stop_reason = "residual";
            break;
        }
    }
    trace.final_gamma = std::move(x);
    return trace;
}

void require_two_layers(const MultiLayerModel& model, const char* who) {
    if (model.layers() != 2)
        throw std::invalid_argument(std::string(who) + ": two-layer models only");
}

}  // namespace

void Trace::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "k,objective,time_s,residual,dist_ref\n";
    for (const auto& r : records)
        out << r.k << ',' << format_double(r.objective) << ',' << format_double(r.time_s)
            << ',' << format_double(r.residual) << ',' << format_double(r.dist_ref)
            << '\n';
}

Trace ista(const Mat& D, const Vec& y, double lambda, double step, int K,
           const TraceOpts& opts) {
    return single_layer(D, y, lambda, step, K, false, opts);
}

Trace fista(const Mat& D, const Vec& y, double lambda, double step, int K,
            const TraceOpts& opts) {
    return single_layer(D, y, lambda, step, K, true, opts);
}

double default_outer_step(double mu, double norm_D2, double t_scale) {
    if (!(mu > 0) || !(norm_D2 > 0))
        throw std::invalid_argument("default_outer_step: mu and ||D_2|| must be positive");
    if (!(t_scale > 0) || t_scale >= 1)
        throw std::invalid_argument("default_outer_step: t_scale must lie in (0, 1)");
    double range = 4.0 * mu / (3.0 * norm_D2);
    double stable = 3.0 * mu / (4.0 * norm_D2 * norm_D2);
    return t_scale * std::min(range, stable);
}

std::vector<double> default_mu_per_layer(const MultiLayerModel& model) {
    std::vector<double> mus;
    for (const Mat& D : model.dictionaries) {
        double s = spectral_norm(D);
        mus.push_back(0.99 / (s * s));
    }
    return mus;
}

namespace {

// Shared core of the two canonical two-layer updates. Computes one update of
// gamma_2 from the extrapolation point z (z = gamma_2 for the plain version).
struct CanonicalStepper {
    const Mat& D1;
    const Mat& D2;
    const Vec& y;
    double mu, t, lambda1;
    ProxSpec outer;
    bool nonneg;

    Vec step(const Vec& z) const {
        Vec gamma1 = D2 * z;
        Vec forward = gamma1 - mu * (D1.transpose() * (D1 * gamma1 - y));
        Vec inner = nonneg ? nonneg_soft_threshold(forward, mu * lambda1)
                           : soft_threshold(forward, mu * lambda1);
        return outer.apply(z - (t / mu) * (D2.transpose() * (gamma1 - inner)), t);
    }
};

Trace canonical_run(const MultiLayerModel& model, const Vec& y, double mu, double t,
                    int K, bool momentum, const TraceOpts& opts, const char* who) {
    require_two_layers(model, who);
    if (!(mu > 0) || !(t > 0))
        throw std::invalid_argument(std::string(who) + ": mu and t must be positive");

    auto start = Clock::now();
    CanonicalStepper stepper{model.dictionaries[0], model.dictionaries[1], y,
                             mu,       t,           model.lambdas[0],
                             model.inner_prox(),    model.nonnegative};

    Trace trace;
    Vec x = Vec::Zero(model.code_dim());
    Vec z = x;
    double tk = 1.0;
    trace.records.push_back(
        {0, objective(model, y, x), seconds_since(start), kInf, dist_to(opts.reference, x)});
    trace.stop_reason = "max_iter";
    for (int k = 0; k < K; ++k) {
        Vec x_new = stepper.step(z);
        // Plain: ||gamma^{k+1} - gamma^k|| / t. Momentum: ||z^k - gamma^{k+1}|| / t.
        double residual = (momentum ? (z - x_new).norm() : (x - x_new).norm()) / t;
        if (momentum) {
            double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
            z = x_new + ((tk - 1.0) / t_next) * (x_new - x);
            tk = t_next;
        } else {
            z = x_new;
        }
        x = std::move(x_new);
        trace.records.push_back({k + 1, objective(model, y, x), seconds_since(start),
                                 residual, dist_to(opts.reference, x)});
        if (opts.stop_residual > 0 && residual <= opts.stop_residual) {
            trace.stop_reason = "residual";
            break;
        }
    }
    trace.final_gamma = std::move(x);
    finish_layers(trace, model);
    return trace;
}

Trace layered_run(const MultiLayerModel& model, const Vec& y, const SolverParams& params,
                  int K, bool momentum, const TraceOpts& opts_in, const char* who) {
    const int L = model.layers();
    if (model.dictionaries[0].rows() != y.size())
        throw DimensionError(std::string(who) + ": D_1 rows must match y dim");
    std::vector<double> mus =
        params.mu_per_layer.empty() ? default_mu_per_layer(model) : params.mu_per_layer;
    if (static_cast<int>(mus.size()) != L)
        throw std::invalid_argument(std::string(who) + ": need one mu per layer");
    for (double m : mus)
        if (!(m > 0)) throw std::invalid_argument(std::string(who) + ": mu_i must be positive");

    TraceOpts opts = opts_in;
    if (opts.stop_residual == 0.0) opts.stop_residual = params.stop_residual;

    auto start = Clock::now();
    ProxSpec inner_prox = model.inner_prox();
    auto layer_threshold = [&](const Vec& v, int i) {  // i is 0-based layer index
        if (i == L - 1) return inner_prox.apply(v, mus[i]);
        double tau = mus[i] * model.lambdas[i];
        return model.nonnegative ? nonneg_soft_threshold(v, tau) : soft_threshold(v, tau);
    };

    Trace trace;
    Vec x = Vec::Zero(model.code_dim());
    Vec z = x;
    double tk = 1.0;
    trace.records.push_back(
        {0, objective(model, y, x), seconds_since(start), kInf, dist_to(opts.reference, x)});
    trace.stop_reason = "max_iter";
    for (int k = 0; k < K; ++k) {
        // hats[i] = D_(i+2,L) * point, i.e. the current estimate of layer i+1.
        std::vector<Vec> hats(L);
        hats[L - 1] = momentum ? z : x;
        for (int i = L - 2; i >= 0; --i) hats[i] = model.dictionaries[i + 1] * hats[i + 1];

        Vec prev = y;
        Vec x_new;
        for (int i = 0; i < L; ++i) {
            const Mat& Di = model.dictionaries[i];
            Vec upd = layer_threshold(
                hats[i] - mus[i] * (Di.transpose() * (Di * hats[i] - prev)), i);
            prev = upd;
            if (i == L - 1) x_new = std::move(upd);
        }

        double residual =
            (momentum ? (z - x_new).norm() : (x - x_new).norm()) / mus[L - 1];
        if (momentum) {
            double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
            z = x_new + ((tk - 1.0) / t_next) * (x_new - x);
            tk = t_next;
        }
        x = std::move(x_new);
        trace.records.push_back({k + 1, objective(model, y, x), seconds_since(start),
                                 residual, dist_to(opts.reference, x)});
        if (opts.stop_residual > 0 && residual <= opts.stop_residual) {
            trace.stop_reason = "residual";
            break;
        }
    }
    trace.final_gamma = std::move(x);
    finish_layers(trace, model);
    return trace;
}

}  // namespace

Trace ml_ista_canonical(const MultiLayerModel& model, const Vec& y, double mu, double t,
                        int K, const TraceOpts& opts) {
    return canonical_run(model, y, mu, t, K, false, opts, "ml_ista_canonical");
}

Trace ml_fista_canonical(const MultiLayerModel& model, const Vec& y, double mu, double t,
                         int K, const TraceOpts& opts) {
    return canonical_run(model, y, mu, t, K, true, opts, "ml_fista_canonical");
}

Trace ml_ista_layered(const MultiLayerModel& model, const Vec& y,
                      const SolverParams& params, int K, const TraceOpts& opts) {
    return layered_run(model, y, params, K, false, opts, "ml_ista_layered");
}

Trace ml_fista(const MultiLayerModel& model, const Vec& y, const SolverParams& params,
               int K, const TraceOpts& opts) {
    return layered_run(model, y, params, K, true, opts, "ml_fista");
}

Trace admm(const MultiLayerModel& model, const Vec& y, const SolverParams& params, int K,
           const TraceOpts& opts_in) {
    require_two_layers(model, "admm");
    const double rho = params.admm_rho;
    if (!(rho > 0)) throw std::invalid_argument("admm: rho must be positive");

    TraceOpts opts = opts_in;
    if (opts.stop_residual == 0.0) opts.stop_residual = params.stop_residual;

    auto start = Clock::now();
    const Mat& D1 = model.dictionaries[0];
    const Mat& D2 = model.dictionaries[1];
    const double lambda1 = model.lambdas[0];
    Mat A = D1 * D2;

    // gamma_2 subproblem Gram pieces are constant across outer iterations.
    Mat G = A.transpose() * A + rho * (D2.transpose() * D2);
    Vec Aty = A.transpose() * y;
    double inner_step = 1.0 / spectral_norm(G);
    ProxSpec inner_prox = model.inner_prox();

    Trace trace;
    Vec gamma2 = Vec::Zero(model.code_dim());
    Vec gamma1 = Vec::Zero(D2.rows());
    Vec u = Vec::Zero(D2.rows());
    trace.records.push_back({0, objective(model, y, gamma2), seconds_since(start), kInf,
                             dist_to(opts.reference, gamma2)});
    trace.stop_reason = "max_iter";
    int inner_failures = 0;
    for (int k = 0; k < K; ++k) {
        Vec h = Aty + rho * (D2.transpose() * (gamma1 + u));
        if (!params.warm_start) gamma2.setZero();
        Vec gamma2_prev = gamma2;
        double disp = prox_grad_gram(G, h, inner_prox, inner_step, params.admm_inner_iters,
                                     params.admm_inner_fista, gamma2,
                                     1e-14 * std::max(1.0, gamma2.norm()));
        if (disp > 0.1 * std::max(1.0, gamma2.norm())) ++inner_failures;

        Vec v = D2 * gamma2 - u;
        gamma1 = model.nonnegative ? nonneg_soft_threshold(v, lambda1 / rho)
                                   : soft_threshold(v, lambda1 / rho);
        u += rho * (gamma1 - D2 * gamma2);

        double residual =
            std::max((gamma1 - D2 * gamma2).norm(), (gamma2 - gamma2_prev).norm());
        trace.records.push_back({k + 1, objective(model, y, gamma2), seconds_since(start),
                                 residual, dist_to(opts.reference, gamma2)});
        if (opts.stop_residual > 0 && residual <= opts.stop_residual) {
            trace.stop_reason = "residual";
            break;
        }
    }
    if (inner_failures > 0)
        trace.warnings.push_back("inner solver left a non-negligible displacement in " +
                                 std::to_string(inner_failures) + " outer iteration(s)");
    trace.final_gamma = std::move(gamma2);
    finish_layers(trace, model);
    return trace;
}

Trace s_fista(const MultiLayerModel& model, const Vec& y, double smoothing_mu,
              double step, int K, const TraceOpts& opts) {
    require_two_layers(model, "s_fista");
    if (!(smoothing_mu > 0))
        throw std::invalid_argument("s_fista: smoothing must be positive");

    auto start = Clock::now();
    const Mat& D2 = model.dictionaries[1];
    const double lambda1 = model.lambdas[0];
    Mat A = model.dictionaries[0] * D2;
    Mat AtA = A.transpose() * A;
    Vec Aty = A.transpose() * y;
    if (step == 0.0) {
        double nD2 = spectral_norm(D2);
        step = 1.0 / (spectral_norm(AtA) + nD2 * nD2 / smoothing_mu);
    }
    if (!(step > 0)) throw std::invalid_argument("s_fista: step must be positive");
    ProxSpec outer = model.inner_prox();

    Trace trace;
    Vec x = Vec::Zero(model.code_dim());
    Vec z = x;
    double tk = 1.0;
    trace.records.push_back(
        {0, objective(model, y, x), seconds_since(start), kInf, dist_to(opts.reference, x)});
    trace.stop_reason = "max_iter";
    for (int k = 0; k < K; ++k) {
        Vec env_grad = moreau_envelope_l1(D2 * z, lambda1, smoothing_mu).gradient;
        Vec grad = AtA * z - Aty + D2.transpose() * env_grad;
        Vec x_new = outer.apply(z - step * grad, step);
        double residual = (x_new - x).norm() / step;
        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        z = x_new + ((tk - 1.0) / t_next) * (x_new - x);
        tk = t_next;
        x = std::move(x_new);
        trace.records.push_back({k + 1, objective(model, y, x), seconds_since(start),
                                 residual, dist_to(opts.reference, x)});
        if (opts.stop_residual > 0 && residual <= opts.stop_residual) {
            trace.stop_reason = "residual";
            break;
        }
    }
    trace.final_gamma = std::move(x);
    finish_layers(trace, model);
    return trace;
}

std::vector<Vec> layered_bp(const MultiLayerModel& model, const Vec& y,
                            const std::vector<double>& lambdas, int inner_K) {
    const int L = model.layers();
    if (static_cast<int>(lambdas.size()) != L)
        throw std::invalid_argument("layered_bp: need one lambda per layer");
    std::vector<Vec> estimates;
    Vec target = y;
    for (int i = 0; i < L; ++i) {
        const Mat& Di = model.dictionaries[i];
        double s = spectral_norm(Di);
        Trace t = fista(Di, target, lambdas[i], 1.0 / (s * s), inner_K);
        target = t.final_gamma;
        estimates.push_back(std::move(t.final_gamma));
    }
    return estimates;
}

Vec feed_forward(const MultiLayerModel& model, const Vec& y, std::vector<double> mus) {
    if (!model.nonnegative)
        throw std::invalid_argument("feed_forward: requires nonnegative mode");
    const int L = model.layers();
    if (mus.empty()) mus.assign(L, 1.0);
    if (static_cast<int>(mus.size()) != L)
        throw std::invalid_argument("feed_forward: need one mu per layer");
    Vec a = y;
    for (int i = 0; i < L; ++i)
        a = nonneg_soft_threshold(mus[i] * (model.dictionaries[i].transpose() * a),
                                  mus[i] * model.lambdas[i]);
    return a;
}

Vec ml_lista_step(const MlListaParams& params, const Vec& gamma2, const Vec& y) {
    if (params.W.size() != 2 || params.B.size() != 2 || params.lambdas.size() != 2)
        throw std::invalid_argument("ml_lista_step: needs two layers of W, B, lambda");
    const Mat& W1 = params.W[0];
    const Mat& W2 = params.W[1];
    const Mat& B1 = params.B[0];
    const Mat& B2 = params.B[1];
    if (B2.rows() != gamma2.size())
        throw DimensionError("ml_lista_step: B_2 rows must match gamma_2 dim");
    if (B1.cols() != y.size())
        throw DimensionError("ml_lista_step: B_1 cols must match y dim");

    Vec gamma1 = B2.transpose() * gamma2;
    Vec hat1 = soft_threshold(gamma1 - W1.transpose() * (W1 * gamma1) + B1 * y,
                              params.lambdas[0]);
    Vec out = soft_threshold(gamma2 - W2.transpose() * (W2 * gamma2) + B2 * hat1,
                             params.lambdas[1]);
    return out;
}

MlListaParams ml_lista_canonical_params(const MultiLayerModel& model, double mu1) {
    require_two_layers(model, "ml_lista_canonical_params");
    if (!(mu1 > 0)) throw std::invalid_argument("ml_lista_canonical_params: mu1 > 0");
    MlListaParams p;
    p.W = {std::sqrt(mu1) * model.dictionaries[0], model.dictionaries[1]};
    p.B = {mu1 * model.dictionaries[0].transpose(), model.dictionaries[1].transpose()};
    p.lambdas = {mu1 * model.lambdas[0], model.lambdas[1]};
    return p;
}

}  // namespace mlbp
