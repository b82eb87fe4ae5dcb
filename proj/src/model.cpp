#include "mlbp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

namespace mlbp {

Mat MultiLayerModel::composed_from(int i) const {
    const int L = layers();
    if (i == L + 1) return Mat::Identity(code_dim(), code_dim());
    return compose_dictionaries(dictionaries, i, L);
}

std::vector<std::string> validate_model(const MultiLayerModel& model) {
    std::vector<std::string> warnings;
    const int L = model.layers();
    if (L == 0) throw std::invalid_argument("model: needs at least one dictionary");
    if (static_cast<int>(model.lambdas.size()) != L)
        throw std::invalid_argument("model: lambdas length must equal layer count");
    for (int i = 0; i + 1 < L; ++i)
        if (model.dictionaries[i].cols() != model.dictionaries[i + 1].rows())
            throw DimensionError("model: dictionary chain breaks after layer " +
                                 std::to_string(i + 1));
    for (double l : model.lambdas)
        if (l < 0) throw std::invalid_argument("model: lambdas must be >= 0");
    if (!(model.radius > 0))
        throw std::invalid_argument("model: radius must be positive");

    bool inner_penalty = std::any_of(model.lambdas.begin(), model.lambdas.end() - 1,
                                     [](double l) { return l > 0; });
    if (L > 1 && model.lambdas.back() == 0.0 && inner_penalty)
        warnings.push_back(
            "lambda_L = 0 with a positive intermediate lambda: the problem may be "
            "ill-posed when the last dictionary has a nontrivial kernel");
    return warnings;
}

MultiLayerModel make_model(std::vector<Mat> dictionaries, std::vector<double> lambdas,
                           bool nonnegative, double radius) {
    MultiLayerModel m{std::move(dictionaries), std::move(lambdas), nonnegative, radius};
    for (const auto& w : validate_model(m)) std::cerr << "mlbp: warning: " << w << "\n";
    return m;
}

QuadraticData make_quadratic(const Mat& D1, const Vec& y) {
    if (D1.rows() != y.size())
        throw DimensionError("make_quadratic: D1 rows must match y dim");
    QuadraticData q;
    q.Q = D1.transpose() * D1;
    q.b = -(D1.transpose() * y);
    q.c = 0.5 * y.squaredNorm();
    return q;
}

double objective(const MultiLayerModel& model, const Vec& y, const Vec& gamma) {
    const int L = model.layers();
    if (gamma.size() != model.code_dim())
        throw DimensionError("objective: gamma dim must match cols(D_L)");
    if (model.nonnegative && (gamma.array() < 0.0).any()) return kInf;
    if (!std::isinf(model.radius) && gamma.norm() > model.radius * (1.0 + 1e-12))
        return kInf;

    // Walk the chain right to left so each intermediate product is formed once.
    Vec cur = gamma;
    double penalties = model.lambdas[L - 1] * gamma.lpNorm<1>();
    for (int i = L; i >= 1; --i) {
        cur = model.dictionaries[i - 1] * cur;
        if (i >= 2) penalties += model.lambdas[i - 2] * cur.lpNorm<1>();
    }
    return 0.5 * (y - cur).squaredNorm() + penalties;
}

Vec gradient_mapping(const QuadraticData& quad, double lambda1, double mu,
                     const Vec& gamma1, bool nonnegative) {
    if (!(mu > 0)) throw std::invalid_argument("gradient_mapping: mu must be positive");
    Vec grad = quad.Q * gamma1 + quad.b;
    Vec forward = gamma1 - mu * grad;
    Vec prox = nonnegative ? nonneg_soft_threshold(forward, mu * lambda1)
                           : soft_threshold(forward, mu * lambda1);
    return (gamma1 - prox) / mu;
}

FixedPointResult fixed_point_residual(const MultiLayerModel& model, const Vec& y,
                                      double mu, double t, const Vec& gamma2) {
    if (model.layers() != 2)
        throw std::invalid_argument("fixed_point_residual: defined for two-layer models");
    if (!(t > 0)) throw std::invalid_argument("fixed_point_residual: t must be positive");
    const Mat& D2 = model.dictionaries[1];
    QuadraticData quad = make_quadratic(model.dictionaries[0], y);
    Vec gamma1 = D2 * gamma2;
    Vec g = gradient_mapping(quad, model.lambdas[0], mu, gamma1, model.nonnegative);
    Vec alpha = model.inner_prox().apply(gamma2 - t * (D2.transpose() * g), t);
    double residual = (gamma2 - alpha).norm() / t;
    return {residual, std::move(alpha)};
}

TheoremConstants theorem_constants(const MultiLayerModel& model, const Vec& y, double R) {
    if (model.layers() != 2)
        throw std::invalid_argument("theorem_constants: defined for two-layer models");
    if (!(R > 0) || std::isinf(R))
        throw std::invalid_argument("theorem_constants: R must be finite and positive");

    const Mat& D1 = model.dictionaries[0];
    const Mat& D2 = model.dictionaries[1];
    const double lambda1 = model.lambdas[0];
    const double lambda2 = model.lambdas[1];

    QuadraticData quad = make_quadratic(D1, y);
    const double nQ = spectral_norm(quad.Q);
    const double nD2 = spectral_norm(D2);
    const double nb = quad.b.norm();

    TheoremConstants k;
    k.R = R;
    k.R1 = nD2 * R;
    k.M = nQ * k.R1 + nb;
    // l1 is sqrt(dim)-Lipschitz w.r.t. the Euclidean norm, scaled by lambda.
    k.lg1 = lambda1 * std::sqrt(static_cast<double>(D1.cols()));
    k.lg2 = lambda2 * std::sqrt(static_cast<double>(D2.cols()));
    k.eta = 2.0 * R;
    k.beta = 2.0 * R * nD2 * nQ * (k.M + k.lg1) + nQ * nQ * k.R1 * k.R1 +
             2.0 * nb * nQ * k.R1 + k.lg1 * k.lg1 + 2.0 * k.lg1 * k.M;
    k.kappa = nD2 * (nD2 * (k.M + k.lg1) + k.lg2) * nQ * (k.M + k.lg1);
    k.C = 0.5 * k.R1 * k.R1 * nQ * nQ + nb * nQ * k.R1 + 0.5 * k.lg1 * k.lg1 +
          k.lg1 * k.M;
    return k;
}

double recovery_error(const Vec& estimate, const Vec& truth) {
    if (estimate.size() != truth.size())
        throw DimensionError("recovery_error: dimension mismatch");
    double tn = truth.norm();
    if (tn == 0.0) return estimate.norm();
    return (estimate - truth).norm() / tn;
}

void save_model(const MultiLayerModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["layers"] = model.layers();
    j["lambdas"] = model.lambdas;
    j["nonnegative"] = model.nonnegative;
    j["radius"] = std::isinf(model.radius) ? nlohmann::json("inf")
                                           : nlohmann::json(model.radius);
    nlohmann::json dicts = nlohmann::json::array();
    for (int i = 0; i < model.layers(); ++i) {
        std::string name = "D" + std::to_string(i + 1) + ".csv";
        save_matrix_csv(dir / name, model.dictionaries[i]);
        dicts.push_back({{"file", name},
                         {"rows", model.dictionaries[i].rows()},
                         {"cols", model.dictionaries[i].cols()}});
    }
    j["dictionaries"] = dicts;
    std::ofstream out(dir / "model.json");
    out << j.dump(2) << "\n";
}

MultiLayerModel load_model(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("cannot open: " + json_path.string());
    nlohmann::json j;
    in >> j;
    MultiLayerModel m;
    m.lambdas = j.at("lambdas").get<std::vector<double>>();
    m.nonnegative = j.value("nonnegative", false);
    if (j.contains("radius") && j["radius"].is_number())
        m.radius = j["radius"].get<double>();
    auto base = json_path.parent_path();
    for (const auto& d : j.at("dictionaries")) {
        Mat D = load_matrix_csv(base / d.at("file").get<std::string>());
        if (D.rows() != d.at("rows").get<Index>() || D.cols() != d.at("cols").get<Index>())
            throw std::runtime_error("model CSV dims disagree with model.json");
        m.dictionaries.push_back(std::move(D));
    }
    for (const auto& w : validate_model(m)) std::cerr << "mlbp: warning: " << w << "\n";
    return m;
}

}  // namespace mlbp
