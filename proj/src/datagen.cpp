#include "mlbp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "mlbp/linalg.hpp"

namespace mlbp {

namespace {

constexpr std::uint64_t kPhi = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace

std::uint64_t Rng::next_u64() { return mix64(seed_ + (++counter_) * kPhi); }

double Rng::uniform() {
    // 53 random bits into [0, 1).
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (have_cached_) {
        have_cached_ = false;
        return cached_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
}

Rng Rng::child(std::uint64_t index) const { return Rng(mix64(seed_ ^ mix64(index + 1))); }

double InstanceSpec::snr_linear() const {
    return snr_is_db ? std::pow(10.0, snr / 10.0) : snr;
}

std::pair<Mat, Mat> gen_dictionaries(int n, int m1, int m2, std::uint64_t seed) {
    if (n <= 0 || m1 <= 0 || m2 <= 0)
        throw std::invalid_argument("gen_dictionaries: dims must be positive");
    Rng rng(seed);
    auto draw = [&](int rows, int cols) {
        Mat D(rows, cols);
        for (Index c = 0; c < cols; ++c)
            for (Index r = 0; r < rows; ++r) D(r, c) = rng.normal();
        for (Index c = 0; c < cols; ++c) D.col(c) /= D.col(c).norm();
        return D;
    };
    Mat D1 = draw(n, m1);
    Mat D2 = draw(m1, m2);
    return {std::move(D1), std::move(D2)};
}

namespace {

// First k elements of a Fisher-Yates shuffle over 0..m-1.
std::vector<int> sample_indices(int m, int k, Rng& rng) {
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(m - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace

std::pair<Vec, Vec> gen_mlcsc_signal(const Mat& D2, int s1, int s2, std::uint64_t seed) {
    const int m1 = static_cast<int>(D2.rows());
    const int m2 = static_cast<int>(D2.cols());
    if (s1 <= 0 || s1 > m1 || s2 <= 0 || s2 > m2)
        throw std::invalid_argument("gen_mlcsc_signal: sparsity out of range");
    const int zeros1 = m1 - s1;
    if (s2 <= zeros1)
        throw std::invalid_argument(
            "gen_mlcsc_signal: need s2 > m1 - s1 for a nontrivial nullspace");

    Rng rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<int> support2 = sample_indices(m2, s2, rng);
        std::vector<int> zero_rows = sample_indices(m1, zeros1, rng);
        std::sort(support2.begin(), support2.end());
        std::sort(zero_rows.begin(), zero_rows.end());

        Vec vals;
        if (zeros1 == 0) {
            vals = Vec(s2);
            for (int i = 0; i < s2; ++i) vals[i] = rng.normal();
        } else {
            Mat sub(zeros1, s2);
            for (int r = 0; r < zeros1; ++r)
                for (int c = 0; c < s2; ++c) sub(r, c) = D2(zero_rows[r], support2[c]);
            Eigen::FullPivLU<Mat> lu(sub);
            Mat kernel = lu.kernel();
            if (kernel.cols() == 0 || (kernel.cols() == 1 && kernel.isZero())) continue;
            Vec coeffs(kernel.cols());
            for (Index i = 0; i < coeffs.size(); ++i) coeffs[i] = rng.normal();
            vals = kernel * coeffs;
        }
        double n = vals.norm();
        if (n < kZeroTol) continue;
        vals /= n;
        if (vals.array().abs().minCoeff() < kZeroTol) continue;

        Vec gamma2 = Vec::Zero(m2);
        for (int i = 0; i < s2; ++i) gamma2[support2[i]] = vals[i];
        Vec gamma1 = D2 * gamma2;

        // The target zero rows vanish by construction; the remaining entries
        // must be genuinely nonzero for the sparsity count to be exact.
        bool ok = true;
        std::vector<bool> is_zero_row(m1, false);
        for (int r : zero_rows) is_zero_row[r] = true;
        for (int r = 0; r < m1 && ok; ++r) {
            if (is_zero_row[r])
                ok = std::abs(gamma1[r]) < kZeroTol;
            else
                ok = std::abs(gamma1[r]) >= kZeroTol;
        }
        if (!ok) continue;
        return {std::move(gamma2), std::move(gamma1)};
    }
    throw std::runtime_error("gen_mlcsc_signal: rejection budget exhausted");
}

std::pair<Vec, Vec> add_noise_snr(const Vec& x, double snr_linear, std::uint64_t seed) {
    if (!(snr_linear > 0)) throw std::invalid_argument("add_noise_snr: snr must be > 0");
    double xn = x.norm();
    if (xn == 0.0) throw std::invalid_argument("add_noise_snr: zero signal");
    if (std::isinf(snr_linear)) {
        Vec w = Vec::Zero(x.size());
        return {x, std::move(w)};
    }
    Rng rng(seed);
    Vec w(x.size());
    for (Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
    w *= xn / (std::sqrt(snr_linear) * w.norm());
    Vec y = x + w;
    return {std::move(y), std::move(w)};
}

GeneratedInstance generate_instance(const InstanceSpec& spec) {
    GeneratedInstance inst;
    // Independent sub-streams per stage, all derived from the spec seed.
    Rng root(spec.seed);
    auto [D1, D2] = gen_dictionaries(spec.n, spec.m1, spec.m2, root.child(1).next_u64());
    inst.D1 = std::move(D1);
    inst.D2 = std::move(D2);
    auto [g2, g1] =
        gen_mlcsc_signal(inst.D2, spec.s1, spec.s2, root.child(2).next_u64());
    inst.gamma2_true = std::move(g2);
    inst.gamma1_true = std::move(g1);
    inst.x_clean = inst.D1 * inst.gamma1_true;
    auto [y, w] = add_noise_snr(inst.x_clean, spec.snr_linear(), root.child(3).next_u64());
    inst.y_noisy = std::move(y);
    inst.noise = std::move(w);
    return inst;
}

int count_nonzeros(const Vec& v, double tol) {
    return static_cast<int>((v.array().abs() >= tol).count());
}

void save_instance(const InstanceSpec& spec, const GeneratedInstance& inst,
                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["n"] = spec.n;
    j["m1"] = spec.m1;
    j["m2"] = spec.m2;
    j["s1"] = spec.s1;
    j["s2"] = spec.s2;
    j["snr"] = spec.snr;
    j["snr_is_db"] = spec.snr_is_db;
    j["seed"] = spec.seed;
    std::ofstream(dir / "spec.json") << j.dump(2) << "\n";
    save_matrix_csv(dir / "D1.csv", inst.D1);
    save_matrix_csv(dir / "D2.csv", inst.D2);
    save_vector_csv(dir / "gamma2.csv", inst.gamma2_true);
    save_vector_csv(dir / "y.csv", inst.y_noisy);
}

InstanceSpec load_instance_spec(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("cannot open: " + json_path.string());
    nlohmann::json j;
    in >> j;
    InstanceSpec spec;
    spec.n = j.at("n");
    spec.m1 = j.at("m1");
    spec.m2 = j.at("m2");
    spec.s1 = j.at("s1");
    spec.s2 = j.at("s2");
    spec.snr = j.at("snr");
    spec.snr_is_db = j.value("snr_is_db", false);
    spec.seed = j.at("seed");
    return spec;
}

std::pair<InstanceSpec, GeneratedInstance> load_instance(
    const std::filesystem::path& dir) {
    InstanceSpec spec = load_instance_spec(dir / "spec.json");
    GeneratedInstance inst;
    inst.D1 = load_matrix_csv(dir / "D1.csv");
    inst.D2 = load_matrix_csv(dir / "D2.csv");
    inst.gamma2_true = load_vector_csv(dir / "gamma2.csv");
    inst.y_noisy = load_vector_csv(dir / "y.csv");
    inst.gamma1_true = inst.D2 * inst.gamma2_true;
    inst.x_clean = inst.D1 * inst.gamma1_true;
    inst.noise = inst.y_noisy - inst.x_clean;
    return {spec, inst};
}

}  // namespace mlbp
