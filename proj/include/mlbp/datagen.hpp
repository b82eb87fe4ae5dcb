#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "mlbp/model.hpp"
#include "mlbp/types.hpp"

namespace mlbp {

/// Counter-based SplitMix64 stream: draw i of seed s is mix64(s + (i+1) * PHI),
/// where mix64 is the SplitMix64 finalizer. Streams are a pure function of
/// (seed, counter), so fixtures are portable across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double normal();   // standard normal via Box-Muller

    /// Child stream for cell `index` of a parallel grid; independent of the
    /// parent's position.
    Rng child(std::uint64_t index) const;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

struct InstanceSpec {
    int n, m1, m2;
    int s1, s2;
    double snr;        // linear power ratio ||x||^2 / ||w||^2; +inf = noiseless
    bool snr_is_db = false;
    std::uint64_t seed = 0;

    double snr_linear() const;
};

struct GeneratedInstance {
    Mat D1, D2;
    Vec gamma2_true, gamma1_true, x_clean, y_noisy, noise;
};

/// i.i.d. standard-normal dictionaries with unit-norm columns.
std::pair<Mat, Mat> gen_dictionaries(int n, int m1, int m2, std::uint64_t seed);

/// Representations consistent with the two-layer sparse model: gamma_2 is
/// s2-sparse and gamma_1 = D_2 gamma_2 is exactly s1-sparse. The support
/// values of gamma_2 are sampled from the nullspace of D_2 restricted to the
/// target zero rows and the chosen support columns, so the cosparsity pattern
/// holds by construction. Requires s2 > m1 - s1.
std::pair<Vec, Vec> gen_mlcsc_signal(const Mat& D2, int s1, int s2, std::uint64_t seed);

/// y = x + w with w Gaussian scaled so ||x||^2 / ||w||^2 equals snr exactly.
std::pair<Vec, Vec> add_noise_snr(const Vec& x, double snr_linear, std::uint64_t seed);

GeneratedInstance generate_instance(const InstanceSpec& spec);

/// Count of entries with magnitude above the numerical-zero threshold.
int count_nonzeros(const Vec& v, double tol = kZeroTol);

// Directory layout: spec.json, D1.csv, D2.csv, gamma2.csv, y.csv.
void save_instance(const InstanceSpec& spec, const GeneratedInstance& inst,
                   const std::filesystem::path& dir);
std::pair<InstanceSpec, GeneratedInstance> load_instance(const std::filesystem::path& dir);

InstanceSpec load_instance_spec(const std::filesystem::path& json_path);

}  // namespace mlbp
