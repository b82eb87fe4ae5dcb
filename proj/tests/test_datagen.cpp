#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mlbp/datagen.hpp"

using namespace mlbp;

TEST_CASE("rng streams are a pure function of (seed, counter)") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(43);
    CHECK(Rng(42).next_u64() != c.next_u64());
    // child streams are independent of the parent's position
    Rng parent(7);
    parent.next_u64();
    parent.next_u64();
    Rng child_late = parent.child(3);
    Rng child_early = Rng(7).child(3);
    CHECK(child_late.next_u64() == child_early.next_u64());
}

TEST_CASE("rng normal draws pass a coarse statistical check") {
    Rng rng(123);
    const int N = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < N; ++i) {
        double v = rng.normal();
        sum += v;
        sum2 += v * v;
    }
    double mean = sum / N;
    double var = sum2 / N - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(N)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng uniform stays in [0, 1)") {
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("dictionaries have exactly unit-norm columns") {
    auto [D1, D2] = gen_dictionaries(20, 30, 25, 99);
    REQUIRE(D1.rows() == 20);
    REQUIRE(D1.cols() == 30);
    REQUIRE(D2.rows() == 30);
    REQUIRE(D2.cols() == 25);
    for (Index j = 0; j < D1.cols(); ++j)
        CHECK(D1.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
    for (Index j = 0; j < D2.cols(); ++j)
        CHECK(D2.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dictionary entries look standard normal before normalization") {
    // With unit-norm columns of length n the entries have std ~= 1/sqrt(n).
    const int n = 400;
    auto [D1, D2] = gen_dictionaries(n, 50, 10, 1234);
    double mean = D1.mean();
    double std_dev = std::sqrt((D1.array() - mean).square().mean());
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n * 50)));
    CHECK(std_dev == doctest::Approx(1.0 / std::sqrt(n)).epsilon(0.05));
}

TEST_CASE("generated signals meet the exact sparsity/cosparsity pattern") {
    InstanceSpec spec{50, 70, 60, 42, 30, 10.0, false, 1};
    GeneratedInstance inst = generate_instance(spec);
    CHECK(count_nonzeros(inst.gamma2_true) == 30);
    CHECK(count_nonzeros(inst.gamma1_true) == 42);
    CHECK((inst.gamma1_true - inst.D2 * inst.gamma2_true).norm() < 1e-12);
    CHECK((inst.x_clean - inst.D1 * inst.gamma1_true).norm() < 1e-12);
    CHECK(inst.gamma2_true.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sparsity pattern holds across many seeds") {
    for (std::uint64_t seed = 2; seed < 12; ++seed) {
        InstanceSpec spec{50, 70, 60, 42, 30, 10.0, false, seed};
        GeneratedInstance inst = generate_instance(spec);
        CHECK(count_nonzeros(inst.gamma2_true) == 30);
        CHECK(count_nonzeros(inst.gamma1_true) == 42);
    }
}

TEST_CASE("infeasible cosparsity requests are rejected") {
    auto [D1, D2] = gen_dictionaries(50, 70, 60, 5);
    (void)D1;
    // s2 <= m1 - s1 leaves no nullspace to sample from
    CHECK_THROWS_AS(gen_mlcsc_signal(D2, 10, 30, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_mlcsc_signal(D2, 0, 30, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_mlcsc_signal(D2, 10, 100, 1), std::invalid_argument);
}

TEST_CASE("add_noise_snr hits the requested power ratio exactly") {
    Rng rng(77);
    Vec x(40);
    for (Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
    for (double snr : {1.0, 10.0, 100.0}) {
        auto [y, w] = add_noise_snr(x, snr, 5);
        CHECK((y - x - w).norm() < 1e-14);
        CHECK(x.squaredNorm() / w.squaredNorm() == doctest::Approx(snr).epsilon(1e-12));
    }
    auto [y_inf, w_inf] = add_noise_snr(x, kInf, 5);
    CHECK(w_inf.norm() == 0.0);
    CHECK((y_inf - x).norm() == 0.0);
    CHECK_THROWS_AS(add_noise_snr(Vec::Zero(4), 10.0, 1), std::invalid_argument);
}

TEST_CASE("snr in dB converts to the linear power ratio") {
    InstanceSpec spec{10, 12, 11, 8, 5, 20.0, true, 1};
    CHECK(spec.snr_linear() == doctest::Approx(100.0).epsilon(1e-12));
    spec.snr_is_db = false;
    CHECK(spec.snr_linear() == doctest::Approx(20.0));
}

TEST_CASE("instance generation is deterministic in the seed") {
    InstanceSpec spec{30, 40, 35, 25, 18, 5.0, false, 2024};
    GeneratedInstance a = generate_instance(spec);
    GeneratedInstance b = generate_instance(spec);
    CHECK((a.D1 - b.D1).norm() == 0.0);
    CHECK((a.gamma2_true - b.gamma2_true).norm() == 0.0);
    CHECK((a.y_noisy - b.y_noisy).norm() == 0.0);
    spec.seed = 2025;
    GeneratedInstance c = generate_instance(spec);
    CHECK((a.y_noisy - c.y_noisy).norm() > 0.0);
}

TEST_CASE("instance save/load round-trips the reproducible fields exactly") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "mlbp_test_instance";
    InstanceSpec spec{20, 28, 24, 18, 12, 10.0, false, 31};
    GeneratedInstance inst = generate_instance(spec);
    save_instance(spec, inst, dir);
    auto [spec2, inst2] = load_instance(dir);
    CHECK(spec2.seed == spec.seed);
    CHECK(spec2.n == spec.n);
    CHECK((inst2.D1 - inst.D1).norm() == 0.0);
    CHECK((inst2.D2 - inst.D2).norm() == 0.0);
    CHECK((inst2.gamma2_true - inst.gamma2_true).norm() == 0.0);
    CHECK((inst2.y_noisy - inst.y_noisy).norm() == 0.0);
    // derived fields are recomputed consistently
    CHECK((inst2.gamma1_true - inst.gamma1_true).norm() < 1e-12);
    CHECK((inst2.noise - inst.noise).norm() < 1e-10);
}

TEST_CASE("count_nonzeros applies the magnitude threshold") {
    Vec v(4);
    v << 1.0, 1e-9, -1e-7, 0.0;
    CHECK(count_nonzeros(v) == 2);
    CHECK(count_nonzeros(v, 1e-10) == 3);
}
