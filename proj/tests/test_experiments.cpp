#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mlbp/experiments.hpp"
#include "mlbp/svg.hpp"

using namespace mlbp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path tmp_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

InstanceSpec small_spec(std::uint64_t seed = 11) {
    // s2 > m1 - s1 so the cosparse construction is feasible
    return InstanceSpec{30, 40, 36, 32, 14, 10.0, false, seed};
}

ExperimentConfig base_config(const std::string& kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    cfg.instance = small_spec();
    cfg.max_iter = 5000;
    return cfg;
}

void write_json(const fs::path& p, const std::string& body) {
    std::ofstream(p) << body;
}

}  // namespace

TEST_CASE("config parsing: happy path and defaults") {
    fs::path dir = tmp_dir("mlbp_cfg");
    write_json(dir / "c.json", R"({
        "kind": "lambda-sweep",
        "instance": {"n": 50, "m1": 70, "m2": 60, "s1": 42, "s2": 30,
                     "snr": 10.0, "seed": 3},
        "trials": 4,
        "lambda2_grid": [0.01, 0.1],
        "lambda1_grid": [0.001, 0.01],
        "out": "results"
    })");
    ExperimentConfig cfg = parse_experiment_config(dir / "c.json");
    CHECK(cfg.kind == "lambda-sweep");
    CHECK(cfg.trials == 4);
    CHECK(cfg.instance->n == 50);
    CHECK(cfg.instance->seed == 3);
    CHECK(cfg.lambda2_grid.size() == 2);
    CHECK(cfg.out_dir == "results");
    // untouched fields keep their documented defaults
    CHECK(cfg.lambda1 == 0.01);
    CHECK(cfg.t_scale == 0.99);
    CHECK(cfg.max_iter == 20000);
}

TEST_CASE("config parsing rejects malformed input") {
    fs::path dir = tmp_dir("mlbp_cfg_bad");
    CHECK_THROWS_AS(parse_experiment_config(dir / "missing.json"), ConfigError);
    write_json(dir / "garbage.json", "not json at all {{{");
    CHECK_THROWS_AS(parse_experiment_config(dir / "garbage.json"), ConfigError);
    write_json(dir / "nokind.json", R"({"trials": 3})");
    CHECK_THROWS_AS(parse_experiment_config(dir / "nokind.json"), ConfigError);
    write_json(dir / "badkind.json", R"({"kind": "frobnicate"})");
    CHECK_THROWS_AS(parse_experiment_config(dir / "badkind.json"), ConfigError);
    write_json(dir / "badtrials.json", R"({"kind": "mu-sweep", "trials": 0})");
    CHECK_THROWS_AS(parse_experiment_config(dir / "badtrials.json"), ConfigError);
    write_json(dir / "badgrid.json",
               R"({"kind": "lambda-sweep", "lambda2_grid": [-1.0]})");
    CHECK_THROWS_AS(parse_experiment_config(dir / "badgrid.json"), ConfigError);
}

TEST_CASE("default mu grid spans 10^-2.5 .. 1 in 6 log steps") {
    fs::path dir = tmp_dir("mlbp_cfg_mu");
    write_json(dir / "c.json", R"({"kind": "mu-sweep"})");
    ExperimentConfig cfg = parse_experiment_config(dir / "c.json");
    REQUIRE(cfg.mu_grid.size() == 6);
    CHECK(cfg.mu_grid.front() == doctest::Approx(std::pow(10.0, -2.5)).epsilon(1e-12));
    CHECK(cfg.mu_grid.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parallel_for visits every index once and respects MLBP_THREADS") {
    std::vector<std::atomic<int>> hits(200);
    for (auto& h : hits) h = 0;
    setenv("MLBP_THREADS", "3", 1);
    parallel_for(200, [&](int i) { hits[i]++; });
    unsetenv("MLBP_THREADS");
    for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("parallel_for propagates exceptions") {
    setenv("MLBP_THREADS", "2", 1);
    CHECK_THROWS_AS(
        parallel_for(8, [](int i) { if (i == 5) throw std::runtime_error("boom"); }),
        std::runtime_error);
    unsetenv("MLBP_THREADS");
}

TEST_CASE("lambda sweep: lambda1 grid {0} reproduces the BP curve") {
    ExperimentConfig cfg = base_config("lambda-sweep");
    cfg.trials = 2;
    cfg.lambda2_grid = {0.1};
    cfg.lambda1_grid = {0.0};
    auto rows = run_lambda_sweep(cfg);
    REQUIRE(rows.size() == 1);
    // lambda1 = 0 runs the same convex problem as plain BP, so the curves
    // coincide up to solver stopping tolerance
    CHECK(rows[0].err2_ml == doctest::Approx(rows[0].err2_bp).epsilon(1e-3));
    CHECK(rows[0].err1_ml == doctest::Approx(rows[0].err1_bp).epsilon(1e-3));
}

TEST_CASE("noiseless orthonormal toy recovers the code to high accuracy") {
    // Orthonormal square dictionaries, no noise, tiny lambda: the unique
    // minimizer is essentially the true code.
    std::srand(7);
    Mat Q1 = Eigen::HouseholderQR<Mat>(Mat::Random(16, 16)).householderQ();
    Mat Q2 = Eigen::HouseholderQR<Mat>(Mat::Random(16, 16)).householderQ();
    Vec gamma2 = Vec::Zero(16);
    gamma2[2] = 1.0;
    gamma2[9] = -0.5;
    Vec y = Q1 * (Q2 * gamma2);
    MultiLayerModel m;
    m.dictionaries = {Q1, Q2};
    m.lambdas = {1e-8, 1e-8};
    Trace t = ml_fista_canonical(m, y, 0.9, 0.9, 20000, {nullptr, 1e-12});
    CHECK(recovery_error(t.final_gamma, gamma2) < 1e-6);
}

TEST_CASE("solver race: reference optimality and momentum dominance") {
    ExperimentConfig cfg = base_config("solver-race");
    cfg.lambda1 = 0.02;
    cfg.lambda2 = 0.1;
    cfg.max_iter = 30000;
    SolverRaceResult res = run_solver_race(cfg);
    REQUIRE(res.traces.size() == 5);
    for (const auto& t : res.traces)
        CHECK(t.final_objective() >= res.f_opt - 1e-9);
    // ml_fista dominates ml_ista at equal iteration count after burn-in
    const Trace& mi = res.traces[3];
    const Trace& mf = res.traces[4];
    size_t upto = std::min(mi.records.size(), mf.records.size());
    int burn_in = 20;
    for (size_t k = burn_in; k < upto; ++k)
        CHECK(mf.records[k].objective <= mi.records[k].objective + 1e-8);
}

TEST_CASE("admm converges in far fewer outer iterations with a fista inner") {
    ExperimentConfig cfg = base_config("solver-race");
    GeneratedInstance inst = generate_instance(*cfg.instance);
    MultiLayerModel model;
    model.dictionaries = {inst.D1, inst.D2};
    model.lambdas = {0.02, 0.1};
    SolverParams pi, pf;
    pi.admm_inner_fista = false;
    pi.stop_residual = pf.stop_residual = 1e-8;
    Trace a = admm(model, inst.y_noisy, pi, 20000);
    Trace b = admm(model, inst.y_noisy, pf, 20000);
    REQUIRE(b.stop_reason == "residual");
    CHECK(b.records.size() <= a.records.size());
}

TEST_CASE("mu sweep: single-point grid gives a single row") {
    ExperimentConfig cfg = base_config("mu-sweep");
    cfg.mu_grid = {0.05};
    cfg.max_iter = 5000;
    auto rows = run_mu_sweep(cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mu == 0.05);
    CHECK(rows[0].gap_ista >= -1e-9);
    CHECK(rows[0].iters_ista >= 1);
}

TEST_CASE("bound audit passes with lambda1 = 0 (constants specialize)") {
    ExperimentConfig cfg = base_config("bound-audit");
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.1;
    cfg.seeds = {5};
    cfg.epsilon_grid = {1e-3, 1e-5};
    cfg.max_iter = 50000;
    BoundAuditResult res = run_bound_audit(cfg);
    CHECK(res.pass);
    REQUIRE(res.rows.size() == 8);  // 4 default mu fractions x 2 epsilons
    for (const auto& r : res.rows) CHECK(r.slack >= -1e-6);
}

TEST_CASE("bound audit rejects mu outside (0, 1/||Q||) up front") {
    ExperimentConfig cfg = base_config("bound-audit");
    cfg.seeds = {5};
    cfg.mu_grid = {10.0};  // far above 1/||Q|| for unit-column dictionaries
    CHECK_THROWS_AS(run_bound_audit(cfg), ConfigError);
}

TEST_CASE("experiment outputs are byte-identical across re-runs") {
    ExperimentConfig cfg = base_config("lambda-sweep");
    cfg.trials = 2;
    cfg.lambda2_grid = {0.05, 0.2};
    cfg.lambda1_grid = {0.005, 0.05};
    cfg.max_iter = 3000;

    fs::path a = tmp_dir("mlbp_det_a"), b = tmp_dir("mlbp_det_b");
    cfg.out_dir = a.string();
    REQUIRE(run_experiment(cfg) == 0);
    cfg.out_dir = b.string();
    REQUIRE(run_experiment(cfg) == 0);
    CHECK(slurp(a / "lambda_sweep.csv") == slurp(b / "lambda_sweep.csv"));
    CHECK(slurp(a / "lambda_sweep_gamma2.svg") == slurp(b / "lambda_sweep_gamma2.svg"));

    ExperimentConfig mcfg = base_config("mu-sweep");
    mcfg.mu_grid = {0.01, 0.05};
    mcfg.max_iter = 3000;
    mcfg.out_dir = (a / "mu").string();
    REQUIRE(run_experiment(mcfg) == 0);
    mcfg.out_dir = (b / "mu").string();
    REQUIRE(run_experiment(mcfg) == 0);
    CHECK(slurp(a / "mu" / "mu_sweep.csv") == slurp(b / "mu" / "mu_sweep.csv"));
}

TEST_CASE("deleting and re-plotting an SVG from its CSV is lossless") {
    ExperimentConfig cfg = base_config("mu-sweep");
    cfg.mu_grid = {0.01, 0.05};
    cfg.max_iter = 2000;
    fs::path dir = tmp_dir("mlbp_replot");
    cfg.out_dir = dir.string();
    REQUIRE(run_experiment(cfg) == 0);
    std::string original = slurp(dir / "mu_sweep.svg");
    fs::remove(dir / "mu_sweep.svg");
    plot_csv(dir / "mu_sweep.csv", dir / "mu_sweep.svg", "mu",
             {"gap_ista", "gap_fista"}, true, true);
    CHECK(slurp(dir / "mu_sweep.svg") == original);
}

TEST_CASE("run_experiment writes the documented output files") {
    ExperimentConfig cfg = base_config("bound-audit");
    cfg.seeds = {5};
    cfg.epsilon_grid = {1e-3};
    cfg.max_iter = 50000;
    fs::path dir = tmp_dir("mlbp_audit_out");
    cfg.out_dir = dir.string();
    int code = run_experiment(cfg);
    CHECK(code == 0);
    CHECK(fs::exists(dir / "bound_audit.csv"));
    std::string csv = slurp(dir / "bound_audit.csv");
    CHECK(csv.rfind("seed,mu,epsilon,t,gap,bound,slack", 0) == 0);
}
