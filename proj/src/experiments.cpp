#include "mlbp/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mlbp/svg.hpp"

namespace mlbp {

namespace {

namespace fs = std::filesystem;

std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> g;
    if (count == 1) return {lo};
    double llo = std::log10(lo), lhi = std::log10(hi);
    for (int i = 0; i < count; ++i)
        g.push_back(std::pow(10.0, llo + (lhi - llo) * i / (count - 1)));
    return g;
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GeneratedInstance instance_for_trial(const ExperimentConfig& cfg, int trial) {
    if (!cfg.instance_path.empty()) {
        auto [spec, inst] = load_instance(cfg.instance_path);
        if (trial == 0) return inst;
        InstanceSpec varied = spec;
        varied.seed = Rng(spec.seed).child(static_cast<std::uint64_t>(trial)).next_u64();
        return generate_instance(varied);
    }
    if (!cfg.instance) throw ConfigError("config: no instance spec or path");
    InstanceSpec spec = *cfg.instance;
    if (trial > 0)
        spec.seed = Rng(spec.seed).child(static_cast<std::uint64_t>(trial)).next_u64();
    return generate_instance(spec);
}

MultiLayerModel two_layer_model(const GeneratedInstance& inst, double lambda1,
                                double lambda2, double radius = kInf) {
    MultiLayerModel m;
    m.dictionaries = {inst.D1, inst.D2};
    m.lambdas = {lambda1, lambda2};
    m.radius = radius;
    return m;
}

struct StepDefaults {
    double mu;   // 0.99 / ||Q||
    double t;    // t_scale * 4 mu / (3 ||D_2||)
    double nQ, nD2;
};

StepDefaults step_defaults(const GeneratedInstance& inst, double t_scale,
                           double mu_override = 0.0) {
    StepDefaults d;
    d.nQ = spectral_norm(inst.D1);
    d.nQ *= d.nQ;
    d.nD2 = spectral_norm(inst.D2);
    d.mu = mu_override > 0 ? mu_override : 0.99 / d.nQ;
    d.t = default_outer_step(d.mu, d.nD2, t_scale);
    return d;
}

// FNV-1a over a textual parameter summary, for trace file names.
std::string param_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream ss;
    ss << std::hex << (h & 0xffffffffull);
    return ss.str();
}

Trace reference_admm(const MultiLayerModel& model, const Vec& y,
                     const ExperimentConfig& cfg, int max_iter) {
    SolverParams p;
    p.admm_rho = cfg.admm_rho;
    p.admm_inner_fista = true;
    p.admm_inner_iters = 100;
    p.stop_residual = cfg.reference_residual;
    Trace t = admm(model, y, p, max_iter);
    if (t.stop_reason != "residual")
        throw std::runtime_error(
            "reference ADMM did not reach residual " +
            std::to_string(cfg.reference_residual) + " within " +
            std::to_string(max_iter) + " iterations (last residual " +
            std::to_string(t.final_residual()) + ")");
    return t;
}

double min_objective(const Trace& t) {
    double m = kInf;
    for (const auto& r : t.records) m = std::min(m, r.objective);
    return m;
}

}  // namespace

void parallel_for(int count, const std::function<void(int)>& fn) {
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MLBP_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) threads = v;
    }
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

ExperimentConfig parse_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    try {
        cfg.kind = j.at("kind").get<std::string>();
        if (j.contains("instance")) {
            const auto& ji = j["instance"];
            if (ji.is_string()) {
                cfg.instance_path = ji.get<std::string>();
            } else {
                InstanceSpec spec;
                spec.n = ji.at("n");
                spec.m1 = ji.at("m1");
                spec.m2 = ji.at("m2");
                spec.s1 = ji.at("s1");
                spec.s2 = ji.at("s2");
                spec.snr = ji.value("snr", 10.0);
                spec.snr_is_db = ji.value("snr_is_db", false);
                spec.seed = ji.value("seed", std::uint64_t{1});
                cfg.instance = spec;
            }
        }
        cfg.trials = j.value("trials", cfg.trials);
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("lambda2_grid"))
            cfg.lambda2_grid = j["lambda2_grid"].get<std::vector<double>>();
        if (j.contains("lambda1_grid"))
            cfg.lambda1_grid = j["lambda1_grid"].get<std::vector<double>>();
        if (j.contains("mu_grid")) cfg.mu_grid = j["mu_grid"].get<std::vector<double>>();
        if (j.contains("epsilon_grid"))
            cfg.epsilon_grid = j["epsilon_grid"].get<std::vector<double>>();
        cfg.lambda1 = j.value("lambda1", cfg.lambda1);
        cfg.lambda2 = j.value("lambda2", cfg.lambda2);
        cfg.admm_rho = j.value("rho", cfg.admm_rho);
        cfg.t_scale = j.value("t_scale", cfg.t_scale);
        cfg.sfista_smoothing = j.value("sfista_smoothing", cfg.sfista_smoothing);
        cfg.ml_mu = j.value("mu", cfg.ml_mu);
        cfg.max_iter = j.value("max_iter", cfg.max_iter);
        cfg.reference_residual = j.value("reference_residual", cfg.reference_residual);
        cfg.out_dir = j.value("out", cfg.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config field: ") + e.what());
    }

    static const std::vector<std::string> kinds = {"lambda-sweep", "solver-race",
                                                   "mu-sweep", "bound-audit"};
    if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
        throw ConfigError("unknown experiment kind: " + cfg.kind);
    if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
    if (!(cfg.t_scale > 0) || cfg.t_scale >= 1)
        throw ConfigError("config: t_scale must lie in (0, 1)");

    // default grids
    if (cfg.lambda2_grid.empty()) cfg.lambda2_grid = log_grid(1e-3, 1.0, 20);
    if (cfg.lambda1_grid.empty()) cfg.lambda1_grid = log_grid(1e-4, 1e-1, 10);
    if (cfg.mu_grid.empty() && cfg.kind == "mu-sweep")
        cfg.mu_grid = log_grid(std::pow(10.0, -2.5), 1.0, 6);
    if (cfg.epsilon_grid.empty()) cfg.epsilon_grid = {1e-2, 1e-3, 1e-4, 1e-5};
    if (cfg.seeds.empty()) cfg.seeds = {1, 2, 3};
    for (double l : cfg.lambda2_grid)
        if (l < 0) throw ConfigError("config: lambda2 grid values must be >= 0");
    for (double l : cfg.lambda1_grid)
        if (l < 0) throw ConfigError("config: lambda1 grid values must be >= 0");
    return cfg;
}

std::vector<LambdaSweepRow> run_lambda_sweep(const ExperimentConfig& cfg) {
    const int n2 = static_cast<int>(cfg.lambda2_grid.size());
    const int n1 = static_cast<int>(cfg.lambda1_grid.size());
    // err[trial][lambda2][0..1] baseline, err_ml[trial][lambda2][lambda1][0..1]
    std::vector<std::vector<std::array<double, 2>>> err_bp(
        cfg.trials, std::vector<std::array<double, 2>>(n2));
    std::vector<std::vector<std::vector<std::array<double, 2>>>> err_ml(
        cfg.trials, std::vector<std::vector<std::array<double, 2>>>(
                        n2, std::vector<std::array<double, 2>>(n1)));

    parallel_for(cfg.trials, [&](int trial) {
        GeneratedInstance inst = instance_for_trial(cfg, trial);
        StepDefaults sd = step_defaults(inst, cfg.t_scale, cfg.ml_mu);
        TraceOpts stop{nullptr, 1e-6};

        for (int i2 = 0; i2 < n2; ++i2) {
            double l2 = cfg.lambda2_grid[i2];
            // The lambda_1 = 0 baseline runs through the same canonical solver
            // (it reduces exactly to momentum thresholding on D1 D2 with step
            // t), so the lambda_1 > 0 columns differ from it only through the
            // penalty, not through the algorithm.
            MultiLayerModel m0 = two_layer_model(inst, 0.0, l2);
            Trace bp = ml_fista_canonical(m0, inst.y_noisy, sd.mu, sd.t,
                                          cfg.max_iter, stop);
            err_bp[trial][i2] = {recovery_error(bp.final_gamma, inst.gamma2_true),
                                 recovery_error(inst.D2 * bp.final_gamma,
                                                inst.gamma1_true)};
            for (int i1 = 0; i1 < n1; ++i1) {
                MultiLayerModel m =
                    two_layer_model(inst, cfg.lambda1_grid[i1], l2);
                Trace ml = ml_fista_canonical(m, inst.y_noisy, sd.mu, sd.t,
                                              cfg.max_iter, stop);
                err_ml[trial][i2][i1] = {
                    recovery_error(ml.final_gamma, inst.gamma2_true),
                    recovery_error(inst.D2 * ml.final_gamma, inst.gamma1_true)};
            }
        }
    });

    std::vector<LambdaSweepRow> rows;
    for (int i2 = 0; i2 < n2; ++i2) {
        LambdaSweepRow row{};
        row.lambda2 = cfg.lambda2_grid[i2];
        std::vector<double> b2, b1;
        for (int t = 0; t < cfg.trials; ++t) {
            b2.push_back(err_bp[t][i2][0]);
            b1.push_back(err_bp[t][i2][1]);
        }
        row.err2_bp = median(b2);
        row.err1_bp = median(b1);
        // grid search: prefer lambda_1 values that degrade neither layer
        // relative to the baseline, then minimize the joint recovery error
        double best_viol = kInf, best_sum = kInf;
        for (int i1 = 0; i1 < n1; ++i1) {
            std::vector<double> m2, m1;
            for (int t = 0; t < cfg.trials; ++t) {
                m2.push_back(err_ml[t][i2][i1][0]);
                m1.push_back(err_ml[t][i2][i1][1]);
            }
            double med2 = median(m2), med1 = median(m1);
            double viol = std::max(med2 - row.err2_bp, 0.0) +
                          std::max(med1 - row.err1_bp, 0.0);
            if (viol < best_viol ||
                (viol == best_viol && med2 + med1 < best_sum)) {
                best_viol = viol;
                best_sum = med2 + med1;
                row.err2_ml = med2;
                row.err1_ml = med1;
                row.best_lambda1 = cfg.lambda1_grid[i1];
            }
        }
        rows.push_back(row);
    }
    return rows;
}

SolverRaceResult run_solver_race(const ExperimentConfig& cfg) {
    GeneratedInstance inst = instance_for_trial(cfg, 0);
    MultiLayerModel model = two_layer_model(inst, cfg.lambda1, cfg.lambda2);
    StepDefaults sd = step_defaults(inst, cfg.t_scale, cfg.ml_mu);

    Trace ref = reference_admm(model, inst.y_noisy, cfg, cfg.max_iter);
    SolverRaceResult res;
    res.f_opt = min_objective(ref);
    res.reference = ref.final_gamma;

    TraceOpts opts{&res.reference, 0.0};
    SolverParams admm_ista_p, admm_fista_p;
    admm_ista_p.admm_rho = admm_fista_p.admm_rho = cfg.admm_rho;
    admm_ista_p.admm_inner_fista = false;
    admm_fista_p.admm_inner_fista = true;
    admm_ista_p.stop_residual = admm_fista_p.stop_residual = 1e-9;

    res.solver_names = {"admm_ista", "admm_fista", "s_fista", "ml_ista", "ml_fista"};
    res.traces.push_back(admm(model, inst.y_noisy, admm_ista_p, cfg.max_iter, opts));
    res.traces.push_back(admm(model, inst.y_noisy, admm_fista_p, cfg.max_iter, opts));
    res.traces.push_back(s_fista(model, inst.y_noisy, cfg.sfista_smoothing, 0.0,
                                 cfg.max_iter, opts));
    res.traces.push_back(
        ml_ista_canonical(model, inst.y_noisy, sd.mu, sd.t, cfg.max_iter, opts));
    res.traces.push_back(
        ml_fista_canonical(model, inst.y_noisy, sd.mu, sd.t, cfg.max_iter, opts));
    return res;
}

std::vector<MuSweepRow> run_mu_sweep(const ExperimentConfig& cfg) {
    GeneratedInstance inst = instance_for_trial(cfg, 0);
    MultiLayerModel model = two_layer_model(inst, cfg.lambda1, cfg.lambda2);
    double nD2 = spectral_norm(inst.D2);

    Trace ref = reference_admm(model, inst.y_noisy, cfg, cfg.max_iter);
    double f_opt = min_objective(ref);

    std::vector<MuSweepRow> rows(cfg.mu_grid.size());
    parallel_for(static_cast<int>(cfg.mu_grid.size()), [&](int i) {
        double mu = cfg.mu_grid[i];
        double t = default_outer_step(mu, nD2, cfg.t_scale);
        TraceOpts stop{nullptr, 1e-9};
        Trace ti = ml_ista_canonical(model, inst.y_noisy, mu, t, cfg.max_iter, stop);
        Trace tf = ml_fista_canonical(model, inst.y_noisy, mu, t, cfg.max_iter, stop);
        rows[i] = {mu,
                   t,
                   ti.final_objective() - f_opt,
                   tf.final_objective() - f_opt,
                   static_cast<int>(ti.records.size()) - 1,
                   static_cast<int>(tf.records.size()) - 1};
    });
    return rows;
}

double default_theorem_radius(const MultiLayerModel& model, const Vec& y) {
    SolverParams p;
    p.stop_residual = 1e-8;
    Trace t = admm(model, y, p, 50000);
    double norm = t.final_gamma.norm();
    if (norm == 0.0) return 1.0;
    return 2.0 * norm;
}

BoundAuditResult run_bound_audit(const ExperimentConfig& cfg) {
    BoundAuditResult result;
    result.pass = true;

    std::vector<std::vector<BoundAuditRow>> per_seed(cfg.seeds.size());
    parallel_for(static_cast<int>(cfg.seeds.size()), [&](int si) {
        std::uint64_t seed = cfg.seeds[si];
        InstanceSpec spec = cfg.instance ? *cfg.instance
                                         : InstanceSpec{50, 70, 60, 42, 30, 10.0, false, seed};
        spec.seed = seed;
        GeneratedInstance inst = generate_instance(spec);

        MultiLayerModel unconstrained = two_layer_model(inst, cfg.lambda1, cfg.lambda2);
        double R = default_theorem_radius(unconstrained, inst.y_noisy);
        MultiLayerModel model = two_layer_model(inst, cfg.lambda1, cfg.lambda2, R);

        double nQ = spectral_norm(inst.D1);
        nQ *= nQ;
        double nD2 = spectral_norm(inst.D2);
        std::vector<double> mus = cfg.mu_grid;
        if (mus.empty())
            for (double frac : {0.5, 0.2, 0.08, 0.03}) mus.push_back(frac / nQ);
        for (double mu : mus)
            if (!(mu > 0) || mu >= 1.0 / nQ)
                throw ConfigError("bound-audit: mu must lie in (0, 1/||Q||)");

        Trace ref = reference_admm(model, inst.y_noisy, cfg, cfg.max_iter);
        double f_opt = min_objective(ref);
        TheoremConstants c = theorem_constants(model, inst.y_noisy, R);

        struct Run {
            double mu, eps_req, eps_eff, t, f_alpha;
        };
        std::vector<Run> runs;
        for (double mu : mus) {
            double t = default_outer_step(mu, nD2, cfg.t_scale);
            for (double eps : cfg.epsilon_grid) {
                TraceOpts stop{nullptr, eps};
                Trace tr =
                    ml_ista_canonical(model, inst.y_noisy, mu, t, cfg.max_iter, stop);
                double achieved = tr.final_residual();
                double eps_eff = std::max(eps, achieved);
                runs.push_back({mu, eps, eps_eff, t, tr.final_objective()});
                f_opt = std::min(f_opt, tr.final_objective());
            }
        }
        for (const Run& r : runs) {
            BoundAuditRow row;
            row.seed = seed;
            row.mu = r.mu;
            row.epsilon = r.eps_req;
            row.t = r.t;
            row.gap = r.f_alpha - f_opt;
            row.bound = c.eta * r.eps_eff + (c.beta + c.kappa * r.t) * r.mu;
            row.slack = row.bound - row.gap;
            per_seed[si].push_back(row);
        }
    });

    for (auto& rows : per_seed)
        for (auto& row : rows) {
            if (row.slack < -1e-6) result.pass = false;
            result.rows.push_back(row);
        }
    return result;
}

namespace {

void write_lambda_sweep_outputs(const std::vector<LambdaSweepRow>& rows,
                                const fs::path& dir) {
    fs::create_directories(dir);
    fs::path csv = dir / "lambda_sweep.csv";
    std::ofstream out(csv);
    out << "lambda2,err2_bp,err1_bp,err2_ml,err1_ml,best_lambda1\n";
    for (const auto& r : rows)
        out << format_double(r.lambda2) << ',' << format_double(r.err2_bp) << ','
            << format_double(r.err1_bp) << ',' << format_double(r.err2_ml) << ','
            << format_double(r.err1_ml) << ',' << format_double(r.best_lambda1) << '\n';
    out.close();
    plot_csv(csv, dir / "lambda_sweep_gamma2.svg", "lambda2", {"err2_bp", "err2_ml"},
             true, false);
    plot_csv(csv, dir / "lambda_sweep_gamma1.svg", "lambda2", {"err1_bp", "err1_ml"},
             true, false);
}

void write_race_outputs(const SolverRaceResult& res, const ExperimentConfig& cfg,
                        const fs::path& dir) {
    fs::create_directories(dir);
    std::string instance_id =
        cfg.instance ? std::to_string(cfg.instance->seed) : "file";
    std::ostringstream params;
    params << cfg.lambda1 << ':' << cfg.lambda2 << ':' << cfg.admm_rho << ':'
           << cfg.sfista_smoothing << ':' << cfg.t_scale << ':' << cfg.max_iter;
    std::string hash = param_hash(params.str());

    fs::path race_csv = dir / "race.csv";
    std::ofstream race(race_csv);
    race << "solver,k,time_s,gap,dist\n";
    std::ofstream summary(dir / "race_summary.csv");
    summary << "solver,iters,final_objective,final_gap,final_dist\n";
    for (size_t i = 0; i < res.traces.size(); ++i) {
        const Trace& t = res.traces[i];
        const std::string& name = res.solver_names[i];
        t.save_csv(dir / (name + "_" + instance_id + "_" + hash + ".csv"));
        for (const auto& r : t.records)
            race << name << ',' << r.k << ',' << format_double(r.time_s) << ','
                 << format_double(r.objective - res.f_opt) << ','
                 << format_double(r.dist_ref) << '\n';
        summary << name << ',' << t.records.back().k << ','
                << format_double(t.final_objective()) << ','
                << format_double(t.final_objective() - res.f_opt) << ','
                << format_double(t.records.back().dist_ref) << '\n';
    }
    race.close();

    // Grouped log-log plots regenerated purely from race.csv.
    std::ifstream in(race_csv);
    std::string line;
    std::getline(in, line);  // header
    std::map<std::string, Series> gap_series, dist_series;
    std::vector<std::string> order;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string name, cell;
        std::getline(ss, name, ',');
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() < 4) continue;
        if (!gap_series.count(name)) {
            gap_series[name].label = name;
            dist_series[name].label = name;
            order.push_back(name);
        }
        gap_series[name].x.push_back(vals[1]);
        gap_series[name].y.push_back(vals[2]);
        dist_series[name].x.push_back(vals[1]);
        dist_series[name].y.push_back(vals[3]);
    }
    std::vector<Series> gaps, dists;
    for (const auto& name : order) {
        gaps.push_back(gap_series[name]);
        dists.push_back(dist_series[name]);
    }
    write_svg_line_chart(dir / "race_objective.svg", gaps, "objective gap vs wall time",
                         "time [s]", "F - F_opt", true, true);
    write_svg_line_chart(dir / "race_distance.svg", dists, "distance to reference",
                         "time [s]", "||gamma - gamma_ref||", true, true);
}

void write_mu_sweep_outputs(const std::vector<MuSweepRow>& rows, const fs::path& dir) {
    fs::create_directories(dir);
    fs::path csv = dir / "mu_sweep.csv";
    std::ofstream out(csv);
    out << "mu,t,gap_ista,gap_fista,iters_ista,iters_fista\n";
    for (const auto& r : rows)
        out << format_double(r.mu) << ',' << format_double(r.t) << ','
            << format_double(r.gap_ista) << ',' << format_double(r.gap_fista) << ','
            << r.iters_ista << ',' << r.iters_fista << '\n';
    out.close();
    plot_csv(csv, dir / "mu_sweep.svg", "mu", {"gap_ista", "gap_fista"}, true, true);
}

void write_bound_audit_outputs(const BoundAuditResult& res, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream out(dir / "bound_audit.csv");
    out << "seed,mu,epsilon,t,gap,bound,slack\n";
    for (const auto& r : res.rows)
        out << r.seed << ',' << format_double(r.mu) << ',' << format_double(r.epsilon)
            << ',' << format_double(r.t) << ',' << format_double(r.gap) << ','
            << format_double(r.bound) << ',' << format_double(r.slack) << '\n';
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
    fs::path dir = cfg.out_dir;
    if (cfg.kind == "lambda-sweep") {
        write_lambda_sweep_outputs(run_lambda_sweep(cfg), dir);
        return 0;
    }
    if (cfg.kind == "solver-race") {
        write_race_outputs(run_solver_race(cfg), cfg, dir);
        return 0;
    }
    if (cfg.kind == "mu-sweep") {
        write_mu_sweep_outputs(run_mu_sweep(cfg), dir);
        return 0;
    }
    if (cfg.kind == "bound-audit") {
        BoundAuditResult res = run_bound_audit(cfg);
        write_bound_audit_outputs(res, dir);
        for (const auto& r : res.rows)
            std::printf("audit seed=%llu mu=%.3g eps=%.3g slack=%.6g %s\n",
                        static_cast<unsigned long long>(r.seed), r.mu, r.epsilon,
                        r.slack, r.slack >= -1e-6 ? "PASS" : "FAIL");
        std::printf("bound audit: %s\n", res.pass ? "PASS" : "FAIL");
        return res.pass ? 0 : 3;
    }
    throw ConfigError("unknown experiment kind: " + cfg.kind);
}

}  // namespace mlbp
