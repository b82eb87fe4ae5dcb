// Command-line harness: instance generation, experiment runs, bound audits,
// and CSV -> SVG plotting.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlbp/datagen.hpp"
#include "mlbp/experiments.hpp"
#include "mlbp/svg.hpp"

namespace {

int cmd_gen(const std::string& out_dir, const mlbp::InstanceSpec& spec) {
    mlbp::GeneratedInstance inst = mlbp::generate_instance(spec);
    mlbp::save_instance(spec, inst, out_dir);
    std::printf("wrote instance to %s (||gamma2||_0 = %d, ||gamma1||_0 = %d)\n",
                out_dir.c_str(), mlbp::count_nonzeros(inst.gamma2_true),
                mlbp::count_nonzeros(inst.gamma1_true));
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::string& kind_expected) {
    mlbp::ExperimentConfig cfg = mlbp::parse_experiment_config(config_path);
    if (!kind_expected.empty() && cfg.kind != kind_expected)
        throw mlbp::ConfigError("config kind is '" + cfg.kind + "', expected '" +
                                kind_expected + "'");
    if (!out_override.empty()) cfg.out_dir = out_override;
    return mlbp::run_experiment(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-layer basis pursuit solvers and experiments"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic instance");
    mlbp::InstanceSpec spec{50, 70, 60, 42, 30, 10.0, false, 1};
    std::string gen_out = "instance";
    gen->add_option("--n", spec.n, "signal dimension");
    gen->add_option("--m1", spec.m1, "outer dictionary atoms");
    gen->add_option("--m2", spec.m2, "inner dictionary atoms");
    gen->add_option("--s1", spec.s1, "nonzeros in gamma_1");
    gen->add_option("--s2", spec.s2, "nonzeros in gamma_2");
    gen->add_option("--snr", spec.snr, "signal-to-noise ratio");
    gen->add_flag("--snr-db", spec.snr_is_db, "interpret --snr in dB");
    gen->add_option("--seed", spec.seed, "rng seed");
    gen->add_option("--out", gen_out, "output directory");

    // run
    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    std::string run_config, run_out;
    run->add_option("config", run_config, "JSON config file")->required();
    run->add_option("--out", run_out, "override output directory");

    // audit
    auto* audit = app.add_subcommand("audit", "run a suboptimality bound audit");
    std::string audit_config, audit_out;
    audit->add_option("config", audit_config, "JSON config file (kind bound-audit)")
        ->required();
    audit->add_option("--out", audit_out, "override output directory");

    // plot
    auto* plot = app.add_subcommand("plot", "render an SVG chart from a CSV file");
    std::string plot_csv_path, plot_svg_path, plot_x = "k";
    std::vector<std::string> plot_y;
    bool plot_logx = false, plot_logy = false;
    plot->add_option("csv", plot_csv_path, "input CSV")->required();
    plot->add_option("svg", plot_svg_path, "output SVG")->required();
    plot->add_option("--x", plot_x, "x column name");
    plot->add_option("--y", plot_y, "y column names (default: all others)");
    plot->add_flag("--logx", plot_logx, "log-scale x axis");
    plot->add_flag("--logy", plot_logy, "log-scale y axis");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(gen_out, spec);
        if (run->parsed()) return cmd_run(run_config, run_out, "");
        if (audit->parsed()) return cmd_run(audit_config, audit_out, "bound-audit");
        if (plot->parsed()) {
            mlbp::plot_csv(plot_csv_path, plot_svg_path, plot_x, plot_y, plot_logx,
                           plot_logy);
            return 0;
        }
    } catch (const mlbp::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
