#include "micekit/pipeline.hpp"
#include "micekit/rng.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::string> input;
    std::optional<std::string> output;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("config", opts.config_path, "run configuration file (JSON)")
        ->required();
    cmd->add_option("--input", opts.input, "override paths.input");
    cmd->add_option("--output", opts.output, "override paths.output");
    cmd->add_option("--threads", opts.threads,
                    "worker cap (reserved; current build is single-threaded)")
        ->check(CLI::PositiveNumber);
}

void apply_common(micekit::RunConfig& cfg, const CommonOpts& opts) {
    if (opts.input) cfg.input_path = *opts.input;
    if (opts.output) cfg.output_dir = *opts.output;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const micekit::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const micekit::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const micekit::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const micekit::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 4;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"micekit: chained-equations imputation, diagnostics, and pooled "
                 "survival analysis"};
    app.set_version_flag("--version", "micekit 0.1.0");
    app.require_subcommand(1);

    CommonOpts sim_opts;
    std::optional<std::uint64_t> sim_seed;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "generate a synthetic cohort, mask it, and store the truths");
    add_common(simulate, sim_opts);
    simulate->add_option("--seed", sim_seed,
                         "override the generation seed (the masking seed is "
                         "derived from it)");

    CommonOpts imp_opts;
    std::optional<std::uint64_t> imp_seed;
    std::optional<int> imp_m;
    std::optional<int> imp_cycles;
    std::optional<std::string> imp_method;
    std::optional<std::string> imp_stratify;
    CLI::App* impute =
        app.add_subcommand("impute", "run chained-equations imputation");
    add_common(impute, imp_opts);
    impute->add_option("--seed", imp_seed, "override mice.seed");
    impute->add_option("-m,--imputations", imp_m, "number of completed datasets");
    impute->add_option("--cycles", imp_cycles, "cycles per chain");
    impute
        ->add_option("--method", imp_method,
                     "engine preset: default-pmm, norm, or cart")
        ->check(CLI::IsMember({"default-pmm", "norm", "cart"}));
    impute->add_option("--stratify-by", imp_stratify,
                       "run the engine separately per level of this column");

    CommonOpts diag_opts;
    bool diag_strict = false;
    std::optional<std::string> diag_format;
    CLI::App* diagnose = app.add_subcommand(
        "diagnose", "observed-vs-imputed reports, flags, and strip plots");
    add_common(diagnose, diag_opts);
    diagnose->add_flag("--strict", diag_strict,
                       "exit 5 when any diagnostic flag fires");
    diagnose
        ->add_option("--format", diag_format, "strip-plot output: tabular, svg, both")
        ->check(CLI::IsMember({"tabular", "svg", "both"}));

    CommonOpts ana_opts;
    CLI::App* analyze = app.add_subcommand(
        "analyze", "pooled Cox hazard ratios and predicted survival");
    add_common(analyze, ana_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (app.got_subcommand(simulate)) {
        return guarded([&] {
            micekit::RunConfig cfg = micekit::load_run_config(sim_opts.config_path);
            apply_common(cfg, sim_opts);
            if (sim_seed) {
                if (cfg.synth) cfg.synth->seed = *sim_seed;
                if (cfg.mechanism)
                    cfg.mechanism->seed = micekit::RngStream::mix(*sim_seed, {1});
            }
            return micekit::run_simulate(cfg, std::cout);
        });
    }
    if (app.got_subcommand(impute)) {
        return guarded([&] {
            micekit::RunConfig cfg = micekit::load_run_config(imp_opts.config_path);
            apply_common(cfg, imp_opts);
            if (imp_seed) cfg.mice.seed = *imp_seed;
            if (imp_m) cfg.mice.m = *imp_m;
            if (imp_cycles) cfg.mice.cycles = *imp_cycles;
            if (imp_method) {
                cfg.mice.preset = *imp_method == "norm" ? micekit::Preset::Norm
                                  : *imp_method == "cart"
                                      ? micekit::Preset::Cart
                                      : micekit::Preset::DefaultPmm;
            }
            if (imp_stratify) cfg.mice.stratify_by = *imp_stratify;
            return micekit::run_impute(cfg, std::cout);
        });
    }
    if (app.got_subcommand(diagnose)) {
        return guarded([&] {
            micekit::RunConfig cfg = micekit::load_run_config(diag_opts.config_path);
            apply_common(cfg, diag_opts);
            if (!cfg.diagnostics) cfg.diagnostics.emplace();
            if (diag_strict) cfg.diagnostics->strict = true;
            if (diag_format) {
                cfg.diagnostics->plot_format =
                    *diag_format == "tabular" ? micekit::PlotFormat::Tabular
                    : *diag_format == "svg"   ? micekit::PlotFormat::Svg
                                              : micekit::PlotFormat::Both;
            }
            return micekit::run_diagnose(cfg, std::cout);
        });
    }
    return guarded([&] {
        micekit::RunConfig cfg = micekit::load_run_config(ana_opts.config_path);
        apply_common(cfg, ana_opts);
        return micekit::run_analyze(cfg, std::cout);
    });
}
