#include "micekit/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace micekit {

namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + cfg.output_dir + "'");
    return (fs::path(cfg.output_dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

void finish(std::ofstream& file, const std::string& path, std::ostream& log) {
    if (!file) throw IoError("write to '" + path + "' failed");
    file.close();
    log << "wrote " << path << '\n';
}

CsvOptions csv_options(const RunConfig& cfg) {
    CsvOptions opts;
    opts.delimiter = cfg.delimiter;
    return opts;
}

Dataset load_input(const RunConfig& cfg) {
    if (cfg.input_path.empty())
        throw ConfigError("config: paths.input is required for this command");
    if (cfg.schema.empty())
        throw ConfigError("config: a columns section is required for this command");
    return load_table_file(cfg.input_path, cfg.schema, csv_options(cfg));
}

void write_missingness(const MissingnessTable& table, std::ostream& out,
                       char delimiter) {
    out << csv_join({"variable", "stratum", "n_rows", "n_missing", "percent"},
                    delimiter)
        << '\n';
    for (const MissingnessEntry& e : table.entries) {
        out << csv_join({e.variable, e.stratum.empty() ? "overall" : e.stratum,
                         std::to_string(e.n_rows), std::to_string(e.n_missing),
                         format_double(e.percent)},
                        delimiter)
            << '\n';
    }
}

} // namespace

int run_simulate(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.synth)
        throw ConfigError("config: a synth section is required for simulate");
    const Dataset complete = generate_complete(*cfg.synth);
    const Mechanism mech = cfg.mechanism ? *cfg.mechanism : default_mechanism();
    auto [masked, truth] = impose_missingness(complete, mech);

    const CsvOptions opts = csv_options(cfg);
    {
        const std::string path = out_path(cfg, "complete.csv");
        auto file = open_out(path);
        write_table(complete, file, opts);
        finish(file, path, out);
    }
    {
        const std::string path = out_path(cfg, "masked.csv");
        auto file = open_out(path);
        write_table(masked, file, opts);
        finish(file, path, out);
    }
    {
        const std::string path = out_path(cfg, "truth.csv");
        auto file = open_out(path);
        truth_to_csv(truth, file, cfg.delimiter);
        finish(file, path, out);
    }
    const MissingnessTable table = missingness_summary(masked);
    {
        const std::string path = out_path(cfg, "missingness.csv");
        auto file = open_out(path);
        write_missingness(table, file, cfg.delimiter);
        finish(file, path, out);
    }
    write_missingness(table, out, cfg.delimiter);
    return 0;
}

int run_impute(const RunConfig& cfg, std::ostream& out) {
    const Dataset ds = load_input(cfg);
    const MiceConfig mc = build_mice_config(ds, cfg.mice);

    bool any_missing = false;
    for (Eigen::Index j = 0; j < ds.n_cols() && !any_missing; ++j)
        any_missing = ds.n_missing(j) > 0;
    if (!any_missing)
        out << "warning: input has no missing cells; writing " << mc.m
            << " identical copies\n";

    CompletedDatasets cd;
    if (cfg.mice.stratify_by.empty()) {
        cd = run_mice(ds, mc);
    } else {
        StratifiedPlan plan;
        plan.group_column = cfg.mice.stratify_by;
        plan.merge_small_groups = cfg.mice.merge_small_groups;
        cd = run_stratified(ds, plan, mc);
    }

    const CsvOptions opts = csv_options(cfg);
    for (int k = 0; k < cd.m(); ++k) {
        const std::string path =
            out_path(cfg, "completed_" + std::to_string(k + 1) + ".csv");
        auto file = open_out(path);
        write_table(cd.completed[static_cast<std::size_t>(k)], file, opts);
        finish(file, path, out);
    }
    {
        const std::string path = out_path(cfg, "provenance.csv");
        auto file = open_out(path);
        write_provenance(ds, file, cfg.delimiter);
        finish(file, path, out);
    }
    {
        const std::string path = out_path(cfg, "trace.csv");
        auto file = open_out(path);
        trace_to_csv(cd.trace, file, cfg.delimiter);
        finish(file, path, out);
    }
    return 0;
}

void write_provenance(const Dataset& ds, std::ostream& out, char delimiter) {
    out << csv_join({"row", "variable"}, delimiter) << '\n';
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
        for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
            if (!ds.observed(i, j))
                out << csv_join({std::to_string(i), ds.name(j)}, delimiter) << '\n';
}

CompletedDatasets load_completed(const RunConfig& cfg, const Dataset& masked) {
    const CsvOptions opts = csv_options(cfg);

    // The sidecar is the provenance of record; it must agree with the
    // masked input's own missingness cell for cell.
    const std::string prov_path =
        (fs::path(cfg.output_dir) / "provenance.csv").string();
    std::ifstream prov(prov_path);
    if (!prov) throw IoError("cannot open '" + prov_path + "' for reading");
    std::set<std::pair<Eigen::Index, std::string>> imputed_cells;
    {
        std::string line;
        if (!std::getline(prov, line))
            throw ParseError("'" + prov_path + "': empty file");
        while (std::getline(prov, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto fields = csv_split(line, cfg.delimiter);
            if (fields.size() != 2)
                throw ParseError("'" + prov_path + "': malformed line '" + line + "'");
            imputed_cells.insert(
                {static_cast<Eigen::Index>(parse_double(fields[0])), fields[1]});
        }
    }
    for (Eigen::Index i = 0; i < masked.n_rows(); ++i)
        for (Eigen::Index j = 0; j < masked.n_cols(); ++j) {
            const bool listed = imputed_cells.count({i, masked.name(j)}) > 0;
            if (listed == masked.observed(i, j))
                throw ComputeError("provenance mismatch at row " + std::to_string(i) +
                                   ", variable '" + masked.name(j) + "'");
        }

    CompletedDatasets cd;
    cd.observed_mask = masked.mask();
    for (int k = 1; k <= cfg.mice.m; ++k) {
        const std::string path =
            (fs::path(cfg.output_dir) / ("completed_" + std::to_string(k) + ".csv"))
                .string();
        Dataset c = load_table_file(path, cfg.schema, opts);
        if (c.n_rows() != masked.n_rows())
            throw ComputeError("'" + path + "': row count does not match the input");
        for (Eigen::Index j = 0; j < c.n_cols(); ++j) {
            if (c.n_missing(j) > 0)
                throw ComputeError("'" + path + "': completed data has missing cells");
            for (Eigen::Index i = 0; i < c.n_rows(); ++i)
                if (masked.observed(i, j) && c.value(i, j) != masked.value(i, j))
                    throw ComputeError("'" + path + "': observed cell changed at row " +
                                       std::to_string(i) + ", variable '" +
                                       masked.name(j) + "'");
        }
        cd.completed.push_back(std::move(c));
    }
    return cd;
}

int run_diagnose(const RunConfig& cfg, std::ostream& out) {
    const Dataset ds = load_input(cfg);
    const CompletedDatasets cd = load_completed(cfg, ds);
    const DiagnosticsSection diag =
        cfg.diagnostics ? *cfg.diagnostics : DiagnosticsSection{};

    std::vector<Flag> all_flags;
    const MarginalReport marginal = marginal_compare(ds, cd, diag.params);
    all_flags.insert(all_flags.end(), marginal.flags.begin(), marginal.flags.end());
    {
        const std::string path = out_path(cfg, "marginal.csv");
        auto file = open_out(path);
        marginal_to_csv(marginal, file, cfg.delimiter);
        finish(file, path, out);
    }

    if (!diag.group_column.empty()) {
        const ConditionalReport conditional =
            conditional_compare(ds, cd, diag.group_column, diag.ranges, diag.params);
        all_flags.insert(all_flags.end(), conditional.flags.begin(),
                         conditional.flags.end());
        {
            const std::string path = out_path(cfg, "conditional.csv");
            auto file = open_out(path);
            conditional_to_csv(conditional, file, cfg.delimiter);
            finish(file, path, out);
        }
        {
            const std::string path = out_path(cfg, "range_counts.csv");
            auto file = open_out(path);
            range_counts_to_csv(conditional.range_counts, file, cfg.delimiter);
            finish(file, path, out);
        }
    }

    {
        const std::string path = out_path(cfg, "flags.csv");
        auto file = open_out(path);
        flags_to_csv(all_flags, file, cfg.delimiter);
        finish(file, path, out);
    }
    {
        const std::string path = out_path(cfg, "flags_summary.txt");
        auto file = open_out(path);
        flags_summary(all_flags, file);
        finish(file, path, out);
    }

    for (const StripPlotConfig& plot : diag.strip_plots) {
        StripPlotSpec spec;
        spec.variable = plot.variable;
        spec.group_column = plot.group_column;
        spec.jitter = plot.jitter;
        spec.seed = plot.seed;
        std::string stem = "strip_" + plot.variable;
        if (!plot.group_column.empty()) stem += "_by_" + plot.group_column;
        if (diag.plot_format != PlotFormat::Svg) {
            spec.format = StripPlotSpec::Format::Tabular;
            const std::string path = out_path(cfg, stem + ".csv");
            auto file = open_out(path);
            export_strip_plot(ds, cd, spec, file);
            finish(file, path, out);
        }
        if (diag.plot_format != PlotFormat::Tabular) {
            spec.format = StripPlotSpec::Format::Svg;
            const std::string path = out_path(cfg, stem + ".svg");
            auto file = open_out(path);
            export_strip_plot(ds, cd, spec, file);
            finish(file, path, out);
        }
    }

    flags_summary(all_flags, out);
    return diag.strict && !all_flags.empty() ? 5 : 0;
}

int run_analyze(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.analysis)
        throw ConfigError("config: an analysis section is required for analyze");
    const AnalysisSection& a = *cfg.analysis;
    const Dataset ds = load_input(cfg);
    const CompletedDatasets cd = load_completed(cfg, ds);

    const PooledCoxReport pooled =
        pooled_cox(cd, a.time_column, a.event_column, a.covariates, a.level);
    {
        const std::string path = out_path(cfg, "pooled_cox.csv");
        auto file = open_out(path);
        pooled_cox_to_csv(pooled, file, cfg.delimiter);
        finish(file, path, out);
    }

    // Complete cases: rows fully observed across the outcome and every
    // covariate in the masked input.
    std::vector<Eigen::Index> relevant;
    relevant.push_back(ds.require_column(a.time_column));
    relevant.push_back(ds.require_column(a.event_column));
    for (const std::string& c : a.covariates) relevant.push_back(ds.require_column(c));
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        bool complete = true;
        for (Eigen::Index j : relevant) complete = complete && ds.observed(i, j);
        if (complete) rows.push_back(i);
    }
    const Dataset cc = ds.select_rows(rows);
    const CoxFit cc_fit =
        fit_cox(survival_records(cc, a.time_column, a.event_column),
                build_design(cc, a.covariates, DesignMode::OneHot, false));
    const std::vector<CoxSummaryRow> cc_rows = cox_summary(cc_fit, a.level);
    {
        const std::string path = out_path(cfg, "complete_case_cox.csv");
        auto file = open_out(path);
        cox_summary_to_csv(cc_rows, file, cfg.delimiter);
        finish(file, path, out);
    }
    {
        const std::string path = out_path(cfg, "hazard_ratios.csv");
        auto file = open_out(path);
        file << csv_join({"estimand", "cc_hr", "cc_low", "cc_high", "mi_hr", "mi_low",
                          "mi_high"},
                         cfg.delimiter)
             << '\n';
        for (std::size_t k = 0; k < pooled.rows.size(); ++k) {
            const PooledCoxRow& mi = pooled.rows[k];
            const CoxSummaryRow& ccr = cc_rows[k];
            file << csv_join({mi.covariate, format_double(ccr.hr),
                              format_double(ccr.ci_low), format_double(ccr.ci_high),
                              format_double(mi.hr), format_double(mi.hr_low),
                              format_double(mi.hr_high)},
                             cfg.delimiter)
                 << '\n';
        }
        finish(file, path, out);
    }

    if (!a.profiles.empty() && !a.horizons.empty()) {
        const auto survival = pooled_survival(cd, a.time_column, a.event_column,
                                              a.covariates, a.profiles, a.horizons,
                                              a.level);
        const std::string path = out_path(cfg, "survival.csv");
        auto file = open_out(path);
        survival_to_csv(survival, file, cfg.delimiter);
        finish(file, path, out);
    }
    return 0;
}

} // namespace micekit
