#include "micekit/diagnostics.hpp"

#include "micekit/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace micekit {

std::string flag_rule_name(FlagRule r) {
    switch (r) {
        case FlagRule::MeanShift: return "mean-shift";
        case FlagRule::VarianceRatio: return "variance-ratio";
        case FlagRule::RangeImplausible: return "range-implausible";
    }
    return "";
}

bool ClinicalRange::outside(double v) const {
    const bool low = v < lower && concern != Concern::High;
    const bool high = v > upper && concern != Concern::Low;
    return low || high;
}

std::vector<ClinicalRange> default_hba1c_ranges(const std::string& variable) {
    ClinicalRange r;
    r.variable = variable;
    r.group = "0";
    r.upper = 6.5;
    r.concern = ClinicalRange::Concern::High;
    return {r};
}

std::vector<ClinicalRange> default_sbp_ranges(const std::string& variable) {
    ClinicalRange r;
    r.variable = variable;
    r.group = "0";
    r.upper = 140.0;
    r.concern = ClinicalRange::Concern::High;
    return {r};
}

namespace {

void check_provenance(const Dataset& ds, const CompletedDatasets& cd) {
    if (cd.completed.empty()) throw ComputeError("no completed datasets to compare");
    if (cd.observed_mask.rows() != ds.n_rows() ||
        cd.observed_mask.cols() != ds.n_cols() ||
        !(cd.observed_mask == ds.mask()).all())
        throw ComputeError("provenance mask does not match the dataset");
    for (const Dataset& c : cd.completed)
        if (c.names() != ds.names())
            throw ComputeError("completed dataset columns do not match the input");
}

/// Stats and flags for one variable over an explicit row subset.
/// Returns nothing when the subset holds no imputed cell.
void compare_rows(const Dataset& ds, const CompletedDatasets& cd, Eigen::Index j,
                  const std::vector<Eigen::Index>& rows, const std::string& group,
                  const DiagnosticParams& params,
                  std::vector<VariableComparison>& out_rows,
                  std::vector<Flag>& out_flags) {
    std::vector<Eigen::Index> rows_obs;
    std::vector<Eigen::Index> rows_mis;
    for (Eigen::Index i : rows)
        (ds.observed(i, j) ? rows_obs : rows_mis).push_back(i);
    if (rows_mis.empty()) return;

    std::vector<double> obs;
    obs.reserve(rows_obs.size());
    for (Eigen::Index i : rows_obs) obs.push_back(ds.value(i, j));
    const SummaryStats obs_stats = summarize(std::move(obs));

    for (int imp = 0; imp < cd.m(); ++imp) {
        const Dataset& c = cd.completed[static_cast<std::size_t>(imp)];
        std::vector<double> vals;
        vals.reserve(rows_mis.size());
        for (Eigen::Index i : rows_mis) vals.push_back(c.value(i, j));
        const SummaryStats imp_stats = summarize(std::move(vals));

        VariableComparison row;
        row.variable = ds.name(j);
        row.imputation = imp + 1;
        row.observed = obs_stats;
        row.imputed = imp_stats;
        out_rows.push_back(row);

        // NaN statistics (too few cells on a side) fail every strict
        // comparison, which is exactly the "skip the rule" behavior.
        const double shift = std::abs(imp_stats.mean - obs_stats.mean);
        const double shift_bound = params.mean_shift_sds * obs_stats.sd;
        if (shift > shift_bound)
            out_flags.push_back({FlagRule::MeanShift, ds.name(j), imp + 1, group,
                                 shift, shift_bound});

        if (imp_stats.n >= 2) {
            // Variances, not squared sds: squaring a rounded sqrt would put
            // exact boundary ratios like 1/2 on the wrong side of the cut.
            const double ratio = imp_stats.variance / obs_stats.variance;
            if (ratio < params.variance_ratio_low)
                out_flags.push_back({FlagRule::VarianceRatio, ds.name(j), imp + 1,
                                     group, ratio, params.variance_ratio_low});
            else if (ratio > params.variance_ratio_high)
                out_flags.push_back({FlagRule::VarianceRatio, ds.name(j), imp + 1,
                                     group, ratio, params.variance_ratio_high});
        }
    }
}

std::string stat_field(double v, const std::string& missing_token) {
    return std::isnan(v) ? missing_token : format_double(v);
}

void comparison_csv_row(const VariableComparison& row, const std::string& group,
                        bool with_group, std::ostream& out, char delimiter,
                        const std::string& missing_token) {
    std::vector<std::string> fields;
    if (with_group) fields.push_back(group);
    fields.push_back(row.variable);
    fields.push_back(std::to_string(row.imputation));
    for (const SummaryStats* s : {&row.observed, &row.imputed}) {
        fields.push_back(std::to_string(s->n));
        fields.push_back(stat_field(s->mean, missing_token));
        fields.push_back(stat_field(s->sd, missing_token));
        fields.push_back(stat_field(s->min, missing_token));
        fields.push_back(stat_field(s->q1, missing_token));
        fields.push_back(stat_field(s->median, missing_token));
        fields.push_back(stat_field(s->q3, missing_token));
        fields.push_back(stat_field(s->max, missing_token));
    }
    out << csv_join(fields, delimiter) << '\n';
}

const std::vector<std::string> kStatHeader = {
    "obs_n", "obs_mean", "obs_sd", "obs_min", "obs_q1", "obs_median", "obs_q3",
    "obs_max", "imp_n", "imp_mean", "imp_sd", "imp_min", "imp_q1", "imp_median",
    "imp_q3", "imp_max"};

} // namespace

MarginalReport marginal_compare(const Dataset& ds, const CompletedDatasets& cd,
                                const DiagnosticParams& params) {
    check_provenance(ds, cd);
    std::vector<Eigen::Index> all_rows(static_cast<std::size_t>(ds.n_rows()));
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
        all_rows[static_cast<std::size_t>(i)] = i;

    MarginalReport report;
    for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
        compare_rows(ds, cd, j, all_rows, "", params, report.rows, report.flags);
    return report;
}

ConditionalReport conditional_compare(const Dataset& ds, const CompletedDatasets& cd,
                                      const std::string& group_column,
                                      const std::vector<ClinicalRange>& ranges,
                                      const DiagnosticParams& params) {
    check_provenance(ds, cd);
    const Eigen::Index gj = ds.require_column(group_column);
    if (!ds.kind(gj).is_factor())
        throw ConfigError("grouping column '" + group_column + "' must be categorical");
    if (ds.n_missing(gj) > 0)
        throw ConfigError("grouping column '" + group_column + "' has missing cells");
    for (const ClinicalRange& r : ranges) {
        if (!(r.lower <= r.upper))
            throw ConfigError("clinical range for '" + r.variable + "' is empty");
        ds.require_column(r.variable);
    }

    const int n_levels = ds.kind(gj).n_levels();
    std::vector<std::vector<Eigen::Index>> partitions(
        static_cast<std::size_t>(n_levels));
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
        partitions[static_cast<std::size_t>(ds.value(i, gj))].push_back(i);

    ConditionalReport report;
    for (int code = 0; code < n_levels; ++code) {
        GroupSection section;
        section.group = ds.kind(gj).levels[static_cast<std::size_t>(code)];
        const auto& rows = partitions[static_cast<std::size_t>(code)];
        for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
            compare_rows(ds, cd, j, rows, section.group, params, section.rows,
                         section.flags);
        report.flags.insert(report.flags.end(), section.flags.begin(),
                            section.flags.end());

        for (const ClinicalRange& r : ranges) {
            if (!r.group.empty() && r.group != section.group) continue;
            const Eigen::Index j = ds.require_column(r.variable);
            std::vector<Eigen::Index> rows_mis;
            for (Eigen::Index i : rows)
                if (!ds.observed(i, j)) rows_mis.push_back(i);
            for (int imp = 0; imp < cd.m(); ++imp) {
                const Dataset& c = cd.completed[static_cast<std::size_t>(imp)];
                RangeCount count;
                count.variable = r.variable;
                count.group = section.group;
                count.imputation = imp + 1;
                count.n_imputed = static_cast<Eigen::Index>(rows_mis.size());
                for (Eigen::Index i : rows_mis)
                    if (r.outside(c.value(i, j))) ++count.n_outside;
                count.fraction = count.n_imputed == 0
                                     ? 0.0
                                     : static_cast<double>(count.n_outside) /
                                           static_cast<double>(count.n_imputed);
                if (count.fraction > params.range_tolerance)
                    report.flags.push_back({FlagRule::RangeImplausible, r.variable,
                                            imp + 1, section.group, count.fraction,
                                            params.range_tolerance});
                report.range_counts.push_back(std::move(count));
            }
        }
        report.sections.push_back(std::move(section));
    }
    return report;
}

namespace {

struct PlotPoint {
    int layer = 0;      // 0 observed, 1 imputed
    int imputation = 0; // 0 for observed, else 1-based
    int group_code = 0; // 0 when ungrouped
    double value = 0.0;
    double jitter = 0.0;
};

struct PlotData {
    std::vector<std::string> panels; // group level labels; {""} when ungrouped
    std::vector<PlotPoint> points;   // observed first, then per imputation
};

PlotData collect_points(const Dataset& ds, const CompletedDatasets& cd,
                        const StripPlotSpec& spec) {
    const Eigen::Index j = ds.require_column(spec.variable);
    Eigen::Index gj = -1;
    PlotData data;
    if (spec.group_column.empty()) {
        data.panels = {""};
    } else {
        gj = ds.require_column(spec.group_column);
        if (!ds.kind(gj).is_factor())
            throw ConfigError("grouping column '" + spec.group_column +
                              "' must be categorical");
        if (ds.n_missing(gj) > 0)
            throw ConfigError("grouping column '" + spec.group_column +
                              "' has missing cells");
        data.panels = ds.kind(gj).levels;
    }

    RngStream rng(spec.seed);
    auto jitter_draw = [&] { return spec.jitter * (2.0 * rng.uniform01() - 1.0); };
    auto group_of = [&](Eigen::Index i) {
        return gj < 0 ? 0 : static_cast<int>(ds.value(i, gj));
    };

    for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
        if (ds.observed(i, j))
            data.points.push_back({0, 0, group_of(i), ds.value(i, j), jitter_draw()});
    for (int imp = 0; imp < cd.m(); ++imp) {
        const Dataset& c = cd.completed[static_cast<std::size_t>(imp)];
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
            if (!ds.observed(i, j))
                data.points.push_back(
                    {1, imp + 1, group_of(i), c.value(i, j), jitter_draw()});
    }
    return data;
}

void write_tabular(const PlotData& data, const StripPlotSpec& spec,
                   std::ostream& out) {
    out << csv_join({"variable", "layer", "imputation", "group", "value", "jitter"},
                    ',')
        << '\n';
    for (const PlotPoint& p : data.points) {
        out << csv_join({spec.variable, p.layer == 0 ? "observed" : "imputed",
                         p.layer == 0 ? "NA" : std::to_string(p.imputation),
                         data.panels[static_cast<std::size_t>(p.group_code)],
                         format_double(p.value), format_double(p.jitter)},
                        ',')
            << '\n';
    }
}

void write_svg(const PlotData& data, const StripPlotSpec& spec, std::ostream& out) {
    const double panel_w = 150.0;
    const double panel_h = 330.0;
    const double margin_left = 56.0;
    const double margin_top = 34.0;
    const double margin_bottom = 36.0;
    const auto n_panels = static_cast<double>(data.panels.size());
    const double width = margin_left + n_panels * panel_w + 16.0;
    const double height = margin_top + panel_h + margin_bottom;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const PlotPoint& p : data.points) {
        lo = std::min(lo, p.value);
        hi = std::max(hi, p.value);
    }
    if (data.points.empty()) { lo = 0.0; hi = 1.0; }
    if (lo == hi) { lo -= 0.5; hi += 0.5; }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    auto y_of = [&](double v) {
        return margin_top + panel_h * (hi - v) / (hi - lo);
    };
    auto x_of = [&](const PlotPoint& p) {
        const double cx = margin_left + (p.group_code + 0.5) * panel_w;
        return cx + p.jitter * panel_w; // jitter is a panel-width fraction
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
        << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << margin_left << "\" y=\"20\" font-family=\"sans-serif\" "
           "font-size=\"14\">"
        << spec.variable << "</text>\n";

    for (std::size_t g = 0; g < data.panels.size(); ++g) {
        const double x0 = margin_left + static_cast<double>(g) * panel_w;
        out << "<rect x=\"" << x0 << "\" y=\"" << margin_top << "\" width=\""
            << panel_w << "\" height=\"" << panel_h
            << "\" fill=\"none\" stroke=\"#bbbbbb\"/>\n";
        if (!data.panels[g].empty())
            out << "<text x=\"" << x0 + panel_w / 2 << "\" y=\""
                << margin_top + panel_h + 22.0
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                   "font-size=\"12\">"
                << data.panels[g] << "</text>\n";
    }
    for (double v : {lo + pad, hi - pad}) {
        out << "<text x=\"" << margin_left - 6.0 << "\" y=\"" << y_of(v) + 4.0
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << format_double(v) << "</text>\n";
    }

    // Observed points come first in the list, so imputed points paint on top.
    for (const PlotPoint& p : data.points) {
        out << "<circle cx=\"" << format_double(x_of(p)) << "\" cy=\""
            << format_double(y_of(p.value)) << "\" r=\"2.5\" fill=\""
            << (p.layer == 0 ? "#9a9a9a" : "#d62728") << "\" fill-opacity=\""
            << (p.layer == 0 ? "0.55" : "0.75") << "\"/>\n";
    }
    out << "</svg>\n";
}

} // namespace

void export_strip_plot(const Dataset& ds, const CompletedDatasets& cd,
                       const StripPlotSpec& spec, std::ostream& sink) {
    check_provenance(ds, cd);
    const PlotData data = collect_points(ds, cd, spec);
    if (spec.format == StripPlotSpec::Format::Tabular)
        write_tabular(data, spec, sink);
    else
        write_svg(data, spec, sink);
    if (!sink) throw IoError("strip-plot sink write failed");
}

void marginal_to_csv(const MarginalReport& report, std::ostream& out, char delimiter,
                     const std::string& missing_token) {
    std::vector<std::string> header = {"variable", "imputation"};
    header.insert(header.end(), kStatHeader.begin(), kStatHeader.end());
    out << csv_join(header, delimiter) << '\n';
    for (const VariableComparison& row : report.rows)
        comparison_csv_row(row, "", false, out, delimiter, missing_token);
}

void conditional_to_csv(const ConditionalReport& report, std::ostream& out,
                        char delimiter, const std::string& missing_token) {
    std::vector<std::string> header = {"group", "variable", "imputation"};
    header.insert(header.end(), kStatHeader.begin(), kStatHeader.end());
    out << csv_join(header, delimiter) << '\n';
    for (const GroupSection& section : report.sections)
        for (const VariableComparison& row : section.rows)
            comparison_csv_row(row, section.group, true, out, delimiter,
                               missing_token);
}

void range_counts_to_csv(const std::vector<RangeCount>& counts, std::ostream& out,
                         char delimiter) {
    out << csv_join({"variable", "group", "imputation", "n_imputed", "n_outside",
                     "fraction"},
                    delimiter)
        << '\n';
    for (const RangeCount& c : counts) {
        out << csv_join({c.variable, c.group, std::to_string(c.imputation),
                         std::to_string(c.n_imputed), std::to_string(c.n_outside),
                         format_double(c.fraction)},
                        delimiter)
            << '\n';
    }
}

void flags_to_csv(const std::vector<Flag>& flags, std::ostream& out, char delimiter) {
    out << csv_join({"rule", "variable", "imputation", "group", "statistic",
                     "threshold"},
                    delimiter)
        << '\n';
    for (const Flag& f : flags) {
        out << csv_join({flag_rule_name(f.rule), f.variable,
                         std::to_string(f.imputation), f.group,
                         format_double(f.statistic), format_double(f.threshold)},
                        delimiter)
            << '\n';
    }
}

void flags_summary(const std::vector<Flag>& flags, std::ostream& out) {
    if (flags.empty()) {
        out << "no diagnostic flags\n";
        return;
    }
    std::map<FlagRule, int> counts;
    for (const Flag& f : flags) ++counts[f.rule];
    out << flags.size() << " diagnostic flag" << (flags.size() == 1 ? "" : "s");
    bool first = true;
    for (const auto& [rule, n] : counts) {
        out << (first ? ": " : ", ") << flag_rule_name(rule) << " x" << n;
        first = false;
    }
    out << '\n';
    for (const Flag& f : flags) {
        out << "  " << flag_rule_name(f.rule) << " " << f.variable << " imputation "
            << f.imputation;
        if (!f.group.empty()) out << " group " << f.group;
        out << ": statistic " << format_double(f.statistic) << " vs threshold "
            << format_double(f.threshold) << '\n';
    }
}

} // namespace micekit
