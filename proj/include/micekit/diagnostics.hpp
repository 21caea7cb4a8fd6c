#pragma once

#include "micekit/mice.hpp"
#include "micekit/stats.hpp"

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace micekit {

enum class FlagRule { MeanShift, VarianceRatio, RangeImplausible };

std::string flag_rule_name(FlagRule r);

/// Numeric thresholds behind the flag rules. The defaults are the shipped
/// rules: |mean_imp - mean_obs| > 2 * SD_obs; var_imp / var_obs < 0.5 or
/// > 2; more than 1% of imputed cells outside a clinical range. All
/// comparisons are strict inequalities.
struct DiagnosticParams {
    double mean_shift_sds = 2.0;
    double variance_ratio_low = 0.5;
    double variance_ratio_high = 2.0;
    double range_tolerance = 0.01;
};

struct Flag {
    FlagRule rule = FlagRule::MeanShift;
    std::string variable;
    int imputation = 0; // 1-based dataset index
    std::string group;  // empty outside conditional reports
    double statistic = 0.0; // |mean shift|, variance ratio, or fraction outside
    double threshold = 0.0; // the boundary the statistic crossed
};

/// One variable in one completed dataset: observed-cell stats against
/// imputed-cell stats. Observed stats repeat identically across
/// imputations by construction.
struct VariableComparison {
    std::string variable;
    int imputation = 0; // 1-based
    SummaryStats observed;
    SummaryStats imputed;
};

struct MarginalReport {
    std::vector<VariableComparison> rows; // variable-major, imputation-minor
    std::vector<Flag> flags;
};

/// Observed-vs-imputed summaries per variable and imputation, with
/// mean-shift and variance-ratio flags. Variables without imputed cells
/// are omitted; degenerate statistics (too few cells on either side)
/// simply skip the rule they starve.
MarginalReport marginal_compare(const Dataset& ds, const CompletedDatasets& cd,
                                const DiagnosticParams& params = {});

/// Closed plausible interval for a variable, optionally scoped to one
/// level of the conditioning column. `concern` limits which side of the
/// interval counts as implausible.
struct ClinicalRange {
    enum class Concern { Low, High, Both };

    std::string variable;
    std::string group; // level label; empty = every level
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    Concern concern = Concern::Both;

    bool outside(double v) const;
};

/// Shipped defaults: HbA1c above 6.5 in diabetes-care group 0 and SBP
/// above 140 in hypertension-care group 0 are implausible. Pair each
/// entry with its own grouping column.
std::vector<ClinicalRange> default_hba1c_ranges(const std::string& variable = "hba1c");
std::vector<ClinicalRange> default_sbp_ranges(const std::string& variable = "sbp");

struct RangeCount {
    std::string variable;
    std::string group;
    int imputation = 0; // 1-based
    Eigen::Index n_imputed = 0;
    Eigen::Index n_outside = 0;
    double fraction = 0.0;
};

struct GroupSection {
    std::string group; // level label
    std::vector<VariableComparison> rows;
    std::vector<Flag> flags;
};

struct ConditionalReport {
    std::vector<GroupSection> sections; // one per level, in level order
    std::vector<RangeCount> range_counts;
    std::vector<Flag> flags; // all sections' flags plus range flags
};

/// marginal_compare applied within each level of a fully observed
/// grouping column, plus clinical-range accounting for every matching
/// (variable, group) pair.
ConditionalReport conditional_compare(const Dataset& ds, const CompletedDatasets& cd,
                                      const std::string& group_column,
                                      const std::vector<ClinicalRange>& ranges = {},
                                      const DiagnosticParams& params = {});

struct StripPlotSpec {
    enum class Format { Tabular, Svg };

    std::string variable;
    std::string group_column; // empty = single panel
    double jitter = 0.18;     // half-width of the horizontal jitter band
    std::uint64_t seed = 0;
    Format format = Format::Tabular;
};

/// Strip-plot export. Tabular mode writes long-form points (layer,
/// imputation, group, value, jitter), observed rows first so a plotting
/// layer-order convention of "later on top" puts imputed points above
/// observed ones. Svg mode draws one panel per group level, gray observed
/// circles under red imputed ones.
void export_strip_plot(const Dataset& ds, const CompletedDatasets& cd,
                       const StripPlotSpec& spec, std::ostream& sink);

void marginal_to_csv(const MarginalReport& report, std::ostream& out,
                     char delimiter = ',', const std::string& missing_token = "NA");
void conditional_to_csv(const ConditionalReport& report, std::ostream& out,
                        char delimiter = ',', const std::string& missing_token = "NA");
void range_counts_to_csv(const std::vector<RangeCount>& counts, std::ostream& out,
                         char delimiter = ',');
void flags_to_csv(const std::vector<Flag>& flags, std::ostream& out,
                  char delimiter = ',');

/// Human-readable rollup: counts per rule, then one line per flag.
void flags_summary(const std::vector<Flag>& flags, std::ostream& out);

} // namespace micekit
