#pragma once

#include "micekit/mice.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace micekit {

struct TruncatedNormal {
    double mean = 0.0;
    double sd = 1.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

struct CategoricalSpec {
    std::vector<std::string> levels;
    std::vector<double> prevalence; // same length, nonnegative, sums to 1
};

struct FactorColumn {
    std::string name;
    CategoricalSpec spec;
};

struct ContinuousColumn {
    std::string name;
    TruncatedNormal dist;
};

/// A continuous variable whose distribution depends on a generated factor
/// column: one truncated normal per level.
struct GroupConditional {
    std::string variable;
    std::string group_column;
    std::vector<TruncatedNormal> by_level;
};

/// Exponential survival with proportional hazards on centered covariates
/// and administrative censoring at a fixed horizon. log_hr keys must name
/// continuous or two-level factor columns; their values are the true log
/// hazard ratios, so downstream coverage experiments know the truth.
struct SurvivalSpec {
    std::string time_name = "time";
    std::string event_name = "event";
    double baseline_hazard = 0.07;
    double admin_censoring = 5.0;
    std::map<std::string, double> log_hr;
};

struct SynthConfig {
    Eigen::Index n_rows = 4433;
    std::uint64_t seed = 1;
    std::vector<FactorColumn> factors;
    std::vector<GroupConditional> conditionals;
    std::vector<ContinuousColumn> continuous;
    SurvivalSpec survival;
};

/// Cohort defaults: diabetes care groups 0-3 with HbA1c conditionals
/// whose mixture lands at mean 6.9 and SD 1.4 overall, hypertension
/// groups 0/2/3 with SBP conditionals around 137 (17), 65.3% female, age
/// 73 (12), and marginal lipids/creatinine/DBP to match their reported
/// moments. Column order: sex, race, nses, dm_group, htn_group, hba1c,
/// sbp, age, dbp, tc, ldl, hdl, creatinine, time, event.
SynthConfig default_synth_config();

Dataset generate_complete(const SynthConfig& config);

/// One missingness rule: the listed variables go missing together, one
/// coin per row. Empty mar_weights means MCAR at `rate`; otherwise the
/// per-row probability is logistic(alpha + sum w_v z_v) over standardized
/// predictor values, with alpha calibrated so the expected overall rate
/// equals `rate`.
struct MissingRule {
    std::vector<std::string> variables;
    double rate = 0.0;
    std::map<std::string, double> mar_weights;
};

struct Mechanism {
    std::vector<MissingRule> rules;
    std::uint64_t seed = 0;
};

/// Cohort defaults: HbA1c missing at 44% overall, MAR on diabetes care
/// group (group 0 several times more missing than group 3); lipid block
/// (tc, ldl, hdl) jointly MCAR at 17%; blood-pressure block (sbp, dbp)
/// jointly MCAR at 29%.
Mechanism default_mechanism();

/// Pre-mask values of every masked cell, keyed by (row, variable).
struct TruthStore {
    std::map<std::pair<Eigen::Index, std::string>, double> values;
};

std::pair<Dataset, TruthStore> impose_missingness(const Dataset& ds,
                                                  const Mechanism& mech);

struct RecoveryRow {
    std::string variable;
    Eigen::Index n_cells = 0;
    double bias = 0.0;     // mean over cells of (across-imputation mean - truth)
    double rmse = 0.0;     // over cells x imputations
    double coverage = 0.0; // truth inside mean +/- 1.96 sd across imputations
};

struct RecoveryReport {
    std::vector<RecoveryRow> rows;
};

/// Score imputations against the masked truths. Requires the provenance
/// mask and the truth store to cover exactly the same cells.
RecoveryReport score_recovery(const CompletedDatasets& cd, const TruthStore& truth);

void truth_to_csv(const TruthStore& truth, std::ostream& out, char delimiter = ',');
void recovery_to_csv(const RecoveryReport& report, std::ostream& out,
                     char delimiter = ',', const std::string& missing_token = "NA");

} // namespace micekit
