#pragma once

#include "micekit/design.hpp"
#include "micekit/mice.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace micekit {

/// One completed-data estimate: point value and squared standard error.
struct Estimate {
    double q = 0.0;
    double u = 0.0;
};

/// m estimates of one estimand, one per completed dataset.
using EstimateSet = std::vector<Estimate>;

struct PooledResult {
    double qbar = 0.0; // pooled point estimate
    double w = 0.0;    // within-imputation variance
    double b = 0.0;    // between-imputation variance
    double t = 0.0;    // total variance, w + (1 + 1/m) b
    double df = 0.0;   // +infinity when b == 0
    double fmi = 0.0;  // fraction of missing information
    double level = 0.95;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Rubin's rules. df is the classic (m-1)-based formula; fmi the
/// df-adjusted standard definition (r + 2/(df+3)) / (r + 1).
PooledResult pool_rubin(const EstimateSet& est, double level = 0.95);

struct SurvivalRecord {
    double time = 0.0;
    bool event = false;
};

struct CoxParams {
    int max_iter = 100;
    double tol = 1e-8;              // gradient max-norm at convergence
    double divergence_bound = 20.0; // |coef| * sd(covariate) beyond this aborts
};

struct CoxFit {
    Eigen::VectorXd coef;       // log hazard ratios
    Eigen::MatrixXd covariance; // inverse observed information
    std::vector<std::string> covariate_names;

    // Breslow baseline cumulative hazard: step function over the distinct
    // event times, nondecreasing.
    std::vector<double> baseline_times;
    std::vector<double> baseline_cumhaz;

    int iterations = 0;
    double gradient_norm = 0.0;
    double loglik = 0.0;      // maximized partial log-likelihood
    double loglik_null = 0.0; // at the zero coefficient vector
};

/// Cox proportional hazards by damped Newton on the Breslow-tie partial
/// likelihood. X must not contain an intercept column; p = 0 (no
/// covariates) is allowed and reduces the baseline to Nelson-Aalen.
CoxFit fit_cox(const std::vector<SurvivalRecord>& data, const DesignMatrix& X,
               const CoxParams& params = {});

/// S(horizon | profile) = exp(-cumhaz0(horizon) * exp(profile . coef)).
double predict_survival(const CoxFit& fit, const Eigen::VectorXd& profile,
                        double horizon);

/// Wald summary of a single fit on the hazard-ratio scale.
struct CoxSummaryRow {
    std::string covariate;
    double log_hr = 0.0;
    double se = 0.0;
    double hr = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

std::vector<CoxSummaryRow> cox_summary(const CoxFit& fit, double level = 0.95);

/// Pull (time, event) records out of a fully observed pair of columns:
/// time continuous and nonnegative, event either a two-level factor
/// (second level = event) or a numeric 0/1 column.
std::vector<SurvivalRecord> survival_records(const Dataset& ds,
                                             const std::string& time_column,
                                             const std::string& event_column);

struct PooledCoxRow {
    std::string covariate;
    PooledResult log_hr; // pooled on the log scale
    double hr = 0.0;
    double hr_low = 0.0;
    double hr_high = 0.0;
};

struct PooledCoxReport {
    std::vector<PooledCoxRow> rows;
    double level = 0.95;
};

/// Fit each completed dataset, then pool coefficient estimates with
/// Rubin's rules. The outcome columns must have been fully observed in
/// the pre-imputation data (checked against the provenance mask).
PooledCoxReport pooled_cox(const CompletedDatasets& cd, const std::string& time_column,
                           const std::string& event_column,
                           const std::vector<std::string>& covariates,
                           double level = 0.95, const CoxParams& params = {});

/// A covariate profile on the source-variable scale: continuous values as
/// numbers, factor values as level labels. Expanded to the one-hot design
/// row the Cox fit consumes.
struct Profile {
    std::string label;
    std::map<std::string, std::string> values; // variable -> value text
};

Eigen::VectorXd expand_profile(const Dataset& reference,
                               const std::vector<std::string>& covariates,
                               const Profile& profile);

struct SurvivalRow {
    std::string profile;
    double horizon = 0.0;
    double survival = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Predicted survival per profile and horizon, combined across completed
/// datasets on the log(-log S) scale. The interval reflects coefficient
/// and between-imputation variability only, not baseline-hazard
/// uncertainty; degenerate cases collapse to a point interval.
std::vector<SurvivalRow> pooled_survival(const CompletedDatasets& cd,
                                         const std::string& time_column,
                                         const std::string& event_column,
                                         const std::vector<std::string>& covariates,
                                         const std::vector<Profile>& profiles,
                                         const std::vector<double>& horizons,
                                         double level = 0.95,
                                         const CoxParams& params = {});

void pooled_cox_to_csv(const PooledCoxReport& report, std::ostream& out,
                       char delimiter = ',', const std::string& missing_token = "NA");
void cox_summary_to_csv(const std::vector<CoxSummaryRow>& rows, std::ostream& out,
                        char delimiter = ',');
void survival_to_csv(const std::vector<SurvivalRow>& rows, std::ostream& out,
                     char delimiter = ',');

} // namespace micekit
