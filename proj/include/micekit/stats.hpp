#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace micekit {

/// Inverse standard normal CDF (Wichura's AS241, double precision).
double normal_quantile(double p);

double normal_cdf(double x);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t CDF; df may be +infinity (standard normal).
double t_cdf(double t, double df);

/// Student-t quantile; df may be +infinity.
double t_quantile(double p, double df);

/// Median-unbiased sample quantile (Hyndman-Fan type 8) of sorted data.
double quantile_type8(const std::vector<double>& sorted, double p);

double mean(const Eigen::VectorXd& v);

/// Sample variance with the n-1 denominator; NaN when fewer than 2 values.
double sample_variance(const Eigen::VectorXd& v);

struct SummaryStats {
    Eigen::Index n = 0;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
    double min = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    double q1 = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();
    double q3 = std::numeric_limits<double>::quiet_NaN();
};

SummaryStats summarize(std::vector<double> values);

} // namespace micekit
