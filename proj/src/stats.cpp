#include "micekit/stats.hpp"

#include "micekit/error.hpp"

#include <algorithm>
#include <cmath>

namespace micekit {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ComputeError("normal_quantile: p must lie in (0,1)");
    // AS241 (PPND16).
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Continued fraction for the incomplete beta function (Lentz).
double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(lbt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double t_cdf(double t, double df) {
    // Past ~1e10 the t and normal CDFs agree to ~1e-11 while the incomplete-beta
    // argument df/(df+t^2) rounds to 1, so switch to the limit explicitly.
    if (df > 1e10) return normal_cdf(t);
    if (!(df > 0)) throw ComputeError("t_cdf: df must be positive");
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double p = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - p : p;
}

double t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0))
        throw ComputeError("t_quantile: p must lie in (0,1)");
    if (df > 1e10) return normal_quantile(p);
    if (!(df > 0)) throw ComputeError("t_quantile: df must be positive");
    if (p == 0.5) return 0.0;
    // Bracket then bisect/Newton on the CDF.
    double lo = -1.0, hi = 1.0;
    while (t_cdf(lo, df) > p) lo *= 2.0;
    while (t_cdf(hi, df) < p) hi *= 2.0;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = t_cdf(x, df) - p;
        if (f > 0.0)
            hi = x;
        else
            lo = x;
        // Newton step using the t density, clipped to the bracket.
        const double logpdf = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                              0.5 * std::log(df * M_PI) -
                              0.5 * (df + 1.0) * std::log1p(x * x / df);
        const double step = f / std::exp(logpdf);
        double next = x - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) < 1e-14 * (1.0 + std::fabs(x))) return next;
        x = next;
    }
    return x;
}

double quantile_type8(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ComputeError("quantile: empty sample");
    const double n = static_cast<double>(sorted.size());
    double h = (n + 1.0 / 3.0) * p + 1.0 / 3.0;
    h = std::clamp(h, 1.0, n);
    const double fl = std::floor(h);
    const auto i = static_cast<std::size_t>(fl) - 1;
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + (h - fl) * (sorted[i + 1] - sorted[i]);
}

double mean(const Eigen::VectorXd& v) {
    if (v.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    return v.mean();
}

double sample_variance(const Eigen::VectorXd& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = v.mean();
    return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

SummaryStats summarize(std::vector<double> values) {
    SummaryStats s;
    s.n = static_cast<Eigen::Index>(values.size());
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    Eigen::Map<const Eigen::VectorXd> v(values.data(),
                                        static_cast<Eigen::Index>(values.size()));
    s.mean = mean(v);
    s.variance = sample_variance(v);
    s.sd = std::isnan(s.variance) ? s.variance : std::sqrt(s.variance);
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile_type8(values, 0.25);
    s.median = quantile_type8(values, 0.5);
    s.q3 = quantile_type8(values, 0.75);
    return s;
}

} // namespace micekit
