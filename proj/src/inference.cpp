#include "micekit/inference.hpp"

#include "micekit/csv.hpp"
#include "micekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace micekit {

namespace {

double check_level(double level) {
    if (!(level > 0.0 && level < 1.0))
        throw ConfigError("confidence level must lie in (0, 1)");
    return 1.0 - (1.0 - level) / 2.0;
}

} // namespace

PooledResult pool_rubin(const EstimateSet& est, double level) {
    const double tail = check_level(level);
    const auto m = static_cast<double>(est.size());
    if (est.size() < 2)
        throw ConfigError("pool_rubin: between-imputation variance undefined for m < 2");
    for (const Estimate& e : est)
        if (!(e.u > 0.0))
            throw ComputeError("pool_rubin: nonpositive squared standard error");

    PooledResult r;
    r.level = level;
    for (const Estimate& e : est) {
        r.qbar += e.q;
        r.w += e.u;
    }
    r.qbar /= m;
    r.w /= m;
    for (const Estimate& e : est) r.b += (e.q - r.qbar) * (e.q - r.qbar);
    r.b /= m - 1.0;
    const double excess = (1.0 + 1.0 / m) * r.b;
    r.t = r.w + r.b + r.b / m;
    if (r.b == 0.0) {
        r.df = std::numeric_limits<double>::infinity();
        r.fmi = 0.0;
    } else {
        const double ratio = 1.0 + r.w / excess;
        r.df = (m - 1.0) * ratio * ratio;
        const double rm = excess / r.w;
        r.fmi = (rm + 2.0 / (r.df + 3.0)) / (rm + 1.0);
    }
    const double half = t_quantile(tail, r.df) * std::sqrt(r.t);
    r.ci_low = r.qbar - half;
    r.ci_high = r.qbar + half;
    return r;
}

namespace {

struct CoxPass {
    double loglik = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd info; // observed information (negative Hessian)
};

struct CoxWork {
    const std::vector<SurvivalRecord>* data = nullptr;
    const Eigen::MatrixXd* X = nullptr;
    std::vector<Eigen::Index> order; // rows by descending time
};

CoxPass cox_pass(const CoxWork& w, const Eigen::VectorXd& beta, bool with_derivs) {
    const auto& data = *w.data;
    const auto& X = *w.X;
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();

    Eigen::VectorXd eta = p > 0 ? Eigen::VectorXd(X * beta) : Eigen::VectorXd::Zero(n);
    const double c = n > 0 ? eta.maxCoeff() : 0.0;

    CoxPass pass;
    pass.grad.setZero(p);
    pass.info.setZero(p, p);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    std::size_t i = 0;
    while (i < w.order.size()) {
        const double t = data[static_cast<std::size_t>(w.order[i])].time;
        std::size_t j = i;
        while (j < w.order.size() &&
               data[static_cast<std::size_t>(w.order[j])].time == t) {
            const Eigen::Index k = w.order[j];
            const double wk = std::exp(eta[k] - c);
            s0 += wk;
            if (p > 0) {
                s1.noalias() += wk * X.row(k).transpose();
                if (with_derivs)
                    s2.noalias() += wk * X.row(k).transpose() * X.row(k);
            }
            ++j;
        }
        int d = 0;
        for (std::size_t q = i; q < j; ++q) {
            const Eigen::Index k = w.order[q];
            if (!data[static_cast<std::size_t>(k)].event) continue;
            ++d;
            pass.loglik += eta[k] - c;
            if (p > 0 && with_derivs) pass.grad += X.row(k).transpose();
        }
        if (d > 0) {
            pass.loglik -= d * std::log(s0);
            if (p > 0 && with_derivs) {
                const Eigen::VectorXd mu = s1 / s0;
                pass.grad.noalias() -= d * mu;
                pass.info.noalias() += d * (s2 / s0 - mu * mu.transpose());
            }
        }
        i = j;
    }
    return pass;
}

void fill_baseline(const CoxWork& w, const Eigen::VectorXd& beta, CoxFit& fit) {
    const auto& data = *w.data;
    const auto& X = *w.X;
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();

    Eigen::VectorXd eta = p > 0 ? Eigen::VectorXd(X * beta) : Eigen::VectorXd::Zero(n);
    const double c = n > 0 ? eta.maxCoeff() : 0.0;

    double s0 = 0.0;
    std::vector<std::pair<double, double>> steps; // (event time, d / s0_true)
    std::size_t i = 0;
    while (i < w.order.size()) {
        const double t = data[static_cast<std::size_t>(w.order[i])].time;
        std::size_t j = i;
        int d = 0;
        while (j < w.order.size() &&
               data[static_cast<std::size_t>(w.order[j])].time == t) {
            const Eigen::Index k = w.order[j];
            s0 += std::exp(eta[k] - c);
            if (data[static_cast<std::size_t>(k)].event) ++d;
            ++j;
        }
        if (d > 0) steps.push_back({t, std::exp(-c) * d / s0});
        i = j;
    }
    std::reverse(steps.begin(), steps.end());
    double cum = 0.0;
    for (const auto& [t, inc] : steps) {
        cum += inc;
        fit.baseline_times.push_back(t);
        fit.baseline_cumhaz.push_back(cum);
    }
}

} // namespace

CoxFit fit_cox(const std::vector<SurvivalRecord>& data, const DesignMatrix& X,
               const CoxParams& params) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (static_cast<Eigen::Index>(data.size()) != n)
        throw ConfigError("cox: design rows do not match the survival records");
    for (const DesignColumn& col : X.columns)
        if (col.source < 0)
            throw ConfigError("cox: design must not contain an intercept column");

    Eigen::Index n_events = 0;
    for (const SurvivalRecord& r : data) {
        if (r.time < 0.0) throw ComputeError("cox: negative follow-up time");
        if (r.event) ++n_events;
    }
    if (n_events == 0) throw ComputeError("cox: no events");

    Eigen::VectorXd sds(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = sample_variance(X.X.col(j));
        sds[j] = std::isnan(var) ? 0.0 : std::sqrt(var);
        if (!(sds[j] > 0.0))
            throw ComputeError("cox: covariate '" + X.columns[static_cast<std::size_t>(j)].name +
                               "' is constant");
    }

    // Solve in standardized coordinates: the partial likelihood is invariant
    // to centering, and unit scales keep the gradient's rounding floor far
    // below the tolerance even for large cohorts. Coefficients, covariance,
    // and the reported gradient are mapped back to the original scale.
    Eigen::MatrixXd Xs(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        Xs.col(j) = (X.X.col(j).array() - X.X.col(j).mean()) / sds[j];

    CoxWork work;
    work.data = &data;
    work.X = &Xs;
    work.order.resize(static_cast<std::size_t>(n));
    std::iota(work.order.begin(), work.order.end(), Eigen::Index{0});
    std::sort(work.order.begin(), work.order.end(),
              [&](Eigen::Index a, Eigen::Index b) {
                  const double ta = data[static_cast<std::size_t>(a)].time;
                  const double tb = data[static_cast<std::size_t>(b)].time;
                  return ta != tb ? ta > tb : a < b;
              });

    CoxFit fit;
    for (const DesignColumn& col : X.columns) fit.covariate_names.push_back(col.name);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p); // standardized scale
    CoxPass cur = cox_pass(work, beta, true);
    fit.loglik_null = cur.loglik;

    const auto original_gnorm = [&](const Eigen::VectorXd& g) {
        return p > 0 ? Eigen::VectorXd(g.cwiseProduct(sds)).lpNorm<Eigen::Infinity>()
                     : 0.0;
    };
    double gnorm = original_gnorm(cur.grad);
    while (gnorm >= params.tol) {
        if (fit.iterations >= params.max_iter)
            throw ComputeError("cox: no convergence after " +
                               std::to_string(params.max_iter) +
                               " iterations; gradient max-norm " +
                               format_double(gnorm));
        ++fit.iterations;

        Eigen::LLT<Eigen::MatrixXd> llt(cur.info);
        if (llt.info() != Eigen::Success)
            throw ComputeError("cox: observed information is not positive definite");
        const Eigen::VectorXd step = llt.solve(cur.grad);

        // Accept any step that does not lower the log likelihood beyond
        // rounding noise; otherwise damp it.
        const double slack = 4.0 * std::numeric_limits<double>::epsilon() *
                             (1.0 + std::abs(cur.loglik));
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40 && !accepted; ++h) {
            const Eigen::VectorXd cand = beta + scale * step;
            CoxPass next = cox_pass(work, cand, true);
            if (next.loglik >= cur.loglik - slack) {
                beta = cand;
                cur = std::move(next);
                accepted = true;
            } else {
                scale *= 0.5;
            }
        }
        if (!accepted)
            throw ComputeError("cox: step halving failed at iteration " +
                               std::to_string(fit.iterations));

        for (Eigen::Index j = 0; j < p; ++j)
            if (std::abs(beta[j]) > params.divergence_bound)
                throw ComputeError(
                    "cox: monotone likelihood suspected for covariate '" +
                    fit.covariate_names[static_cast<std::size_t>(j)] +
                    "' (standardized coefficient " +
                    format_double(std::abs(beta[j])) + ")");

        gnorm = original_gnorm(cur.grad);
    }

    fit.coef = beta.cwiseQuotient(sds);
    fit.gradient_norm = gnorm;
    fit.loglik = cur.loglik;
    if (p > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(cur.info);
        if (llt.info() != Eigen::Success)
            throw ComputeError("cox: observed information is not positive definite");
        const Eigen::MatrixXd cov_std = llt.solve(Eigen::MatrixXd::Identity(p, p));
        const Eigen::VectorXd inv_sds = sds.cwiseInverse();
        fit.covariance = inv_sds.asDiagonal() * cov_std * inv_sds.asDiagonal();
    } else {
        fit.covariance.resize(0, 0);
    }
    CoxWork base = work;
    base.X = &X.X; // baseline references the original scale, x = 0
    fill_baseline(base, fit.coef, fit);
    return fit;
}

double predict_survival(const CoxFit& fit, const Eigen::VectorXd& profile,
                        double horizon) {
    if (profile.size() != fit.coef.size())
        throw ConfigError("predict_survival: profile dimension mismatch");
    if (horizon < 0.0) throw ConfigError("predict_survival: negative horizon");
    const auto it = std::upper_bound(fit.baseline_times.begin(),
                                     fit.baseline_times.end(), horizon);
    if (it == fit.baseline_times.begin()) return 1.0;
    const auto idx = static_cast<std::size_t>(
        std::distance(fit.baseline_times.begin(), it) - 1);
    const double lp = fit.coef.size() > 0 ? profile.dot(fit.coef) : 0.0;
    return std::exp(-fit.baseline_cumhaz[idx] * std::exp(lp));
}

std::vector<CoxSummaryRow> cox_summary(const CoxFit& fit, double level) {
    const double z = normal_quantile(check_level(level));
    std::vector<CoxSummaryRow> rows;
    for (Eigen::Index j = 0; j < fit.coef.size(); ++j) {
        CoxSummaryRow row;
        row.covariate = fit.covariate_names[static_cast<std::size_t>(j)];
        row.log_hr = fit.coef[j];
        row.se = std::sqrt(fit.covariance(j, j));
        row.hr = std::exp(row.log_hr);
        row.ci_low = std::exp(row.log_hr - z * row.se);
        row.ci_high = std::exp(row.log_hr + z * row.se);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SurvivalRecord> survival_records(const Dataset& ds,
                                             const std::string& time_column,
                                             const std::string& event_column) {
    const Eigen::Index tj = ds.require_column(time_column);
    const Eigen::Index ej = ds.require_column(event_column);
    if (!ds.kind(tj).is_continuous())
        throw ConfigError("time column '" + time_column + "' must be continuous");
    if (ds.n_missing(tj) > 0 || ds.n_missing(ej) > 0)
        throw ComputeError("outcome columns must be fully observed");
    const bool factor = ds.kind(ej).is_factor();
    if (factor && ds.kind(ej).n_levels() != 2)
        throw ConfigError("event column '" + event_column + "' must have two levels");

    std::vector<SurvivalRecord> records;
    records.reserve(static_cast<std::size_t>(ds.n_rows()));
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        SurvivalRecord r;
        r.time = ds.value(i, tj);
        const double e = ds.value(i, ej);
        if (!factor && e != 0.0 && e != 1.0)
            throw ComputeError("event column '" + event_column +
                               "' must hold 0/1 values");
        r.event = e == 1.0;
        records.push_back(r);
    }
    return records;
}

namespace {

std::vector<CoxFit> fit_completed(const CompletedDatasets& cd,
                                  const std::string& time_column,
                                  const std::string& event_column,
                                  const std::vector<std::string>& covariates,
                                  const CoxParams& params) {
    if (cd.completed.empty()) throw ConfigError("no completed datasets");
    const Dataset& first = cd.completed.front();
    for (const std::string& col : {time_column, event_column}) {
        const Eigen::Index j = first.require_column(col);
        if (!cd.observed_mask.col(j).all())
            throw ComputeError("outcome column '" + col + "' was imputed");
    }
    std::vector<CoxFit> fits;
    for (std::size_t i = 0; i < cd.completed.size(); ++i) {
        const Dataset& ds = cd.completed[i];
        try {
            const auto records = survival_records(ds, time_column, event_column);
            const DesignMatrix X =
                build_design(ds, covariates, DesignMode::OneHot, false);
            fits.push_back(fit_cox(records, X, params));
        } catch (const Error& e) {
            throw ComputeError("completed dataset " + std::to_string(i + 1) + ": " +
                               e.what());
        }
    }
    return fits;
}

} // namespace

PooledCoxReport pooled_cox(const CompletedDatasets& cd, const std::string& time_column,
                           const std::string& event_column,
                           const std::vector<std::string>& covariates, double level,
                           const CoxParams& params) {
    const std::vector<CoxFit> fits =
        fit_completed(cd, time_column, event_column, covariates, params);
    PooledCoxReport report;
    report.level = level;
    const Eigen::Index p = fits.front().coef.size();
    for (Eigen::Index j = 0; j < p; ++j) {
        EstimateSet est;
        for (const CoxFit& fit : fits)
            est.push_back({fit.coef[j], fit.covariance(j, j)});
        PooledCoxRow row;
        row.covariate = fits.front().covariate_names[static_cast<std::size_t>(j)];
        row.log_hr = pool_rubin(est, level);
        row.hr = std::exp(row.log_hr.qbar);
        row.hr_low = std::exp(row.log_hr.ci_low);
        row.hr_high = std::exp(row.log_hr.ci_high);
        report.rows.push_back(std::move(row));
    }
    return report;
}

Eigen::VectorXd expand_profile(const Dataset& reference,
                               const std::vector<std::string>& covariates,
                               const Profile& profile) {
    std::vector<double> entries;
    for (const std::string& name : covariates) {
        const Eigen::Index j = reference.require_column(name);
        const auto it = profile.values.find(name);
        if (it == profile.values.end())
            throw ConfigError("profile '" + profile.label + "' has no value for '" +
                              name + "'");
        const ColumnKind& kind = reference.kind(j);
        if (kind.is_continuous()) {
            try {
                entries.push_back(parse_double(it->second));
            } catch (const Error&) {
                throw ConfigError("profile '" + profile.label + "': value '" +
                                  it->second + "' for '" + name +
                                  "' is not a number");
            }
        } else {
            const int code = kind.level_index(it->second);
            if (code < 0)
                throw ConfigError("profile '" + profile.label + "': '" + it->second +
                                  "' is not a level of '" + name + "'");
            for (int l = 1; l < kind.n_levels(); ++l)
                entries.push_back(l == code ? 1.0 : 0.0);
        }
    }
    return Eigen::Map<const Eigen::VectorXd>(entries.data(),
                                             static_cast<Eigen::Index>(entries.size()));
}

std::vector<SurvivalRow> pooled_survival(const CompletedDatasets& cd,
                                         const std::string& time_column,
                                         const std::string& event_column,
                                         const std::vector<std::string>& covariates,
                                         const std::vector<Profile>& profiles,
                                         const std::vector<double>& horizons,
                                         double level, const CoxParams& params) {
    const double tail = check_level(level);
    const std::vector<CoxFit> fits =
        fit_completed(cd, time_column, event_column, covariates, params);
    const auto m = static_cast<double>(fits.size());

    std::vector<SurvivalRow> rows;
    for (const Profile& profile : profiles) {
        const Eigen::VectorXd x =
            expand_profile(cd.completed.front(), covariates, profile);
        for (const double horizon : horizons) {
            SurvivalRow row;
            row.profile = profile.label;
            row.horizon = horizon;

            std::vector<double> s(fits.size());
            std::vector<double> theta(fits.size());
            std::vector<double> u(fits.size());
            bool interior = true;
            double sbar = 0.0;
            for (std::size_t i = 0; i < fits.size(); ++i) {
                s[i] = predict_survival(fits[i], x, horizon);
                sbar += s[i];
                if (s[i] <= 0.0 || s[i] >= 1.0) {
                    interior = false;
                    continue;
                }
                theta[i] = std::log(-std::log(s[i]));
                u[i] = fits[i].coef.size() > 0 ? x.dot(fits[i].covariance * x) : 0.0;
            }
            sbar /= m;

            if (!interior) {
                // Boundary survival (for instance horizon before the first
                // event): no cloglog pooling, report a point interval.
                row.survival = sbar;
                row.ci_low = sbar;
                row.ci_high = sbar;
                rows.push_back(std::move(row));
                continue;
            }

            double qbar = 0.0;
            double w = 0.0;
            for (std::size_t i = 0; i < fits.size(); ++i) {
                qbar += theta[i];
                w += u[i];
            }
            qbar /= m;
            w /= m;
            double b = 0.0;
            if (fits.size() > 1) {
                for (const double th : theta) b += (th - qbar) * (th - qbar);
                b /= m - 1.0;
            }
            const double excess = fits.size() > 1 ? (1.0 + 1.0 / m) * b : 0.0;
            const double total = w + excess;
            double df = std::numeric_limits<double>::infinity();
            if (b > 0.0 && w > 0.0) {
                const double ratio = 1.0 + w / excess;
                df = (m - 1.0) * ratio * ratio;
            } else if (b > 0.0) {
                df = m - 1.0;
            }
            const double half =
                total > 0.0 ? t_quantile(tail, df) * std::sqrt(total) : 0.0;
            row.survival = std::exp(-std::exp(qbar));
            row.ci_low = std::exp(-std::exp(qbar + half));
            row.ci_high = std::exp(-std::exp(qbar - half));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void pooled_cox_to_csv(const PooledCoxReport& report, std::ostream& out,
                       char delimiter, const std::string& missing_token) {
    out << csv_join({"estimand", "hr", "ci_low", "ci_high", "log_hr", "se", "w", "b",
                     "t", "df", "fmi"},
                    delimiter)
        << '\n';
    for (const PooledCoxRow& row : report.rows) {
        const PooledResult& p = row.log_hr;
        out << csv_join(
                   {row.covariate, format_double(row.hr), format_double(row.hr_low),
                    format_double(row.hr_high), format_double(p.qbar),
                    format_double(std::sqrt(p.t)), format_double(p.w),
                    format_double(p.b), format_double(p.t),
                    std::isinf(p.df) ? missing_token : format_double(p.df),
                    format_double(p.fmi)},
                   delimiter)
            << '\n';
    }
}

void cox_summary_to_csv(const std::vector<CoxSummaryRow>& rows, std::ostream& out,
                        char delimiter) {
    out << csv_join({"estimand", "hr", "ci_low", "ci_high", "log_hr", "se"}, delimiter)
        << '\n';
    for (const CoxSummaryRow& row : rows) {
        out << csv_join({row.covariate, format_double(row.hr),
                         format_double(row.ci_low), format_double(row.ci_high),
                         format_double(row.log_hr), format_double(row.se)},
                        delimiter)
            << '\n';
    }
}

void survival_to_csv(const std::vector<SurvivalRow>& rows, std::ostream& out,
                     char delimiter) {
    out << csv_join({"profile", "horizon", "survival", "ci_low", "ci_high"}, delimiter)
        << '\n';
    for (const SurvivalRow& row : rows) {
        out << csv_join({row.profile, format_double(row.horizon),
                         format_double(row.survival), format_double(row.ci_low),
                         format_double(row.ci_high)},
                        delimiter)
            << '\n';
    }
}

} // namespace micekit
