#include "micekit/synthgen.hpp"

#include "micekit/csv.hpp"
#include "micekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

namespace micekit {

namespace {

void check_dist(const std::string& name, const TruncatedNormal& d) {
    if (!(d.sd > 0.0))
        throw ConfigError("synth column '" + name + "': sd must be positive");
    if (!(d.lower < d.upper))
        throw ConfigError("synth column '" + name + "': truncation bounds not ordered");
}

void check_categorical(const std::string& name, const CategoricalSpec& spec) {
    if (spec.levels.size() < 2)
        throw ConfigError("synth column '" + name + "': needs at least two levels");
    if (spec.levels.size() != spec.prevalence.size())
        throw ConfigError("synth column '" + name +
                          "': prevalence size does not match levels");
    double sum = 0.0;
    for (double p : spec.prevalence) {
        if (p < 0.0)
            throw ConfigError("synth column '" + name + "': negative prevalence");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("synth column '" + name + "': prevalences sum to " +
                          format_double(sum) + ", not 1");
}

double draw_truncnorm(const TruncatedNormal& d, RngStream& rng) {
    const double a = normal_cdf((d.lower - d.mean) / d.sd);
    const double b = normal_cdf((d.upper - d.mean) / d.sd);
    if (!(b > a))
        throw ComputeError("truncation window has no probability mass");
    const double u = a + (b - a) * rng.uniform01();
    const double v = d.mean + d.sd * normal_quantile(u);
    return std::clamp(v, d.lower, d.upper);
}

int draw_level(const CategoricalSpec& spec, RngStream& rng) {
    const double u = rng.uniform01();
    double cum = 0.0;
    for (std::size_t k = 0; k < spec.prevalence.size(); ++k) {
        cum += spec.prevalence[k];
        if (u < cum) return static_cast<int>(k);
    }
    return static_cast<int>(spec.levels.size()) - 1;
}

ColumnKind factor_kind(const CategoricalSpec& spec) {
    return spec.levels.size() == 2 ? ColumnKind::binary(spec.levels)
                                   : ColumnKind::categorical(spec.levels);
}

} // namespace

SynthConfig default_synth_config() {
    SynthConfig c;
    c.n_rows = 4433;
    c.seed = 1;

    c.factors.push_back({"sex", {{"female", "male"}, {0.653, 0.347}}});
    c.factors.push_back({"race", {{"black", "white", "other"}, {0.429, 0.546, 0.025}}});
    c.factors.push_back(
        {"nses", {{"low", "middle", "high"}, {0.3346, 0.3460, 0.3194}}});
    c.factors.push_back(
        {"dm_group", {{"0", "1", "2", "3"}, {0.523, 0.10, 0.22, 0.157}}});
    c.factors.push_back({"htn_group", {{"0", "2", "3"}, {0.067, 0.20, 0.733}}});

    // HbA1c mixture over the care groups: the untreated group sits fully
    // below 6.4, the treated groups higher, landing at 6.9 (1.4) overall.
    c.conditionals.push_back({"hba1c",
                              "dm_group",
                              {{5.9, 0.5, 4.0, 6.4},
                               {8.6, 0.95, 4.0, 15.0},
                               {7.7, 0.95, 4.0, 15.0},
                               {8.5, 0.95, 4.0, 15.0}}});
    c.conditionals.push_back({"sbp",
                              "htn_group",
                              {{124.0, 8.0, 85.0, 139.0},
                               {138.0, 17.0, 85.0, 220.0},
                               {138.0, 17.0, 85.0, 220.0}}});

    c.continuous.push_back({"age", {73.0, 12.0, 18.0, 110.0}});
    c.continuous.push_back({"dbp", {75.0, 10.0, 40.0, 130.0}});
    c.continuous.push_back({"tc", {177.0, 42.0, 30.0, 400.0}});
    c.continuous.push_back({"ldl", {99.0, 34.0, 12.0, 300.0}});
    c.continuous.push_back({"hdl", {50.0, 16.0, 16.0, 124.0}});
    c.continuous.push_back({"creatinine", {1.5, 0.7, 0.3, 8.0}});

    c.survival.baseline_hazard = 0.07;
    c.survival.admin_censoring = 5.0;
    return c;
}

Dataset generate_complete(const SynthConfig& config) {
    if (config.n_rows < 1) throw ConfigError("synth: n_rows must be >= 1");
    if (!(config.survival.baseline_hazard > 0.0))
        throw ConfigError("synth: baseline hazard must be positive");
    if (!(config.survival.admin_censoring > 0.0))
        throw ConfigError("synth: administrative censoring horizon must be positive");

    std::vector<std::string> names;
    std::vector<ColumnKind> kinds;
    std::set<std::string> seen;
    auto add = [&](const std::string& name, ColumnKind kind) {
        if (!seen.insert(name).second)
            throw ConfigError("synth: duplicate column '" + name + "'");
        names.push_back(name);
        kinds.push_back(std::move(kind));
    };

    for (const FactorColumn& f : config.factors) {
        check_categorical(f.name, f.spec);
        add(f.name, factor_kind(f.spec));
    }
    for (const GroupConditional& gc : config.conditionals) {
        bool found = false;
        for (const FactorColumn& f : config.factors) {
            if (f.name != gc.group_column) continue;
            found = true;
            if (gc.by_level.size() != f.spec.levels.size())
                throw ConfigError("synth column '" + gc.variable +
                                  "': one distribution per level of '" +
                                  gc.group_column + "' required");
        }
        if (!found)
            throw ConfigError("synth column '" + gc.variable +
                              "': unknown group column '" + gc.group_column + "'");
        for (const TruncatedNormal& d : gc.by_level) check_dist(gc.variable, d);
        add(gc.variable, ColumnKind::continuous());
    }
    for (const ContinuousColumn& col : config.continuous) {
        check_dist(col.name, col.dist);
        add(col.name, ColumnKind::continuous());
    }
    add(config.survival.time_name, ColumnKind::continuous());
    add(config.survival.event_name, ColumnKind::binary({"0", "1"}));

    Dataset ds(names, kinds, config.n_rows);
    RngStream rng(config.seed);

    Eigen::Index j = 0;
    for (const FactorColumn& f : config.factors) {
        for (Eigen::Index i = 0; i < config.n_rows; ++i)
            ds.set(i, j, draw_level(f.spec, rng));
        ++j;
    }
    for (const GroupConditional& gc : config.conditionals) {
        const Eigen::Index gj = ds.require_column(gc.group_column);
        for (Eigen::Index i = 0; i < config.n_rows; ++i) {
            const auto code = static_cast<std::size_t>(ds.value(i, gj));
            ds.set(i, j, draw_truncnorm(gc.by_level[code], rng));
        }
        ++j;
    }
    for (const ContinuousColumn& col : config.continuous) {
        for (Eigen::Index i = 0; i < config.n_rows; ++i)
            ds.set(i, j, draw_truncnorm(col.dist, rng));
        ++j;
    }

    // Survival: centered linear predictor keeps the marginal event rate
    // near the baseline while leaving the conditional log-HRs exact.
    Eigen::VectorXd lp = Eigen::VectorXd::Zero(config.n_rows);
    for (const auto& [name, beta] : config.survival.log_hr) {
        const Eigen::Index cj = ds.require_column(name);
        const ColumnKind& kind = ds.kind(cj);
        if (kind.is_factor() && kind.n_levels() != 2)
            throw ConfigError("synth: log_hr covariate '" + name +
                              "' must be continuous or two-level");
        Eigen::VectorXd x(config.n_rows);
        for (Eigen::Index i = 0; i < config.n_rows; ++i) x[i] = ds.value(i, cj);
        lp += beta * (x.array() - x.mean()).matrix();
    }
    const Eigen::Index tj = ds.require_column(config.survival.time_name);
    const Eigen::Index ej = ds.require_column(config.survival.event_name);
    for (Eigen::Index i = 0; i < config.n_rows; ++i) {
        const double rate = config.survival.baseline_hazard * std::exp(lp[i]);
        const double raw = -std::log(rng.uniform01()) / rate;
        const bool event = raw <= config.survival.admin_censoring;
        ds.set(i, tj, event ? raw : config.survival.admin_censoring);
        ds.set(i, ej, event ? 1.0 : 0.0);
    }
    return ds;
}

Mechanism default_mechanism() {
    Mechanism mech;
    mech.seed = 2;
    mech.rules.push_back({{"hba1c"}, 0.44, {{"dm_group", -0.9}}});
    mech.rules.push_back({{"tc", "ldl", "hdl"}, 0.17, {}});
    mech.rules.push_back({{"sbp", "dbp"}, 0.29, {}});
    return mech;
}

namespace {

// Solve logistic(alpha + s_i) for the alpha whose mean probability hits
// the target rate; monotone, so plain bisection.
double calibrate_intercept(const Eigen::VectorXd& s, double rate) {
    auto mean_p = [&](double alpha) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            sum += 1.0 / (1.0 + std::exp(-(alpha + s[i])));
        return sum / static_cast<double>(s.size());
    };
    double lo = -60.0;
    double hi = 60.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (mean_p(mid) < rate ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

std::pair<Dataset, TruthStore> impose_missingness(const Dataset& ds,
                                                  const Mechanism& mech) {
    std::set<std::string> masked_vars;
    std::set<std::string> predictor_vars;
    for (const MissingRule& rule : mech.rules) {
        if (rule.variables.empty())
            throw ConfigError("missingness rule without variables");
        if (!(rule.rate >= 0.0 && rule.rate <= 1.0))
            throw ConfigError("missingness rate must lie in [0, 1]");
        for (const std::string& v : rule.variables) {
            const Eigen::Index j = ds.require_column(v);
            if (ds.n_missing(j) > 0)
                throw ConfigError("missingness target '" + v +
                                  "' already has missing cells");
            if (!masked_vars.insert(v).second)
                throw ConfigError("variable '" + v +
                                  "' appears in more than one missingness rule");
        }
        for (const auto& [v, w] : rule.mar_weights) {
            ds.require_column(v);
            predictor_vars.insert(v);
        }
    }
    for (const std::string& v : predictor_vars) {
        if (masked_vars.count(v))
            throw ConfigError("MAR predictor '" + v + "' is itself masked");
        if (ds.n_missing(ds.require_column(v)) > 0)
            throw ConfigError("MAR predictor '" + v + "' has missing cells");
    }

    Dataset out = ds;
    TruthStore truth;
    RngStream rng(mech.seed);
    for (const MissingRule& rule : mech.rules) {
        Eigen::VectorXd p(ds.n_rows());
        if (rule.mar_weights.empty()) {
            p.setConstant(rule.rate);
        } else if (rule.rate <= 0.0) {
            p.setZero();
        } else if (rule.rate >= 1.0) {
            p.setOnes();
        } else {
            Eigen::VectorXd s = Eigen::VectorXd::Zero(ds.n_rows());
            for (const auto& [v, w] : rule.mar_weights) {
                const Eigen::Index j = ds.require_column(v);
                Eigen::VectorXd x(ds.n_rows());
                for (Eigen::Index i = 0; i < ds.n_rows(); ++i) x[i] = ds.value(i, j);
                const double var = sample_variance(x);
                if (!(var > 0.0))
                    throw ComputeError("MAR predictor '" + v + "' is constant");
                s += (w / std::sqrt(var)) * (x.array() - x.mean()).matrix();
            }
            const double alpha = calibrate_intercept(s, rule.rate);
            for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
                p[i] = 1.0 / (1.0 + std::exp(-(alpha + s[i])));
        }
        std::vector<Eigen::Index> cols;
        for (const std::string& v : rule.variables)
            cols.push_back(ds.require_column(v));
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
            if (!(rng.uniform01() < p[i])) continue;
            for (Eigen::Index j : cols) {
                truth.values[{i, ds.name(j)}] = ds.value(i, j);
                out.set_missing(i, j);
            }
        }
    }
    return {std::move(out), std::move(truth)};
}

RecoveryReport score_recovery(const CompletedDatasets& cd, const TruthStore& truth) {
    if (cd.completed.empty()) throw ComputeError("no completed datasets to score");
    const Dataset& first = cd.completed.front();

    std::size_t masked = 0;
    for (Eigen::Index j = 0; j < first.n_cols(); ++j)
        for (Eigen::Index i = 0; i < first.n_rows(); ++i)
            if (!cd.observed_mask(i, j)) {
                ++masked;
                if (!truth.values.count({i, first.name(j)}))
                    throw ComputeError("masked cell (" + std::to_string(i) + ", " +
                                       first.name(j) + ") has no stored truth");
            }
    if (masked != truth.values.size())
        throw ComputeError("truth store covers cells outside the provenance mask");

    const double z = normal_quantile(0.975);
    const auto m = static_cast<double>(cd.completed.size());
    RecoveryReport report;
    for (Eigen::Index j = 0; j < first.n_cols(); ++j) {
        RecoveryRow row;
        row.variable = first.name(j);
        double sq_sum = 0.0;
        Eigen::Index covered = 0;
        for (Eigen::Index i = 0; i < first.n_rows(); ++i) {
            if (cd.observed_mask(i, j)) continue;
            const double t = truth.values.at({i, first.name(j)});
            Eigen::VectorXd v(cd.completed.size());
            for (std::size_t k = 0; k < cd.completed.size(); ++k)
                v[static_cast<Eigen::Index>(k)] = cd.completed[k].value(i, j);
            const double mu = v.mean();
            row.bias += mu - t;
            sq_sum += (v.array() - t).square().sum();
            if (cd.completed.size() >= 2) {
                const double sd = std::sqrt(sample_variance(v));
                if (std::abs(t - mu) <= z * sd) ++covered;
            }
            ++row.n_cells;
        }
        if (row.n_cells == 0) continue;
        const auto nc = static_cast<double>(row.n_cells);
        row.bias /= nc;
        row.rmse = std::sqrt(sq_sum / (nc * m));
        row.coverage = cd.completed.size() >= 2
                           ? static_cast<double>(covered) / nc
                           : std::numeric_limits<double>::quiet_NaN();
        report.rows.push_back(std::move(row));
    }
    return report;
}

void truth_to_csv(const TruthStore& truth, std::ostream& out, char delimiter) {
    out << csv_join({"row", "variable", "value"}, delimiter) << '\n';
    for (const auto& [key, value] : truth.values)
        out << csv_join({std::to_string(key.first), key.second, format_double(value)},
                        delimiter)
            << '\n';
}

void recovery_to_csv(const RecoveryReport& report, std::ostream& out, char delimiter,
                     const std::string& missing_token) {
    out << "# bias: mean over masked cells of (across-imputation mean - truth); "
           "rmse: root mean square of (imputed - truth) over cells x imputations; "
           "coverage: share of cells with truth inside mean +/- 1.96 sd across "
           "imputations\n";
    out << csv_join({"variable", "n_cells", "bias", "rmse", "coverage"}, delimiter)
        << '\n';
    for (const RecoveryRow& row : report.rows) {
        out << csv_join({row.variable, std::to_string(row.n_cells),
                         format_double(row.bias), format_double(row.rmse),
                         std::isnan(row.coverage) ? missing_token
                                                  : format_double(row.coverage)},
                        delimiter)
            << '\n';
    }
}

} // namespace micekit
