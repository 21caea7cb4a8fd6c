#include "micekit/mice.hpp"

#include "micekit/csv.hpp"
#include "micekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

namespace micekit {

namespace {

constexpr std::uint64_t kChainTag = 0x4348414e; // "CHAN"
constexpr std::uint64_t kGroupTag = 0x53545241; // "STRA"
constexpr std::uint64_t kInitTag = 0x494e4954;  // "INIT"

} // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::None: return "none";
        case Method::Norm: return "norm";
        case Method::Pmm: return "pmm";
        case Method::Cart: return "cart";
        case Method::Logistic: return "logistic";
        case Method::Polytomous: return "polytomous";
    }
    return "none";
}

Method method_from_name(const std::string& name) {
    if (name == "none") return Method::None;
    if (name == "norm") return Method::Norm;
    if (name == "pmm") return Method::Pmm;
    if (name == "cart") return Method::Cart;
    if (name == "logistic") return Method::Logistic;
    if (name == "polytomous") return Method::Polytomous;
    throw ConfigError("unknown imputation method '" + name + "'");
}

PredictorMatrix::PredictorMatrix(std::vector<std::string> variables)
    : vars_(std::move(variables)) {
    const auto p = static_cast<Eigen::Index>(vars_.size());
    m_.setZero(p, p);
}

PredictorMatrix PredictorMatrix::all_others(const std::vector<std::string>& variables) {
    PredictorMatrix pm(variables);
    pm.m_.setOnes();
    pm.m_.diagonal().setZero();
    return pm;
}

Eigen::Index PredictorMatrix::index_of(const std::string& variable) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == variable) return static_cast<Eigen::Index>(i);
    throw ConfigError("predictor matrix has no variable '" + variable + "'");
}

void PredictorMatrix::set(const std::string& target, const std::string& predictor,
                          bool on) {
    const Eigen::Index i = index_of(target);
    const Eigen::Index j = index_of(predictor);
    if (i == j && on)
        throw ConfigError("variable '" + target + "' cannot predict itself");
    m_(i, j) = on ? 1 : 0;
}

void PredictorMatrix::clear_row(const std::string& target) {
    m_.row(index_of(target)).setZero();
}

void PredictorMatrix::clear_variable(const std::string& variable) {
    const Eigen::Index i = index_of(variable);
    m_.row(i).setZero();
    m_.col(i).setZero();
}

void PredictorMatrix::fill_row(const std::string& target) {
    const Eigen::Index i = index_of(target);
    m_.row(i).setOnes();
    m_(i, i) = 0;
}

std::vector<int> PredictorMatrix::predictors_of(Eigen::Index target) const {
    std::vector<int> out;
    for (Eigen::Index j = 0; j < m_.cols(); ++j)
        if (m_(target, j) != 0) out.push_back(static_cast<int>(j));
    return out;
}

bool PredictorMatrix::row_is_zero(Eigen::Index target) const {
    return (m_.row(target).array() == 0).all();
}

PredictorMatrix sequential_block(const std::vector<std::string>& ordered_vars,
                                 PredictorMatrix base) {
    std::set<std::string> seen;
    for (const auto& v : ordered_vars) {
        base.index_of(v); // reject unknown names even in one-variable blocks
        if (!seen.insert(v).second)
            throw ConfigError("sequential block repeats variable '" + v + "'");
    }
    for (std::size_t i = 0; i < ordered_vars.size(); ++i) {
        for (std::size_t j = 0; j < ordered_vars.size(); ++j) {
            if (i == j) continue;
            base.set(ordered_vars[i], ordered_vars[j], j < i);
        }
    }
    return base;
}

namespace {

bool method_compatible(const ColumnKind& kind, Method m) {
    if (kind.is_continuous())
        return m == Method::Norm || m == Method::Pmm || m == Method::Cart;
    if (kind.type == ColumnKind::Type::Binary)
        return m == Method::Logistic || m == Method::Polytomous || m == Method::Cart;
    return m == Method::Polytomous || m == Method::Cart;
}

MethodSpec method_for(const MiceConfig& config, const std::string& variable) {
    auto it = config.methods.find(variable);
    if (it == config.methods.end()) return MethodSpec{};
    return it->second;
}

std::vector<std::string> variables_with_missing(const Dataset& ds) {
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
        if (ds.n_missing(j) > 0) out.push_back(ds.name(j));
    return out;
}

void validate_config(const Dataset& ds, const MiceConfig& config) {
    if (config.m < 1) throw ConfigError("mice: m must be >= 1");
    if (config.cycles < 1) throw ConfigError("mice: cycles must be >= 1");
    if (config.predictors.variables() != ds.names())
        throw ConfigError("mice: predictor matrix variables do not match the dataset");

    const auto missing_vars = variables_with_missing(ds);
    std::set<std::string> missing_set(missing_vars.begin(), missing_vars.end());
    std::set<std::string> visit_set(config.visit_sequence.begin(),
                                    config.visit_sequence.end());
    if (visit_set.size() != config.visit_sequence.size())
        throw ConfigError("mice: visit sequence repeats a variable");
    if (visit_set != missing_set) {
        std::ostringstream os;
        os << "mice: visit sequence must be a permutation of the variables with "
              "missing cells (";
        bool first = true;
        for (const auto& v : missing_vars) {
            if (!first) os << ", ";
            os << v;
            first = false;
        }
        os << ")";
        throw ConfigError(os.str());
    }
    for (const auto& v : missing_vars) {
        const MethodSpec spec = method_for(config, v);
        if (spec.method == Method::None)
            throw ConfigError("mice: variable '" + v +
                              "' has missing cells but method 'none'");
        if (!method_compatible(ds.kind(ds.require_column(v)), spec.method))
            throw ConfigError("mice: method '" + method_name(spec.method) +
                              "' is incompatible with column '" + v + "'");
    }
    for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
        const MethodSpec spec = method_for(config, ds.name(j));
        if (spec.method == Method::None && !config.predictors.row_is_zero(j))
            throw ConfigError("mice: variable '" + ds.name(j) +
                              "' has method 'none' but a non-zero predictor row");
    }
}

void initialize_working(const Dataset& ds, Eigen::MatrixXd& working, RngStream& rng) {
    for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
        if (ds.n_missing(j) == 0) continue;
        const Eigen::VectorXd donors = ds.observed_values(j);
        if (donors.size() == 0)
            throw ComputeError("no observed donors for variable '" + ds.name(j) + "'");
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
            if (!ds.observed(i, j))
                working(i, j) = donors[static_cast<Eigen::Index>(
                    rng.uniform_index(static_cast<std::uint64_t>(donors.size())))];
    }
}

Eigen::VectorXd gather(const Eigen::MatrixXd& working,
                       const std::vector<Eigen::Index>& rows, Eigen::Index j) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        out[static_cast<Eigen::Index>(r)] = working(rows[r], j);
    return out;
}

Eigen::VectorXd impute_one(const Dataset& ds, const MiceConfig& config,
                           const Eigen::MatrixXd& working, Eigen::Index j,
                           const std::vector<Eigen::Index>& rows_obs,
                           const std::vector<Eigen::Index>& rows_mis, RngStream& rng) {
    const MethodSpec spec = method_for(config, ds.name(j));
    const std::vector<int> predictors = config.predictors.predictors_of(j);
    const bool tree = spec.method == Method::Cart;
    const DesignMode mode = tree ? DesignMode::Native : DesignMode::OneHot;
    const bool intercept = !tree;
    const DesignMatrix X_obs = build_design(working, ds.kinds(), ds.names(), predictors,
                                            rows_obs, mode, intercept);
    const DesignMatrix X_mis = build_design(working, ds.kinds(), ds.names(), predictors,
                                            rows_mis, mode, intercept);
    const Eigen::VectorXd y_obs = gather(working, rows_obs, j);

    switch (spec.method) {
        case Method::Norm:
            return impute_norm(y_obs, X_obs, X_mis, spec.norm, rng);
        case Method::Pmm:
            return impute_pmm(y_obs, X_obs, X_mis, spec.pmm, rng);
        case Method::Cart: {
            const int y_levels = ds.kind(j).is_factor() ? ds.kind(j).n_levels() : 0;
            const CartTree t = fit_cart(y_obs, y_levels, X_obs, spec.cart);
            return impute_cart(t, y_obs, X_mis, rng);
        }
        case Method::Logistic:
            return impute_logistic(y_obs, X_obs, X_mis, spec.logistic, rng);
        case Method::Polytomous:
            return impute_polytomous(y_obs, ds.kind(j).n_levels(), X_obs, X_mis,
                                     spec.logistic, rng);
        case Method::None:
            break;
    }
    throw ConfigError("variable '" + ds.name(j) + "' has no imputation method");
}

TraceRow make_trace(int chain, int cycle, const std::string& variable,
                    const Eigen::VectorXd& imputed) {
    TraceRow row;
    row.chain = chain;
    row.cycle = cycle;
    row.variable = variable;
    row.n_imputed = imputed.size();
    row.mean = imputed.mean();
    const double var = sample_variance(imputed);
    if (!std::isnan(var)) row.sd = std::sqrt(var);
    return row;
}

} // namespace

Dataset initialize_chain(const Dataset& ds, const MiceConfig& config, RngStream& rng) {
    validate_config(ds, config);
    Eigen::MatrixXd working = ds.cells();
    initialize_working(ds, working, rng);
    Dataset out = ds;
    for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
            if (!ds.observed(i, j)) out.set(i, j, working(i, j));
    return out;
}

CompletedDatasets run_mice(const Dataset& ds, const MiceConfig& config) {
    validate_config(ds, config);
    CompletedDatasets out;
    out.observed_mask = ds.mask();
    out.completed.reserve(static_cast<std::size_t>(config.m));

    // Per-variable row partitions are fixed by the input mask.
    std::vector<std::pair<Eigen::Index, std::pair<std::vector<Eigen::Index>,
                                                  std::vector<Eigen::Index>>>>
        visit_rows;
    for (const auto& v : config.visit_sequence) {
        const Eigen::Index j = ds.require_column(v);
        visit_rows.push_back({j, {ds.observed_rows(j), ds.missing_rows(j)}});
    }

    for (int chain = 0; chain < config.m; ++chain) {
        RngStream init_rng = RngStream::substream(
            config.seed, {kInitTag, static_cast<std::uint64_t>(chain)});
        RngStream rng = RngStream::substream(
            config.seed, {kChainTag, static_cast<std::uint64_t>(chain)});
        Eigen::MatrixXd working = ds.cells();
        initialize_working(ds, working, init_rng);

        for (int cycle = 1; cycle <= config.cycles; ++cycle) {
            for (const auto& [j, rows] : visit_rows) {
                if (rows.second.empty()) continue;
                try {
                    const Eigen::VectorXd imp = impute_one(ds, config, working, j,
                                                           rows.first, rows.second, rng);
                    for (std::size_t r = 0; r < rows.second.size(); ++r)
                        working(rows.second[r], j) = imp[static_cast<Eigen::Index>(r)];
                    out.trace.push_back(make_trace(chain + 1, cycle, ds.name(j), imp));
                } catch (const Error& e) {
                    throw ComputeError("chain " + std::to_string(chain + 1) + ", cycle " +
                                       std::to_string(cycle) + ", variable '" +
                                       ds.name(j) + "': " + e.what());
                }
            }
        }

        Dataset complete = ds;
        for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
            for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
                if (!ds.observed(i, j)) complete.set(i, j, working(i, j));
        out.completed.push_back(std::move(complete));
    }
    return out;
}

MiceConfig default_mice_config(const Dataset& ds, Preset preset) {
    MiceConfig config;
    config.predictors = PredictorMatrix(ds.names());
    std::vector<std::pair<Eigen::Index, std::string>> missing;
    for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
        const Eigen::Index nm = ds.n_missing(j);
        if (nm == 0) continue;
        missing.push_back({nm, ds.name(j)});
        MethodSpec spec;
        const ColumnKind& kind = ds.kind(j);
        if (kind.is_continuous()) {
            spec.method = preset == Preset::DefaultPmm ? Method::Pmm
                          : preset == Preset::Norm     ? Method::Norm
                                                       : Method::Cart;
        } else if (preset == Preset::Cart) {
            spec.method = Method::Cart;
        } else {
            spec.method = kind.type == ColumnKind::Type::Binary ? Method::Logistic
                                                                : Method::Polytomous;
        }
        config.methods[ds.name(j)] = spec;
        config.predictors.fill_row(ds.name(j));
    }
    std::stable_sort(missing.begin(), missing.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [count, name] : missing) config.visit_sequence.push_back(name);
    return config;
}

std::uint64_t stratified_group_seed(std::uint64_t seed, int level_code) {
    return RngStream::mix(seed, {kGroupTag, static_cast<std::uint64_t>(level_code)});
}

namespace {

// Expanded one-hot width of a predictor set, for the cheap feasibility
// scan before a stratified run.
Eigen::Index expanded_width(const Dataset& ds, const std::vector<int>& predictors) {
    Eigen::Index p = 1; // intercept
    for (int j : predictors) {
        const ColumnKind& k = ds.kind(j);
        p += k.is_continuous() ? 1 : k.n_levels() - 1;
    }
    return p;
}

struct GroupProblem {
    std::string level;
    std::string reason;
};

std::vector<GroupProblem> check_group(const Dataset& sub, const MiceConfig& cfg,
                                      const std::string& level) {
    std::vector<GroupProblem> problems;
    for (Eigen::Index j = 0; j < sub.n_cols(); ++j) {
        if (sub.n_missing(j) == 0) continue;
        const auto n_obs = static_cast<Eigen::Index>(sub.observed_rows(j).size());
        const MethodSpec spec = [&] {
            auto it = cfg.methods.find(sub.name(j));
            return it == cfg.methods.end() ? MethodSpec{} : it->second;
        }();
        if (n_obs == 0) {
            problems.push_back({level, "variable '" + sub.name(j) +
                                           "' has no observed donors in this group"});
            continue;
        }
        if (spec.method == Method::Norm || spec.method == Method::Pmm) {
            const Eigen::Index need =
                expanded_width(sub, cfg.predictors.predictors_of(j)) + 2;
            if (n_obs < need)
                problems.push_back(
                    {level, "variable '" + sub.name(j) + "' has " +
                                std::to_string(n_obs) + " observed rows, needs " +
                                std::to_string(need) + " for its regression"});
        }
        if (spec.method == Method::Pmm && n_obs < spec.pmm.k)
            problems.push_back({level, "variable '" + sub.name(j) +
                                           "' has fewer observed values than the pmm "
                                           "donor pool"});
    }
    return problems;
}

} // namespace

CompletedDatasets run_stratified(const Dataset& ds, const StratifiedPlan& plan,
                                 const MiceConfig& config) {
    const Eigen::Index gj = ds.require_column(plan.group_column);
    if (!ds.kind(gj).is_factor())
        throw ConfigError("stratification column '" + plan.group_column +
                          "' must be categorical");
    if (ds.n_missing(gj) > 0)
        throw ConfigError("stratification column '" + plan.group_column +
                          "' has missing cells");

    const int n_levels = ds.kind(gj).n_levels();
    std::vector<std::vector<Eigen::Index>> partitions(
        static_cast<std::size_t>(n_levels));
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
        partitions[static_cast<std::size_t>(ds.value(i, gj))].push_back(i);

    struct GroupRun {
        int code;
        std::string level;
        std::vector<Eigen::Index> rows;
    };
    std::vector<GroupRun> groups;
    for (int code = 0; code < n_levels; ++code) {
        auto& rows = partitions[static_cast<std::size_t>(code)];
        if (!rows.empty())
            groups.push_back({code, ds.kind(gj).levels[static_cast<std::size_t>(code)],
                              std::move(rows)});
    }

    auto make_group_config = [&](const GroupRun& g, const Dataset& sub) {
        MiceConfig cfg = config;
        cfg.seed = stratified_group_seed(config.seed, g.code);
        cfg.predictors.clear_variable(plan.group_column);
        cfg.visit_sequence.clear();
        for (const auto& v : config.visit_sequence)
            if (sub.n_missing(sub.require_column(v)) > 0) cfg.visit_sequence.push_back(v);
        auto ov = plan.overrides.find(g.level);
        if (ov != plan.overrides.end()) {
            if (ov->second.cycles) cfg.cycles = *ov->second.cycles;
            for (const auto& [var, spec] : ov->second.methods) cfg.methods[var] = spec;
        }
        return cfg;
    };

    // Upfront feasibility scan so a failing run names every offending
    // group at once.
    for (;;) {
        std::vector<GroupProblem> problems;
        for (const auto& g : groups) {
            const Dataset sub = ds.select_rows(g.rows);
            const MiceConfig cfg = make_group_config(g, sub);
            auto p = check_group(sub, cfg, g.level);
            problems.insert(problems.end(), p.begin(), p.end());
        }
        if (problems.empty()) break;
        if (!plan.merge_small_groups || groups.size() < 2) {
            std::ostringstream os;
            os << "stratified run infeasible:";
            for (const auto& p : problems) os << " [group " << p.level << "] " << p.reason;
            throw ComputeError(os.str());
        }
        // Merge the smallest offending group into the nearest code.
        std::size_t victim = 0;
        std::size_t victim_size = SIZE_MAX;
        for (std::size_t k = 0; k < groups.size(); ++k) {
            const bool offending =
                std::any_of(problems.begin(), problems.end(), [&](const GroupProblem& p) {
                    return p.level == groups[k].level;
                });
            if (offending && groups[k].rows.size() < victim_size) {
                victim = k;
                victim_size = groups[k].rows.size();
            }
        }
        std::size_t target = victim == 0 ? 1 : victim - 1;
        for (std::size_t k = 0; k < groups.size(); ++k) {
            if (k == victim) continue;
            if (std::abs(groups[k].code - groups[victim].code) <
                std::abs(groups[target].code - groups[victim].code))
                target = k;
        }
        auto& dst = groups[target].rows;
        dst.insert(dst.end(), groups[victim].rows.begin(), groups[victim].rows.end());
        std::sort(dst.begin(), dst.end());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(victim));
    }

    CompletedDatasets out;
    out.observed_mask = ds.mask();
    for (int i = 0; i < config.m; ++i) {
        Dataset complete = ds;
        out.completed.push_back(std::move(complete));
    }

    for (const auto& g : groups) {
        const Dataset sub = ds.select_rows(g.rows);
        const MiceConfig cfg = make_group_config(g, sub);
        CompletedDatasets part;
        try {
            part = run_mice(sub, cfg);
        } catch (const Error& e) {
            throw ComputeError("group '" + g.level + "': " + e.what());
        }
        for (int i = 0; i < config.m; ++i) {
            const Dataset& src = part.completed[static_cast<std::size_t>(i)];
            Dataset& dst = out.completed[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
                for (std::size_t r = 0; r < g.rows.size(); ++r)
                    if (!ds.observed(g.rows[r], j))
                        dst.set(g.rows[r], j, src.value(static_cast<Eigen::Index>(r), j));
        }
        for (TraceRow row : part.trace) {
            row.group = g.level;
            out.trace.push_back(std::move(row));
        }
    }
    return out;
}

std::vector<TraceRow> convergence_trace(const CompletedDatasets& cd) { return cd.trace; }

void trace_to_csv(const std::vector<TraceRow>& trace, std::ostream& out,
                  char delimiter, const std::string& missing_token) {
    out << csv_join({"chain", "cycle", "variable", "group", "n_imputed", "mean", "sd"},
                    delimiter)
        << '\n';
    for (const auto& row : trace) {
        out << csv_join({std::to_string(row.chain), std::to_string(row.cycle),
                         row.variable, row.group, std::to_string(row.n_imputed),
                         format_double(row.mean),
                         row.sd ? format_double(*row.sd) : missing_token},
                        delimiter)
            << '\n';
    }
}

} // namespace micekit
