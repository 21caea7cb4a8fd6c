#include "micekit/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace micekit {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
}

const json& require(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ConfigError("config: " + where + " requires '" + std::string(key) + "'");
    return *it;
}

template <typename T>
T as(const json& v, const std::string& where) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: wrong value type at " + where);
    }
}

template <typename T>
void maybe(const json& obj, const char* key, const std::string& where, T& target) {
    const auto it = obj.find(key);
    if (it != obj.end()) target = as<T>(*it, where + "." + key);
}

ColumnKind parse_column_kind(const json& col, const std::string& where) {
    const std::string type = as<std::string>(require(col, "type", where), where);
    if (type != "continuous" && type != "binary" && type != "categorical")
        throw ConfigError("config: " + where + ": unknown column type '" + type + "'");
    if (type == "continuous") {
        if (col.contains("levels"))
            throw ConfigError("config: " + where + ": continuous columns have no levels");
        return ColumnKind::continuous();
    }
    const auto levels =
        as<std::vector<std::string>>(require(col, "levels", where), where);
    if (type == "binary") return ColumnKind::binary(levels);
    return ColumnKind::categorical(levels);
}

TableSchema parse_columns(const json& cols, const std::string& where) {
    TableSchema schema;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        const json& col = cols[i];
        const std::string at = where + "[" + std::to_string(i) + "]";
        check_keys(col, at, {"name", "type", "levels"});
        schema.push_back({as<std::string>(require(col, "name", at), at),
                          parse_column_kind(col, at)});
    }
    return schema;
}

MethodSpec parse_method_spec(const json& obj, const std::string& where) {
    check_keys(obj, where,
               {"method", "k", "ridge", "match_type", "min_leaf", "max_depth",
                "max_iter", "tol"});
    MethodSpec spec;
    spec.method =
        method_from_name(as<std::string>(require(obj, "method", where), where));
    maybe(obj, "k", where, spec.pmm.k);
    double ridge = -1.0;
    maybe(obj, "ridge", where, ridge);
    if (ridge >= 0.0) {
        spec.norm.ridge = ridge;
        spec.pmm.ridge = ridge;
        spec.logistic.ridge = ridge;
    }
    maybe(obj, "match_type", where, spec.pmm.match_type);
    maybe(obj, "min_leaf", where, spec.cart.min_leaf);
    maybe(obj, "max_depth", where, spec.cart.max_depth);
    maybe(obj, "max_iter", where, spec.logistic.max_iter);
    maybe(obj, "tol", where, spec.logistic.tol);
    return spec;
}

Preset parse_preset(const std::string& name, const std::string& where) {
    if (name == "default-pmm") return Preset::DefaultPmm;
    if (name == "norm") return Preset::Norm;
    if (name == "cart") return Preset::Cart;
    throw ConfigError("config: " + where + ": unknown preset '" + name +
                      "' (expected default-pmm, norm, or cart)");
}

MiceSection parse_mice(const json& obj) {
    const std::string where = "mice";
    check_keys(obj, where,
               {"m", "cycles", "seed", "preset", "methods", "predictors",
                "sequential_blocks", "visit_sequence", "stratify_by",
                "merge_small_groups"});
    MiceSection s;
    maybe(obj, "m", where, s.m);
    maybe(obj, "cycles", where, s.cycles);
    maybe(obj, "seed", where, s.seed);
    if (obj.contains("preset"))
        s.preset = parse_preset(as<std::string>(obj["preset"], where + ".preset"),
                                where + ".preset");
    if (obj.contains("methods")) {
        for (auto it = obj["methods"].begin(); it != obj["methods"].end(); ++it)
            s.method_overrides[it.key()] =
                parse_method_spec(*it, where + ".methods." + it.key());
    }
    if (obj.contains("predictors")) {
        for (auto it = obj["predictors"].begin(); it != obj["predictors"].end(); ++it)
            s.predictor_overrides[it.key()] = as<std::vector<std::string>>(
                *it, where + ".predictors." + it.key());
    }
    maybe(obj, "sequential_blocks", where, s.sequential_blocks);
    maybe(obj, "visit_sequence", where, s.visit_sequence);
    maybe(obj, "stratify_by", where, s.stratify_by);
    maybe(obj, "merge_small_groups", where, s.merge_small_groups);
    return s;
}

ClinicalRange parse_range(const json& obj, const std::string& where) {
    check_keys(obj, where, {"variable", "group", "lower", "upper", "concern"});
    ClinicalRange r;
    r.variable = as<std::string>(require(obj, "variable", where), where);
    maybe(obj, "group", where, r.group);
    maybe(obj, "lower", where, r.lower);
    maybe(obj, "upper", where, r.upper);
    if (obj.contains("concern")) {
        const auto concern = as<std::string>(obj["concern"], where + ".concern");
        if (concern == "low")
            r.concern = ClinicalRange::Concern::Low;
        else if (concern == "high")
            r.concern = ClinicalRange::Concern::High;
        else if (concern == "both")
            r.concern = ClinicalRange::Concern::Both;
        else
            throw ConfigError("config: " + where +
                              ": concern must be low, high, or both");
    }
    return r;
}

DiagnosticsSection parse_diagnostics(const json& obj) {
    const std::string where = "diagnostics";
    check_keys(obj, where,
               {"group_column", "ranges", "mean_shift_sds", "variance_ratio_low",
                "variance_ratio_high", "range_tolerance", "strip_plots",
                "plot_format", "strict"});
    DiagnosticsSection s;
    maybe(obj, "group_column", where, s.group_column);
    if (obj.contains("ranges")) {
        const json& ranges = obj["ranges"];
        for (std::size_t i = 0; i < ranges.size(); ++i)
            s.ranges.push_back(parse_range(
                ranges[i], where + ".ranges[" + std::to_string(i) + "]"));
    }
    maybe(obj, "mean_shift_sds", where, s.params.mean_shift_sds);
    maybe(obj, "variance_ratio_low", where, s.params.variance_ratio_low);
    maybe(obj, "variance_ratio_high", where, s.params.variance_ratio_high);
    maybe(obj, "range_tolerance", where, s.params.range_tolerance);
    if (obj.contains("strip_plots")) {
        const json& plots = obj["strip_plots"];
        for (std::size_t i = 0; i < plots.size(); ++i) {
            const std::string at = where + ".strip_plots[" + std::to_string(i) + "]";
            check_keys(plots[i], at, {"variable", "group_column", "jitter", "seed"});
            StripPlotConfig plot;
            plot.variable = as<std::string>(require(plots[i], "variable", at), at);
            maybe(plots[i], "group_column", at, plot.group_column);
            maybe(plots[i], "jitter", at, plot.jitter);
            maybe(plots[i], "seed", at, plot.seed);
            s.strip_plots.push_back(std::move(plot));
        }
    }
    if (obj.contains("plot_format")) {
        const auto fmt = as<std::string>(obj["plot_format"], where + ".plot_format");
        if (fmt == "tabular")
            s.plot_format = PlotFormat::Tabular;
        else if (fmt == "svg")
            s.plot_format = PlotFormat::Svg;
        else if (fmt == "both")
            s.plot_format = PlotFormat::Both;
        else
            throw ConfigError("config: plot_format must be tabular, svg, or both");
    }
    maybe(obj, "strict", where, s.strict);
    return s;
}

AnalysisSection parse_analysis(const json& obj) {
    const std::string where = "analysis";
    check_keys(obj, where,
               {"time", "event", "covariates", "level", "profiles", "horizons"});
    AnalysisSection s;
    s.time_column = as<std::string>(require(obj, "time", where), where);
    s.event_column = as<std::string>(require(obj, "event", where), where);
    s.covariates =
        as<std::vector<std::string>>(require(obj, "covariates", where), where);
    maybe(obj, "level", where, s.level);
    if (obj.contains("profiles")) {
        const json& profiles = obj["profiles"];
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            const std::string at = where + ".profiles[" + std::to_string(i) + "]";
            check_keys(profiles[i], at, {"label", "values"});
            Profile p;
            p.label = as<std::string>(require(profiles[i], "label", at), at);
            const json& values = require(profiles[i], "values", at);
            for (auto it = values.begin(); it != values.end(); ++it) {
                if (it->is_string())
                    p.values[it.key()] = it->get<std::string>();
                else if (it->is_number())
                    p.values[it.key()] = format_double(it->get<double>());
                else
                    throw ConfigError("config: " + at + ".values." + it.key() +
                                      " must be a string or number");
            }
            s.profiles.push_back(std::move(p));
        }
    }
    maybe(obj, "horizons", where, s.horizons);
    return s;
}

TruncatedNormal parse_dist(const json& obj, const std::string& where) {
    check_keys(obj, where, {"mean", "sd", "lower", "upper"});
    TruncatedNormal d;
    d.mean = as<double>(require(obj, "mean", where), where);
    d.sd = as<double>(require(obj, "sd", where), where);
    maybe(obj, "lower", where, d.lower);
    maybe(obj, "upper", where, d.upper);
    return d;
}

CategoricalSpec parse_categorical(const json& obj, const std::string& where) {
    CategoricalSpec spec;
    spec.levels = as<std::vector<std::string>>(require(obj, "levels", where), where);
    spec.prevalence =
        as<std::vector<double>>(require(obj, "prevalence", where), where);
    return spec;
}

SynthConfig parse_synth(const json& obj) {
    const std::string where = "synth";
    check_keys(obj, where,
               {"n_rows", "seed", "factors", "conditionals", "continuous", "survival",
                "mechanism"});
    SynthConfig c = default_synth_config();
    std::int64_t n_rows = c.n_rows;
    maybe(obj, "n_rows", where, n_rows);
    c.n_rows = n_rows;
    maybe(obj, "seed", where, c.seed);
    if (obj.contains("factors")) {
        c.factors.clear();
        const json& factors = obj["factors"];
        for (std::size_t i = 0; i < factors.size(); ++i) {
            const std::string at = where + ".factors[" + std::to_string(i) + "]";
            check_keys(factors[i], at, {"name", "levels", "prevalence"});
            c.factors.push_back(
                {as<std::string>(require(factors[i], "name", at), at),
                 parse_categorical(factors[i], at)});
        }
    }
    if (obj.contains("conditionals")) {
        c.conditionals.clear();
        const json& conds = obj["conditionals"];
        for (std::size_t i = 0; i < conds.size(); ++i) {
            const std::string at = where + ".conditionals[" + std::to_string(i) + "]";
            check_keys(conds[i], at, {"variable", "group", "distributions"});
            GroupConditional gc;
            gc.variable = as<std::string>(require(conds[i], "variable", at), at);
            gc.group_column = as<std::string>(require(conds[i], "group", at), at);
            const json& dists = require(conds[i], "distributions", at);
            for (std::size_t k = 0; k < dists.size(); ++k)
                gc.by_level.push_back(parse_dist(
                    dists[k], at + ".distributions[" + std::to_string(k) + "]"));
            c.conditionals.push_back(std::move(gc));
        }
    }
    if (obj.contains("continuous")) {
        c.continuous.clear();
        const json& cont = obj["continuous"];
        for (std::size_t i = 0; i < cont.size(); ++i) {
            const std::string at = where + ".continuous[" + std::to_string(i) + "]";
            check_keys(cont[i], at, {"name", "mean", "sd", "lower", "upper"});
            ContinuousColumn col;
            col.name = as<std::string>(require(cont[i], "name", at), at);
            col.dist.mean = as<double>(require(cont[i], "mean", at), at);
            col.dist.sd = as<double>(require(cont[i], "sd", at), at);
            maybe(cont[i], "lower", at, col.dist.lower);
            maybe(cont[i], "upper", at, col.dist.upper);
            c.continuous.push_back(std::move(col));
        }
    }
    if (obj.contains("survival")) {
        const json& surv = obj["survival"];
        const std::string at = where + ".survival";
        check_keys(surv, at,
                   {"time", "event", "baseline_hazard", "admin_censoring", "log_hr"});
        maybe(surv, "time", at, c.survival.time_name);
        maybe(surv, "event", at, c.survival.event_name);
        maybe(surv, "baseline_hazard", at, c.survival.baseline_hazard);
        maybe(surv, "admin_censoring", at, c.survival.admin_censoring);
        if (surv.contains("log_hr")) {
            c.survival.log_hr.clear();
            const json& hrs = surv["log_hr"];
            for (auto it = hrs.begin(); it != hrs.end(); ++it)
                c.survival.log_hr[it.key()] =
                    as<double>(*it, at + ".log_hr." + it.key());
        }
    }
    return c;
}

Mechanism parse_mechanism(const json& obj) {
    const std::string where = "synth.mechanism";
    check_keys(obj, where, {"seed", "rules"});
    Mechanism mech;
    maybe(obj, "seed", where, mech.seed);
    const json& rules = require(obj, "rules", where);
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const std::string at = where + ".rules[" + std::to_string(i) + "]";
        check_keys(rules[i], at, {"variables", "rate", "mar_weights"});
        MissingRule rule;
        rule.variables =
            as<std::vector<std::string>>(require(rules[i], "variables", at), at);
        rule.rate = as<double>(require(rules[i], "rate", at), at);
        if (rules[i].contains("mar_weights")) {
            const json& weights = rules[i]["mar_weights"];
            for (auto it = weights.begin(); it != weights.end(); ++it)
                rule.mar_weights[it.key()] =
                    as<double>(*it, at + ".mar_weights." + it.key());
        }
        mech.rules.push_back(std::move(rule));
    }
    return mech;
}

} // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(root, "the top level",
               {"schema_version", "paths", "delimiter", "columns", "mice",
                "diagnostics", "analysis", "synth"});

    RunConfig cfg;
    cfg.schema_version =
        as<int>(require(root, "schema_version", "the top level"), "schema_version");
    if (cfg.schema_version != 1)
        throw ConfigError("config: unsupported schema_version " +
                          std::to_string(cfg.schema_version));

    if (root.contains("paths")) {
        const json& paths = root["paths"];
        check_keys(paths, "paths", {"input", "output"});
        maybe(paths, "input", "paths", cfg.input_path);
        maybe(paths, "output", "paths", cfg.output_dir);
    }
    if (root.contains("delimiter")) {
        const auto d = as<std::string>(root["delimiter"], "delimiter");
        if (d.size() != 1)
            throw ConfigError("config: delimiter must be a single character");
        cfg.delimiter = d[0];
    }
    if (root.contains("columns")) cfg.schema = parse_columns(root["columns"], "columns");
    if (root.contains("mice")) cfg.mice = parse_mice(root["mice"]);
    if (root.contains("diagnostics"))
        cfg.diagnostics = parse_diagnostics(root["diagnostics"]);
    if (root.contains("analysis")) cfg.analysis = parse_analysis(root["analysis"]);
    if (root.contains("synth")) {
        cfg.synth = parse_synth(root["synth"]);
        cfg.mechanism = root["synth"].contains("mechanism")
                            ? parse_mechanism(root["synth"]["mechanism"])
                            : default_mechanism();
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

MiceConfig build_mice_config(const Dataset& ds, const MiceSection& section) {
    MiceConfig cfg = default_mice_config(ds, section.preset);
    cfg.m = section.m;
    cfg.cycles = section.cycles;
    cfg.seed = section.seed;
    for (const auto& [variable, spec] : section.method_overrides) {
        ds.require_column(variable);
        cfg.methods[variable] = spec;
        if (spec.method == Method::None) cfg.predictors.clear_row(variable);
    }
    for (const auto& [target, predictors] : section.predictor_overrides) {
        ds.require_column(target);
        cfg.predictors.clear_row(target);
        for (const std::string& p : predictors) cfg.predictors.set(target, p, true);
    }
    for (const auto& block : section.sequential_blocks)
        cfg.predictors = sequential_block(block, cfg.predictors);
    if (!section.visit_sequence.empty()) cfg.visit_sequence = section.visit_sequence;
    return cfg;
}

} // namespace micekit
