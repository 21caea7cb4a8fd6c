#include "micekit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace micekit {

namespace {

void check_levels(const std::vector<std::string>& lv) {
    if (lv.empty()) throw ConfigError("factor column needs at least one level");
    std::set<std::string> seen;
    for (const auto& l : lv) {
        if (l.empty()) throw ConfigError("factor level labels must be non-empty");
        if (!seen.insert(l).second)
            throw ConfigError("duplicate factor level '" + l + "'");
    }
}

std::string format_number(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

ColumnKind ColumnKind::binary(std::vector<std::string> lv) {
    check_levels(lv);
    if (lv.size() != 2) throw ConfigError("binary column needs exactly 2 levels");
    return ColumnKind{Type::Binary, std::move(lv)};
}

ColumnKind ColumnKind::categorical(std::vector<std::string> lv) {
    check_levels(lv);
    return ColumnKind{Type::Categorical, std::move(lv)};
}

int ColumnKind::level_index(std::string_view label) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == label) return static_cast<int>(i);
    return -1;
}

Dataset::Dataset(std::vector<std::string> names, std::vector<ColumnKind> kinds,
                 Eigen::Index n_rows)
    : names_(std::move(names)), kinds_(std::move(kinds)) {
    if (names_.size() != kinds_.size())
        throw ConfigError("dataset: names/kinds length mismatch");
    std::set<std::string> seen;
    for (const auto& n : names_)
        if (!seen.insert(n).second)
            throw ConfigError("duplicate column name '" + n + "'");
    const auto p = static_cast<Eigen::Index>(names_.size());
    values_ = Eigen::MatrixXd::Zero(n_rows, p);
    mask_ = Mask::Constant(n_rows, p, false);
}

int Dataset::column_index(std::string_view name) const {
    for (std::size_t j = 0; j < names_.size(); ++j)
        if (names_[j] == name) return static_cast<int>(j);
    return -1;
}

Eigen::Index Dataset::require_column(std::string_view name) const {
    const int j = column_index(name);
    if (j < 0) throw ConfigError("unknown column '" + std::string(name) + "'");
    return j;
}

void Dataset::check_cell(Eigen::Index i, Eigen::Index j) const {
    if (i < 0 || i >= n_rows() || j < 0 || j >= n_cols())
        throw Error("dataset cell index out of range");
}

double Dataset::value(Eigen::Index i, Eigen::Index j) const {
    check_cell(i, j);
    if (!mask_(i, j))
        throw Error("read of missing cell (row " + std::to_string(i) + ", column '" +
                    name(j) + "')");
    return values_(i, j);
}

std::string Dataset::label(Eigen::Index i, Eigen::Index j) const {
    const double v = value(i, j);
    const ColumnKind& k = kind(j);
    if (k.is_factor()) return k.levels[static_cast<std::size_t>(v)];
    return format_number(v);
}

void Dataset::set(Eigen::Index i, Eigen::Index j, double v) {
    check_cell(i, j);
    const ColumnKind& k = kind(j);
    if (k.is_continuous()) {
        if (!std::isfinite(v))
            throw Error("non-finite value for continuous column '" + name(j) + "'");
    } else {
        const int code = static_cast<int>(v);
        if (static_cast<double>(code) != v || code < 0 || code >= k.n_levels())
            throw Error("invalid level code for column '" + name(j) + "'");
    }
    values_(i, j) = v;
    mask_(i, j) = true;
}

void Dataset::set_missing(Eigen::Index i, Eigen::Index j) {
    check_cell(i, j);
    values_(i, j) = 0.0;
    mask_(i, j) = false;
}

Eigen::Index Dataset::n_missing(Eigen::Index j) const {
    return n_rows() - mask_.col(j).count();
}

std::vector<Eigen::Index> Dataset::observed_rows(Eigen::Index j) const {
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(n_rows()));
    for (Eigen::Index i = 0; i < n_rows(); ++i)
        if (mask_(i, j)) out.push_back(i);
    return out;
}

std::vector<Eigen::Index> Dataset::missing_rows(Eigen::Index j) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < n_rows(); ++i)
        if (!mask_(i, j)) out.push_back(i);
    return out;
}

Eigen::VectorXd Dataset::observed_values(Eigen::Index j) const {
    const auto rows = observed_rows(j);
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) v[static_cast<Eigen::Index>(r)] = values_(rows[r], j);
    return v;
}

Dataset Dataset::select_rows(const std::vector<Eigen::Index>& rows) const {
    Dataset out(names_, kinds_, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Eigen::Index src = rows[r];
        if (src < 0 || src >= n_rows()) throw Error("select_rows: index out of range");
        const auto dst = static_cast<Eigen::Index>(r);
        out.values_.row(dst) = values_.row(src);
        out.mask_.row(dst) = mask_.row(src);
    }
    return out;
}

void Dataset::append_column(const std::string& name, ColumnKind kind,
                            const Eigen::VectorXd& values) {
    if (values.size() != n_rows())
        throw ConfigError("append_column: length mismatch for '" + name + "'");
    if (column_index(name) >= 0)
        throw ConfigError("append_column: column '" + name + "' already exists");
    const Eigen::Index p = n_cols();
    values_.conservativeResize(Eigen::NoChange, p + 1);
    mask_.conservativeResize(Eigen::NoChange, p + 1);
    names_.push_back(name);
    kinds_.push_back(std::move(kind));
    mask_.col(p).setConstant(true);
    values_.col(p).setZero();
    for (Eigen::Index i = 0; i < n_rows(); ++i) set(i, p, values[i]);
}

bool Dataset::equals(const Dataset& other) const {
    if (names_ != other.names_) return false;
    if (n_rows() != other.n_rows() || n_cols() != other.n_cols()) return false;
    if ((mask_ != other.mask_).any()) return false;
    for (Eigen::Index j = 0; j < n_cols(); ++j)
        for (Eigen::Index i = 0; i < n_rows(); ++i)
            if (mask_(i, j) && values_(i, j) != other.values_(i, j)) return false;
    return true;
}

void ExclusionRules::add(const std::string& variable, double lower, double upper) {
    if (!(lower < upper))
        throw ConfigError("exclusion rule for '" + variable +
                          "': lower must be below upper");
    intervals[variable] = {lower, upper};
}

std::pair<Dataset, ExclusionReport> apply_exclusions(const Dataset& ds,
                                                     const ExclusionRules& rules) {
    std::vector<std::pair<Eigen::Index, std::pair<double, double>>> cols;
    for (const auto& [var, iv] : rules.intervals) {
        const Eigen::Index j = ds.require_column(var);
        if (!ds.kind(j).is_continuous())
            throw ConfigError("exclusion rule on non-continuous column '" + var + "'");
        cols.emplace_back(j, iv);
    }
    ExclusionReport report;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        bool excluded = false;
        for (const auto& [j, iv] : cols) {
            if (!ds.observed(i, j)) continue;
            const double v = ds.value(i, j);
            if (v <= iv.first || v >= iv.second) {
                report.violations.push_back({i, ds.name(j), v, iv.first, iv.second});
                excluded = true;
            }
        }
        if (excluded)
            report.removed_rows.push_back(i);
        else
            keep.push_back(i);
    }
    return {ds.select_rows(keep), std::move(report)};
}

MissingnessTable missingness_summary(const Dataset& ds,
                                     const std::optional<std::string>& strata) {
    MissingnessTable table;
    std::vector<std::vector<Eigen::Index>> groups;
    std::vector<std::string> group_labels;
    if (strata) {
        const Eigen::Index sj = ds.require_column(*strata);
        if (!ds.kind(sj).is_factor())
            throw ConfigError("strata column '" + *strata + "' must be categorical");
        if (ds.n_missing(sj) > 0)
            throw ConfigError("strata column '" + *strata + "' has missing cells");
        groups.resize(static_cast<std::size_t>(ds.kind(sj).n_levels()));
        group_labels = ds.kind(sj).levels;
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
            groups[static_cast<std::size_t>(ds.value(i, sj))].push_back(i);
    }
    for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
        MissingnessEntry overall;
        overall.variable = ds.name(j);
        overall.n_rows = ds.n_rows();
        overall.n_missing = ds.n_missing(j);
        overall.percent = ds.n_rows() == 0
                              ? 0.0
                              : 100.0 * static_cast<double>(overall.n_missing) /
                                    static_cast<double>(ds.n_rows());
        table.entries.push_back(overall);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            MissingnessEntry e;
            e.variable = ds.name(j);
            e.stratum = group_labels[g];
            e.n_rows = static_cast<Eigen::Index>(groups[g].size());
            Eigen::Index miss = 0;
            for (Eigen::Index i : groups[g])
                if (!ds.observed(i, j)) ++miss;
            e.n_missing = miss;
            e.percent = e.n_rows == 0 ? 0.0
                                      : 100.0 * static_cast<double>(miss) /
                                            static_cast<double>(e.n_rows);
            table.entries.push_back(std::move(e));
        }
    }
    return table;
}

GroupDefinition htn_style_group(std::string diagnosis_column,
                                std::vector<std::string> medication_columns,
                                std::string output_name) {
    GroupDefinition def;
    def.diagnosis_column = std::move(diagnosis_column);
    def.medication_columns = std::move(medication_columns);
    def.output_name = std::move(output_name);
    def.mapping = [](int diag, const std::vector<int>& meds) -> std::optional<int> {
        const bool any_med =
            std::any_of(meds.begin(), meds.end(), [](int m) { return m != 0; });
        return 2 * (diag != 0 ? 1 : 0) + (any_med ? 1 : 0);
    };
    return def;
}

GroupDefinition dm_style_group(std::string diagnosis_column,
                               std::string insulin_column,
                               std::string non_insulin_column,
                               std::string output_name) {
    GroupDefinition def;
    def.diagnosis_column = std::move(diagnosis_column);
    def.medication_columns = {std::move(insulin_column), std::move(non_insulin_column)};
    def.output_name = std::move(output_name);
    def.mapping = [](int diag, const std::vector<int>& meds) -> std::optional<int> {
        const bool ins = meds.at(0) != 0;
        const bool non = meds.at(1) != 0;
        if (diag == 0) return (!ins && !non) ? std::optional<int>(0) : std::nullopt;
        if (ins && non) return 3;
        if (ins) return 1;
        if (non) return 2;
        return std::nullopt; // diagnosed but unmedicated: not covered
    };
    return def;
}

Dataset derive_care_group(const Dataset& ds, const GroupDefinition& def) {
    const Eigen::Index dj = ds.require_column(def.diagnosis_column);
    if (!ds.kind(dj).is_factor())
        throw ConfigError("diagnosis column '" + def.diagnosis_column +
                          "' must be binary or categorical");
    if (ds.n_missing(dj) > 0)
        throw ConfigError("diagnosis column '" + def.diagnosis_column +
                          "' has missing cells");
    std::vector<Eigen::Index> mcols;
    for (const auto& m : def.medication_columns) {
        const Eigen::Index mj = ds.require_column(m);
        if (!ds.kind(mj).is_factor())
            throw ConfigError("medication column '" + m + "' must be binary or categorical");
        if (ds.n_missing(mj) > 0)
            throw ConfigError("medication column '" + m + "' has missing cells");
        mcols.push_back(mj);
    }
    Eigen::VectorXd codes(ds.n_rows());
    std::vector<int> meds(mcols.size());
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        const int diag = static_cast<int>(ds.value(i, dj));
        for (std::size_t k = 0; k < mcols.size(); ++k)
            meds[k] = static_cast<int>(ds.value(i, mcols[k]));
        const auto code = def.mapping(diag, meds);
        if (!code) {
            std::ostringstream os;
            os << "group mapping not total: row " << i << " has (" << def.diagnosis_column
               << "=" << ds.label(i, dj);
            for (std::size_t k = 0; k < mcols.size(); ++k)
                os << ", " << ds.name(mcols[k]) << "=" << ds.label(i, mcols[k]);
            os << ")";
            throw ComputeError(os.str());
        }
        if (*code < 0 || *code > 3)
            throw ComputeError("group mapping returned a code outside 0..3");
        codes[i] = *code;
    }
    Dataset out = ds;
    out.append_column(def.output_name, ColumnKind::categorical({"0", "1", "2", "3"}),
                      codes);
    return out;
}

} // namespace micekit
