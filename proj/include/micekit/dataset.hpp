#pragma once

#include "micekit/error.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace micekit {

/// Column type. Binary is a categorical with exactly two levels; the two
/// are distinguished only so method defaults can pick logistic rather
/// than polytomous regression.
struct ColumnKind {
    enum class Type { Continuous, Binary, Categorical };

    Type type = Type::Continuous;
    std::vector<std::string> levels; // empty for Continuous

    static ColumnKind continuous() { return {}; }
    static ColumnKind binary(std::vector<std::string> lv);
    static ColumnKind categorical(std::vector<std::string> lv);

    bool is_continuous() const { return type == Type::Continuous; }
    bool is_factor() const { return type != Type::Continuous; }
    int n_levels() const { return static_cast<int>(levels.size()); }
    int level_index(std::string_view label) const; // -1 when absent
};

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Column-typed in-memory table with an explicit missingness mask.
///
/// Cell storage is a dense double matrix; factor cells hold the level
/// index. A cell whose mask entry is false is missing: value() refuses to
/// read it. The matrix behind a missing cell is zero-initialized and
/// never observable through the public accessors.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::string> names, std::vector<ColumnKind> kinds,
            Eigen::Index n_rows);

    Eigen::Index n_rows() const { return values_.rows(); }
    Eigen::Index n_cols() const { return values_.cols(); }

    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(Eigen::Index j) const { return names_[static_cast<std::size_t>(j)]; }
    const ColumnKind& kind(Eigen::Index j) const { return kinds_[static_cast<std::size_t>(j)]; }
    const std::vector<ColumnKind>& kinds() const { return kinds_; }

    int column_index(std::string_view name) const; // -1 when absent
    Eigen::Index require_column(std::string_view name) const;

    bool observed(Eigen::Index i, Eigen::Index j) const { return mask_(i, j); }
    double value(Eigen::Index i, Eigen::Index j) const;
    /// Factor level label, or the numeric value formatted round-trip.
    std::string label(Eigen::Index i, Eigen::Index j) const;

    void set(Eigen::Index i, Eigen::Index j, double v);
    void set_missing(Eigen::Index i, Eigen::Index j);

    const Mask& mask() const { return mask_; }
    /// Raw cell storage including unobservable entries behind the mask.
    /// Intended for engine internals that overlay their own fills.
    const Eigen::MatrixXd& cells() const { return values_; }

    Eigen::Index n_missing(Eigen::Index j) const;
    std::vector<Eigen::Index> observed_rows(Eigen::Index j) const;
    std::vector<Eigen::Index> missing_rows(Eigen::Index j) const;
    Eigen::VectorXd observed_values(Eigen::Index j) const;

    Dataset select_rows(const std::vector<Eigen::Index>& rows) const;
    void append_column(const std::string& name, ColumnKind kind,
                       const Eigen::VectorXd& values);

    bool equals(const Dataset& other) const;

private:
    void check_cell(Eigen::Index i, Eigen::Index j) const;

    std::vector<std::string> names_;
    std::vector<ColumnKind> kinds_;
    Eigen::MatrixXd values_;
    Mask mask_;
};

/// Per-variable open interval (lower, upper); observed values at or
/// outside either endpoint exclude the row.
struct ExclusionRules {
    std::map<std::string, std::pair<double, double>> intervals;

    void add(const std::string& variable, double lower, double upper);
};

struct ExclusionViolation {
    Eigen::Index row;
    std::string variable;
    double value;
    double lower;
    double upper;
};

struct ExclusionReport {
    std::vector<ExclusionViolation> violations;
    std::vector<Eigen::Index> removed_rows; // ascending, unique
};

/// Drop rows carrying observed out-of-range values. Missing cells never
/// trigger exclusion.
std::pair<Dataset, ExclusionReport> apply_exclusions(const Dataset& ds,
                                                     const ExclusionRules& rules);

struct MissingnessEntry {
    std::string variable;
    std::string stratum; // empty = overall
    Eigen::Index n_rows = 0;
    Eigen::Index n_missing = 0;
    double percent = 0.0; // full precision; round only at display
};

struct MissingnessTable {
    std::vector<MissingnessEntry> entries;
};

MissingnessTable missingness_summary(const Dataset& ds,
                                     const std::optional<std::string>& strata = {});

/// Diagnosis x medication -> care-group code in {0,1,2,3}. The mapping
/// returns nullopt for combinations it does not cover; hitting one of
/// those in the data is an error.
struct GroupDefinition {
    std::string diagnosis_column;
    std::vector<std::string> medication_columns;
    std::function<std::optional<int>(int diagnosis_code,
                                     const std::vector<int>& medication_codes)>
        mapping;
    std::string output_name;
};

/// diagnosis x any-medication grid: group = 2*diagnosis + any_medication.
GroupDefinition htn_style_group(std::string diagnosis_column,
                                std::vector<std::string> medication_columns,
                                std::string output_name);

/// Insulin / non-insulin pattern among the diagnosed: 0 = no diagnosis
/// and no medication, 1 = diagnosis + insulin only, 2 = diagnosis +
/// non-insulin only, 3 = diagnosis + both. Other combinations are not
/// covered.
GroupDefinition dm_style_group(std::string diagnosis_column,
                               std::string insulin_column,
                               std::string non_insulin_column,
                               std::string output_name);

Dataset derive_care_group(const Dataset& ds, const GroupDefinition& def);

} // namespace micekit
