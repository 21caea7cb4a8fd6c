#pragma once

#include "micekit/dataset.hpp"
#include "micekit/imputers.hpp"
#include "micekit/rng.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace micekit {

enum class Method { None, Norm, Pmm, Cart, Logistic, Polytomous };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct MethodSpec {
    Method method = Method::None;
    NormParams norm;
    PmmParams pmm;
    CartParams cart;
    LogisticParams logistic;
};

using MethodMap = std::map<std::string, MethodSpec>;

/// Square 0/1 matrix over the dataset's variables: entry (target,
/// predictor) = 1 means the predictor conditions the target's imputation
/// model. The diagonal is structurally zero.
class PredictorMatrix {
public:
    PredictorMatrix() = default;
    explicit PredictorMatrix(std::vector<std::string> variables);
    static PredictorMatrix all_others(const std::vector<std::string>& variables);

    const std::vector<std::string>& variables() const { return vars_; }
    Eigen::Index index_of(const std::string& variable) const;

    bool uses(Eigen::Index target, Eigen::Index predictor) const {
        return m_(target, predictor) != 0;
    }
    void set(const std::string& target, const std::string& predictor, bool on);
    void clear_row(const std::string& target);
    /// Zero both the row and the column of a variable (used for the group
    /// column inside its own stratum, where it is constant).
    void clear_variable(const std::string& variable);
    void fill_row(const std::string& target);

    std::vector<int> predictors_of(Eigen::Index target) const;
    bool row_is_zero(Eigen::Index target) const;

    bool operator==(const PredictorMatrix& o) const {
        return vars_ == o.vars_ && m_ == o.m_;
    }

private:
    std::vector<std::string> vars_;
    Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> m_;
};

/// Rewire a block of variables so each conditions only on the block
/// members before it: ordered_vars[i]'s row gets 0 for every later block
/// member and 1 for every earlier one. Rows outside the block are
/// untouched. Idempotent.
PredictorMatrix sequential_block(const std::vector<std::string>& ordered_vars,
                                 PredictorMatrix base);

struct MiceConfig {
    int m = 10;
    int cycles = 20;
    std::uint64_t seed = 0;
    std::vector<std::string> visit_sequence; // defaults to ascending missingness
    MethodMap methods;
    PredictorMatrix predictors;
};

/// Fill defaults for a dataset: per-variable method by column kind
/// (preset engine for continuous, logistic/polytomous for factors),
/// all-others predictor rows for imputed variables, and a visit sequence
/// of ascending missingness count.
enum class Preset { DefaultPmm, Norm, Cart };
MiceConfig default_mice_config(const Dataset& ds, Preset preset = Preset::DefaultPmm);

struct TraceRow {
    int chain = 0; // 1-based, like every imputation index in reports
    int cycle = 0; // 1-based
    std::string variable;
    std::string group; // empty for unstratified runs
    Eigen::Index n_imputed = 0;
    double mean = 0.0;
    std::optional<double> sd; // unset when fewer than 2 imputed cells
};

struct CompletedDatasets {
    std::vector<Dataset> completed; // m datasets, mask all true
    Mask observed_mask;             // provenance: the input mask
    std::vector<TraceRow> trace;

    int m() const { return static_cast<int>(completed.size()); }
};

/// Fill every missing cell with a uniform draw from the variable's
/// observed values; the mask lives on as provenance in the caller.
Dataset initialize_chain(const Dataset& ds, const MiceConfig& config, RngStream& rng);

CompletedDatasets run_mice(const Dataset& ds, const MiceConfig& config);

struct GroupOverride {
    std::optional<int> cycles;
    MethodMap methods; // per-variable replacements within the group
};

struct StratifiedPlan {
    std::string group_column;
    bool merge_small_groups = false;
    std::map<std::string, GroupOverride> overrides; // keyed by level label
};

/// Partition rows by the (fully observed) group column, run the chained
/// engine independently per partition, and reassemble in original row
/// order. Group g's chains draw from seed mix(seed, {GROUP_TAG, g}).
CompletedDatasets run_stratified(const Dataset& ds, const StratifiedPlan& plan,
                                 const MiceConfig& config);

/// Seed a group's run the same way run_stratified does; exposed so a
/// caller can reproduce one partition in isolation.
std::uint64_t stratified_group_seed(std::uint64_t seed, int level_code);

std::vector<TraceRow> convergence_trace(const CompletedDatasets& cd);

void trace_to_csv(const std::vector<TraceRow>& trace, std::ostream& out,
                  char delimiter = ',', const std::string& missing_token = "NA");

} // namespace micekit
