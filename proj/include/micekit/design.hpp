#pragma once

#include "micekit/dataset.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace micekit {

/// How factor predictors enter a design matrix.
///
/// OneHot expands each factor into indicator columns with the first level
/// as reference, the form the regression engines consume. Native keeps a
/// single column of level codes; the tree engine splits those on level
/// subsets instead of dummy thresholds.
enum class DesignMode { OneHot, Native };

struct DesignColumn {
    std::string name;
    int source = -1;   // dataset column index; -1 for the intercept
    int n_levels = 0;  // >0 marks a Native factor column
};

/// Fully observed numeric predictor block with provenance back to source
/// variables. Callers supply current completed values; nothing in here is
/// ever masked.
struct DesignMatrix {
    Eigen::MatrixXd X;
    std::vector<DesignColumn> columns;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }
};

/// Build a design over `rows` of a working value matrix (all cells
/// filled). `predictors` are dataset column indices.
DesignMatrix build_design(const Eigen::MatrixXd& working,
                          const std::vector<ColumnKind>& kinds,
                          const std::vector<std::string>& names,
                          const std::vector<int>& predictors,
                          const std::vector<Eigen::Index>& rows, DesignMode mode,
                          bool intercept);

/// Convenience overload over a fully observed dataset.
DesignMatrix build_design(const Dataset& ds, const std::vector<std::string>& predictors,
                          DesignMode mode, bool intercept);

} // namespace micekit
