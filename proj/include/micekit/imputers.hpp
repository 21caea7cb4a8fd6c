#pragma once

#include "micekit/design.hpp"
#include "micekit/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace micekit {

struct NormParams {
    double ridge = 1e-5; // scaled by diag(X'X), so scale-free
};

struct PmmParams {
    int k = 5;          // donor-pool size
    double ridge = 1e-5;
    // Matching type: 0 = posterior-mean predictions on both sides,
    // 1 = mean for observed rows, parameter draw for missing rows,
    // 2 = parameter draw on both sides. Default is type 1.
    int match_type = 1;
};

struct CartParams {
    int min_leaf = 5;
    int max_depth = 20;
};

struct LogisticParams {
    double ridge = 1e-4;
    int max_iter = 100;
    double tol = 1e-8;
};

/// One draw from the Bayesian linear regression posterior: coefficients
/// at the penalized least-squares solution, a residual-variance draw from
/// its scaled inverse-chi-square posterior, and a coefficient draw from
/// the conditional normal.
struct LinearDraw {
    Eigen::VectorXd coef_mean;
    Eigen::VectorXd coef_draw;
    double sigma = 0.0;
};

LinearDraw norm_posterior_draw(const Eigen::VectorXd& y, const DesignMatrix& X,
                               double ridge, RngStream& rng);

/// Bayesian linear regression imputation. Values outside the observed
/// range are returned as-is: flagging them is the diagnostics module's
/// job, not the engine's.
Eigen::VectorXd impute_norm(const Eigen::VectorXd& y_obs, const DesignMatrix& X_obs,
                            const DesignMatrix& X_mis, const NormParams& params,
                            RngStream& rng);

/// Predictive mean matching: every imputed value is one of y_obs.
Eigen::VectorXd impute_pmm(const Eigen::VectorXd& y_obs, const DesignMatrix& X_obs,
                           const DesignMatrix& X_mis, const PmmParams& params,
                           RngStream& rng);

struct CartNode {
    int column = -1;           // design column; -1 marks a leaf
    double threshold = 0.0;    // numeric split: value <= threshold goes left
    std::uint64_t level_mask = 0; // factor split: level bit set goes left
    int left = -1;
    int right = -1;
    std::vector<double> values; // leaf only: sorted training targets
};

class CartTree {
public:
    const std::vector<CartNode>& nodes() const { return nodes_; }
    const CartNode& leaf_for(const Eigen::MatrixXd& X, Eigen::Index row) const;
    int depth() const;
    Eigen::Index n_training_rows() const { return n_rows_; }

private:
    friend CartTree fit_cart(const Eigen::VectorXd&, int, const DesignMatrix&,
                             const CartParams&);
    std::vector<CartNode> nodes_;
    std::vector<int> column_levels_; // per design column; 0 = numeric
    Eigen::Index n_rows_ = 0;
};

/// Greedy recursive partitioning. `y_levels` = 0 fits a regression tree
/// (variance-reduction splits); > 0 treats y as level codes and splits on
/// Gini impurity. Ties break toward the lowest column index, then the
/// lowest threshold (or smallest level subset).
CartTree fit_cart(const Eigen::VectorXd& y, int y_levels, const DesignMatrix& X,
                  const CartParams& params);

/// Route each row of X_mis to its leaf and draw uniformly from the leaf's
/// observed targets.
Eigen::VectorXd impute_cart(const CartTree& tree, const Eigen::VectorXd& y_obs,
                            const DesignMatrix& X_mis, RngStream& rng);

/// Penalized IRLS logistic fit, coefficients perturbed with a draw from
/// the asymptotic normal, then Bernoulli draws at the resulting
/// probabilities. y_obs must contain both classes.
Eigen::VectorXd impute_logistic(const Eigen::VectorXd& y_obs, const DesignMatrix& X_obs,
                                const DesignMatrix& X_mis, const LogisticParams& params,
                                RngStream& rng);

/// One-vs-reference multinomial built from binary logistic fits on the
/// {reference, level} row subsets.
Eigen::VectorXd impute_polytomous(const Eigen::VectorXd& y_obs, int n_levels,
                                  const DesignMatrix& X_obs, const DesignMatrix& X_mis,
                                  const LogisticParams& params, RngStream& rng);

} // namespace micekit
