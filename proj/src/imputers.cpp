#include "micekit/imputers.hpp"

#include "micekit/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace micekit {

namespace {

std::string offending_columns(const DesignMatrix& X) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X.X);
    const Eigen::Index rank = qr.rank();
    std::ostringstream os;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = rank; k < X.cols(); ++k) {
        if (os.tellp() > 0) os << ", ";
        os << X.columns[static_cast<std::size_t>(perm[k])].name;
    }
    return os.str();
}

void check_shapes(const Eigen::VectorXd& y_obs, const DesignMatrix& X_obs,
                  const DesignMatrix& X_mis) {
    if (X_obs.rows() != y_obs.size())
        throw ComputeError("design/target row mismatch");
    if (X_obs.cols() != X_mis.cols())
        throw ComputeError("observed and missing designs disagree on columns");
}

} // namespace

LinearDraw norm_posterior_draw(const Eigen::VectorXd& y, const DesignMatrix& X,
                               double ridge, RngStream& rng) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n < p + 2)
        throw ComputeError("too few observed rows (" + std::to_string(n) +
                           ") for " + std::to_string(p) + " design columns");
    const Eigen::MatrixXd S = X.X.transpose() * X.X;
    Eigen::MatrixXd A = S;
    A.diagonal() += ridge * S.diagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
        throw ComputeError("rank-deficient design after ridge; offending columns: " +
                           offending_columns(X));

    LinearDraw d;
    d.coef_mean = llt.solve(X.X.transpose() * y);
    const Eigen::VectorXd resid = y - X.X * d.coef_mean;
    const double ssr = resid.squaredNorm();
    const double df = static_cast<double>(n - p);
    const double chi = rng.chisq(df);
    const double sigma2 = ssr / chi;
    d.sigma = std::sqrt(sigma2);

    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
    // cov(beta) = sigma^2 (X'X + pen)^-1; with A = LL', L^-T z has unit
    // covariance A^-1.
    const Eigen::VectorXd w =
        llt.matrixU().solve(z); // solves L' w = z
    d.coef_draw = d.coef_mean + d.sigma * w;
    return d;
}

Eigen::VectorXd impute_norm(const Eigen::VectorXd& y_obs, const DesignMatrix& X_obs,
                            const DesignMatrix& X_mis, const NormParams& params,
                            RngStream& rng) {
    check_shapes(y_obs, X_obs, X_mis);
    const LinearDraw d = norm_posterior_draw(y_obs, X_obs, params.ridge, rng);
    Eigen::VectorXd out = X_mis.X * d.coef_draw;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += d.sigma * rng.normal();
    return out;
}

Eigen::VectorXd impute_pmm(const Eigen::VectorXd& y_obs, const DesignMatrix& X_obs,
                           const DesignMatrix& X_mis, const PmmParams& params,
                           RngStream& rng) {
    check_shapes(y_obs, X_obs, X_mis);
    const Eigen::Index n_obs = y_obs.size();
    if (params.k < 1) throw ConfigError("pmm donor pool size must be >= 1");
    if (params.k > n_obs)
        throw ComputeError("pmm donor pool k=" + std::to_string(params.k) +
                           " exceeds " + std::to_string(n_obs) + " observed values");
    const LinearDraw d = norm_posterior_draw(y_obs, X_obs, params.ridge, rng);

    const Eigen::VectorXd& beta_obs =
        params.match_type == 2 ? d.coef_draw : d.coef_mean;
    const Eigen::VectorXd& beta_mis =
        params.match_type == 0 ? d.coef_mean : d.coef_draw;
    const Eigen::VectorXd pred_obs = X_obs.X * beta_obs;
    const Eigen::VectorXd pred_mis = X_mis.X * beta_mis;

    const auto k = static_cast<std::size_t>(params.k);
    Eigen::VectorXd out(X_mis.rows());
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n_obs));
    for (Eigen::Index i = 0; i < X_mis.rows(); ++i) {
        for (Eigen::Index j = 0; j < n_obs; ++j)
            dist[static_cast<std::size_t>(j)] = {std::fabs(pred_mis[i] - pred_obs[j]), j};
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
        const auto pick = static_cast<std::size_t>(rng.uniform_index(k));
        out[i] = y_obs[dist[pick].second];
    }
    return out;
}

namespace {

// Incremental split statistics: sums for regression targets, class
// counts for factor targets.
struct NodeStats {
    double count = 0.0;
    double sum = 0.0;
    double sumsq = 0.0;
    std::vector<double> class_count;

    explicit NodeStats(int y_levels) {
        if (y_levels > 0) class_count.assign(static_cast<std::size_t>(y_levels), 0.0);
    }
    void add(double y) {
        count += 1.0;
        if (class_count.empty()) {
            sum += y;
            sumsq += y * y;
        } else {
            class_count[static_cast<std::size_t>(y)] += 1.0;
        }
    }
    void add(const NodeStats& o) {
        count += o.count;
        sum += o.sum;
        sumsq += o.sumsq;
        for (std::size_t i = 0; i < class_count.size(); ++i)
            class_count[i] += o.class_count[i];
    }
    // Regression: SSE. Classification: n * Gini impurity, in the
    // sum-of-squares form n - sum_k c_k^2 / n. Both are additive costs
    // whose reduction is the split gain.
    double cost() const {
        if (count == 0.0) return 0.0;
        if (class_count.empty()) return sumsq - sum * sum / count;
        double sq = 0.0;
        for (double c : class_count) sq += c * c;
        return count - sq / count;
    }
};

struct SplitChoice {
    double gain = 0.0;
    int column = -1;
    double threshold = 0.0;
    std::uint64_t level_mask = 0;
    bool is_factor = false;

    bool better_than(const SplitChoice& o) const {
        if (gain != o.gain) return gain > o.gain;
        if (column != o.column) return column < o.column;
        if (is_factor) return level_mask < o.level_mask;
        return threshold < o.threshold;
    }
};

class CartBuilder {
public:
    CartBuilder(const Eigen::VectorXd& y, int y_levels, const DesignMatrix& X,
                const CartParams& params)
        : y_(y), y_levels_(y_levels), X_(X), params_(params) {}

    std::vector<CartNode> build(std::vector<int>& column_levels) {
        column_levels.clear();
        for (const auto& c : X_.columns) column_levels.push_back(c.n_levels);
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(y_.size()));
        std::iota(rows.begin(), rows.end(), 0);
        grow(std::move(rows), 1);
        return std::move(nodes_);
    }

private:
    int grow(std::vector<Eigen::Index> rows, int depth) {
        NodeStats stats(y_levels_);
        for (Eigen::Index r : rows) stats.add(y_[r]);

        SplitChoice best;
        const auto n = static_cast<Eigen::Index>(rows.size());
        const bool can_split = depth < params_.max_depth &&
                               n >= 2 * static_cast<Eigen::Index>(params_.min_leaf) &&
                               stats.cost() > 0.0;
        if (can_split) {
            for (int col = 0; col < static_cast<int>(X_.cols()); ++col) {
                const int levels = X_.columns[static_cast<std::size_t>(col)].n_levels;
                SplitChoice cand = levels > 0 ? scan_factor(rows, col, levels, stats)
                                              : scan_numeric(rows, col, stats);
                if (cand.column >= 0 && (best.column < 0 || cand.better_than(best)))
                    best = cand;
            }
        }
        if (best.column < 0 || !(best.gain > 0.0)) return make_leaf(rows);

        std::vector<Eigen::Index> left, right;
        for (Eigen::Index r : rows) {
            if (goes_left(r, best))
                left.push_back(r);
            else
                right.push_back(r);
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_[static_cast<std::size_t>(id)].column = best.column;
        nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
        nodes_[static_cast<std::size_t>(id)].level_mask = best.level_mask;
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    bool goes_left(Eigen::Index row, const SplitChoice& s) const {
        const double v = X_.X(row, s.column);
        if (s.is_factor)
            return (s.level_mask >> static_cast<std::uint64_t>(v)) & 1ull;
        return v <= s.threshold;
    }

    int make_leaf(const std::vector<Eigen::Index>& rows) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        auto& leaf = nodes_[static_cast<std::size_t>(id)];
        leaf.values.reserve(rows.size());
        for (Eigen::Index r : rows) leaf.values.push_back(y_[r]);
        std::sort(leaf.values.begin(), leaf.values.end());
        return id;
    }

    SplitChoice scan_numeric(const std::vector<Eigen::Index>& rows, int col,
                             const NodeStats& parent) {
        std::vector<std::pair<double, Eigen::Index>> vals;
        vals.reserve(rows.size());
        for (Eigen::Index r : rows) vals.emplace_back(X_.X(r, col), r);
        std::sort(vals.begin(), vals.end());

        SplitChoice best;
        NodeStats left(y_levels_);
        const double parent_cost = parent.cost();
        const auto n = static_cast<Eigen::Index>(vals.size());
        const auto min_leaf = static_cast<Eigen::Index>(params_.min_leaf);
        for (Eigen::Index s = 0; s + 1 < n; ++s) {
            left.add(y_[vals[static_cast<std::size_t>(s)].second]);
            if (vals[static_cast<std::size_t>(s)].first ==
                vals[static_cast<std::size_t>(s + 1)].first)
                continue;
            const Eigen::Index n_left = s + 1;
            if (n_left < min_leaf || n - n_left < min_leaf) continue;
            NodeStats right(y_levels_);
            right.count = parent.count - left.count;
            right.sum = parent.sum - left.sum;
            right.sumsq = parent.sumsq - left.sumsq;
            for (std::size_t k = 0; k < right.class_count.size(); ++k)
                right.class_count[k] = parent.class_count[k] - left.class_count[k];
            SplitChoice cand;
            cand.gain = parent_cost - left.cost() - right.cost();
            cand.column = col;
            cand.threshold = 0.5 * (vals[static_cast<std::size_t>(s)].first +
                                    vals[static_cast<std::size_t>(s + 1)].first);
            if (cand.gain > 0.0 && (best.column < 0 || cand.better_than(best)))
                best = cand;
        }
        return best;
    }

    SplitChoice scan_factor(const std::vector<Eigen::Index>& rows, int col, int levels,
                            const NodeStats& parent) {
        std::vector<NodeStats> bucket(static_cast<std::size_t>(levels),
                                      NodeStats(y_levels_));
        for (Eigen::Index r : rows)
            bucket[static_cast<std::size_t>(X_.X(r, col))].add(y_[r]);

        const double parent_cost = parent.cost();
        SplitChoice best;
        auto consider = [&](std::uint64_t mask) {
            NodeStats left(y_levels_);
            for (int lv = 0; lv < levels; ++lv)
                if ((mask >> lv) & 1ull) left.add(bucket[static_cast<std::size_t>(lv)]);
            const double n_right = parent.count - left.count;
            if (left.count < params_.min_leaf || n_right < params_.min_leaf) return;
            NodeStats right(y_levels_);
            right.count = n_right;
            right.sum = parent.sum - left.sum;
            right.sumsq = parent.sumsq - left.sumsq;
            for (std::size_t k = 0; k < right.class_count.size(); ++k)
                right.class_count[k] = parent.class_count[k] - left.class_count[k];
            SplitChoice cand;
            cand.gain = parent_cost - left.cost() - right.cost();
            cand.column = col;
            cand.level_mask = mask;
            cand.is_factor = true;
            if (cand.gain > 0.0 && (best.column < 0 || cand.better_than(best)))
                best = cand;
        };
        if (levels <= 10) {
            // Enumerate subsets over levels 1..L-1; level 0 stays on the
            // right, which covers every 2-partition exactly once.
            const std::uint64_t top = 1ull << (levels - 1);
            for (std::uint64_t m = 1; m < top; ++m) consider(m << 1);
        } else {
            for (int lv = 0; lv < levels; ++lv) consider(1ull << lv);
        }
        return best;
    }

    const Eigen::VectorXd& y_;
    int y_levels_;
    const DesignMatrix& X_;
    CartParams params_;
    std::vector<CartNode> nodes_;
};

} // namespace

const CartNode& CartTree::leaf_for(const Eigen::MatrixXd& X, Eigen::Index row) const {
    int id = 0; // root is node 0 by construction
    for (;;) {
        const CartNode& nd = nodes_[static_cast<std::size_t>(id)];
        if (nd.column < 0) return nd;
        const double v = X(row, nd.column);
        const bool left =
            column_levels_[static_cast<std::size_t>(nd.column)] > 0
                ? ((nd.level_mask >> static_cast<std::uint64_t>(v)) & 1ull) != 0
                : v <= nd.threshold;
        id = left ? nd.left : nd.right;
    }
}

int CartTree::depth() const {
    // Iterative depth over the node array.
    std::vector<std::pair<int, int>> stack{{0, 1}};
    int best = 0;
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        const CartNode& nd = nodes_[static_cast<std::size_t>(id)];
        if (nd.column < 0) {
            best = std::max(best, d);
        } else {
            stack.push_back({nd.left, d + 1});
            stack.push_back({nd.right, d + 1});
        }
    }
    return best;
}

CartTree fit_cart(const Eigen::VectorXd& y, int y_levels, const DesignMatrix& X,
                  const CartParams& params) {
    if (y.size() == 0) throw ComputeError("cart: no training rows");
    if (X.rows() != y.size()) throw ComputeError("cart: design/target row mismatch");
    if (params.min_leaf < 1 || params.max_depth < 1)
        throw ConfigError("cart: min_leaf and max_depth must be >= 1");
    CartTree tree;
    CartBuilder builder(y, y_levels, X, params);
    tree.nodes_ = builder.build(tree.column_levels_);
    tree.n_rows_ = y.size();
    return tree;
}

Eigen::VectorXd impute_cart(const CartTree& tree, const Eigen::VectorXd& y_obs,
                            const DesignMatrix& X_mis, RngStream& rng) {
    if (tree.n_training_rows() != y_obs.size())
        throw ComputeError("cart: tree was trained on a different target");
    Eigen::VectorXd out(X_mis.rows());
    for (Eigen::Index i = 0; i < X_mis.rows(); ++i) {
        const CartNode& leaf = tree.leaf_for(X_mis.X, i);
        const auto pick = rng.uniform_index(leaf.values.size());
        out[i] = leaf.values[static_cast<std::size_t>(pick)];
    }
    return out;
}

namespace {

struct LogisticFit {
    Eigen::VectorXd coef;
    Eigen::LLT<Eigen::MatrixXd> info_llt; // penalized information at coef
};

double penalized_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& pen, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        // log(1 + exp(eta)) computed stably
        const double e = eta[i];
        const double log1pexp = e > 30.0 ? e : std::log1p(std::exp(std::min(e, 30.0)));
        ll += y[i] * e - log1pexp;
    }
    ll -= 0.5 * (pen.array() * beta.array().square()).sum();
    return ll;
}

LogisticFit fit_logistic(const Eigen::VectorXd& y, const DesignMatrix& X,
                         const LogisticParams& params) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::MatrixXd S = X.X.transpose() * X.X;
    Eigen::VectorXd pen = params.ridge * S.diagonal();
    // A structurally zero column cannot be identified even with ridge.
    for (Eigen::Index j = 0; j < p; ++j)
        if (S(j, j) == 0.0)
            throw ComputeError("logistic: design column '" +
                               X.columns[static_cast<std::size_t>(j)].name +
                               "' is identically zero");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double ll = penalized_loglik(y, X.X, pen, beta);
    Eigen::VectorXd grad(p);
    Eigen::MatrixXd H(p, p);
    double grad_norm = 0.0;
    for (int it = 0; it < params.max_iter; ++it) {
        const Eigen::VectorXd eta = (X.X * beta).cwiseMax(-30.0).cwiseMin(30.0);
        const Eigen::VectorXd prob = (1.0 + (-eta.array()).exp()).inverse();
        const Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).max(1e-10);
        grad = X.X.transpose() * (y - prob) - pen.asDiagonal() * beta;
        grad_norm = grad.cwiseAbs().maxCoeff();
        if (grad_norm < params.tol) {
            H = X.X.transpose() * w.asDiagonal() * X.X;
            H.diagonal() += pen;
            LogisticFit fit;
            fit.coef = beta;
            fit.info_llt.compute(H);
            if (fit.info_llt.info() != Eigen::Success)
                throw ComputeError("logistic: information matrix not positive definite");
            return fit;
        }
        H = X.X.transpose() * w.asDiagonal() * X.X;
        H.diagonal() += pen;
        const Eigen::VectorXd step = H.llt().solve(grad);
        double scale = 1.0;
        for (int h = 0; h < 40; ++h) {
            const Eigen::VectorXd cand = beta + scale * step;
            const double cand_ll = penalized_loglik(y, X.X, pen, cand);
            if (cand_ll >= ll - 1e-12) {
                beta = cand;
                ll = cand_ll;
                break;
            }
            scale *= 0.5;
        }
        (void)n;
    }
    throw ComputeError("logistic: IRLS did not converge in " +
                       std::to_string(params.max_iter) +
                       " iterations (final gradient max-norm " +
                       std::to_string(grad_norm) + ")");
}

template <typename Fit>
Eigen::VectorXd coef_perturbation(const Fit& fit, RngStream& rng) {
    const auto p = fit.coef.size();
    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
    return fit.coef + fit.info_llt.matrixU().solve(z);
}

struct MultinomialFit {
    Eigen::VectorXd coef;                 // stacked (K-1) blocks of p, reference first
    Eigen::LLT<Eigen::MatrixXd> info_llt; // penalized information at coef
};

/// Class scores for every row: column 0 is the reference (identically 0),
/// column k is X times parameter block k-1.
Eigen::MatrixXd class_scores(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta,
                             int n_classes) {
    const Eigen::Index p = X.cols();
    Eigen::MatrixXd eta = Eigen::MatrixXd::Zero(X.rows(), n_classes);
    for (int k = 1; k < n_classes; ++k)
        eta.col(k) = X * theta.segment(static_cast<Eigen::Index>(k - 1) * p, p);
    return eta;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& eta) {
    const Eigen::VectorXd rowmax = eta.rowwise().maxCoeff();
    Eigen::MatrixXd P = (eta.colwise() - rowmax).array().exp();
    const Eigen::VectorXd rowsum = P.rowwise().sum();
    P.array().colwise() /= rowsum.array();
    return P;
}

double multinomial_loglik(const Eigen::MatrixXd& eta, const std::vector<int>& cls,
                          const Eigen::VectorXd& pen, const Eigen::VectorXd& theta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
        const double m = eta.row(i).maxCoeff();
        const double lse = m + std::log((eta.row(i).array() - m).exp().sum());
        ll += eta(i, cls[static_cast<std::size_t>(i)]) - lse;
    }
    return ll - 0.5 * (pen.array() * theta.array().square()).sum();
}

/// Penalized multinomial logit over compacted class codes 0..K-1 with class
/// 0 as reference. A joint fit, not one-vs-reference contrasts: pairwise
/// contrasts never rank two non-reference classes against each other, which
/// leaves their relative odds to ridge artifacts when the data separate.
MultinomialFit fit_multinomial(const std::vector<int>& cls, int n_classes,
                               const DesignMatrix& X, const LogisticParams& params) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::Index q = static_cast<Eigen::Index>(n_classes - 1) * p;
    const Eigen::MatrixXd S = X.X.transpose() * X.X;
    for (Eigen::Index j = 0; j < p; ++j)
        if (S(j, j) == 0.0)
            throw ComputeError("polytomous: design column '" +
                               X.columns[static_cast<std::size_t>(j)].name +
                               "' is identically zero");
    Eigen::VectorXd pen(q);
    for (int k = 0; k + 1 < n_classes; ++k)
        pen.segment(static_cast<Eigen::Index>(k) * p, p) = params.ridge * S.diagonal();

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd eta = class_scores(X.X, theta, n_classes);
    double ll = multinomial_loglik(eta, cls, pen, theta);
    double grad_norm = 0.0;
    for (int it = 0; it < params.max_iter; ++it) {
        const Eigen::MatrixXd P = softmax_rows(eta);
        Eigen::VectorXd grad(q);
        for (int k = 1; k < n_classes; ++k) {
            Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i)
                if (cls[static_cast<std::size_t>(i)] == k) ind[i] = 1.0;
            const Eigen::Index off = static_cast<Eigen::Index>(k - 1) * p;
            grad.segment(off, p) =
                X.X.transpose() * (ind - P.col(k)) -
                (pen.segment(off, p).array() * theta.segment(off, p).array()).matrix();
        }
        grad_norm = grad.cwiseAbs().maxCoeff();
        Eigen::MatrixXd H(q, q);
        for (int k = 1; k < n_classes; ++k)
            for (int l = 1; l < n_classes; ++l) {
                Eigen::VectorXd w = -(P.col(k).array() * P.col(l).array());
                if (k == l) w += P.col(k);
                H.block(static_cast<Eigen::Index>(k - 1) * p,
                        static_cast<Eigen::Index>(l - 1) * p, p, p) =
                    X.X.transpose() * w.asDiagonal() * X.X;
            }
        H.diagonal() += pen;
        if (grad_norm < params.tol) {
            MultinomialFit fit;
            fit.coef = theta;
            fit.info_llt.compute(H);
            if (fit.info_llt.info() != Eigen::Success)
                throw ComputeError("polytomous: information matrix not positive definite");
            return fit;
        }
        const Eigen::VectorXd step = H.llt().solve(grad);
        double scale = 1.0;
        for (int h = 0; h < 40; ++h) {
            const Eigen::VectorXd cand = theta + scale * step;
            const Eigen::MatrixXd cand_eta = class_scores(X.X, cand, n_classes);
            const double cand_ll = multinomial_loglik(cand_eta, cls, pen, cand);
            if (cand_ll >= ll - 1e-12) {
                theta = cand;
                eta = cand_eta;
                ll = cand_ll;
                break;
            }
            scale *= 0.5;
        }
    }
    throw ComputeError("polytomous: Newton did not converge in " +
                       std::to_string(params.max_iter) +
                       " iterations (final gradient max-norm " +
                       std::to_string(grad_norm) + ")");
}

} // namespace

Eigen::VectorXd impute_logistic(const Eigen::VectorXd& y_obs, const DesignMatrix& X_obs,
                                const DesignMatrix& X_mis, const LogisticParams& params,
                                RngStream& rng) {
    check_shapes(y_obs, X_obs, X_mis);
    const double ymin = y_obs.minCoeff();
    const double ymax = y_obs.maxCoeff();
    if (ymin == ymax)
        throw ComputeError("logistic: only one observed class (all '" +
                           std::to_string(static_cast<int>(ymin)) + "')");
    const LogisticFit fit = fit_logistic(y_obs, X_obs, params);
    const Eigen::VectorXd beta = coef_perturbation(fit, rng);
    Eigen::VectorXd out(X_mis.rows());
    for (Eigen::Index i = 0; i < X_mis.rows(); ++i) {
        const double eta = std::clamp(X_mis.X.row(i).dot(beta), -30.0, 30.0);
        const double prob = 1.0 / (1.0 + std::exp(-eta));
        out[i] = rng.bernoulli(prob) ? 1.0 : 0.0;
    }
    return out;
}

Eigen::VectorXd impute_polytomous(const Eigen::VectorXd& y_obs, int n_levels,
                                  const DesignMatrix& X_obs, const DesignMatrix& X_mis,
                                  const LogisticParams& params, RngStream& rng) {
    check_shapes(y_obs, X_obs, X_mis);
    std::vector<Eigen::Index> count(static_cast<std::size_t>(n_levels), 0);
    for (Eigen::Index i = 0; i < y_obs.size(); ++i)
        ++count[static_cast<std::size_t>(y_obs[i])];

    // Compact to the observed classes; absent levels keep probability zero.
    std::vector<int> classes;
    for (int lv = 0; lv < n_levels; ++lv)
        if (count[static_cast<std::size_t>(lv)] > 0) classes.push_back(lv);
    const int n_classes = static_cast<int>(classes.size());
    if (n_classes < 2)
        throw ComputeError("polytomous: only one observed class");

    std::vector<int> pos(static_cast<std::size_t>(n_levels), -1);
    for (int k = 0; k < n_classes; ++k)
        pos[static_cast<std::size_t>(classes[static_cast<std::size_t>(k)])] = k;
    std::vector<int> cls(static_cast<std::size_t>(y_obs.size()));
    for (Eigen::Index i = 0; i < y_obs.size(); ++i)
        cls[static_cast<std::size_t>(i)] = pos[static_cast<std::size_t>(y_obs[i])];

    const MultinomialFit fit = fit_multinomial(cls, n_classes, X_obs, params);
    const Eigen::VectorXd theta = coef_perturbation(fit, rng);

    Eigen::VectorXd out(X_mis.rows());
    const Eigen::MatrixXd eta = class_scores(X_mis.X, theta, n_classes);
    for (Eigen::Index i = 0; i < X_mis.rows(); ++i) {
        const double m = eta.row(i).maxCoeff();
        const Eigen::ArrayXd w = (eta.row(i).array() - m).exp().transpose();
        double u = rng.uniform01() * w.sum();
        int picked = 0;
        for (int k = 0; k < n_classes; ++k) {
            u -= w[k];
            if (u < 0.0) {
                picked = k;
                break;
            }
        }
        out[i] = classes[static_cast<std::size_t>(picked)];
    }
    return out;
}

} // namespace micekit
