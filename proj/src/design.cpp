#include "micekit/design.hpp"

namespace micekit {

DesignMatrix build_design(const Eigen::MatrixXd& working,
                          const std::vector<ColumnKind>& kinds,
                          const std::vector<std::string>& names,
                          const std::vector<int>& predictors,
                          const std::vector<Eigen::Index>& rows, DesignMode mode,
                          bool intercept) {
    DesignMatrix d;
    Eigen::Index p = intercept ? 1 : 0;
    for (int j : predictors) {
        const ColumnKind& k = kinds[static_cast<std::size_t>(j)];
        if (k.is_continuous() || mode == DesignMode::Native)
            p += 1;
        else
            p += k.n_levels() - 1;
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    d.X.resize(n, p);
    d.columns.reserve(static_cast<std::size_t>(p));

    Eigen::Index col = 0;
    if (intercept) {
        d.X.col(col).setOnes();
        d.columns.push_back({"(Intercept)", -1, 0});
        ++col;
    }
    for (int j : predictors) {
        const ColumnKind& k = kinds[static_cast<std::size_t>(j)];
        const std::string& nm = names[static_cast<std::size_t>(j)];
        if (k.is_continuous()) {
            for (Eigen::Index r = 0; r < n; ++r) d.X(r, col) = working(rows[static_cast<std::size_t>(r)], j);
            d.columns.push_back({nm, j, 0});
            ++col;
        } else if (mode == DesignMode::Native) {
            for (Eigen::Index r = 0; r < n; ++r) d.X(r, col) = working(rows[static_cast<std::size_t>(r)], j);
            d.columns.push_back({nm, j, k.n_levels()});
            ++col;
        } else {
            // reference level = level 0
            for (int lv = 1; lv < k.n_levels(); ++lv) {
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double code = working(rows[static_cast<std::size_t>(r)], j);
                    d.X(r, col) = (static_cast<int>(code) == lv) ? 1.0 : 0.0;
                }
                d.columns.push_back({nm + "=" + k.levels[static_cast<std::size_t>(lv)], j, 0});
                ++col;
            }
        }
    }
    return d;
}

DesignMatrix build_design(const Dataset& ds, const std::vector<std::string>& predictors,
                          DesignMode mode, bool intercept) {
    std::vector<int> cols;
    for (const auto& name : predictors) {
        const auto j = ds.require_column(name);
        if (ds.n_missing(j) > 0)
            throw ConfigError("design predictor '" + name + "' has missing cells");
        cols.push_back(static_cast<int>(j));
    }
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(ds.n_rows()));
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) rows[static_cast<std::size_t>(i)] = i;
    return build_design(ds.cells(), ds.kinds(), ds.names(), cols, rows, mode, intercept);
}

} // namespace micekit
