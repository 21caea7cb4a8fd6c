#include "micekit/imputers.hpp"
#include "micekit/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace micekit;

namespace {

DesignMatrix with_intercept(const Eigen::VectorXd& x) {
    DesignMatrix d;
    d.X.resize(x.size(), 2);
    d.X.col(0).setOnes();
    d.X.col(1) = x;
    d.columns = {{"(Intercept)", -1, 0}, {"x", 0, 0}};
    return d;
}

DesignMatrix single_column(const Eigen::VectorXd& x, int n_levels = 0) {
    DesignMatrix d;
    d.X.resize(x.size(), 1);
    d.X.col(0) = x;
    d.columns = {{"x", 0, n_levels}};
    return d;
}

Eigen::VectorXd linspace(double lo, double hi, Eigen::Index n) {
    return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

} // namespace

TEST_SUITE("imputers") {

TEST_CASE("norm posterior centers on the least-squares solution") {
    // Noise-free line: the posterior mean must recover it almost exactly
    // (ridge is scaled by the Gram diagonal, so its bias is ~1e-5 relative).
    const Eigen::VectorXd x = linspace(-3.0, 3.0, 50);
    const Eigen::VectorXd y = (2.0 * x).array() + 3.0;
    RngStream rng(1);
    const LinearDraw d = norm_posterior_draw(y, with_intercept(x), 1e-8, rng);
    CHECK(d.coef_mean[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(d.coef_mean[1] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(d.sigma < 1e-3);
    CHECK(d.coef_draw.size() == 2);
}

TEST_CASE("norm draws scatter around the posterior mean") {
    const Eigen::Index n = 200;
    RngStream data_rng(7);
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = data_rng.normal();
        y[i] = 1.0 + 2.0 * x[i] + 0.5 * data_rng.normal();
    }
    RngStream rng(2);
    double slope_sum = 0.0, sigma_sum = 0.0;
    const int reps = 400;
    for (int r = 0; r < reps; ++r) {
        const LinearDraw d = norm_posterior_draw(y, with_intercept(x), 1e-5, rng);
        slope_sum += d.coef_draw[1];
        sigma_sum += d.sigma;
    }
    CHECK(slope_sum / reps == doctest::Approx(2.0).epsilon(0.05));
    CHECK(sigma_sum / reps == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("norm imputation is unbiased for the conditional mean") {
    const Eigen::Index n_obs = 4000, n_mis = 400;
    RngStream data_rng(11);
    Eigen::VectorXd x(n_obs), y(n_obs);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        x[i] = data_rng.normal();
        y[i] = 1.0 + 2.0 * x[i] + data_rng.normal();
    }
    const Eigen::VectorXd x_mis = Eigen::VectorXd::Constant(n_mis, 0.5);
    RngStream rng(3);
    const Eigen::VectorXd imp =
        impute_norm(y, with_intercept(x), with_intercept(x_mis), {}, rng);
    REQUIRE(imp.size() == n_mis);
    // Truth: E[y | x = 0.5] = 2. Monte-Carlo tolerance ~3 standard errors
    // of a 400-draw mean with unit residual sd.
    CHECK(imp.mean() == doctest::Approx(2.0).epsilon(0.08));
}

TEST_CASE("norm requires enough observed rows") {
    const Eigen::VectorXd x = linspace(0, 1, 3);
    const Eigen::VectorXd y = x;
    RngStream rng(1);
    CHECK_THROWS_AS(norm_posterior_draw(y, with_intercept(x), 1e-5, rng),
                    ComputeError);
}

TEST_CASE("norm rejects rank-deficient designs") {
    DesignMatrix d;
    d.X.resize(10, 2);
    d.X.col(0) = linspace(0, 1, 10);
    d.X.col(1) = 2.0 * d.X.col(0); // exactly collinear
    d.columns = {{"a", 0, 0}, {"b", 1, 0}};
    // Gram-scaled ridge keeps the matrix numerically PD here, so make the
    // guard observable with a zero column instead.
    d.X.col(1).setZero();
    const Eigen::VectorXd y = linspace(0, 1, 10);
    RngStream rng(1);
    CHECK_THROWS_AS(norm_posterior_draw(y, d, 1e-5, rng), ComputeError);
}

TEST_CASE("pmm imputes only observed values") {
    const Eigen::Index n = 120;
    RngStream data_rng(5);
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = data_rng.normal();
        y[i] = 2.0 + x[i] + 0.3 * data_rng.normal();
    }
    const Eigen::VectorXd x_mis = linspace(-2.0, 2.0, 37);
    RngStream rng(6);
    const Eigen::VectorXd imp =
        impute_pmm(y, with_intercept(x), with_intercept(x_mis), {}, rng);
    std::set<double> observed(y.data(), y.data() + y.size());
    for (Eigen::Index i = 0; i < imp.size(); ++i)
        CHECK(observed.count(imp[i]) == 1);
}

TEST_CASE("pmm type-0 with one donor picks the nearest prediction") {
    Eigen::VectorXd x = linspace(1.0, 10.0, 10);
    Eigen::VectorXd y = x; // identity line, predictions are exact
    Eigen::VectorXd x_mis(2);
    x_mis << 5.4, 8.6;
    PmmParams params;
    params.k = 1;
    params.match_type = 0;
    RngStream rng(9);
    const Eigen::VectorXd imp =
        impute_pmm(y, with_intercept(x), with_intercept(x_mis), params, rng);
    CHECK(imp[0] == 5.0);
    CHECK(imp[1] == 9.0);
}

TEST_CASE("pmm draws across the whole donor pool") {
    Eigen::VectorXd x = linspace(1.0, 10.0, 10);
    Eigen::VectorXd y = x;
    Eigen::VectorXd x_mis = Eigen::VectorXd::Constant(300, 5.4);
    PmmParams params;
    params.k = 3;
    params.match_type = 0; // keep predictions deterministic
    RngStream rng(10);
    const Eigen::VectorXd imp =
        impute_pmm(y, with_intercept(x), with_intercept(x_mis), params, rng);
    std::set<double> seen(imp.data(), imp.data() + imp.size());
    CHECK(seen == std::set<double>{4.0, 5.0, 6.0});
}

TEST_CASE("pmm donor pool cannot exceed the observed rows") {
    Eigen::VectorXd x = linspace(1.0, 4.0, 4);
    Eigen::VectorXd y = x;
    PmmParams params;
    params.k = 9;
    RngStream rng(1);
    CHECK_THROWS_AS(impute_pmm(y, with_intercept(x), with_intercept(x), params, rng),
                    ComputeError);
    params.k = 0;
    CHECK_THROWS_AS(impute_pmm(y, with_intercept(x), with_intercept(x), params, rng),
                    ConfigError);
}

TEST_CASE("regression tree finds the midpoint split") {
    Eigen::VectorXd x(4), y(4);
    x << 1, 2, 3, 4;
    y << 1, 1, 10, 10;
    CartParams params;
    params.min_leaf = 1;
    const CartTree tree = fit_cart(y, 0, single_column(x), params);
    REQUIRE(tree.nodes().size() == 3);
    CHECK(tree.nodes()[0].column == 0);
    CHECK(tree.nodes()[0].threshold == 2.5);
    CHECK(tree.depth() == 2);

    Eigen::VectorXd probe(2);
    probe << 0.0, 9.0;
    RngStream rng(4);
    const Eigen::VectorXd imp = impute_cart(tree, y, single_column(probe), rng);
    CHECK(imp[0] == 1.0);
    CHECK(imp[1] == 10.0);
}

TEST_CASE("min_leaf can forbid any split") {
    Eigen::VectorXd x(4), y(4);
    x << 1, 2, 3, 4;
    y << 1, 1, 10, 10;
    CartParams params;
    params.min_leaf = 3;
    const CartTree tree = fit_cart(y, 0, single_column(x), params);
    CHECK(tree.nodes().size() == 1);
    CHECK(tree.depth() == 1);
    RngStream rng(4);
    Eigen::VectorXd probe(1);
    probe << 2.0;
    const Eigen::VectorXd imp = impute_cart(tree, y, single_column(probe), rng);
    CHECK((imp[0] == 1.0 || imp[0] == 10.0));
}

TEST_CASE("classification tree splits factor levels by subset") {
    // y is 1 exactly on level 1 of a three-level native factor.
    Eigen::VectorXd g(6), y(6);
    g << 0, 1, 2, 0, 1, 2;
    y << 0, 1, 0, 0, 1, 0;
    CartParams params;
    params.min_leaf = 1;
    const CartTree tree = fit_cart(y, 2, single_column(g, 3), params);
    REQUIRE(tree.nodes().size() >= 3);
    CHECK(tree.nodes()[0].level_mask != 0);

    Eigen::VectorXd probe(3);
    probe << 0, 1, 2;
    RngStream rng(8);
    const Eigen::VectorXd imp = impute_cart(tree, y, single_column(probe, 3), rng);
    CHECK(imp[0] == 0.0);
    CHECK(imp[1] == 1.0);
    CHECK(imp[2] == 0.0);
}

TEST_CASE("cart imputations always come from the training targets") {
    const Eigen::Index n = 150;
    RngStream data_rng(21);
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = data_rng.normal();
        y[i] = std::sin(x[i]) + 0.1 * data_rng.normal();
    }
    const CartTree tree = fit_cart(y, 0, single_column(x), {});
    const Eigen::VectorXd probe = linspace(-3, 3, 80);
    RngStream rng(22);
    const Eigen::VectorXd imp = impute_cart(tree, y, single_column(probe), rng);
    std::set<double> observed(y.data(), y.data() + y.size());
    for (Eigen::Index i = 0; i < imp.size(); ++i)
        CHECK(observed.count(imp[i]) == 1);
}

TEST_CASE("logistic imputation tracks the class probabilities") {
    const Eigen::Index n = 3000;
    RngStream data_rng(31);
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = data_rng.normal();
        const double p = 1.0 / (1.0 + std::exp(0.5 - 1.2 * x[i]));
        y[i] = data_rng.bernoulli(p) ? 1.0 : 0.0;
    }
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(400, -2.0);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(400, 2.0);
    RngStream rng(32);
    const Eigen::VectorXd imp_lo =
        impute_logistic(y, with_intercept(x), with_intercept(lo), {}, rng);
    const Eigen::VectorXd imp_hi =
        impute_logistic(y, with_intercept(x), with_intercept(hi), {}, rng);
    for (Eigen::Index i = 0; i < imp_lo.size(); ++i)
        CHECK((imp_lo[i] == 0.0 || imp_lo[i] == 1.0));
    // True p at x = -2: 0.053; at x = +2: 0.87.
    CHECK(imp_lo.mean() < 0.2);
    CHECK(imp_hi.mean() > 0.7);
}

TEST_CASE("logistic refuses a single observed class") {
    const Eigen::VectorXd x = linspace(0, 1, 20);
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(20);
    RngStream rng(1);
    CHECK_THROWS_AS(impute_logistic(y, with_intercept(x), with_intercept(x), {}, rng),
                    ComputeError);
}

TEST_CASE("polytomous imputation recovers dominant classes") {
    const Eigen::Index n = 900;
    Eigen::VectorXd x(n), y(n);
    RngStream data_rng(41);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = 6.0 * data_rng.uniform01() - 3.0;
        y[i] = x[i] < -1.0 ? 0.0 : (x[i] <= 1.0 ? 1.0 : 2.0);
    }
    const Eigen::VectorXd probe_lo = Eigen::VectorXd::Constant(200, -2.6);
    const Eigen::VectorXd probe_hi = Eigen::VectorXd::Constant(200, 2.6);
    RngStream rng(42);
    const Eigen::VectorXd imp_lo = impute_polytomous(y, 3, with_intercept(x),
                                                     with_intercept(probe_lo), {}, rng);
    const Eigen::VectorXd imp_hi = impute_polytomous(y, 3, with_intercept(x),
                                                     with_intercept(probe_hi), {}, rng);
    auto share = [](const Eigen::VectorXd& v, double cls) {
        double c = 0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            CHECK((v[i] == 0.0 || v[i] == 1.0 || v[i] == 2.0));
            if (v[i] == cls) ++c;
        }
        return c / static_cast<double>(v.size());
    };
    CHECK(share(imp_lo, 0.0) > 0.8);
    CHECK(share(imp_hi, 2.0) > 0.8);
}

TEST_CASE("polytomous requires at least two classes") {
    const Eigen::VectorXd x = linspace(0, 1, 20);
    const Eigen::VectorXd y = Eigen::VectorXd::Ones(20);
    RngStream rng(1);
    CHECK_THROWS_AS(
        impute_polytomous(y, 3, with_intercept(x), with_intercept(x), {}, rng),
        ComputeError);
}

TEST_CASE("imputers are deterministic given the stream state") {
    const Eigen::VectorXd x = linspace(-2, 2, 60);
    Eigen::VectorXd y(60);
    RngStream data_rng(51);
    for (Eigen::Index i = 0; i < 60; ++i) y[i] = x[i] + 0.2 * data_rng.normal();
    const Eigen::VectorXd probe = linspace(-1, 1, 9);
    RngStream r1(99), r2(99);
    const Eigen::VectorXd a =
        impute_pmm(y, with_intercept(x), with_intercept(probe), {}, r1);
    const Eigen::VectorXd b =
        impute_pmm(y, with_intercept(x), with_intercept(probe), {}, r2);
    CHECK(a == b);
}

} // TEST_SUITE
