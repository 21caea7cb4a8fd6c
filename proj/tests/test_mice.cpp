#include "micekit/mice.hpp"
#include "micekit/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <set>
#include <sstream>
#include <string>

using namespace micekit;

namespace {

/// Two balanced groups with distinct y scales so cross-group leakage is
/// visible: group 0 has y in [0, 1], group 1 has y in [100, 101].
Dataset grouped_fixture(Eigen::Index per_group, int missing_per_group) {
    const Eigen::Index n = 2 * per_group;
    Dataset ds({"g", "x", "y"},
               {ColumnKind::binary({"a", "b"}), ColumnKind::continuous(),
                ColumnKind::continuous()},
               n);
    RngStream rng(404);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g = i < per_group ? 0.0 : 1.0;
        ds.set(i, 0, g);
        ds.set(i, 1, rng.uniform01() * 2.0 - 1.0);
        ds.set(i, 2, g * 100.0 + rng.uniform01());
    }
    for (int k = 0; k < missing_per_group; ++k) {
        ds.set_missing(k, 2);
        ds.set_missing(per_group + k, 2);
    }
    return ds;
}

bool all_cells_observed(const Dataset& ds) {
    return ds.mask().all();
}

} // namespace

TEST_SUITE("mice") {

TEST_CASE("predictor matrix edits rows and columns") {
    PredictorMatrix pm = PredictorMatrix::all_others({"a", "b", "c"});
    CHECK(pm.uses(0, 1));
    CHECK_FALSE(pm.uses(0, 0)); // structural zero diagonal
    CHECK_THROWS_AS(pm.set("a", "a", true), ConfigError);
    CHECK_THROWS_AS(pm.set("a", "zzz", true), ConfigError);

    pm.set("a", "b", false);
    CHECK_FALSE(pm.uses(0, 1));
    CHECK(pm.predictors_of(0) == std::vector<int>{2});

    pm.clear_row("c");
    CHECK(pm.row_is_zero(2));
    CHECK(pm.uses(1, 2)); // clearing a row leaves the column alone

    pm.clear_variable("c");
    CHECK_FALSE(pm.uses(1, 2));

    pm.fill_row("c");
    CHECK(pm.predictors_of(2) == std::vector<int>{0, 1});
}

TEST_CASE("sequential block rewires exactly the ordered prefix") {
    PredictorMatrix base = PredictorMatrix::all_others({"ldl", "hdl", "tc", "age"});
    const PredictorMatrix pm = sequential_block({"ldl", "hdl", "tc"}, base);
    const auto i = [&](const char* v) { return pm.index_of(v); };
    // First block member conditions on neither of the later two.
    CHECK_FALSE(pm.uses(i("ldl"), i("hdl")));
    CHECK_FALSE(pm.uses(i("ldl"), i("tc")));
    // Middle member sees only the one before it.
    CHECK(pm.uses(i("hdl"), i("ldl")));
    CHECK_FALSE(pm.uses(i("hdl"), i("tc")));
    // Last member sees both earlier ones.
    CHECK(pm.uses(i("tc"), i("ldl")));
    CHECK(pm.uses(i("tc"), i("hdl")));
    // Variables outside the block are untouched in both directions.
    CHECK(pm.uses(i("ldl"), i("age")));
    CHECK(pm.uses(i("age"), i("tc")));

    CHECK(sequential_block({"ldl", "hdl", "tc"}, pm) == pm); // idempotent
    CHECK_THROWS_AS(sequential_block({"ldl", "ldl"}, pm), ConfigError);
    CHECK_THROWS_AS(sequential_block({"nope"}, pm), ConfigError);
}

TEST_CASE("default config assigns methods by column kind") {
    Dataset ds({"c", "b", "k"},
               {ColumnKind::continuous(), ColumnKind::binary({"0", "1"}),
                ColumnKind::categorical({"x", "y", "z"})},
               30);
    RngStream rng(1);
    for (Eigen::Index i = 0; i < 30; ++i) {
        ds.set(i, 0, rng.normal());
        ds.set(i, 1, static_cast<double>(i % 2));
        ds.set(i, 2, static_cast<double>(i % 3));
    }
    // Make all three imputable, with distinct missingness counts: k < b < c.
    ds.set_missing(0, 2);
    ds.set_missing(1, 1);
    ds.set_missing(2, 1);
    for (Eigen::Index i = 3; i < 6; ++i) ds.set_missing(i, 0);

    const MiceConfig pmm = default_mice_config(ds, Preset::DefaultPmm);
    CHECK(pmm.methods.at("c").method == Method::Pmm);
    CHECK(pmm.methods.at("b").method == Method::Logistic);
    CHECK(pmm.methods.at("k").method == Method::Polytomous);
    CHECK(pmm.visit_sequence == std::vector<std::string>{"k", "b", "c"});

    const MiceConfig norm = default_mice_config(ds, Preset::Norm);
    CHECK(norm.methods.at("c").method == Method::Norm);
    CHECK(norm.methods.at("b").method == Method::Logistic);

    const MiceConfig cart = default_mice_config(ds, Preset::Cart);
    CHECK(cart.methods.at("c").method == Method::Cart);
    CHECK(cart.methods.at("b").method == Method::Cart);
    CHECK(cart.methods.at("k").method == Method::Cart);
}

TEST_CASE("method names round-trip") {
    for (Method m : {Method::None, Method::Norm, Method::Pmm, Method::Cart,
                     Method::Logistic, Method::Polytomous})
        CHECK(method_from_name(method_name(m)) == m);
    CHECK_THROWS_AS(method_from_name("gradient-boost"), ConfigError);
}

TEST_CASE("initialization fills from observed donors only") {
    Dataset ds = grouped_fixture(20, 6);
    MiceConfig cfg = default_mice_config(ds);
    RngStream rng(7);
    const Dataset init = initialize_chain(ds, cfg, rng);
    CHECK(all_cells_observed(init));
    std::set<double> donors;
    for (Eigen::Index i : ds.observed_rows(2)) donors.insert(ds.value(i, 2));
    for (Eigen::Index i : ds.missing_rows(2))
        CHECK(donors.count(init.value(i, 2)) == 1);
    // Observed cells are untouched.
    for (Eigen::Index i : ds.observed_rows(2))
        CHECK(init.value(i, 2) == ds.value(i, 2));
}

TEST_CASE("initialization needs at least one observed donor") {
    Dataset ds = testutil::make_continuous({"x", "y"}, {{1, 2, 3}, {0, 0, 0}},
                                           {{0, 1}, {1, 1}, {2, 1}});
    MiceConfig cfg = default_mice_config(ds);
    RngStream rng(1);
    CHECK_THROWS_AS(initialize_chain(ds, cfg, rng), ComputeError);
}

TEST_CASE("run_mice validates its configuration") {
    Dataset ds = grouped_fixture(15, 4);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 1;
    cfg.cycles = 2;

    MiceConfig bad = cfg;
    bad.m = 0;
    CHECK_THROWS_AS(run_mice(ds, bad), ConfigError);

    bad = cfg;
    bad.cycles = 0;
    CHECK_THROWS_AS(run_mice(ds, bad), ConfigError);

    bad = cfg;
    bad.visit_sequence = {"y", "y"};
    CHECK_THROWS_AS(run_mice(ds, bad), ConfigError);

    bad = cfg;
    bad.visit_sequence = {"x"}; // x has no missing cells, y does
    CHECK_THROWS_AS(run_mice(ds, bad), ConfigError);

    bad = cfg;
    bad.methods["y"].method = Method::None; // y needs imputing
    CHECK_THROWS_AS(run_mice(ds, bad), ConfigError);

    bad = cfg;
    bad.methods["y"].method = Method::Logistic; // continuous target
    CHECK_THROWS_AS(run_mice(ds, bad), ConfigError);

    bad = cfg;
    bad.predictors.set("x", "y", true); // method 'none' rows must stay zero
    CHECK_THROWS_AS(run_mice(ds, bad), ConfigError);
}

TEST_CASE("completed datasets are fully observed and reproducible") {
    Dataset ds = grouped_fixture(25, 8);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 3;
    cfg.cycles = 4;
    cfg.seed = 2024;

    const CompletedDatasets a = run_mice(ds, cfg);
    const CompletedDatasets b = run_mice(ds, cfg);
    REQUIRE(a.m() == 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(all_cells_observed(a.completed[static_cast<std::size_t>(k)]));
        CHECK(a.completed[static_cast<std::size_t>(k)].equals(
            b.completed[static_cast<std::size_t>(k)]));
    }
    CHECK((a.observed_mask == ds.mask()).all());

    cfg.seed = 2025;
    const CompletedDatasets c = run_mice(ds, cfg);
    bool any_diff = false;
    for (int k = 0; k < 3 && !any_diff; ++k)
        any_diff = !a.completed[static_cast<std::size_t>(k)].equals(
            c.completed[static_cast<std::size_t>(k)]);
    CHECK(any_diff);
}

TEST_CASE("observed cells are never rewritten") {
    Dataset ds = grouped_fixture(25, 8);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 2;
    cfg.cycles = 3;
    const CompletedDatasets cd = run_mice(ds, cfg);
    for (const Dataset& done : cd.completed)
        for (Eigen::Index j = 0; j < ds.n_cols(); ++j)
            for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
                if (ds.observed(i, j)) CHECK(done.value(i, j) == ds.value(i, j));
}

TEST_CASE("pmm chains keep imputations inside the observed support") {
    Dataset ds = grouped_fixture(25, 8);
    MiceConfig cfg = default_mice_config(ds); // default preset is pmm
    cfg.m = 2;
    cfg.cycles = 3;
    const CompletedDatasets cd = run_mice(ds, cfg);
    std::set<double> donors;
    for (Eigen::Index i : ds.observed_rows(2)) donors.insert(ds.value(i, 2));
    for (const Dataset& done : cd.completed)
        for (Eigen::Index i : ds.missing_rows(2))
            CHECK(donors.count(done.value(i, 2)) == 1);
}

TEST_CASE("trace rows are 1-based and cover every chain, cycle, variable") {
    Dataset ds = grouped_fixture(20, 5);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 2;
    cfg.cycles = 3;
    const CompletedDatasets cd = run_mice(ds, cfg);
    CHECK(cd.trace.size() == 2u * 3u * 1u); // one variable carries missing cells
    std::set<std::pair<int, int>> seen;
    for (const TraceRow& r : cd.trace) {
        CHECK(r.variable == "y");
        CHECK(r.n_imputed == 10);
        CHECK(r.group.empty());
        CHECK(r.chain >= 1);
        CHECK(r.chain <= 2);
        CHECK(r.cycle >= 1);
        CHECK(r.cycle <= 3);
        seen.insert({r.chain, r.cycle});
        CHECK(r.sd.has_value());
    }
    CHECK(seen.size() == 6);

    std::ostringstream out;
    trace_to_csv(convergence_trace(cd), out);
    const std::string text = out.str();
    CHECK(text.rfind("chain,cycle,variable,group,n_imputed,mean,sd", 0) == 0);
}

TEST_CASE("errors name the chain, cycle, and variable") {
    // A binary variable observed in a single class makes the logistic
    // engine fail inside the chain.
    Dataset ds({"x", "y"}, {ColumnKind::continuous(), ColumnKind::binary({"n", "p"})},
               20);
    RngStream rng(3);
    for (Eigen::Index i = 0; i < 20; ++i) {
        ds.set(i, 0, rng.normal());
        ds.set(i, 1, 0.0);
    }
    ds.set_missing(4, 1);
    ds.set_missing(5, 1);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 1;
    cfg.cycles = 1;
    try {
        run_mice(ds, cfg);
        FAIL("expected a ComputeError");
    } catch (const ComputeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("chain 1") != std::string::npos);
        CHECK(msg.find("variable 'y'") != std::string::npos);
    }
}

TEST_CASE("stratified runs match per-group plain runs with the derived seed") {
    Dataset ds = grouped_fixture(30, 9);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 2;
    cfg.cycles = 3;
    cfg.seed = 99;

    StratifiedPlan plan;
    plan.group_column = "g";
    const CompletedDatasets strat = run_stratified(ds, plan, cfg);
    REQUIRE(strat.m() == 2);

    for (int code = 0; code < 2; ++code) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < ds.n_rows(); ++i)
            if (static_cast<int>(ds.value(i, 0)) == code) rows.push_back(i);
        const Dataset sub = ds.select_rows(rows);

        MiceConfig sub_cfg = cfg;
        sub_cfg.seed = stratified_group_seed(cfg.seed, code);
        sub_cfg.predictors = cfg.predictors;
        sub_cfg.predictors.clear_variable("g");
        const CompletedDatasets local = run_mice(sub, sub_cfg);

        for (int k = 0; k < cfg.m; ++k)
            for (std::size_t r = 0; r < rows.size(); ++r)
                CHECK(local.completed[static_cast<std::size_t>(k)].value(
                          static_cast<Eigen::Index>(r), 2) ==
                      strat.completed[static_cast<std::size_t>(k)].value(rows[r], 2));
    }
}

TEST_CASE("stratified imputations never leak donors across groups") {
    Dataset ds = grouped_fixture(30, 9);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 2;
    cfg.cycles = 3;
    StratifiedPlan plan;
    plan.group_column = "g";
    const CompletedDatasets cd = run_stratified(ds, plan, cfg);
    for (const Dataset& done : cd.completed)
        for (Eigen::Index i : ds.missing_rows(2)) {
            const double v = done.value(i, 2);
            if (ds.value(i, 0) == 0.0)
                CHECK(v < 50.0); // group-0 support is [0, 1]
            else
                CHECK(v > 50.0); // group-1 support is [100, 101]
        }
    // Trace rows carry the group label.
    bool saw_a = false, saw_b = false;
    for (const TraceRow& r : cd.trace) {
        saw_a = saw_a || r.group == "a";
        saw_b = saw_b || r.group == "b";
    }
    CHECK(saw_a);
    CHECK(saw_b);
}

TEST_CASE("stratification requires a fully observed factor column") {
    Dataset ds = grouped_fixture(10, 2);
    MiceConfig cfg = default_mice_config(ds);
    StratifiedPlan plan;
    plan.group_column = "x"; // continuous
    CHECK_THROWS_AS(run_stratified(ds, plan, cfg), ConfigError);

    plan.group_column = "y"; // has missing cells
    CHECK_THROWS_AS(run_stratified(ds, plan, cfg), ConfigError);
}

TEST_CASE("infeasible groups either fail loudly or merge on request") {
    // Group 'b' keeps only 4 observed y values: below the pmm donor pool
    // and the linear-model row minimum.
    Dataset ds({"g", "x", "y"},
               {ColumnKind::binary({"a", "b"}), ColumnKind::continuous(),
                ColumnKind::continuous()},
               36);
    RngStream rng(12);
    for (Eigen::Index i = 0; i < 36; ++i) {
        const double g = i < 30 ? 0.0 : 1.0;
        ds.set(i, 0, g);
        ds.set(i, 1, rng.normal());
        ds.set(i, 2, g * 10.0 + rng.uniform01());
    }
    for (Eigen::Index i = 0; i < 6; ++i) ds.set_missing(i, 2);  // group a
    ds.set_missing(34, 2);                                      // group b
    ds.set_missing(35, 2);

    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 1;
    cfg.cycles = 2;
    StratifiedPlan plan;
    plan.group_column = "g";

    try {
        run_stratified(ds, plan, cfg);
        FAIL("expected a ComputeError naming the thin group");
    } catch (const ComputeError& e) {
        CHECK(std::string(e.what()).find("group b") != std::string::npos);
    }

    plan.merge_small_groups = true;
    const CompletedDatasets cd = run_stratified(ds, plan, cfg);
    CHECK(all_cells_observed(cd.completed[0]));
}

TEST_CASE("per-group overrides swap methods inside one stratum") {
    Dataset ds = grouped_fixture(30, 9);
    MiceConfig cfg = default_mice_config(ds);
    cfg.m = 1;
    cfg.cycles = 2;
    StratifiedPlan plan;
    plan.group_column = "g";
    MethodSpec cart;
    cart.method = Method::Cart;
    plan.overrides["b"].methods["y"] = cart;
    const CompletedDatasets cd = run_stratified(ds, plan, cfg);
    CHECK(all_cells_observed(cd.completed[0]));
    // CART leaves sample observed values, so group-b support still holds.
    for (Eigen::Index i : ds.missing_rows(2))
        if (ds.value(i, 0) == 1.0) CHECK(cd.completed[0].value(i, 2) > 50.0);
}

} // TEST_SUITE
