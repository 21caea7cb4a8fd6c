#include <doctest.h>

#include "helpers.hpp"

#include <filesystem>
#include <string>

namespace fs = std::filesystem;
using testutil::run_cli;
using testutil::slurp;
using testutil::spit;

namespace {

std::string pipeline_config(const fs::path& dir) {
    const std::string out = (dir / "out").string();
    const std::string input = (dir / "out" / "masked.csv").string();
    return std::string(R"({
  "schema_version": 1,
  "paths": {"input": ")") +
           input + R"(", "output": ")" + out + R"("},
  "columns": [
    {"name": "g", "type": "binary", "levels": ["a", "b"]},
    {"name": "x", "type": "continuous"},
    {"name": "z", "type": "continuous"},
    {"name": "time", "type": "continuous"},
    {"name": "event", "type": "binary", "levels": ["0", "1"]}
  ],
  "mice": {"m": 2, "cycles": 2, "seed": 7},
  "diagnostics": {
    "group_column": "g",
    "ranges": [{"variable": "x", "lower": -10.0, "upper": 20.0, "concern": "both"}],
    "strip_plots": [{"variable": "x", "group_column": "g"}],
    "plot_format": "both"
  },
  "analysis": {
    "time": "time",
    "event": "event",
    "covariates": ["x", "z"],
    "profiles": [{"label": "typical", "values": {"x": 1.0, "z": 0.0}}],
    "horizons": [1.0, 2.0]
  },
  "synth": {
    "n_rows": 150,
    "seed": 21,
    "factors": [{"name": "g", "levels": ["a", "b"], "prevalence": [0.5, 0.5]}],
    "conditionals": [{"variable": "x", "group": "g", "distributions": [
      {"mean": 1.0, "sd": 0.5}, {"mean": 3.0, "sd": 0.5}]}],
    "continuous": [{"name": "z", "mean": 0.0, "sd": 1.0}],
    "survival": {"baseline_hazard": 0.15, "admin_censoring": 4.0,
                 "log_hr": {"x": 0.2}},
    "mechanism": {"seed": 3, "rules": [
      {"variables": ["x"], "rate": 0.35, "mar_weights": {}},
      {"variables": ["z"], "rate": 0.2, "mar_weights": {}}
    ]}
  }
})";
}

} // namespace

TEST_CASE("the four subcommands run a full pipeline") {
    const fs::path dir = testutil::fresh_dir("cli_pipeline");
    const fs::path config = dir / "run.json";
    spit(config, pipeline_config(dir));
    const fs::path out = dir / "out";
    std::string text;

    // simulate: cohort, mask, truth sidecar, missingness table.
    REQUIRE(run_cli("simulate " + config.string(), dir, &text) == 0);
    for (const char* f : {"complete.csv", "masked.csv", "truth.csv",
                          "missingness.csv"})
        CHECK(fs::exists(out / f));
    CHECK(text.find("variable,stratum,n_rows,n_missing,percent") !=
          std::string::npos);
    CHECK(text.find("overall") != std::string::npos);

    // impute: m completed tables plus provenance and trace sidecars.
    REQUIRE(run_cli("impute " + config.string(), dir, &text) == 0);
    for (const char* f :
         {"completed_1.csv", "completed_2.csv", "provenance.csv", "trace.csv"})
        CHECK(fs::exists(out / f));
    const std::string completed_once = slurp(out / "completed_1.csv");
    CHECK(completed_once.find("NA") == std::string::npos);
    CHECK(slurp(out / "trace.csv").rfind("chain,cycle,variable,group", 0) == 0);

    // Same config, same seed: byte-identical output.
    REQUIRE(run_cli("impute " + config.string(), dir, &text) == 0);
    CHECK(slurp(out / "completed_1.csv") == completed_once);

    // diagnose: marginal + conditional reports, flags, both plot formats.
    REQUIRE(run_cli("diagnose " + config.string(), dir, &text) == 0);
    for (const char* f : {"marginal.csv", "conditional.csv", "range_counts.csv",
                          "flags.csv", "flags_summary.txt", "strip_x_by_g.csv",
                          "strip_x_by_g.svg"})
        CHECK(fs::exists(out / f));
    CHECK(slurp(out / "strip_x_by_g.svg").rfind("<svg", 0) == 0);
    CHECK(slurp(out / "marginal.csv").rfind("variable,imputation,obs_n", 0) == 0);

    // analyze: pooled and complete-case hazard ratios, survival curves.
    REQUIRE(run_cli("analyze " + config.string(), dir, &text) == 0);
    for (const char* f : {"pooled_cox.csv", "complete_case_cox.csv",
                          "hazard_ratios.csv", "survival.csv"})
        CHECK(fs::exists(out / f));
    CHECK(slurp(out / "pooled_cox.csv")
              .rfind("estimand,hr,ci_low,ci_high,log_hr,se,w,b,t,df,fmi", 0) == 0);
    CHECK(slurp(out / "hazard_ratios.csv")
              .rfind("estimand,cc_hr,cc_low,cc_high,mi_hr,mi_low,mi_high", 0) == 0);
    CHECK(slurp(out / "survival.csv").rfind("profile,horizon,survival", 0) == 0);

    // A different engine produces different imputations.
    const fs::path out2 = dir / "out2";
    REQUIRE(run_cli("impute " + config.string() + " --output " + out2.string() +
                        " --method norm",
                    dir, &text) == 0);
    CHECK(slurp(out2 / "completed_1.csv") != completed_once);
    CHECK(slurp(out2 / "completed_1.csv") != "");

    // Seed overrides: equal seeds agree, different seeds do not.
    const fs::path out3 = dir / "out3";
    const fs::path out4 = dir / "out4";
    const fs::path out5 = dir / "out5";
    REQUIRE(run_cli("impute " + config.string() + " --output " + out3.string() +
                        " --seed 1234",
                    dir) == 0);
    REQUIRE(run_cli("impute " + config.string() + " --output " + out4.string() +
                        " --seed 1234",
                    dir) == 0);
    REQUIRE(run_cli("impute " + config.string() + " --output " + out5.string() +
                        " --seed 99",
                    dir) == 0);
    CHECK(slurp(out3 / "completed_1.csv") == slurp(out4 / "completed_1.csv"));
    CHECK(slurp(out3 / "completed_1.csv") != slurp(out5 / "completed_1.csv"));

    // Strict diagnostics with absurdly tight thresholds must flag and
    // exit with the review code.
    std::string strict = pipeline_config(dir);
    const std::string needle = "\"plot_format\": \"both\"";
    const auto pos = strict.find(needle);
    REQUIRE(pos != std::string::npos);
    strict.replace(pos, needle.size(),
                   "\"plot_format\": \"tabular\", \"strict\": true, "
                   "\"mean_shift_sds\": 1e-9, "
                   "\"variance_ratio_low\": 0.999999, "
                   "\"variance_ratio_high\": 1.000001");
    const fs::path strict_config = dir / "strict.json";
    spit(strict_config, strict);
    CHECK(run_cli("diagnose " + strict_config.string(), dir, &text) == 5);
    CHECK(text.find("flag") != std::string::npos);

    // Corrupted provenance sidecar: the mismatch is a hard error.
    const std::string prov = slurp(out / "provenance.csv");
    const auto cut = prov.rfind('\n', prov.size() - 2);
    REQUIRE(cut != std::string::npos);
    spit(out / "provenance.csv", prov.substr(0, cut + 1));
    CHECK(run_cli("diagnose " + config.string(), dir, &text) == 4);
    CHECK(text.find("provenance mismatch") != std::string::npos);
    spit(out / "provenance.csv", prov); // restore
}

TEST_CASE("simulate is deterministic under an explicit seed") {
    const fs::path dir = testutil::fresh_dir("cli_sim_seed");
    const fs::path config = dir / "run.json";
    spit(config, pipeline_config(dir));
    const fs::path out = dir / "out";

    REQUIRE(run_cli("simulate " + config.string() + " --seed 5", dir) == 0);
    const std::string masked_a = slurp(out / "masked.csv");
    REQUIRE(run_cli("simulate " + config.string() + " --seed 5", dir) == 0);
    CHECK(slurp(out / "masked.csv") == masked_a);
    REQUIRE(run_cli("simulate " + config.string() + " --seed 6", dir) == 0);
    CHECK(slurp(out / "masked.csv") != masked_a);
}

TEST_CASE("CLI exit codes distinguish failure classes") {
    const fs::path dir = testutil::fresh_dir("cli_exit");
    std::string text;

    SUBCASE("missing config file is an I/O error") {
        CHECK(run_cli("impute " + (dir / "absent.json").string(), dir, &text) == 3);
    }
    SUBCASE("invalid JSON is a config error") {
        const fs::path bad = dir / "bad.json";
        spit(bad, "{not json");
        CHECK(run_cli("impute " + bad.string(), dir, &text) == 2);
        CHECK(text.find("invalid JSON") != std::string::npos);
    }
    SUBCASE("unknown flag is a usage error") {
        const fs::path config = dir / "run.json";
        spit(config, pipeline_config(dir));
        CHECK(run_cli("impute " + config.string() + " --turbo", dir, &text) == 2);
    }
    SUBCASE("unknown subcommand is a usage error") {
        CHECK(run_cli("transmogrify", dir, &text) == 2);
    }
    SUBCASE("missing input table is an I/O error") {
        const fs::path config = dir / "run.json";
        spit(config, pipeline_config(dir)); // nothing simulated yet
        CHECK(run_cli("impute " + config.string(), dir, &text) == 3);
    }
    SUBCASE("diagnose before impute is an I/O error") {
        const fs::path config = dir / "run.json";
        spit(config, pipeline_config(dir));
        REQUIRE(run_cli("simulate " + config.string(), dir) == 0);
        CHECK(run_cli("diagnose " + config.string(), dir, &text) == 3);
    }
    SUBCASE("analyze needs an analysis section") {
        const fs::path config = dir / "minimal.json";
        spit(config, R"({"schema_version": 1})");
        CHECK(run_cli("analyze " + config.string(), dir, &text) == 2);
        CHECK(text.find("analysis section") != std::string::npos);
    }
    SUBCASE("unknown top-level key is a config error") {
        const fs::path config = dir / "typo.json";
        spit(config, R"({"schema_version": 1, "analyses": {}})");
        CHECK(run_cli("impute " + config.string(), dir, &text) == 2);
        CHECK(text.find("unknown key") != std::string::npos);
    }
    SUBCASE("version and help succeed") {
        CHECK(run_cli("--version", dir, &text) == 0);
        CHECK(text.find("micekit") != std::string::npos);
        CHECK(run_cli("--help", dir, &text) == 0);
        CHECK(text.find("impute") != std::string::npos);
    }
}
