#pragma once

#include "micekit/csv.hpp"
#include "micekit/diagnostics.hpp"
#include "micekit/inference.hpp"
#include "micekit/mice.hpp"
#include "micekit/synthgen.hpp"

#include <optional>
#include <string>
#include <vector>

namespace micekit {

/// mice section of a run configuration: everything needed to build a
/// MiceConfig once an input table is bound.
struct MiceSection {
    int m = 10;
    int cycles = 20;
    std::uint64_t seed = 0;
    Preset preset = Preset::DefaultPmm;
    MethodMap method_overrides;
    std::map<std::string, std::vector<std::string>> predictor_overrides;
    std::vector<std::vector<std::string>> sequential_blocks;
    std::vector<std::string> visit_sequence; // empty = ascending missingness
    std::string stratify_by;                 // empty = unstratified
    bool merge_small_groups = false;
};

enum class PlotFormat { Tabular, Svg, Both };

struct StripPlotConfig {
    std::string variable;
    std::string group_column;
    double jitter = 0.18;
    std::uint64_t seed = 0;
};

struct DiagnosticsSection {
    std::string group_column; // empty = marginal report only
    std::vector<ClinicalRange> ranges;
    DiagnosticParams params;
    std::vector<StripPlotConfig> strip_plots;
    PlotFormat plot_format = PlotFormat::Both;
    bool strict = false;
};

struct AnalysisSection {
    std::string time_column;
    std::string event_column;
    std::vector<std::string> covariates;
    double level = 0.95;
    std::vector<Profile> profiles;
    std::vector<double> horizons;
};

struct RunConfig {
    int schema_version = 1;
    std::string input_path;
    std::string output_dir = ".";
    char delimiter = ',';
    TableSchema schema; // the columns section
    MiceSection mice;
    std::optional<DiagnosticsSection> diagnostics;
    std::optional<AnalysisSection> analysis;
    std::optional<SynthConfig> synth;
    std::optional<Mechanism> mechanism;
};

/// Parse the JSON run configuration. Unknown keys are errors, so typos
/// surface instead of silently reverting to defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Resolve the mice section against a bound dataset: preset defaults,
/// then per-variable method overrides, predictor rewires, sequential
/// blocks, and the explicit visit sequence when given.
MiceConfig build_mice_config(const Dataset& ds, const MiceSection& section);

} // namespace micekit
