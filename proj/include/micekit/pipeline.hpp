#pragma once

#include "micekit/config.hpp"

#include <iosfwd>
#include <string>

namespace micekit {

/// Pipeline commands. Each writes its artifacts under the configured
/// output directory and returns a process exit code (0 on success,
/// 5 from diagnose in strict mode with flags raised); error conditions
/// throw and the CLI maps them to exit codes 2/3/4.
///
/// Output filenames:
///   simulate: complete.csv, masked.csv, truth.csv, missingness.csv
///   impute:   completed_<k>.csv (k = 1..m), provenance.csv, trace.csv
///   diagnose: marginal.csv, flags.csv, flags_summary.txt,
///             conditional.csv + range_counts.csv (when grouping is
///             configured), strip_<variable>[_by_<group>].{csv,svg}
///   analyze:  pooled_cox.csv, complete_case_cox.csv, hazard_ratios.csv,
///             survival.csv (when profiles and horizons are configured)
int run_simulate(const RunConfig& cfg, std::ostream& out);
int run_impute(const RunConfig& cfg, std::ostream& out);
int run_diagnose(const RunConfig& cfg, std::ostream& out);
int run_analyze(const RunConfig& cfg, std::ostream& out);

/// The provenance sidecar: one (row, variable) line per imputed cell.
void write_provenance(const Dataset& ds, std::ostream& out, char delimiter = ',');

/// Load completed_<k>.csv files plus the provenance sidecar back into a
/// CompletedDatasets whose mask must agree with the masked input table.
CompletedDatasets load_completed(const RunConfig& cfg, const Dataset& masked);

} // namespace micekit
