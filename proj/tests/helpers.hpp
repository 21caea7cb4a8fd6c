#pragma once

#include "micekit/dataset.hpp"
#include "micekit/mice.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testutil {

/// Continuous-only dataset from column vectors; cells listed in `missing`
/// (pairs of row, column) are masked after filling.
inline micekit::Dataset make_continuous(
    const std::vector<std::string>& names,
    const std::vector<std::vector<double>>& cols,
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& missing = {}) {
    std::vector<micekit::ColumnKind> kinds(names.size(),
                                           micekit::ColumnKind::continuous());
    const auto n = static_cast<Eigen::Index>(cols.at(0).size());
    micekit::Dataset ds(names, kinds, n);
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            ds.set(i, static_cast<Eigen::Index>(j), cols[j][static_cast<std::size_t>(i)]);
    for (const auto& [i, j] : missing) ds.set_missing(i, j);
    return ds;
}

/// Completed-datasets fixture: `masked` supplies the mask and observed
/// values; each entry of `fills` maps (row, column) to an imputed value
/// and becomes one completed dataset.
inline micekit::CompletedDatasets make_completed(
    const micekit::Dataset& masked,
    const std::vector<std::vector<std::pair<std::pair<Eigen::Index, Eigen::Index>, double>>>&
        fills) {
    micekit::CompletedDatasets cd;
    cd.observed_mask = masked.mask();
    for (const auto& fill : fills) {
        micekit::Dataset d = masked;
        for (const auto& [cell, v] : fill) d.set(cell.first, cell.second, v);
        cd.completed.push_back(std::move(d));
    }
    return cd;
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
    const auto p = std::filesystem::temp_directory_path() / ("micekit_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Run the installed CLI; returns the exit code, optionally capturing
/// combined stdout/stderr.
inline int run_cli(const std::string& args, const std::filesystem::path& capture_dir,
                   std::string* output = nullptr) {
    const auto cap = capture_dir / "cli_capture.txt";
    const std::string cmd =
        std::string(MICEKIT_CLI_PATH) + " " + args + " > " + cap.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = slurp(cap);
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

} // namespace testutil
