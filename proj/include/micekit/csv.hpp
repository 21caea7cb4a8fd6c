#pragma once

#include "micekit/dataset.hpp"

#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace micekit {

struct CsvOptions {
    char delimiter = ',';
    std::set<std::string> missing_tokens = {"", "NA"};
    std::string missing_token_out = "NA"; // canonical token on write
};

using TableSchema = std::vector<std::pair<std::string, ColumnKind>>;

/// Read delimiter-separated text with a header row. Schema names must be
/// a subset of the header; column order in the result follows the schema.
Dataset load_table(std::istream& in, const TableSchema& schema,
                   const CsvOptions& opts = {});

Dataset load_table_file(const std::string& path, const TableSchema& schema,
                        const CsvOptions& opts = {});

/// Write the table back out. Continuous cells are formatted with the
/// shortest round-trip representation, so load(write(ds)) == ds bit for
/// bit.
void write_table(const Dataset& ds, std::ostream& out, const CsvOptions& opts = {});

void write_table_file(const Dataset& ds, const std::string& path,
                      const CsvOptions& opts = {});

/// One line of delimiter-separated text, with quoting when a field
/// contains the delimiter, a quote, or a newline.
std::string csv_join(const std::vector<std::string>& fields, char delimiter);

std::vector<std::string> csv_split(const std::string& line, char delimiter);

std::string format_double(double v);

/// Strict full-string number parse; throws ParseError otherwise.
double parse_double(const std::string& text);

} // namespace micekit
