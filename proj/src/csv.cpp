#include "micekit/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace micekit {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> csv_split(const std::string& line, char delimiter) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == delimiter) {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string csv_join(const std::vector<std::string>& fields, char delimiter) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(delimiter);
        const std::string& f = fields[i];
        const bool needs_quote = f.find(delimiter) != std::string::npos ||
                                 f.find('"') != std::string::npos ||
                                 f.find('\n') != std::string::npos;
        if (!needs_quote) {
            out += f;
            continue;
        }
        out.push_back('"');
        for (char c : f) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
        }
        out.push_back('"');
    }
    return out;
}

namespace {

bool parse_number(const std::string& text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

} // namespace

double parse_double(const std::string& text) {
    double v = 0.0;
    if (!parse_number(text, v))
        throw ParseError("cannot parse '" + text + "' as a number");
    return v;
}

Dataset load_table(std::istream& in, const TableSchema& schema,
                   const CsvOptions& opts) {
    std::string line;
    if (!read_line(in, line)) throw ParseError("empty input: no header row");
    const auto header = csv_split(line, opts.delimiter);
    {
        std::set<std::string> seen;
        for (const auto& h : header)
            if (!seen.insert(h).second)
                throw ParseError("duplicate column name '" + h + "' in header");
    }

    std::vector<std::string> names;
    std::vector<ColumnKind> kinds;
    std::vector<std::size_t> positions;
    for (const auto& [name, kind] : schema) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ParseError("schema column '" + name + "' not found in header");
        positions.push_back(static_cast<std::size_t>(it - header.begin()));
        names.push_back(name);
        kinds.push_back(kind);
    }

    std::vector<std::vector<std::string>> rows;
    while (read_line(in, line)) {
        if (line.empty() && in.peek() == EOF) break; // trailing newline
        auto fields = csv_split(line, opts.delimiter);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(rows.size() + 1) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(header.size()));
        rows.push_back(std::move(fields));
    }

    Dataset ds(names, kinds, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < positions.size(); ++c) {
            const std::string& cell = rows[r][positions[c]];
            if (opts.missing_tokens.count(cell)) continue; // stays missing
            const auto i = static_cast<Eigen::Index>(r);
            const auto j = static_cast<Eigen::Index>(c);
            const ColumnKind& kind = kinds[c];
            if (kind.is_continuous()) {
                double v;
                if (!parse_number(cell, v))
                    throw ParseError("row " + std::to_string(r + 1) + ", column '" +
                                     names[c] + "': cannot parse '" + cell +
                                     "' as a number");
                ds.set(i, j, v);
            } else {
                const int code = kind.level_index(cell);
                if (code < 0)
                    throw ParseError("row " + std::to_string(r + 1) + ", column '" +
                                     names[c] + "': unknown level '" + cell + "'");
                ds.set(i, j, static_cast<double>(code));
            }
        }
    }
    return ds;
}

Dataset load_table_file(const std::string& path, const TableSchema& schema,
                        const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return load_table(in, schema, opts);
}

void write_table(const Dataset& ds, std::ostream& out, const CsvOptions& opts) {
    out << csv_join(ds.names(), opts.delimiter) << '\n';
    std::vector<std::string> fields(static_cast<std::size_t>(ds.n_cols()));
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
            auto& f = fields[static_cast<std::size_t>(j)];
            if (!ds.observed(i, j)) {
                f = opts.missing_token_out;
            } else if (ds.kind(j).is_factor()) {
                f = ds.kind(j).levels[static_cast<std::size_t>(ds.value(i, j))];
            } else {
                f = format_double(ds.value(i, j));
            }
        }
        out << csv_join(fields, opts.delimiter) << '\n';
    }
    if (!out) throw IoError("write failure while emitting table");
}

void write_table_file(const Dataset& ds, const std::string& path,
                      const CsvOptions& opts) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_table(ds, out, opts);
}

} // namespace micekit
