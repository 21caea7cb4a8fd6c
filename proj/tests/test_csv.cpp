#include "micekit/csv.hpp"
#include "micekit/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <sstream>

using namespace micekit;

namespace {

TableSchema two_col_schema() {
    return {{"x", ColumnKind::continuous()},
            {"g", ColumnKind::categorical({"a", "b", "c"})}};
}

} // namespace

TEST_SUITE("csv") {

TEST_CASE("split and join honour quoting rules") {
    CHECK(csv_split("a,b,,d", ',') == std::vector<std::string>{"a", "b", "", "d"});
    CHECK(csv_split("\"x,y\",z", ',') == std::vector<std::string>{"x,y", "z"});
    CHECK(csv_split("\"he said \"\"hi\"\"\",2", ',') ==
          std::vector<std::string>{"he said \"hi\"", "2"});
    CHECK(csv_join({"x,y", "plain", "qu\"ote"}, ',') ==
          "\"x,y\",plain,\"qu\"\"ote\"");
    const auto round = csv_split(csv_join({"a,b", "c\"d", "e"}, ','), ',');
    CHECK(round == std::vector<std::string>{"a,b", "c\"d", "e"});
}

TEST_CASE("load_table reads typed columns in schema order") {
    std::istringstream in("g,x,extra\na,1.5,9\nb,,9\nNA,2.25,9\n");
    const Dataset ds = load_table(in, two_col_schema());
    CHECK(ds.n_rows() == 3);
    CHECK(ds.n_cols() == 2);
    CHECK(ds.name(0) == "x");
    CHECK(ds.name(1) == "g");
    CHECK(ds.value(0, 0) == 1.5);
    CHECK_FALSE(ds.observed(1, 0)); // empty field
    CHECK_FALSE(ds.observed(2, 1)); // NA token
    CHECK(ds.label(0, 1) == "a");
    CHECK(ds.value(1, 1) == 1.0); // level code of "b"
}

TEST_CASE("load_table rejects malformed input") {
    std::istringstream empty("");
    CHECK_THROWS_AS(load_table(empty, two_col_schema()), ParseError);

    std::istringstream missing_col("x,y\n1,2\n");
    CHECK_THROWS_AS(load_table(missing_col, two_col_schema()), ParseError);

    std::istringstream dup("x,x,g\n1,2,a\n");
    CHECK_THROWS_AS(load_table(dup, two_col_schema()), ParseError);

    std::istringstream bad_level("x,g\n1,zebra\n");
    CHECK_THROWS_AS(load_table(bad_level, two_col_schema()), ParseError);

    std::istringstream bad_num("x,g\npotato,a\n");
    CHECK_THROWS_AS(load_table(bad_num, two_col_schema()), ParseError);

    std::istringstream ragged("x,g\n1,a,9,9\n");
    CHECK_THROWS_AS(load_table(ragged, two_col_schema()), ParseError);
}

TEST_CASE("crlf line endings and a missing final newline both load") {
    std::istringstream in("x,g\r\n1,a\r\n2,b");
    const Dataset ds = load_table(in, two_col_schema());
    CHECK(ds.n_rows() == 2);
    CHECK(ds.value(1, 0) == 2.0);
}

TEST_CASE("write then load reproduces the dataset bit for bit") {
    Dataset ds = testutil::make_continuous({"x", "y"},
                                           {{0.1, 2.0 / 3.0, 1e-9, -0.0},
                                            {1e15, 2.5, -7.25, 3.0}},
                                           {{1, 1}, {3, 0}});
    std::ostringstream out;
    write_table(ds, out);
    std::istringstream in(out.str());
    const Dataset back = load_table(
        in, {{"x", ColumnKind::continuous()}, {"y", ColumnKind::continuous()}});
    CHECK(back.equals(ds));

    // And the byte stream itself is stable across a rewrite.
    std::ostringstream again;
    write_table(back, again);
    CHECK(again.str() == out.str());
}

TEST_CASE("missing cells serialize as the canonical token") {
    Dataset ds = testutil::make_continuous({"x"}, {{1.0, 2.0}}, {{0, 0}});
    std::ostringstream out;
    write_table(ds, out);
    CHECK(out.str() == "x\nNA\n2\n");
}

TEST_CASE("alternate delimiter applies to both directions") {
    CsvOptions opts;
    opts.delimiter = ';';
    std::istringstream in("x;g\n1;a\n");
    const Dataset ds = load_table(in, two_col_schema(), opts);
    CHECK(ds.value(0, 0) == 1.0);
    std::ostringstream out;
    write_table(ds, out, opts);
    CHECK(out.str() == "x;g\n1;a\n");
}

TEST_CASE("file io reports open failures") {
    CHECK_THROWS_AS(load_table_file("/nonexistent/nope.csv", two_col_schema()),
                    IoError);
    Dataset ds = testutil::make_continuous({"x"}, {{1.0}});
    CHECK_THROWS_AS(write_table_file(ds, "/nonexistent/dir/out.csv"), IoError);
}

} // TEST_SUITE
