#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/io.hpp"
#include "fieldattr/series.hpp"
#include "helpers.hpp"

using namespace fieldattr;

TEST(Series, CheckRejectsBadInput) {
    ObservableSeries s;
    s.dates = {"2020-01-02", "2020-01-03"};
    s.values = {1.0, 2.0};
    EXPECT_NO_THROW(check_series(s));

    ObservableSeries unsorted = s;
    std::swap(unsorted.dates[0], unsorted.dates[1]);
    EXPECT_THROW(check_series(unsorted), std::runtime_error);

    ObservableSeries dup = s;
    dup.dates[1] = dup.dates[0];
    EXPECT_THROW(check_series(dup), std::runtime_error);

    ObservableSeries nan = s;
    nan.values[1] = std::nan("");
    EXPECT_THROW(check_series(nan), std::runtime_error);

    ObservableSeries ragged = s;
    ragged.values.pop_back();
    EXPECT_THROW(check_series(ragged), std::runtime_error);
}

TEST(Series, AlignIntersectsDates) {
    ObservableSeries a, b;
    a.dates = {"2020-01-02", "2020-01-03", "2020-01-06", "2020-01-07"};
    a.values = {1.0, 2.0, 3.0, 4.0};
    b.dates = {"2020-01-03", "2020-01-06", "2020-01-08"};
    b.values = {20.0, 30.0, 50.0};
    AlignedPair p = align(a, b);
    ASSERT_EQ(p.dates, (std::vector<std::string>{"2020-01-03", "2020-01-06"}));
    EXPECT_EQ(p.x, (std::vector<double>{2.0, 3.0}));
    EXPECT_EQ(p.y, (std::vector<double>{20.0, 30.0}));
}

TEST(Series, AlignDisjointCalendarsThrow) {
    ObservableSeries a, b;
    a.dates = {"2020-01-02"};
    a.values = {1.0};
    b.dates = {"2020-01-03"};
    b.values = {2.0};
    EXPECT_THROW(align(a, b), std::runtime_error);
}

TEST(Series, AlignManyThreeWay) {
    ObservableSeries a, b, c;
    a.dates = {"d1", "d2", "d3", "d4"};
    a.values = {1, 2, 3, 4};
    b.dates = {"d2", "d3", "d4"};
    b.values = {20, 30, 40};
    c.dates = {"d1", "d2", "d4"};
    c.values = {100, 200, 400};
    auto out = align_many({&a, &b, &c});
    ASSERT_EQ(out.size(), 3u);
    for (const auto& s : out)
        ASSERT_EQ(s.dates, (std::vector<std::string>{"d2", "d4"}));
    EXPECT_EQ(out[0].values, (std::vector<double>{2, 4}));
    EXPECT_EQ(out[1].values, (std::vector<double>{20, 40}));
    EXPECT_EQ(out[2].values, (std::vector<double>{200, 400}));
}

TEST(Series, SubSeriesHalfOpen) {
    auto s = tst::make_series({10, 11, 12, 13, 14});
    auto t = sub_series(s, 1, 4);
    EXPECT_EQ(t.values, (std::vector<double>{11, 12, 13}));
    EXPECT_EQ(t.dates.front(), s.dates[1]);
    EXPECT_EQ(t.dates.back(), s.dates[3]);
}

TEST(Series, LogSeries) {
    auto s = tst::make_series({1.0, std::exp(1.0), 10.0});
    auto t = log_series(s, "log_x");
    EXPECT_DOUBLE_EQ(t.values[0], 0.0);
    EXPECT_DOUBLE_EQ(t.values[1], 1.0);
    EXPECT_DOUBLE_EQ(t.values[2], std::log(10.0));
    EXPECT_EQ(t.label, "log_x");
    auto bad = tst::make_series({1.0, -2.0});
    EXPECT_THROW(log_series(bad, "log_bad"), std::runtime_error);
}

TEST(Io, SniffDelimiter) {
    EXPECT_EQ(sniff_delimiter("date,a,b"), ',');
    EXPECT_EQ(sniff_delimiter("date;a;b"), ';');
    EXPECT_EQ(sniff_delimiter("date\ta\tb"), '\t');
    EXPECT_EQ(sniff_delimiter("date a b"), ' ');
}

TEST(Io, ParseDoubleStrict) {
    double v;
    EXPECT_TRUE(parse_double("3.5", v));
    EXPECT_DOUBLE_EQ(v, 3.5);
    EXPECT_TRUE(parse_double("-1e-3", v));
    EXPECT_FALSE(parse_double("3.5x", v));
    EXPECT_FALSE(parse_double("", v));
    EXPECT_FALSE(parse_double("abc", v));
}

TEST(Io, ReadDatedTableWithHeader) {
    tst::TmpDir dir("io_header");
    tst::write_text(dir.file("p.csv"),
                    "date,AAA,BBB\n2020-01-02,10,20\n2020-01-03,11,21\n");
    RawTable t = read_dated_table(dir.file("p.csv"));
    ASSERT_EQ(t.header, (std::vector<std::string>{"date", "AAA", "BBB"}));
    ASSERT_EQ(t.dates, (std::vector<std::string>{"2020-01-02", "2020-01-03"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0], (std::vector<double>{10, 20}));
    EXPECT_EQ(t.rows[1], (std::vector<double>{11, 21}));
}

TEST(Io, ReadDatedTableWithoutHeader) {
    tst::TmpDir dir("io_nohdr");
    tst::write_text(dir.file("v.csv"), "2020-01-02,16.5\n2020-01-03,17.25\n");
    RawTable t = read_dated_table(dir.file("v.csv"));
    EXPECT_TRUE(t.header.empty());
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_DOUBLE_EQ(t.rows[1][0], 17.25);
}

TEST(Io, ReadDatedTableSemicolonAndSpace) {
    tst::TmpDir dir("io_delim");
    tst::write_text(dir.file("a.csv"), "2020-01-02;1.5\n2020-01-03;2.5\n");
    EXPECT_DOUBLE_EQ(read_dated_table(dir.file("a.csv")).rows[0][0], 1.5);
    tst::write_text(dir.file("b.txt"), "2020-01-02 1.5 2.5\n2020-01-03 3.5 4.5\n");
    EXPECT_DOUBLE_EQ(read_dated_table(dir.file("b.txt")).rows[1][1], 4.5);
}

TEST(Io, ReadDatedTableRejectsBadRows) {
    tst::TmpDir dir("io_bad");
    tst::write_text(dir.file("ragged.csv"), "2020-01-02,1,2\n2020-01-03,3\n");
    EXPECT_THROW(read_dated_table(dir.file("ragged.csv")), std::runtime_error);
    tst::write_text(dir.file("nonnum.csv"), "2020-01-02,1\n2020-01-03,oops\n");
    EXPECT_THROW(read_dated_table(dir.file("nonnum.csv")), std::runtime_error);
    tst::write_text(dir.file("empty.csv"), "");
    EXPECT_THROW(read_dated_table(dir.file("empty.csv")), std::runtime_error);
}

TEST(Io, LoadFieldSeries) {
    tst::TmpDir dir("io_field");
    tst::write_text(dir.file("vix.csv"), "date,close\n2020-01-02,16.5\n2020-01-03,17.0\n");
    ObservableSeries s = load_field_series(dir.file("vix.csv"), "vix");
    EXPECT_EQ(s.label, "vix");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_DOUBLE_EQ(s.values[0], 16.5);

    tst::write_text(dir.file("wide.csv"), "date,a,b\n2020-01-02,1,2\n");
    EXPECT_THROW(load_field_series(dir.file("wide.csv"), "x"), std::runtime_error);

    tst::write_text(dir.file("unsorted.csv"), "2020-01-03,1\n2020-01-02,2\n");
    EXPECT_THROW(load_field_series(dir.file("unsorted.csv"), "x"), std::runtime_error);
}

TEST(Io, FmtGRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-17, -2.5e300, 3.0, 0.0, 1234567.875}) {
        std::string s = fmt_g(v);
        EXPECT_DOUBLE_EQ(std::stod(s), v) << s;
    }
    EXPECT_EQ(fmt_g(0.25, 6), "0.25");
}

TEST(Io, WriteCsvRoundTrip) {
    tst::TmpDir dir("io_round");
    write_csv(dir.file("t.csv"), {"date", "a"}, {{"2020-01-02", fmt_g(1.0 / 3.0)}});
    RawTable t = read_dated_table(dir.file("t.csv"));
    ASSERT_EQ(t.header.size(), 2u);
    EXPECT_DOUBLE_EQ(t.rows[0][0], 1.0 / 3.0);

    ObservableSeries s = tst::make_series({0.5, 0.25}, "close");
    write_series_csv(dir.file("s.csv"), s);
    ObservableSeries back = load_field_series(dir.file("s.csv"), "close");
    EXPECT_EQ(back.dates, s.dates);
    EXPECT_EQ(back.values, s.values);
}
