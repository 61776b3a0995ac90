#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "jobrec/csv.hpp"
#include "jobrec/time.hpp"

using namespace jobrec;

TEST(Timestamp, ParsesIsoAndBareDates) {
    const auto a = parse_timestamp("2017-03-01T10:00:00Z");
    ASSERT_TRUE(a);
    EXPECT_EQ(format_timestamp(*a), "2017-03-01T10:00:00Z");
    const auto b = parse_timestamp("2017-03-01");
    ASSERT_TRUE(b);
    EXPECT_EQ(format_timestamp(*b), "2017-03-01T00:00:00Z");
    EXPECT_DOUBLE_EQ(age_days(*a, *b), 10.0 / 24.0);
}

TEST(Timestamp, RejectsGarbage) {
    EXPECT_FALSE(parse_timestamp(""));
    EXPECT_FALSE(parse_timestamp("yesterday"));
    EXPECT_FALSE(parse_timestamp("2017-13-01T00:00:00Z"));
    EXPECT_FALSE(parse_timestamp("2017-02-30"));
    EXPECT_FALSE(parse_timestamp("2017-03-01T25:00:00Z"));
}

TEST(Csv, SplitsQuotedFields) {
    const auto f = csv::split(R"(a,"b,c","d""e",)");
    ASSERT_TRUE(f);
    ASSERT_EQ(f->size(), 4u);
    EXPECT_EQ((*f)[1], "b,c");
    EXPECT_EQ((*f)[2], "d\"e");
    EXPECT_EQ((*f)[3], "");
    EXPECT_FALSE(csv::split("\"open"));
}

TEST(Csv, QuoteRoundTrips) {
    for (std::string s : {"plain", "with,comma", "with\"quote", ""}) {
        const auto f = csv::split(csv::quote(s) + ",x");
        ASSERT_TRUE(f);
        EXPECT_EQ((*f)[0], s);
    }
}

TEST(Csv, DoublesRoundTripExactly) {
    for (double v : {0.1, 1.0 / 3.0, -2.0794415416798357, 1e-300, 12345.678}) {
        const auto back = csv::parse_double(csv::format_double(v));
        ASSERT_TRUE(back);
        EXPECT_EQ(*back, v);
    }
    EXPECT_EQ(csv::format_double(-0.0), "0");
    EXPECT_FALSE(csv::parse_double("1.5x"));
    EXPECT_FALSE(csv::parse_int("3.5"));
}
