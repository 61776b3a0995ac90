#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "jobrec/csv.hpp"
#include "jobrec/ingest.hpp"
#include "support.hpp"

using namespace jobrec;
using jobrec::testing::event;
using jobrec::testing::ts;

namespace {

Parsed<InteractionEvent> parse_text(const std::string& text, EventFormat format = EventFormat::Csv) {
    std::istringstream in(text);
    return parse_events(in, format);
}

std::vector<InteractionEvent> random_events(std::mt19937_64& rng, std::size_t n, std::size_t users,
                                            std::size_t jobs) {
    std::uniform_int_distribution<std::size_t> u(0, users - 1);
    std::uniform_int_distribution<std::size_t> j(0, jobs - 1);
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_int_distribution<long long> secs(0, 400LL * 86400);
    std::bernoulli_distribution has_query(0.5);
    const auto base = ts("2016-06-01");
    std::vector<InteractionEvent> out;
    for (std::size_t x = 0; x < n; ++x) {
        InteractionEvent ev{fmt::format("u{}", u(rng)), fmt::format("j{}", j(rng)),
                            static_cast<SignalKind>(kind(rng)), base + std::chrono::seconds(secs(rng)),
                            std::nullopt};
        if (ev.kind == SignalKind::Click && has_query(rng)) {
            ev.query_id = fmt::format("q{}", u(rng) % 7);
        }
        out.push_back(std::move(ev));
    }
    return out;
}

}  // namespace

TEST(ParseEvents, ApplyLineMapsFields) {
    const auto p = parse_text("u1,j1,apply,2017-03-01T10:00:00Z,\n");
    ASSERT_TRUE(p.ok());
    ASSERT_EQ(p.records.size(), 1u);
    EXPECT_EQ(p.records[0], event("u1", "j1", SignalKind::Apply, "2017-03-01T10:00:00Z"));
}

TEST(ParseEvents, EmptyStreamIsEmpty) {
    const auto p = parse_text("");
    EXPECT_TRUE(p.ok());
    EXPECT_TRUE(p.records.empty());
}

TEST(ParseEvents, UnknownKindIsLineErrorAndParsingContinues) {
    const auto p = parse_text(
        "user_id,job_id,kind,timestamp,query_id\n"
        "u1,j1,apply,2017-03-01T10:00:00Z,\n"
        "u1,j2,purchase,2017-03-01T10:00:00Z,\n"
        "u2,j2,click,2017-03-02T10:00:00Z,q7\n");
    ASSERT_EQ(p.errors.size(), 1u);
    EXPECT_EQ(p.errors[0].line, 3u);
    ASSERT_EQ(p.records.size(), 2u);
    EXPECT_EQ(p.records[1].query_id, std::optional<std::string>("q7"));
}

TEST(ParseEvents, FuzzedLinesRecoverEveryIntactRecord) {
    std::mt19937_64 rng(11);
    const auto events = random_events(rng, 400, 30, 40);
    std::ostringstream clean;
    write_events(clean, events);
    std::vector<std::string> lines;
    std::istringstream split(clean.str());
    for (std::string l; std::getline(split, l);) {
        lines.push_back(l);
    }
    ASSERT_EQ(lines.size(), events.size());

    const std::vector<std::string> mutations = {"purchase", "drop", "time", "user", "quote", "extra"};
    std::set<std::size_t> broken;
    std::bernoulli_distribution mutate(0.25);
    std::uniform_int_distribution<std::size_t> pick(0, mutations.size() - 1);
    for (std::size_t x = 0; x < lines.size(); ++x) {
        if (!mutate(rng)) {
            continue;
        }
        broken.insert(x + 1);
        auto f = *csv::split(lines[x]);
        const auto& m = mutations[pick(rng)];
        if (m == "purchase") {
            f[2] = "purchase";
        } else if (m == "drop") {
            f.erase(f.begin() + 1);
        } else if (m == "time") {
            f[3] = "2017-02-31T00:00:00Z";
        } else if (m == "user") {
            f[0] = "";
        } else if (m == "quote") {
            f[0] = "\"" + f[0];
        } else {
            f.push_back("x");
            f.push_back("y");
        }
        std::string joined;
        for (std::size_t c = 0; c < f.size(); ++c) {
            joined += (c ? "," : "") + f[c];
        }
        lines[x] = joined;
    }
    std::string text;
    for (const auto& l : lines) {
        text += l + "\n";
    }
    const auto p = parse_text(text);
    EXPECT_EQ(p.records.size(), events.size() - broken.size());
    std::set<std::size_t> reported;
    for (const auto& e : p.errors) {
        reported.insert(e.line);
    }
    EXPECT_EQ(reported, broken);
    std::vector<InteractionEvent> expected;
    for (std::size_t x = 0; x < events.size(); ++x) {
        if (!broken.contains(x + 1)) {
            expected.push_back(events[x]);
        }
    }
    EXPECT_EQ(p.records, expected);
}

TEST(ParseEvents, RoundTripIsFixedPointInBothFormats) {
    std::mt19937_64 rng(5);
    const auto events = random_events(rng, 300, 20, 20);
    for (auto format : {EventFormat::Csv, EventFormat::JsonLines}) {
        std::ostringstream out;
        write_events(out, events, format);
        const auto back = parse_text(out.str(), format);
        ASSERT_TRUE(back.ok());
        EXPECT_EQ(back.records, events);
        std::ostringstream again;
        write_events(again, back.records, format);
        EXPECT_EQ(again.str(), out.str());
    }
}

TEST(WindowFilter, BoundaryDays) {
    const auto ref = ts("2017-07-01");
    const std::vector<InteractionEvent> events = {
        {"u", "inside", SignalKind::Apply, ref - std::chrono::days{179}, {}},
        {"u", "outside", SignalKind::Apply, ref - std::chrono::days{181}, {}},
        {"u", "edge", SignalKind::Apply, ref - std::chrono::days{180}, {}},
    };
    const auto kept = window_filter(events, ref, 180);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].job_id, "inside");
}

TEST(WindowFilter, MatchesBruteForceAndIsIdempotent) {
    std::mt19937_64 rng(99);
    const auto events = random_events(rng, 1000, 50, 50);
    const auto ref = ts("2017-03-15T12:00:00Z");
    const auto kept = window_filter(events, ref, 180);
    std::vector<InteractionEvent> brute;
    for (const auto& ev : events) {
        const auto age = std::chrono::duration_cast<std::chrono::seconds>(ref - ev.timestamp).count();
        if (age < 180LL * 86400) {
            brute.push_back(ev);
        }
    }
    EXPECT_EQ(kept, brute);
    EXPECT_EQ(window_filter(kept, ref, 180), kept);
}

TEST(Dedupe, RepeatedApplyKeepsLatest) {
    const std::vector<InteractionEvent> events = {
        event("u1", "j1", SignalKind::Apply, "2017-03-01"),
        event("u1", "j1", SignalKind::Apply, "2017-03-05"),
        event("u1", "j1", SignalKind::Apply, "2017-03-02"),
    };
    const auto d = dedupe(events);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].latest, ts("2017-03-05"));
}

TEST(Dedupe, DisjointInputKeepsCardinality) {
    const std::vector<InteractionEvent> events = {
        event("u1", "j1", SignalKind::Apply, "2017-03-01"),
        event("u2", "j2", SignalKind::Click, "2017-03-01"),
        event("u3", "j3", SignalKind::EmailOpenNoClick, "2017-03-01"),
    };
    EXPECT_EQ(dedupe(events).size(), 3u);
}

TEST(Dedupe, MatchesDistinctTripleSetAndIgnoresOrder) {
    std::mt19937_64 rng(3);
    auto events = random_events(rng, 2000, 25, 15);
    std::map<std::tuple<std::string, std::string, int>, Timestamp> brute;
    for (const auto& ev : events) {
        auto& latest = brute[{ev.user_id, ev.job_id, static_cast<int>(ev.kind)}];
        latest = std::max(latest, ev.timestamp);
    }
    const auto d = dedupe(events);
    ASSERT_EQ(d.size(), brute.size());
    for (const auto& s : d) {
        EXPECT_EQ(brute.at({s.user_id, s.job_id, static_cast<int>(s.kind)}), s.latest);
    }
    std::shuffle(events.begin(), events.end(), rng);
    EXPECT_EQ(dedupe(events), d);
}

TEST(Dedupe, KeepsQueryIdsPerClick) {
    const std::vector<InteractionEvent> events = {
        event("u1", "j1", SignalKind::Click, "2017-03-01", "qb"),
        event("u1", "j1", SignalKind::Click, "2017-03-02", "qa"),
        event("u1", "j1", SignalKind::Click, "2017-03-03", "qa"),
        event("u1", "j1", SignalKind::Click, "2017-03-04"),
    };
    const auto d = dedupe(events);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].query_ids, (std::vector<std::string>{"qa", "qb"}));
    EXPECT_EQ(d[0].unscoped_times, std::vector<Timestamp>{ts("2017-03-04")});
}

TEST(DropUnknownJobs, CountsDropped) {
    const std::vector<InteractionEvent> events = {
        event("u1", "j1", SignalKind::Apply, "2017-03-01"),
        event("u1", "ghost", SignalKind::Apply, "2017-03-01"),
    };
    const auto r = drop_unknown_jobs(events, {"j1"});
    EXPECT_EQ(r.kept.size(), 1u);
    EXPECT_EQ(r.dropped, 1u);
}

TEST(ParseJobs, ReadsAndValidatesTaxonomy) {
    std::istringstream in(
        "job_id,title,category,lat,lon,posted_at,status\n"
        "j1,Nurse,registered-nurse,33.7,-84.3,2017-01-01,active\n"
        "j2,Driver,truck-driver,,,2017-01-02T00:00:00Z,expired\n"
        "j3,Chef,chef,,,2017-01-02,active\n"
        "j4,Nurse,registered-nurse,,,2017-01-02,pending\n");
    const Taxonomy taxonomy = {"registered-nurse", "truck-driver"};
    const auto p = parse_jobs(in, &taxonomy);
    ASSERT_EQ(p.records.size(), 2u);
    ASSERT_EQ(p.errors.size(), 2u);
    EXPECT_EQ(p.errors[0].line, 4u);
    EXPECT_EQ(p.errors[1].line, 5u);
    EXPECT_TRUE(p.records[0].is_active());
    EXPECT_FALSE(p.records[1].is_active());
    EXPECT_FALSE(p.records[1].location);

    std::ostringstream out;
    write_jobs(out, p.records);
    std::istringstream back(out.str());
    EXPECT_EQ(parse_jobs(back).records, p.records);
}

TEST(JobCatalog, RejectsDuplicates) {
    JobRecord a;
    a.job_id = "j1";
    EXPECT_THROW(JobCatalog({a, a}), InputError);
}

TEST(ParseEmbeddings, EnforcesTableInvariants) {
    {
        std::istringstream in("j1 1 0 0\nj2 0.5 0.5 0\n");
        const auto t = parse_embeddings(in);
        EXPECT_EQ(t.dim(), 3u);
        EXPECT_EQ(t.size(), 2u);
    }
    for (const char* bad : {"j1 1 0\nj2 1 0 0\n", "j1 0 0\n", "j1 nan 1\n", "j1 1 1\nj1 1 1\n", "j1 1 x\n"}) {
        std::istringstream in(bad);
        EXPECT_THROW(parse_embeddings(in), InputError) << bad;
    }
}

TEST(ParseUsers, ResumeCategoryMustBeInTaxonomy) {
    std::istringstream in(
        "user_id,resume_category,lat,lon,registered\n"
        "u1,registered-nurse,33.7,-84.3,1\n"
        "u2,,,,0\n"
        "u3,astronaut,,,1\n");
    const Taxonomy taxonomy = {"registered-nurse"};
    const auto p = parse_users(in, &taxonomy);
    ASSERT_EQ(p.records.size(), 2u);
    ASSERT_EQ(p.errors.size(), 1u);
    EXPECT_EQ(p.errors[0].line, 4u);
    EXPECT_EQ(p.records[0].resume_category, std::optional<std::string>("registered-nurse"));
    EXPECT_TRUE(p.records[0].registered);
    EXPECT_FALSE(p.records[1].resume_category);
}

TEST(Haversine, KnownDistance) {
    // Atlanta to Chicago is roughly 945 km.
    EXPECT_NEAR(haversine_km({33.749, -84.388}, {41.878, -87.630}), 945.0, 5.0);
    EXPECT_DOUBLE_EQ(haversine_km({10, 20}, {10, 20}), 0.0);
}

TEST(FallbackEmbeddings, DeterministicAndSimilarForSharedTokens) {
    std::vector<JobRecord> jobs(3);
    jobs[0] = {"a", "senior nurse", "registered-nurse", {}, {}, JobStatus::Active};
    jobs[1] = {"b", "junior nurse", "registered-nurse", {}, {}, JobStatus::Active};
    jobs[2] = {"c", "truck driver", "truck-driver", {}, {}, JobStatus::Active};
    const auto t = fallback_embeddings(jobs, 64);
    EXPECT_EQ(t.size(), 3u);
    const auto& va = *t.find("a");
    const auto& vb = *t.find("b");
    const auto& vc = *t.find("c");
    auto cos = [](const std::vector<double>& x, const std::vector<double>& y) {
        double d = 0, nx = 0, ny = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            d += x[i] * y[i];
            nx += x[i] * x[i];
            ny += y[i] * y[i];
        }
        return d / std::sqrt(nx * ny);
    };
    EXPECT_GT(cos(va, vb), cos(va, vc));
    EXPECT_EQ(fallback_embeddings(jobs, 64).entries(), t.entries());
}
