#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "jobrec/eval.hpp"
#include "jobrec/synth.hpp"
#include "support.hpp"

using namespace jobrec;
using namespace jobrec::synth;

namespace {

SynthParams small(double noise, std::uint64_t seed = 7) {
    SynthParams p;
    p.clusters = 4;
    p.jobs_per_cluster = 50;
    p.users = 400;
    p.noise = noise;
    p.seed = seed;
    return p;
}

/// Fraction of behavioral events landing in the acting user's own cluster.
double within_cluster_fraction(const SynthCorpus& c) {
    std::size_t same = 0, total = 0;
    for (const auto& e : c.events) {
        ++total;
        same += c.user_cluster.at(e.user_id) == c.job_cluster.at(e.job_id);
    }
    return static_cast<double>(same) / static_cast<double>(total);
}

}  // namespace

TEST(Synth, NoiselessUsersStayInTheirCluster) {
    const auto c = synth_corpus(small(0.0));
    ASSERT_FALSE(c.events.empty());
    EXPECT_DOUBLE_EQ(within_cluster_fraction(c), 1.0);
}

TEST(Synth, NoiseSetsWithinClusterFraction) {
    auto p = small(0.1);
    p.users = 2000;
    const auto c = synth_corpus(p);
    EXPECT_NEAR(within_cluster_fraction(c), 0.9, 0.03);
}

TEST(Synth, SameSeedSameCorpus) {
    const auto a = synth_corpus(small(0.2, 11));
    const auto b = synth_corpus(small(0.2, 11));
    EXPECT_EQ(a.events, b.events);
    EXPECT_EQ(a.jobs, b.jobs);
    EXPECT_EQ(a.users, b.users);
    EXPECT_EQ(a.embeddings.entries(), b.embeddings.entries());
    const auto c = synth_corpus(small(0.2, 12));
    EXPECT_NE(a.events, c.events);
}

TEST(Synth, ShapeOfTheCorpus) {
    const auto p = small(0.1);
    const auto c = synth_corpus(p);
    EXPECT_EQ(c.jobs.size(), p.clusters * p.jobs_per_cluster);
    EXPECT_EQ(c.embeddings.size(), c.jobs.size());
    EXPECT_EQ(c.users.size(), p.users);
    const JobCatalog catalog(c.jobs);
    std::set<std::string> touched;
    for (const auto& e : c.events) {
        touched.insert(e.job_id);
        ASSERT_NE(catalog.find(e.job_id), nullptr);
        EXPECT_LT(e.timestamp, p.reference);
        EXPECT_GE(e.timestamp, catalog.find(e.job_id)->posted_at);
    }
    EXPECT_FALSE(c.cold_jobs.empty());
    for (const auto& id : c.cold_jobs) {
        EXPECT_FALSE(touched.contains(id)) << id;
        EXPECT_TRUE(catalog.find(id)->is_active());
    }
    for (const auto& j : c.jobs) {
        EXPECT_EQ(j.category, cluster_category(c.job_cluster.at(j.job_id)));
    }
    EXPECT_TRUE(std::is_sorted(c.events.begin(), c.events.end(),
                               [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; }));
}

TEST(Synth, EmbeddingsClusterTogether) {
    const auto c = synth_corpus(small(0.1));
    double within = 0.0, across = 0.0;
    std::size_t nw = 0, na = 0;
    const auto& e = c.embeddings.entries();
    for (auto a = e.begin(); a != e.end(); ++a) {
        for (auto b = std::next(a); b != e.end(); ++b) {
            const double s = embed_sim(a->second, b->second);
            if (c.job_cluster.at(a->first) == c.job_cluster.at(b->first)) {
                within += s;
                ++nw;
            } else {
                across += s;
                ++na;
            }
        }
    }
    EXPECT_GT(within / static_cast<double>(nw), across / static_cast<double>(na) + 0.3);
}

TEST(Synth, RejectsBadParameters) {
    auto p = small(0.1);
    p.noise = 1.5;
    EXPECT_THROW(synth_corpus(p), std::invalid_argument);
    p = small(0.1);
    p.clusters = 0;
    EXPECT_THROW(synth_corpus(p), std::invalid_argument);
}

TEST(Synth, WrittenCorpusParsesBack) {
    const auto c = synth_corpus(small(0.1));
    const auto dir = std::filesystem::temp_directory_path() / "jobrec_synth_test";
    std::filesystem::remove_all(dir);
    write_corpus(c, dir);
    std::ifstream ev(dir / "events.csv"), jobs(dir / "jobs.csv"), emb(dir / "embeddings.txt"),
        users(dir / "users.csv");
    const auto events = parse_events(ev);
    EXPECT_TRUE(events.errors.empty());
    EXPECT_EQ(events.records, c.events);
    const auto j = parse_jobs(jobs);
    EXPECT_TRUE(j.errors.empty());
    EXPECT_EQ(j.records.size(), c.jobs.size());
    EXPECT_EQ(parse_embeddings(emb).size(), c.embeddings.size());
    EXPECT_EQ(parse_users(users).records.size(), c.users.size());
    std::filesystem::remove_all(dir);
}

TEST(Synth, EventsFallInsideJobLifetimes) {
    auto p = small(0.1);
    p.job_lifetime_days = 20;
    const auto c = synth_corpus(p);
    const JobCatalog catalog(c.jobs);
    std::size_t active = 0;
    for (const auto& j : c.jobs) {
        active += j.is_active();
        // Postings older than the longest lifetime must have expired.
        if (age_days(p.reference, j.posted_at) > 30.0) {
            EXPECT_FALSE(j.is_active()) << j.job_id;
        }
        if (age_days(p.reference, j.posted_at) < 10.0) {
            EXPECT_TRUE(j.is_active()) << j.job_id;
        }
    }
    EXPECT_GT(active, 0u);
    EXPECT_LT(active, c.jobs.size() / 2);
    for (const auto& e : c.events) {
        const auto* job = catalog.find(e.job_id);
        EXPECT_GE(e.timestamp, job->posted_at);
        EXPECT_LE(age_days(e.timestamp, job->posted_at), 30.0);
    }
}

TEST(Synth, WithoutLifetimesExpiredFractionApplies) {
    auto p = small(0.1);
    p.job_lifetime_days = 0;
    p.expired_fraction = 0.25;
    const auto c = synth_corpus(p);
    const auto expired = std::count_if(c.jobs.begin(), c.jobs.end(), [](const auto& j) { return !j.is_active(); });
    EXPECT_EQ(static_cast<std::size_t>(expired), p.clusters * 12);
    EXPECT_EQ(c.cold_jobs.size(), p.clusters * 8);
}

TEST(Synth, ClassicCfStaysInClusterWithoutNoise) {
    const auto p = small(0.0);
    const auto c = synth_corpus(p);
    eval::ClassicCfParams cp;
    cp.reference = p.reference;
    const eval::ClassicCf cf(c.events, cp);
    std::size_t lists = 0;
    for (const auto& [user, cluster] : c.user_cluster) {
        const auto recs = cf.recommend(user, 20);
        lists += !recs.empty();
        for (const auto& r : recs) {
            EXPECT_EQ(c.job_cluster.at(r.job_id), cluster) << user << " " << r.job_id;
        }
    }
    EXPECT_GT(lists, 0u);
}
