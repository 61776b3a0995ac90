#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "jobrec/graph.hpp"
#include "support.hpp"

using namespace jobrec;
using jobrec::testing::event;
using jobrec::testing::ts;

namespace {

std::vector<std::string> job_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(fmt::format("j{:02}", i));
    }
    return ids;
}

JobMultiGraph build(const std::vector<InteractionEvent>& events, const std::vector<std::string>& ids) {
    return JobMultiGraph::build(dedupe(events), ids);
}

/// Applies and query-scoped clicks by random users.
std::vector<InteractionEvent> random_log(std::mt19937_64& rng, std::size_t users, std::size_t jobs,
                                         double p_apply, double p_click, const std::string& prefix = "u") {
    std::bernoulli_distribution apply(p_apply);
    std::bernoulli_distribution click(p_click);
    std::uniform_int_distribution<int> query(0, 2);
    std::vector<InteractionEvent> out;
    for (std::size_t u = 0; u < users; ++u) {
        for (std::size_t j = 0; j < jobs; ++j) {
            if (apply(rng)) {
                out.push_back(event(prefix + std::to_string(u), fmt::format("j{:02}", j), SignalKind::Apply,
                                    "2017-03-01"));
            }
            if (click(rng)) {
                out.push_back(event(prefix + std::to_string(u), fmt::format("j{:02}", j), SignalKind::Click,
                                    "2017-03-01", "q" + std::to_string(query(rng))));
            }
        }
    }
    return out;
}

}  // namespace

TEST(BuildCostats, TwoUsersApplyingToSamePair) {
    const auto g = build({event("u1", "j1", SignalKind::Apply, "2017-03-01"),
                          event("u1", "j2", SignalKind::Apply, "2017-03-01"),
                          event("u2", "j1", SignalKind::Apply, "2017-03-02"),
                          event("u2", "j2", SignalKind::Apply, "2017-03-02")},
                         {"j1", "j2"});
    EXPECT_EQ(g.costats(0, 1).co_apps, 2u);
    EXPECT_EQ(g.stats(0).total_apps, 2u);
    EXPECT_EQ(g.stats(1).total_apps, 2u);
    const auto n = g.neighbors("j1");
    ASSERT_EQ(n.size(), 1u);
    EXPECT_EQ(n[0].job_id, "j2");
    EXPECT_EQ(n[0].stats, (CoStats{2, 0}));
}

TEST(BuildCostats, SingleUserSingleJob) {
    const auto g = build({event("u1", "j1", SignalKind::Apply, "2017-03-01")}, {"j1"});
    EXPECT_EQ(g.edge_count(), 0u);
    EXPECT_EQ(g.stats(0).total_apps, 1u);
    EXPECT_TRUE(g.neighbors("j1").empty());
}

TEST(BuildCostats, EmptyEventsGiveNodesOnly) {
    const auto g = build({}, {"a", "b", "c"});
    EXPECT_EQ(g.node_count(), 3u);
    EXPECT_EQ(g.edge_count(), 0u);
}

TEST(BuildCostats, UnknownJobThrows) {
    EXPECT_THROW(build({event("u1", "zz", SignalKind::Apply, "2017-03-01")}, {"j1"}), InputError);
}

TEST(Neighbors, UnknownJobThrows) {
    const auto g = build({}, {"j1"});
    EXPECT_THROW((void)g.neighbors("nope"), std::out_of_range);
}

TEST(BuildCostats, MatchesPairwiseIntersectionOracle) {
    std::mt19937_64 rng(17);
    const auto events = random_log(rng, 50, 20, 0.15, 0.2);
    const auto ids = job_ids(20);
    const auto g = build(events, ids);

    std::map<std::string, std::set<std::string>> appliers;
    std::map<std::string, std::set<std::string>> clickers;
    std::map<std::string, std::set<std::pair<std::string, std::string>>> click_groups;
    for (const auto& ev : events) {
        if (ev.kind == SignalKind::Apply) {
            appliers[ev.job_id].insert(ev.user_id);
        } else {
            clickers[ev.job_id].insert(ev.user_id);
            click_groups[ev.job_id].insert({ev.user_id, *ev.query_id});
        }
    }
    auto users_sharing_group = [&](const std::string& a, const std::string& b) {
        std::set<std::string> users;
        for (const auto& grp : click_groups[a]) {
            if (click_groups[b].contains(grp)) {
                users.insert(grp.first);
            }
        }
        return users.size();
    };
    for (JobIndex i = 0; i < ids.size(); ++i) {
        EXPECT_EQ(g.stats(i).total_apps, appliers[ids[i]].size());
        EXPECT_EQ(g.stats(i).total_clicks, clickers[ids[i]].size());
        for (JobIndex j = 0; j < ids.size(); ++j) {
            if (i == j) {
                EXPECT_TRUE(g.costats(i, j).empty());
                continue;
            }
            std::vector<std::string> both;
            std::set_intersection(appliers[ids[i]].begin(), appliers[ids[i]].end(), appliers[ids[j]].begin(),
                                  appliers[ids[j]].end(), std::back_inserter(both));
            EXPECT_EQ(g.costats(i, j).co_apps, both.size());
            EXPECT_EQ(g.costats(i, j).co_clicks, users_sharing_group(ids[i], ids[j]));
        }
    }
}

TEST(Neighbors, ListsCoverEveryEdgeTwice) {
    std::mt19937_64 rng(23);
    const auto ids = job_ids(20);
    const auto g = build(random_log(rng, 40, 20, 0.1, 0.1), ids);
    std::size_t listed = 0;
    for (const auto& id : ids) {
        const auto n = g.neighbors(id);
        EXPECT_TRUE(std::is_sorted(n.begin(), n.end(),
                                   [](const Neighbor& a, const Neighbor& b) { return a.job_id < b.job_id; }));
        listed += n.size();
    }
    EXPECT_EQ(listed, 2 * g.edge_count());
}

TEST(GraphProperties, SymmetryAndCountBounds) {
    std::mt19937_64 rng(29);
    const auto ids = job_ids(15);
    const auto g = build(random_log(rng, 60, 15, 0.2, 0.3), ids);
    for (JobIndex i = 0; i < ids.size(); ++i) {
        for (JobIndex j = 0; j < ids.size(); ++j) {
            EXPECT_EQ(g.costats(i, j), g.costats(j, i));
            for (auto s : {Signal::Apps, Signal::Clicks}) {
                EXPECT_LE(g.costats(i, j).count(s), std::min(g.stats(i).count(s), g.stats(j).count(s)));
            }
        }
    }
}

TEST(GraphProperties, PermutationInvariant) {
    std::mt19937_64 rng(31);
    const auto ids = job_ids(12);
    auto events = random_log(rng, 30, 12, 0.2, 0.2);
    const auto g = build(events, ids);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(events.begin(), events.end(), rng);
        EXPECT_EQ(build(events, ids), g);
    }
}

TEST(GraphProperties, DisjointUserUnionAddsCounts) {
    std::mt19937_64 rng(37);
    const auto ids = job_ids(12);
    const auto a = random_log(rng, 25, 12, 0.2, 0.2, "a");
    const auto b = random_log(rng, 25, 12, 0.2, 0.2, "b");
    auto both = a;
    both.insert(both.end(), b.begin(), b.end());
    const auto ga = build(a, ids);
    const auto gb = build(b, ids);
    const auto gu = build(both, ids);
    for (JobIndex i = 0; i < ids.size(); ++i) {
        EXPECT_EQ(gu.stats(i).total_apps, ga.stats(i).total_apps + gb.stats(i).total_apps);
        EXPECT_EQ(gu.stats(i).total_clicks, ga.stats(i).total_clicks + gb.stats(i).total_clicks);
        for (JobIndex j = i + 1; j < ids.size(); ++j) {
            EXPECT_EQ(gu.costats(i, j).co_apps, ga.costats(i, j).co_apps + gb.costats(i, j).co_apps);
            EXPECT_EQ(gu.costats(i, j).co_clicks, ga.costats(i, j).co_clicks + gb.costats(i, j).co_clicks);
        }
    }
}

TEST(CoClicks, QueryScopeSeparatesResultsets) {
    const auto g = build({event("u1", "j1", SignalKind::Click, "2017-03-01T10:00:00Z", "q1"),
                          event("u1", "j2", SignalKind::Click, "2017-03-01T10:01:00Z", "q1"),
                          event("u1", "j3", SignalKind::Click, "2017-03-01T10:02:00Z", "q2")},
                         {"j1", "j2", "j3"});
    EXPECT_EQ(g.costats(0, 1).co_clicks, 1u);
    EXPECT_EQ(g.costats(0, 2).co_clicks, 0u);
    EXPECT_EQ(g.costats(1, 2).co_clicks, 0u);
}

TEST(CoClicks, SessionFallbackWithoutQueryIds) {
    const auto events = std::vector<InteractionEvent>{
        event("u1", "j1", SignalKind::Click, "2017-03-01T10:00:00Z"),
        event("u1", "j2", SignalKind::Click, "2017-03-01T10:20:00Z"),
        event("u1", "j3", SignalKind::Click, "2017-03-01T11:30:00Z"),
        event("u1", "j1", SignalKind::Click, "2017-03-01T11:45:00Z"),
    };
    const auto g = build(events, {"j1", "j2", "j3"});
    EXPECT_EQ(g.costats(0, 1).co_clicks, 1u);  // first session
    EXPECT_EQ(g.costats(0, 2).co_clicks, 1u);  // second session
    EXPECT_EQ(g.costats(1, 2).co_clicks, 0u);
    CoClickPolicy wide;
    wide.session_gap = std::chrono::hours{2};
    const auto g2 = JobMultiGraph::build(dedupe(events), std::vector<std::string>{"j1", "j2", "j3"}, wide);
    EXPECT_EQ(g2.costats(1, 2).co_clicks, 1u);
}

TEST(CoClicks, SameJobTwiceIsNotAnEdge) {
    const auto g = build({event("u1", "j1", SignalKind::Click, "2017-03-01T10:00:00Z", "q"),
                          event("u1", "j1", SignalKind::Click, "2017-03-01T10:01:00Z", "q")},
                         {"j1"});
    EXPECT_EQ(g.edge_count(), 0u);
    EXPECT_EQ(g.stats(0).total_clicks, 1u);
}

TEST(GraphDump, ReloadsBitExactly) {
    std::mt19937_64 rng(41);
    const auto ids = job_ids(20);
    const auto g = build(random_log(rng, 40, 20, 0.1, 0.15), ids);
    std::ostringstream nodes, edges;
    g.write_nodes(nodes);
    g.write_edges(edges);
    std::istringstream n_in(nodes.str()), e_in(edges.str());
    const auto back = JobMultiGraph::load(n_in, e_in);
    EXPECT_EQ(back, g);
    const auto text = edges.str();
    const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    EXPECT_EQ(lines, g.edge_count());
}

TEST(GraphDump, RejectsEdgeToUnknownNode) {
    std::istringstream nodes("a,1,0\nb,1,0\n"), edges("a,c,1,0\n");
    EXPECT_THROW(JobMultiGraph::load(nodes, edges), InputError);
}
