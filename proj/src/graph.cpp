#include "jobrec/graph.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "jobrec/csv.hpp"

namespace jobrec {

namespace {

std::uint64_t pair_key(JobIndex a, JobIndex b) {
    if (a > b) {
        std::swap(a, b);
    }
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

void add_pairs(std::span<const JobIndex> sorted_jobs, std::set<std::uint64_t>& pairs) {
    for (std::size_t x = 0; x < sorted_jobs.size(); ++x) {
        for (std::size_t y = x + 1; y < sorted_jobs.size(); ++y) {
            pairs.insert(pair_key(sorted_jobs[x], sorted_jobs[y]));
        }
    }
}

}  // namespace

JobMultiGraph JobMultiGraph::build(std::span<const DedupedSignal> signals,
                                   std::span<const std::string> job_ids,
                                   const CoClickPolicy& policy) {
    JobMultiGraph g;
    g.ids_.assign(job_ids.begin(), job_ids.end());
    std::sort(g.ids_.begin(), g.ids_.end());
    g.ids_.erase(std::unique(g.ids_.begin(), g.ids_.end()), g.ids_.end());
    g.stats_.assign(g.ids_.size(), NodeStats{});

    // Group signal indices by user.
    std::map<std::string_view, std::vector<std::size_t>> by_user;
    for (std::size_t s = 0; s < signals.size(); ++s) {
        by_user[signals[s].user_id].push_back(s);
    }

    std::unordered_map<std::uint64_t, CoStats> edges;
    for (const auto& [user, idxs] : by_user) {
        std::vector<JobIndex> applied;
        std::set<JobIndex> clicked;
        std::map<std::string, std::set<JobIndex>> groups;
        std::vector<std::pair<Timestamp, JobIndex>> unscoped;
        for (std::size_t s : idxs) {
            const auto& sig = signals[s];
            const auto idx = g.find(sig.job_id);
            if (!idx) {
                throw InputError(fmt::format("signal references unknown job '{}'", sig.job_id));
            }
            if (sig.kind == SignalKind::Apply) {
                applied.push_back(*idx);
            } else if (sig.kind == SignalKind::Click) {
                clicked.insert(*idx);
                for (const auto& q : sig.query_ids) {
                    groups["q:" + q].insert(*idx);
                }
                for (const auto t : sig.unscoped_times) {
                    unscoped.emplace_back(t, *idx);
                }
            }
        }
        std::sort(applied.begin(), applied.end());
        applied.erase(std::unique(applied.begin(), applied.end()), applied.end());

        std::sort(unscoped.begin(), unscoped.end());
        std::size_t session = 0;
        for (std::size_t x = 0; x < unscoped.size(); ++x) {
            if (x > 0 && unscoped[x].first - unscoped[x - 1].first > policy.session_gap) {
                ++session;
            }
            groups[fmt::format("s:{}", session)].insert(unscoped[x].second);
        }

        for (JobIndex j : applied) {
            ++g.stats_[j].total_apps;
        }
        for (JobIndex j : clicked) {
            ++g.stats_[j].total_clicks;
        }
        std::set<std::uint64_t> app_pairs;
        add_pairs(applied, app_pairs);
        for (auto key : app_pairs) {
            ++edges[key].co_apps;
        }
        std::set<std::uint64_t> click_pairs;
        for (const auto& [name, jobs] : groups) {
            const std::vector<JobIndex> members(jobs.begin(), jobs.end());
            add_pairs(members, click_pairs);
        }
        for (auto key : click_pairs) {
            ++edges[key].co_clicks;
        }
    }

    std::vector<std::vector<Adjacent>> adjacency(g.ids_.size());
    for (const auto& [key, stats] : edges) {
        const auto a = static_cast<JobIndex>(key >> 32);
        const auto b = static_cast<JobIndex>(key & 0xffffffffULL);
        adjacency[a].push_back({b, stats});
        adjacency[b].push_back({a, stats});
    }
    g.finalize(std::move(adjacency));
    return g;
}

void JobMultiGraph::finalize(std::vector<std::vector<Adjacent>> adjacency) {
    edge_count_ = 0;
    for (auto& row : adjacency) {
        std::sort(row.begin(), row.end(),
                  [](const Adjacent& x, const Adjacent& y) { return x.other < y.other; });
        edge_count_ += row.size();
    }
    edge_count_ /= 2;
    adjacency_ = std::move(adjacency);
}

std::optional<JobIndex> JobMultiGraph::find(std::string_view job_id) const {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), job_id);
    if (it == ids_.end() || *it != job_id) {
        return std::nullopt;
    }
    return static_cast<JobIndex>(it - ids_.begin());
}

CoStats JobMultiGraph::costats(JobIndex a, JobIndex b) const {
    const auto& row = adjacency_.at(a);
    const auto it = std::lower_bound(row.begin(), row.end(), b,
                                     [](const Adjacent& x, JobIndex v) { return x.other < v; });
    if (it == row.end() || it->other != b) {
        return {};
    }
    return it->stats;
}

std::vector<Neighbor> JobMultiGraph::neighbors(std::string_view job_id) const {
    const auto idx = find(job_id);
    if (!idx) {
        throw std::out_of_range(fmt::format("unknown job '{}'", job_id));
    }
    std::vector<Neighbor> out;
    for (const auto& adj : adjacency_[*idx]) {
        out.push_back({ids_[adj.other], adj.stats});
    }
    return out;
}

void JobMultiGraph::write_nodes(std::ostream& out) const {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        out << csv::quote(ids_[i]) << ',' << stats_[i].total_apps << ',' << stats_[i].total_clicks
            << '\n';
    }
}

void JobMultiGraph::write_edges(std::ostream& out) const {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        for (const auto& adj : adjacency_[i]) {
            if (adj.other > i) {
                out << csv::quote(ids_[i]) << ',' << csv::quote(ids_[adj.other]) << ','
                    << adj.stats.co_apps << ',' << adj.stats.co_clicks << '\n';
            }
        }
    }
}

namespace {

std::uint32_t parse_count(const std::string& text, std::size_t line_no, std::string_view file) {
    const auto v = csv::parse_int(text);
    if (!v || *v < 0 || *v > 0xffffffffLL) {
        throw InputError(fmt::format("{} line {}: invalid count '{}'", file, line_no, text));
    }
    return static_cast<std::uint32_t>(*v);
}

}  // namespace

JobMultiGraph JobMultiGraph::load(std::istream& nodes, std::istream& edges) {
    JobMultiGraph g;
    std::vector<std::pair<std::string, NodeStats>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(nodes, line)) {
        ++line_no;
        if (csv::trim(line).empty()) {
            continue;
        }
        const auto f = csv::split(line);
        if (!f || f->size() != 3) {
            throw InputError(fmt::format("graph nodes line {}: expected 3 columns", line_no));
        }
        rows.push_back({(*f)[0], {parse_count((*f)[1], line_no, "graph nodes"),
                                  parse_count((*f)[2], line_no, "graph nodes")}});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [id, stats] : rows) {
        if (!g.ids_.empty() && g.ids_.back() == id) {
            throw InputError(fmt::format("graph nodes: duplicate job '{}'", id));
        }
        g.ids_.push_back(std::move(id));
        g.stats_.push_back(stats);
    }

    std::vector<std::vector<Adjacent>> adjacency(g.ids_.size());
    std::set<std::uint64_t> seen;
    line_no = 0;
    while (std::getline(edges, line)) {
        ++line_no;
        if (csv::trim(line).empty()) {
            continue;
        }
        const auto f = csv::split(line);
        if (!f || f->size() != 4) {
            throw InputError(fmt::format("graph edges line {}: expected 4 columns", line_no));
        }
        const auto a = g.find((*f)[0]);
        const auto b = g.find((*f)[1]);
        if (!a || !b || *a == *b) {
            throw InputError(fmt::format("graph edges line {}: bad endpoints", line_no));
        }
        const CoStats stats{parse_count((*f)[2], line_no, "graph edges"),
                            parse_count((*f)[3], line_no, "graph edges")};
        if (stats.empty() || !seen.insert(pair_key(*a, *b)).second) {
            throw InputError(fmt::format("graph edges line {}: empty or duplicate edge", line_no));
        }
        adjacency[*a].push_back({*b, stats});
        adjacency[*b].push_back({*a, stats});
    }
    g.finalize(std::move(adjacency));
    return g;
}

}  // namespace jobrec
