#include "jobrec/pagerank.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "jobrec/errors.hpp"

namespace jobrec {

void PageRankParams::validate() const {
    if (!(damping > 0.0 && damping < 1.0)) {
        throw ConfigError("damping must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("epsilon must be positive");
    }
    if (max_iters < 1) {
        throw ConfigError("max_iters must be at least 1");
    }
}

std::vector<std::pair<JobIndex, double>> PageRankResult::ranked(std::span<const std::string> ids) const {
    std::vector<std::pair<JobIndex, double>> out;
    out.reserve(support.size());
    for (JobIndex v : support) {
        out.emplace_back(v, scores[v]);
    }
    std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return ids[a.first] < ids[b.first];
    });
    return out;
}

PageRankResult power_iteration(const RecDigraph& digraph, std::span<const JobIndex> nodes,
                               std::span<const double> restart, const PageRankParams& params) {
    params.validate();
    if (nodes.size() != restart.size()) {
        throw std::invalid_argument("restart vector size differs from node set");
    }
    PageRankResult result;
    result.scores.assign(digraph.node_count(), 0.0);
    result.support.assign(nodes.begin(), nodes.end());
    const std::size_t n = nodes.size();
    if (n == 0) {
        result.diagnostic = "empty node set";
        return result;
    }

    std::vector<std::int64_t> local(digraph.node_count(), -1);
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0 && nodes[k - 1] >= nodes[k]) {
            throw std::invalid_argument("node set must be strictly ascending");
        }
        local[nodes[k]] = static_cast<std::int64_t>(k);
    }

    double restart_total = 0.0;
    for (double r : restart) {
        if (!(r >= 0.0)) {
            throw std::invalid_argument("restart weights must be non-negative");
        }
        restart_total += r;
    }
    if (!(restart_total > 0.0)) {
        throw std::invalid_argument("restart weights sum to zero");
    }
    std::vector<double> r(restart.begin(), restart.end());
    for (double& v : r) {
        v /= restart_total;
    }

    // Row-normalized positive transitions inside the node set.
    struct Transition {
        std::size_t to;
        double p;
    };
    std::vector<std::vector<Transition>> rows(n);
    for (std::size_t k = 0; k < n; ++k) {
        double total = 0.0;
        for (const auto& e : digraph.out_edges(nodes[k])) {
            if (local[e.dst] >= 0 && e.corr > 0.0) {
                total += e.corr;
            }
        }
        if (total <= 0.0) {
            continue;
        }
        for (const auto& e : digraph.out_edges(nodes[k])) {
            if (local[e.dst] >= 0 && e.corr > 0.0) {
                rows[k].push_back({static_cast<std::size_t>(local[e.dst]), e.corr / total});
            }
        }
    }

    const double d = params.damping;
    std::vector<double> x = r;
    std::vector<double> next(n);
    for (int it = 1; it <= params.max_iters; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        double dangling = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (rows[k].empty()) {
                dangling += x[k];
                continue;
            }
            for (const auto& t : rows[k]) {
                next[t.to] += d * x[k] * t.p;
            }
        }
        const double jump = d * dangling + (1.0 - d);
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            next[k] += jump * r[k];
            change += std::abs(next[k] - x[k]);
        }
        x.swap(next);
        result.iterations = it;
        if (change < params.epsilon) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        result.diagnostic = "power iteration did not converge within max_iters";
    }
    for (std::size_t k = 0; k < n; ++k) {
        result.scores[nodes[k]] = x[k];
    }
    return result;
}

PageRankResult global_pagerank(const RecDigraph& digraph, const PageRankParams& params) {
    std::vector<JobIndex> nodes;
    for (JobIndex v = 0; v < digraph.node_count(); ++v) {
        if (digraph.is_active(v)) {
            nodes.push_back(v);
        }
    }
    if (nodes.empty()) {
        PageRankResult empty;
        empty.scores.assign(digraph.node_count(), 0.0);
        empty.diagnostic = "digraph has no active jobs";
        return empty;
    }
    const std::vector<double> restart(nodes.size(), 1.0);
    return power_iteration(digraph, nodes, restart, params);
}

PageRankResult personalized_pagerank(const RecDigraph& digraph, std::span<const JobIndex> preference,
                                     const PageRankParams& params,
                                     const std::function<bool(JobIndex)>& admit) {
    std::vector<char> in_pref(digraph.node_count(), 0);
    for (JobIndex v : preference) {
        if (v < digraph.node_count() && digraph.is_active(v)) {
            in_pref[v] = 1;
        }
    }
    std::vector<char> reached = in_pref;
    std::deque<JobIndex> frontier;
    for (JobIndex v = 0; v < digraph.node_count(); ++v) {
        if (in_pref[v]) {
            frontier.push_back(v);
        }
    }
    if (frontier.empty()) {
        PageRankResult empty;
        empty.scores.assign(digraph.node_count(), 0.0);
        empty.diagnostic = "preference set has no active job in the digraph";
        return empty;
    }
    while (!frontier.empty()) {
        const JobIndex u = frontier.front();
        frontier.pop_front();
        for (const auto& e : digraph.out_edges(u)) {
            if (e.corr > 0.0 && !reached[e.dst] && (!admit || admit(e.dst))) {
                reached[e.dst] = 1;
                frontier.push_back(e.dst);
            }
        }
    }
    std::vector<JobIndex> nodes;
    std::vector<double> restart;
    for (JobIndex v = 0; v < digraph.node_count(); ++v) {
        if (reached[v]) {
            nodes.push_back(v);
            restart.push_back(in_pref[v] ? 1.0 : 0.0);
        }
    }
    return power_iteration(digraph, nodes, restart, params);
}

}  // namespace jobrec
