#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jobrec/scoring.hpp"

namespace jobrec {

struct PageRankParams {
    double damping = 0.85;
    /// Converged once the L1 change between iterates drops below this.
    double epsilon = 1e-10;
    int max_iters = 100;

    /// Throws ConfigError for damping outside (0, 1), non-positive epsilon or
    /// max_iters.
    void validate() const;
};

struct PageRankResult {
    /// Indexed by digraph node; zero outside `support`.
    std::vector<double> scores;
    /// Nodes the walk ran over, ascending.
    std::vector<JobIndex> support;
    bool converged = false;
    int iterations = 0;
    std::string diagnostic;

    bool empty() const { return support.empty(); }
    /// Support ordered by score descending, then job id.
    std::vector<std::pair<JobIndex, double>> ranked(std::span<const std::string> ids) const;
};

/// Power iteration over the active subgraph. Transition weights are the
/// corr values clamped at zero and row-normalized; rows without positive
/// weight (dangling nodes) jump according to the restart distribution.
PageRankResult power_iteration(const RecDigraph& digraph, std::span<const JobIndex> nodes,
                               std::span<const double> restart, const PageRankParams& params);

/// PageRank with a uniform restart over every active job.
PageRankResult global_pagerank(const RecDigraph& digraph, const PageRankParams& params = {});

/// PageRank restarting uniformly on the active preference jobs, run on the
/// subgraph reachable from them through positive-weight edges. When `admit`
/// is given, the reachable set only grows through nodes it accepts.
PageRankResult personalized_pagerank(const RecDigraph& digraph, std::span<const JobIndex> preference,
                                     const PageRankParams& params = {},
                                     const std::function<bool(JobIndex)>& admit = {});

}  // namespace jobrec
