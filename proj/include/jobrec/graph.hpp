#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jobrec/ingest.hpp"

namespace jobrec {

using JobIndex = std::uint32_t;

/// Behavioral signals carried by the multigraph.
enum class Signal : std::uint8_t { Apps, Clicks };

/// Distinct-user totals for one job.
struct NodeStats {
    std::uint32_t total_apps = 0;
    std::uint32_t total_clicks = 0;

    std::uint32_t count(Signal s) const { return s == Signal::Apps ? total_apps : total_clicks; }
    friend bool operator==(const NodeStats&, const NodeStats&) = default;
};

/// Distinct-user co-occurrence counts for an unordered job pair.
struct CoStats {
    std::uint32_t co_apps = 0;
    std::uint32_t co_clicks = 0;

    std::uint32_t count(Signal s) const { return s == Signal::Apps ? co_apps : co_clicks; }
    bool empty() const { return co_apps == 0 && co_clicks == 0; }
    friend bool operator==(const CoStats&, const CoStats&) = default;
};

struct CoClickPolicy {
    /// Clicks without a query id share a group when consecutive clicks by the
    /// same user are at most this far apart.
    std::chrono::seconds session_gap = std::chrono::minutes{30};
};

struct Adjacent {
    JobIndex other = 0;
    CoStats stats;

    friend bool operator==(const Adjacent&, const Adjacent&) = default;
};

struct Neighbor {
    std::string job_id;
    CoStats stats;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Job multigraph: nodes labelled with global apply/click totals, edges with
/// co-apply/co-click counts. Nodes are indexed in job-id order. Immutable once
/// built.
class JobMultiGraph {
public:
    JobMultiGraph() = default;

    /// `signals` must be deduplicated and reference only ids in `job_ids`;
    /// otherwise InputError. Email-open signals carry no co-statistics and are
    /// ignored.
    static JobMultiGraph build(std::span<const DedupedSignal> signals,
                               std::span<const std::string> job_ids, const CoClickPolicy& policy = {});

    std::size_t node_count() const { return ids_.size(); }
    /// Number of undirected edges with non-zero co-statistics.
    std::size_t edge_count() const { return edge_count_; }

    std::optional<JobIndex> find(std::string_view job_id) const;
    const std::string& id(JobIndex i) const { return ids_[i]; }
    std::span<const std::string> ids() const { return ids_; }
    const NodeStats& stats(JobIndex i) const { return stats_[i]; }

    /// Zero counts when the pair has no edge. Order independent.
    CoStats costats(JobIndex a, JobIndex b) const;
    /// Non-zero partners of `i`, ascending by index (= job id).
    std::span<const Adjacent> adjacent(JobIndex i) const { return adjacency_[i]; }
    /// Throws std::out_of_range for an unknown job.
    std::vector<Neighbor> neighbors(std::string_view job_id) const;

    /// `job_id,total_apps,total_clicks` per node.
    void write_nodes(std::ostream& out) const;
    /// `job_i,job_j,co_apps,co_clicks` per edge with job_i < job_j.
    void write_edges(std::ostream& out) const;
    /// Inverse of write_nodes/write_edges. Throws InputError.
    static JobMultiGraph load(std::istream& nodes, std::istream& edges);

    friend bool operator==(const JobMultiGraph&, const JobMultiGraph&) = default;

private:
    void finalize(std::vector<std::vector<Adjacent>> adjacency);

    std::vector<std::string> ids_;
    std::vector<NodeStats> stats_;
    std::vector<std::vector<Adjacent>> adjacency_;
    std::size_t edge_count_ = 0;
};

}  // namespace jobrec
