#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jobrec/graph.hpp"
#include "jobrec/ingest.hpp"

namespace jobrec {

/// Conditional co-occurrence estimate p(i|j) = c(i,j) / c(j); 0 when c(j) = 0.
double mle(std::uint32_t co_count, std::uint32_t count_j);
double mle(const JobMultiGraph& graph, JobIndex i, JobIndex j, Signal signal);

/// ln(c(i,j)^2 / (c(i) c(j))). Empty when any count is zero.
std::optional<double> pmi2(std::uint32_t co_count, std::uint32_t count_i, std::uint32_t count_j);
std::optional<double> pmi2(const JobMultiGraph& graph, JobIndex i, JobIndex j, Signal signal);

/// Cosine similarity. Throws std::invalid_argument on dimension mismatch or a
/// zero vector.
double embed_sim(std::span<const double> a, std::span<const double> b);

struct ContentEdge {
    std::string a;  ///< a < b
    std::string b;
    double sim = 0.0;

    friend bool operator==(const ContentEdge&, const ContentEdge&) = default;
};

/// All pairs with cosine similarity >= gamma, ordered by (a, b). With a
/// catalog, only pairs sharing a category are compared; ids missing from the
/// catalog are never blocked together.
std::vector<ContentEdge> content_edges(const EmbeddingTable& embeddings, double gamma,
                                       const JobCatalog* block_by_category = nullptr);

struct ScoreWeights {
    double w1 = 0.5;  ///< conditional-probability terms
    double w2 = 0.3;  ///< PMI^2 terms
    double w3 = 0.2;  ///< embedding similarity
    double gamma = 0.4;
    /// Use exp(pmi2) in (0, 1] instead of the raw non-positive PMI^2.
    bool normalize_pmi2 = false;

    /// Throws ConfigError when weights are negative or all zero, or gamma is
    /// outside [-1, 1].
    void validate() const;
};

/// Directed edge src -> dst scoring "recommend dst to someone who interacted
/// with src". Component scores are kept for audit; absent signals are empty.
struct DigraphEdge {
    JobIndex dst = 0;
    double corr = 0.0;
    double p_apps = 0.0;
    double p_clicks = 0.0;
    std::optional<double> pmi2_apps;
    std::optional<double> pmi2_clicks;
    std::optional<double> sim_e;

    friend bool operator==(const DigraphEdge&, const DigraphEdge&) = default;
};

/// Aggregated directed recommendation graph. Node indices match the job
/// multigraph it was built from; every edge ends at an active job.
class RecDigraph {
public:
    RecDigraph() = default;
    /// `out_edges[src]` must be sorted by dst and end only at active nodes;
    /// otherwise InvariantError.
    RecDigraph(std::vector<std::string> ids, std::vector<bool> active,
               std::vector<std::vector<DigraphEdge>> out_edges);

    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    std::optional<JobIndex> find(std::string_view job_id) const;
    const std::string& id(JobIndex i) const { return ids_[i]; }
    std::span<const std::string> ids() const { return ids_; }
    bool is_active(JobIndex i) const { return active_[i]; }
    const std::vector<bool>& active() const { return active_; }
    std::span<const DigraphEdge> out_edges(JobIndex src) const { return out_[src]; }
    /// corr of the edge src -> dst, if present.
    std::optional<double> corr(JobIndex src, JobIndex dst) const;

    /// `src_job,dst_job,corr,p_apps,p_clicks,pmi2_apps,pmi2_clicks,sim_e` per
    /// edge; absent components are empty fields.
    void write(std::ostream& out) const;
    /// Reads a dump written by write() over the given node set. Throws
    /// InputError.
    static RecDigraph load(std::istream& in, std::vector<std::string> ids, std::vector<bool> active);

    friend bool operator==(const RecDigraph&, const RecDigraph&) = default;

private:
    std::vector<std::string> ids_;
    std::vector<bool> active_;
    std::vector<std::vector<DigraphEdge>> out_;
    std::size_t edge_count_ = 0;
};

/// Weighted aggregate of the behavioral and content scores. For every ordered
/// pair (j -> i) with i active and at least one contributing signal:
/// corr = w1 (p_a(i|j) + p_c(i|j)) + w2 (pmi2_a + pmi2_c) + w3 sim_e, absent
/// signals contributing 0. `active` is indexed like the graph. Content edges
/// whose endpoints are not graph nodes are ignored.
RecDigraph aggregate(const JobMultiGraph& graph, std::span<const ContentEdge> content,
                     const ScoreWeights& weights, const std::vector<bool>& active);

/// Active flags for graph nodes; nodes absent from the catalog are inactive.
std::vector<bool> active_mask(std::span<const std::string> ids, const JobCatalog& catalog);

}  // namespace jobrec
