#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jobrec/graph.hpp"
#include "jobrec/ingest.hpp"
#include "jobrec/mf.hpp"
#include "jobrec/scoring.hpp"

namespace jobrec::eval {

/// Edge-type bits; any non-zero combination is a subset.
enum EdgeTypeBit : unsigned { kClicks = 1u, kApps = 2u, kContent = 4u };

/// Fraction of active jobs touching at least one edge whose type lies in each
/// edge-type subset, indexed by the subset bitmask (index 0 unused).
struct ConnectivityReport {
    std::size_t active_jobs = 0;
    std::array<double, 8> fraction{};

    double at(unsigned mask) const { return fraction.at(mask); }
    static std::string subset_name(unsigned mask);
};

/// `content` edges count only when both endpoints are graph nodes; `active`
/// is indexed like the graph.
ConnectivityReport connectivity_report(const JobMultiGraph& graph, std::span<const ContentEdge> content,
                                       const std::vector<bool>& active);

using mf::ScoredJob;

struct ClassicCfParams {
    std::size_t appliers_per_job = 50;
    Timestamp reference{};
    int window_days = kDefaultWindowDays;
    /// Per-day decay of an applicant's apply when counting frequency.
    double recency_lambda = 0.05;
};

/// Co-apply baseline: for each job the user applied to, take that job's most
/// recent `appliers_per_job` other applicants; score every job those
/// applicants applied to inside the window by recency-weighted frequency,
/// summed over the user's jobs. Only apply events are used.
class ClassicCf {
public:
    ClassicCf(std::span<const InteractionEvent> events, ClassicCfParams params);

    /// Excludes the user's own applies and `exclusions`; when `eligible` is
    /// given, only those jobs are recommended. Empty for users without applies.
    std::vector<ScoredJob> recommend(std::string_view user, std::size_t k,
                                     const std::set<std::string, std::less<>>& exclusions = {},
                                     const std::set<std::string, std::less<>>* eligible = nullptr) const;

private:
    struct Apply {
        std::string user;
        Timestamp at{};
    };
    ClassicCfParams params_;
    /// Per job: latest apply per distinct user, newest first.
    std::map<std::string, std::vector<Apply>, std::less<>> appliers_;
    /// Per user: latest apply per job.
    std::map<std::string, std::map<std::string, Timestamp>, std::less<>> applies_;
};

struct HoldoutSplit {
    std::vector<InteractionEvent> train;
    std::vector<InteractionEvent> test;
};

/// Per-user temporal split of apply events: the latest round(fraction * n)
/// applies of each user (at most n - 1) form the test set. Timestamp ties are
/// ordered by a seeded shuffle. Non-apply events stay in train only when they
/// precede the user's first held-out apply. Throws std::invalid_argument
/// unless 0 < fraction < 1.
HoldoutSplit holdout_split(std::span<const InteractionEvent> events, double fraction, std::uint64_t seed);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// precision = |top-k ∩ heldout| / k, recall = |top-k ∩ heldout| / |heldout|.
/// Empty when `heldout` is empty. Throws std::invalid_argument for k = 0.
std::optional<PrecisionRecall> precision_recall_at_k(std::span<const std::string> recommendations,
                                                     const std::set<std::string, std::less<>>& heldout,
                                                     std::size_t k);

struct SystemMetrics {
    std::string system;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t users_evaluated = 0;
    std::size_t users_with_recommendations = 0;
};

struct EvalReport {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<SystemMetrics> systems;

    const SystemMetrics* find(std::string_view system) const;
    std::string to_text() const;
    std::string to_json() const;
};

/// Running per-system sums; merge() is associative.
class MetricsAccumulator {
public:
    void add(std::string_view system, const PrecisionRecall& pr, bool had_recommendations);
    void merge(const MetricsAccumulator& other);
    EvalReport report(std::size_t k, std::uint64_t seed, std::span<const std::string> order) const;

private:
    struct Sums {
        double precision = 0.0;
        double recall = 0.0;
        std::size_t users = 0;
        std::size_t with_recs = 0;
    };
    std::map<std::string, Sums, std::less<>> sums_;
};

}  // namespace jobrec::eval
