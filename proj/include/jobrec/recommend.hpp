#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jobrec/ingest.hpp"
#include "jobrec/pagerank.hpp"
#include "jobrec/scoring.hpp"

namespace jobrec {

enum class UserType : std::uint8_t { Active, PassiveOrNewWithProfile, Anonymous };
std::string_view to_string(UserType type);

struct Interaction {
    std::string job_id;
    SignalKind kind = SignalKind::Apply;
    Timestamp timestamp{};
};

struct UserProfile {
    std::string user_id;
    /// Interactions inside the recency window.
    std::vector<Interaction> interactions;
    /// Jobs interacted with before the window opened. They never make a user
    /// active but seed embedding-based preferences.
    std::vector<std::string> prior_jobs;
    std::optional<std::string> resume_category;
    std::optional<GeoPoint> location;

    /// Brand-new: no interactions at all, inside or outside the window.
    bool brand_new() const { return interactions.empty() && prior_jobs.empty(); }
};

/// Builds a profile from the user's raw events: those inside the window become
/// interactions, older ones become prior jobs. Events from other users are
/// ignored.
UserProfile build_profile(std::string user_id, const UserRecord* record,
                          std::span<const InteractionEvent> events, Timestamp reference,
                          int window_days = kDefaultWindowDays);

/// Active iff at least one apply or click; else PassiveOrNewWithProfile iff a
/// resume category is present; else Anonymous.
UserType classify_user(const UserProfile& profile);

inline constexpr double kDefaultActivityLambda = 0.05;

/// exp(-lambda * age_days). Throws std::invalid_argument for negative age.
double activity_score(double age_days, double lambda = kDefaultActivityLambda);

struct SourceJob {
    JobIndex job = 0;
    double activity = 1.0;
};

struct Candidate {
    JobIndex job = 0;
    double score = 0.0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Sorts by score descending, ties by job id ascending.
void rank_candidates(std::vector<Candidate>& candidates, std::span<const std::string> ids);

/// Direct neighbours of the source jobs: score(j) = max over sources s of
/// activity(s) * corr(s -> j). Sources and `excluded` jobs are never
/// candidates. Returns the top k.
std::vector<Candidate> level1(const RecDigraph& digraph, std::span<const SourceJob> sources,
                              std::size_t k, std::span<const JobIndex> excluded = {});

/// Second hop: each level-1 job m with path score p_m proposes its successors
/// j with p_m * corr(m -> j), max-merged. Jobs already in level 1, sources and
/// `excluded` jobs are skipped. `per_node_fanout` caps how many of m's
/// highest-corr successors are expanded. Returns the top k new candidates.
std::vector<Candidate> level2(const RecDigraph& digraph, std::span<const Candidate> level1_results,
                              std::span<const JobIndex> excluded, std::size_t k,
                              std::size_t per_node_fanout = std::numeric_limits<std::size_t>::max());

/// Active jobs forming the personalized restart set: for each expired job the
/// user touched, its `per_expired` most similar active jobs by embedding, plus
/// every active job in the resume category. Brand-new users only get the
/// category part. Result is ascending by index.
std::vector<JobIndex> preference_vector(const UserProfile& profile, const RecDigraph& digraph,
                                        const JobCatalog& catalog, const EmbeddingTable* embeddings,
                                        std::size_t per_expired = 5);

struct LocationParams {
    double radius_km = 80.0;
    double boost = 1.25;
};

/// Multiplies the score of candidates within radius_km of the user by boost
/// and re-sorts stably. No-op without a user location. `job_locations` is
/// indexed by digraph node.
std::vector<Candidate> location_rerank(std::vector<Candidate> candidates,
                                       const std::optional<GeoPoint>& user_location,
                                       std::span<const std::optional<GeoPoint>> job_locations,
                                       const LocationParams& params = {});

enum class Provenance : std::uint8_t { Level1, Level2, PersonalizedPR, GlobalPR };
std::string_view to_string(Provenance provenance);

struct Recommendation {
    std::string job_id;
    double score = 0.0;
    Provenance provenance = Provenance::Level1;

    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Entries are grouped in provenance order (Level1, Level2, PersonalizedPR,
/// GlobalPR) with non-increasing scores inside each group. Scores of different
/// groups live on different scales and are not compared.
struct RecommendationList {
    std::string user_id;
    UserType user_type = UserType::Anonymous;
    std::vector<Recommendation> entries;
    std::string diagnostic;
};

struct RecommendConfig {
    std::size_t k = 15;
    /// Minimum list length before falling through to the next strategy;
    /// defaults to k.
    std::optional<std::size_t> min_recs;
    double activity_lambda = kDefaultActivityLambda;
    std::size_t per_expired_similar = 5;
    std::size_t level2_fanout = std::numeric_limits<std::size_t>::max();
    LocationParams location;
    PageRankParams pagerank;
    /// Restrict the personalized walk to the categories of the preference jobs.
    bool pagerank_within_category = true;
};

/// Serves recommendations over one immutable digraph. `recommend` is safe to
/// call concurrently.
class Recommender {
public:
    Recommender(const RecDigraph& digraph, const JobCatalog& catalog,
                const EmbeddingTable* embeddings, RecommendConfig config, Timestamp reference);

    RecommendationList recommend(const UserProfile& profile, std::size_t k) const;
    RecommendationList recommend(const UserProfile& profile) const { return recommend(profile, config_.k); }

    const PageRankResult& global_ranking() const { return global_; }
    const RecommendConfig& config() const { return config_; }

private:
    const PageRankResult& personalized(const std::vector<JobIndex>& preference) const;

    const RecDigraph& digraph_;
    const JobCatalog& catalog_;
    const EmbeddingTable* embeddings_;
    RecommendConfig config_;
    Timestamp reference_;
    std::vector<std::optional<GeoPoint>> locations_;
    std::vector<const std::string*> categories_;
    PageRankResult global_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::vector<JobIndex>, PageRankResult> ppr_cache_;
};

/// One-shot convenience over Recommender.
RecommendationList recommend(const UserProfile& profile, const RecDigraph& digraph,
                             const JobCatalog& catalog, const EmbeddingTable* embeddings,
                             const RecommendConfig& config, Timestamp reference, std::size_t k);

}  // namespace jobrec
