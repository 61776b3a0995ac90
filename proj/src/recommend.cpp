#include "jobrec/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace jobrec {

std::string_view to_string(UserType type) {
    switch (type) {
    case UserType::Active:
        return "active";
    case UserType::PassiveOrNewWithProfile:
        return "passive_or_new";
    case UserType::Anonymous:
        return "anonymous";
    }
    return "?";
}

std::string_view to_string(Provenance provenance) {
    switch (provenance) {
    case Provenance::Level1:
        return "Level1";
    case Provenance::Level2:
        return "Level2";
    case Provenance::PersonalizedPR:
        return "PersonalizedPR";
    case Provenance::GlobalPR:
        return "GlobalPR";
    }
    return "?";
}

UserProfile build_profile(std::string user_id, const UserRecord* record,
                          std::span<const InteractionEvent> events, Timestamp reference,
                          int window_days) {
    UserProfile profile;
    profile.user_id = std::move(user_id);
    if (record) {
        profile.resume_category = record->resume_category;
        profile.location = record->location;
    }
    const std::chrono::seconds window = std::chrono::days{window_days};
    std::set<std::string> prior;
    for (const auto& ev : events) {
        if (ev.user_id != profile.user_id) {
            continue;
        }
        if (reference - ev.timestamp < window) {
            profile.interactions.push_back({ev.job_id, ev.kind, ev.timestamp});
        } else {
            prior.insert(ev.job_id);
        }
    }
    std::stable_sort(profile.interactions.begin(), profile.interactions.end(),
                     [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
    profile.prior_jobs.assign(prior.begin(), prior.end());
    return profile;
}

UserType classify_user(const UserProfile& profile) {
    const bool engaged = std::any_of(profile.interactions.begin(), profile.interactions.end(),
                                     [](const Interaction& x) {
                                         return x.kind == SignalKind::Apply || x.kind == SignalKind::Click;
                                     });
    if (engaged) {
        return UserType::Active;
    }
    if (profile.resume_category) {
        return UserType::PassiveOrNewWithProfile;
    }
    return UserType::Anonymous;
}

double activity_score(double age_days, double lambda) {
    if (!(age_days >= 0.0)) {
        throw std::invalid_argument("activity age must be non-negative");
    }
    return std::exp(-lambda * age_days);
}

void rank_candidates(std::vector<Candidate>& candidates, std::span<const std::string> ids) {
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return ids[a.job] < ids[b.job];
    });
}

namespace {

std::vector<Candidate> top_k(const std::unordered_map<JobIndex, double>& best,
                             std::span<const std::string> ids, std::size_t k) {
    std::vector<Candidate> out;
    out.reserve(best.size());
    for (const auto& [job, score] : best) {
        out.push_back({job, score});
    }
    rank_candidates(out, ids);
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

void max_merge(std::unordered_map<JobIndex, double>& best, JobIndex job, double score) {
    const auto [it, inserted] = best.try_emplace(job, score);
    if (!inserted && score > it->second) {
        it->second = score;
    }
}

}  // namespace

std::vector<Candidate> level1(const RecDigraph& digraph, std::span<const SourceJob> sources,
                              std::size_t k, std::span<const JobIndex> excluded) {
    std::vector<char> blocked(digraph.node_count(), 0);
    for (const auto& s : sources) {
        blocked.at(s.job) = 1;
    }
    for (JobIndex j : excluded) {
        blocked.at(j) = 1;
    }
    std::unordered_map<JobIndex, double> best;
    for (const auto& s : sources) {
        for (const auto& e : digraph.out_edges(s.job)) {
            if (!blocked[e.dst]) {
                max_merge(best, e.dst, s.activity * e.corr);
            }
        }
    }
    return top_k(best, digraph.ids(), k);
}

std::vector<Candidate> level2(const RecDigraph& digraph, std::span<const Candidate> level1_results,
                              std::span<const JobIndex> excluded, std::size_t k,
                              std::size_t per_node_fanout) {
    std::vector<char> blocked(digraph.node_count(), 0);
    for (const auto& c : level1_results) {
        blocked.at(c.job) = 1;
    }
    for (JobIndex j : excluded) {
        blocked.at(j) = 1;
    }
    std::unordered_map<JobIndex, double> best;
    for (const auto& m : level1_results) {
        auto edges = digraph.out_edges(m.job);
        std::vector<const DigraphEdge*> expand;
        expand.reserve(edges.size());
        for (const auto& e : edges) {
            expand.push_back(&e);
        }
        if (per_node_fanout < expand.size()) {
            std::partial_sort(expand.begin(), expand.begin() + static_cast<std::ptrdiff_t>(per_node_fanout),
                              expand.end(), [&](const DigraphEdge* a, const DigraphEdge* b) {
                                  if (a->corr != b->corr) {
                                      return a->corr > b->corr;
                                  }
                                  return digraph.id(a->dst) < digraph.id(b->dst);
                              });
            expand.resize(per_node_fanout);
        }
        for (const auto* e : expand) {
            if (!blocked[e->dst]) {
                max_merge(best, e->dst, m.score * e->corr);
            }
        }
    }
    return top_k(best, digraph.ids(), k);
}

std::vector<JobIndex> preference_vector(const UserProfile& profile, const RecDigraph& digraph,
                                        const JobCatalog& catalog, const EmbeddingTable* embeddings,
                                        std::size_t per_expired) {
    std::set<JobIndex> chosen;

    if (embeddings && !profile.brand_new() && per_expired > 0) {
        std::set<std::string_view> expired;
        auto consider = [&](const std::string& job_id) {
            const auto* job = catalog.find(job_id);
            if (job && !job->is_active()) {
                expired.insert(job->job_id);
            }
        };
        for (const auto& x : profile.interactions) {
            consider(x.job_id);
        }
        for (const auto& id : profile.prior_jobs) {
            consider(id);
        }
        for (auto expired_id : expired) {
            const auto* origin = embeddings->find(expired_id);
            if (!origin) {
                continue;
            }
            std::vector<Candidate> similar;
            for (JobIndex v = 0; v < digraph.node_count(); ++v) {
                if (!digraph.is_active(v)) {
                    continue;
                }
                if (const auto* vec = embeddings->find(digraph.id(v))) {
                    similar.push_back({v, embed_sim(*origin, *vec)});
                }
            }
            rank_candidates(similar, digraph.ids());
            for (std::size_t x = 0; x < similar.size() && x < per_expired; ++x) {
                chosen.insert(similar[x].job);
            }
        }
    }

    if (profile.resume_category) {
        for (JobIndex v = 0; v < digraph.node_count(); ++v) {
            if (!digraph.is_active(v)) {
                continue;
            }
            const auto* job = catalog.find(digraph.id(v));
            if (job && job->category == *profile.resume_category) {
                chosen.insert(v);
            }
        }
    }
    return {chosen.begin(), chosen.end()};
}

std::vector<Candidate> location_rerank(std::vector<Candidate> candidates,
                                       const std::optional<GeoPoint>& user_location,
                                       std::span<const std::optional<GeoPoint>> job_locations,
                                       const LocationParams& params) {
    if (!(params.boost >= 1.0)) {
        throw std::invalid_argument("location boost must be >= 1");
    }
    if (!user_location) {
        return candidates;
    }
    for (auto& c : candidates) {
        const auto& loc = job_locations[c.job];
        if (loc && haversine_km(*user_location, *loc) <= params.radius_km) {
            c.score *= params.boost;
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    return candidates;
}

Recommender::Recommender(const RecDigraph& digraph, const JobCatalog& catalog,
                         const EmbeddingTable* embeddings, RecommendConfig config, Timestamp reference)
    : digraph_(digraph),
      catalog_(catalog),
      embeddings_(embeddings),
      config_(std::move(config)),
      reference_(reference) {
    config_.pagerank.validate();
    locations_.resize(digraph_.node_count());
    categories_.resize(digraph_.node_count(), nullptr);
    for (JobIndex v = 0; v < digraph_.node_count(); ++v) {
        if (const auto* job = catalog_.find(digraph_.id(v))) {
            locations_[v] = job->location;
            categories_[v] = &job->category;
        }
    }
    global_ = global_pagerank(digraph_, config_.pagerank);
}

const PageRankResult& Recommender::personalized(const std::vector<JobIndex>& preference) const {
    std::lock_guard lock(cache_mutex_);
    if (const auto it = ppr_cache_.find(preference); it != ppr_cache_.end()) {
        return it->second;
    }
    std::function<bool(JobIndex)> admit;
    std::set<std::string_view> allowed;
    if (config_.pagerank_within_category) {
        for (JobIndex v : preference) {
            if (categories_[v]) {
                allowed.insert(*categories_[v]);
            }
        }
        admit = [&](JobIndex v) { return categories_[v] && allowed.contains(*categories_[v]); };
    }
    auto result = personalized_pagerank(digraph_, preference, config_.pagerank, admit);
    return ppr_cache_.emplace(preference, std::move(result)).first->second;
}

RecommendationList Recommender::recommend(const UserProfile& profile, std::size_t k) const {
    if (k == 0) {
        throw std::invalid_argument("k must be at least 1");
    }
    RecommendationList list;
    list.user_id = profile.user_id;
    list.user_type = classify_user(profile);
    if (digraph_.node_count() == 0) {
        list.diagnostic = "empty digraph";
        return list;
    }
    const std::size_t min_recs = std::min(config_.min_recs.value_or(k), k);

    std::vector<char> taken(digraph_.node_count(), 0);
    std::vector<JobIndex> history;
    auto note_history = [&](const std::string& job_id) {
        if (const auto v = digraph_.find(job_id); v && !taken[*v]) {
            taken[*v] = 1;
            history.push_back(*v);
        }
    };
    for (const auto& x : profile.interactions) {
        note_history(x.job_id);
    }
    for (const auto& id : profile.prior_jobs) {
        note_history(id);
    }

    auto append = [&](std::span<const Candidate> candidates, Provenance provenance) {
        for (const auto& c : candidates) {
            if (list.entries.size() >= k) {
                break;
            }
            if (taken[c.job] || !digraph_.is_active(c.job)) {
                continue;
            }
            taken[c.job] = 1;
            list.entries.push_back({digraph_.id(c.job), c.score, provenance});
        }
    };
    auto append_ranking = [&](const PageRankResult& pr, Provenance provenance) {
        std::vector<Candidate> candidates;
        for (const auto& [v, score] : pr.ranked(digraph_.ids())) {
            if (!taken[v]) {
                candidates.push_back({v, score});
            }
        }
        candidates = location_rerank(std::move(candidates), profile.location, locations_, config_.location);
        append(candidates, provenance);
    };
    auto append_personalized = [&] {
        const auto preference =
            preference_vector(profile, digraph_, catalog_, embeddings_, config_.per_expired_similar);
        if (preference.empty()) {
            list.diagnostic = "no preference jobs; using global ranking";
            return;
        }
        append_ranking(personalized(preference), Provenance::PersonalizedPR);
    };

    switch (list.user_type) {
    case UserType::Active: {
        std::map<JobIndex, double> activity;
        for (const auto& x : profile.interactions) {
            if (x.kind == SignalKind::EmailOpenNoClick) {
                continue;
            }
            const auto v = digraph_.find(x.job_id);
            if (!v) {
                continue;
            }
            const double a = activity_score(std::max(0.0, age_days(reference_, x.timestamp)),
                                            config_.activity_lambda);
            auto [it, inserted] = activity.try_emplace(*v, a);
            if (!inserted) {
                it->second = std::max(it->second, a);
            }
        }
        std::vector<SourceJob> sources;
        for (const auto& [v, a] : activity) {
            sources.push_back({v, a});
        }
        const auto first = level1(digraph_, sources, k, history);
        append(first, Provenance::Level1);
        if (list.entries.size() < min_recs) {
            std::vector<JobIndex> blocked = history;
            const auto second =
                level2(digraph_, first, blocked, k - list.entries.size(), config_.level2_fanout);
            append(second, Provenance::Level2);
        }
        if (list.entries.size() < min_recs) {
            append_personalized();
        }
        break;
    }
    case UserType::PassiveOrNewWithProfile:
        append_personalized();
        break;
    case UserType::Anonymous:
        break;
    }
    if (list.entries.size() < min_recs) {
        append_ranking(global_, Provenance::GlobalPR);
    }
    if (list.entries.empty() && list.diagnostic.empty()) {
        list.diagnostic = "no recommendable active jobs";
    }
    return list;
}

RecommendationList recommend(const UserProfile& profile, const RecDigraph& digraph,
                             const JobCatalog& catalog, const EmbeddingTable* embeddings,
                             const RecommendConfig& config, Timestamp reference, std::size_t k) {
    return Recommender(digraph, catalog, embeddings, config, reference).recommend(profile, k);
}

}  // namespace jobrec
