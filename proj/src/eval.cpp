#include "jobrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace jobrec::eval {

std::string ConnectivityReport::subset_name(unsigned mask) {
    std::string out;
    auto add = [&](unsigned bit, std::string_view name) {
        if (mask & bit) {
            if (!out.empty()) {
                out += '+';
            }
            out += name;
        }
    };
    add(kClicks, "clicks");
    add(kApps, "apps");
    add(kContent, "content");
    return out;
}

ConnectivityReport connectivity_report(const JobMultiGraph& graph, std::span<const ContentEdge> content,
                                       const std::vector<bool>& active) {
    const std::size_t n = graph.node_count();
    if (active.size() != n) {
        throw std::invalid_argument("active mask size differs from graph");
    }
    std::vector<unsigned> types(n, 0);
    for (JobIndex v = 0; v < n; ++v) {
        for (const auto& adj : graph.adjacent(v)) {
            if (adj.stats.co_clicks > 0) {
                types[v] |= kClicks;
            }
            if (adj.stats.co_apps > 0) {
                types[v] |= kApps;
            }
        }
    }
    for (const auto& e : content) {
        const auto a = graph.find(e.a);
        const auto b = graph.find(e.b);
        if (a && b && *a != *b) {
            types[*a] |= kContent;
            types[*b] |= kContent;
        }
    }
    ConnectivityReport report;
    std::array<std::size_t, 8> counts{};
    for (JobIndex v = 0; v < n; ++v) {
        if (!active[v]) {
            continue;
        }
        ++report.active_jobs;
        for (unsigned mask = 1; mask < 8; ++mask) {
            if (types[v] & mask) {
                ++counts[mask];
            }
        }
    }
    for (unsigned mask = 1; mask < 8; ++mask) {
        report.fraction[mask] = report.active_jobs == 0
                                    ? 0.0
                                    : static_cast<double>(counts[mask]) / static_cast<double>(report.active_jobs);
    }
    return report;
}

ClassicCf::ClassicCf(std::span<const InteractionEvent> events, ClassicCfParams params)
    : params_(params) {
    for (const auto& ev : events) {
        if (ev.kind != SignalKind::Apply) {
            continue;
        }
        auto& latest = applies_[ev.user_id][ev.job_id];
        latest = std::max(latest, ev.timestamp);
    }
    std::map<std::string, std::vector<Apply>, std::less<>> per_job;
    for (const auto& [user, jobs] : applies_) {
        for (const auto& [job, at] : jobs) {
            per_job[job].push_back({user, at});
        }
    }
    for (auto& [job, list] : per_job) {
        std::sort(list.begin(), list.end(), [](const Apply& a, const Apply& b) {
            if (a.at != b.at) {
                return a.at > b.at;
            }
            return a.user < b.user;
        });
    }
    appliers_ = std::move(per_job);
}

std::vector<ScoredJob> ClassicCf::recommend(std::string_view user, std::size_t k,
                                            const std::set<std::string, std::less<>>& exclusions,
                                            const std::set<std::string, std::less<>>* eligible) const {
    const auto mine = applies_.find(user);
    if (mine == applies_.end()) {
        return {};
    }
    const std::chrono::seconds window = std::chrono::days{params_.window_days};
    std::map<std::string, double, std::less<>> scores;
    for (const auto& [source, at] : mine->second) {
        const auto& list = appliers_.at(source);
        std::size_t taken = 0;
        for (const auto& applicant : list) {
            if (taken >= params_.appliers_per_job) {
                break;
            }
            if (applicant.user == user) {
                continue;
            }
            ++taken;
            for (const auto& [job, when] : applies_.at(applicant.user)) {
                if (params_.reference - when >= window || mine->second.contains(job) ||
                    exclusions.contains(job) || (eligible && !eligible->contains(job))) {
                    continue;
                }
                const double age = std::max(0.0, age_days(params_.reference, when));
                scores[job] += std::exp(-params_.recency_lambda * age);
            }
        }
    }
    std::vector<ScoredJob> out;
    for (const auto& [job, score] : scores) {
        out.push_back({job, score});
    }
    std::sort(out.begin(), out.end(), [](const ScoredJob& a, const ScoredJob& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.job_id < b.job_id;
    });
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

HoldoutSplit holdout_split(std::span<const InteractionEvent> events, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("holdout fraction must lie in (0, 1)");
    }
    std::map<std::string_view, std::vector<std::size_t>> applies;
    for (std::size_t e = 0; e < events.size(); ++e) {
        if (events[e].kind == SignalKind::Apply) {
            applies[events[e].user_id].push_back(e);
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<char> held(events.size(), 0);
    std::map<std::string_view, Timestamp> cutoff;
    for (auto& [user, idxs] : applies) {
        std::shuffle(idxs.begin(), idxs.end(), rng);
        std::stable_sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
            return events[a].timestamp < events[b].timestamp;
        });
        const auto n = idxs.size();
        auto n_test = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
        n_test = std::min(n_test, n - 1);
        for (std::size_t x = n - n_test; x < n; ++x) {
            held[idxs[x]] = 1;
        }
        if (n_test > 0) {
            cutoff[user] = events[idxs[n - n_test]].timestamp;
        }
    }
    HoldoutSplit split;
    for (std::size_t e = 0; e < events.size(); ++e) {
        const auto& ev = events[e];
        if (held[e]) {
            split.test.push_back(ev);
        } else if (ev.kind == SignalKind::Apply) {
            split.train.push_back(ev);
        } else {
            const auto c = cutoff.find(ev.user_id);
            if (c == cutoff.end() || ev.timestamp < c->second) {
                split.train.push_back(ev);
            }
        }
    }
    return split;
}

std::optional<PrecisionRecall> precision_recall_at_k(std::span<const std::string> recommendations,
                                                     const std::set<std::string, std::less<>>& heldout,
                                                     std::size_t k) {
    if (k == 0) {
        throw std::invalid_argument("k must be at least 1");
    }
    if (heldout.empty()) {
        return std::nullopt;
    }
    std::set<std::string_view> seen;
    std::size_t hits = 0;
    for (std::size_t x = 0; x < recommendations.size() && x < k; ++x) {
        if (seen.insert(recommendations[x]).second && heldout.contains(recommendations[x])) {
            ++hits;
        }
    }
    return PrecisionRecall{static_cast<double>(hits) / static_cast<double>(k),
                           static_cast<double>(hits) / static_cast<double>(heldout.size())};
}

const SystemMetrics* EvalReport::find(std::string_view system) const {
    for (const auto& s : systems) {
        if (s.system == system) {
            return &s;
        }
    }
    return nullptr;
}

std::string EvalReport::to_text() const {
    std::string out = fmt::format("offline evaluation (k={}, seed={})\n", k, seed);
    out += fmt::format("{:<8} {:>12} {:>12} {:>8} {:>10}\n", "system", "precision@k", "recall@k",
                       "users", "with_recs");
    for (const auto& s : systems) {
        out += fmt::format("{:<8} {:>12.6f} {:>12.6f} {:>8} {:>10}\n", s.system, s.precision, s.recall,
                           s.users_evaluated, s.users_with_recommendations);
    }
    return out;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["k"] = k;
    j["seed"] = seed;
    j["systems"] = nlohmann::ordered_json::array();
    for (const auto& s : systems) {
        j["systems"].push_back({{"system", s.system},
                                {"precision_at_k", s.precision},
                                {"recall_at_k", s.recall},
                                {"users_evaluated", s.users_evaluated},
                                {"users_with_recommendations", s.users_with_recommendations}});
    }
    return j.dump(2);
}

void MetricsAccumulator::add(std::string_view system, const PrecisionRecall& pr, bool had_recommendations) {
    auto& s = sums_[std::string(system)];
    s.precision += pr.precision;
    s.recall += pr.recall;
    ++s.users;
    if (had_recommendations) {
        ++s.with_recs;
    }
}

void MetricsAccumulator::merge(const MetricsAccumulator& other) {
    for (const auto& [name, o] : other.sums_) {
        auto& s = sums_[name];
        s.precision += o.precision;
        s.recall += o.recall;
        s.users += o.users;
        s.with_recs += o.with_recs;
    }
}

EvalReport MetricsAccumulator::report(std::size_t k, std::uint64_t seed,
                                      std::span<const std::string> order) const {
    EvalReport r;
    r.k = k;
    r.seed = seed;
    for (const auto& name : order) {
        SystemMetrics m;
        m.system = name;
        if (const auto it = sums_.find(name); it != sums_.end() && it->second.users > 0) {
            const double users = static_cast<double>(it->second.users);
            m.precision = it->second.precision / users;
            m.recall = it->second.recall / users;
            m.users_evaluated = it->second.users;
            m.users_with_recommendations = it->second.with_recs;
        }
        r.systems.push_back(m);
    }
    return r;
}

}  // namespace jobrec::eval
