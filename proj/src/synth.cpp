#include "jobrec/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace jobrec::synth {

namespace {

constexpr std::array<std::string_view, 8> kCategoryNames = {
    "registered-nurse", "software-engineer", "retail-sales",   "truck-driver",
    "accountant",       "customer-service",  "electrician",    "warehouse-associate"};

constexpr std::array<std::string_view, 6> kTitleWords = {"senior", "junior", "lead", "staff", "associate",
                                                         "specialist"};

constexpr std::array<GeoPoint, 6> kCities = {GeoPoint{33.749, -84.388}, GeoPoint{41.878, -87.630},
                                             GeoPoint{40.713, -74.006}, GeoPoint{29.760, -95.370},
                                             GeoPoint{47.606, -122.332}, GeoPoint{39.739, -104.990}};

using Rng = std::mt19937_64;

std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::vector<double> gaussian_direction(Rng& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            norm += x * x;
        }
    }
    norm = std::sqrt(norm);
    for (auto& x : v) {
        x /= norm;
    }
    return v;
}

GeoPoint near_city(Rng& rng) {
    const auto& city = kCities[uniform_index(rng, kCities.size())];
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    return {city.lat + jitter(rng), city.lon + jitter(rng)};
}

/// Jobs of one cluster that may receive events, with Zipf popularity.
struct ClusterPool {
    std::vector<std::size_t> warm;
    std::discrete_distribution<std::size_t> apply_pick;
    std::discrete_distribution<std::size_t> click_pick;
};

std::discrete_distribution<std::size_t> zipf(std::size_t n, double exponent) {
    std::vector<double> w(n);
    for (std::size_t r = 0; r < n; ++r) {
        w[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
    }
    return {w.begin(), w.end()};
}

}  // namespace

void SynthParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw std::invalid_argument(what);
        }
    };
    require(clusters >= 1, "clusters must be at least 1");
    require(jobs_per_cluster >= 1, "jobs_per_cluster must be at least 1");
    require(users >= 1, "users must be at least 1");
    require(noise >= 0.0 && noise < 1.0, "noise must lie in [0, 1)");
    require(clusters > 1 || noise == 0.0, "noise requires at least two clusters");
    require(window_days > 0, "window_days must be positive");
    require(cold_fraction >= 0.0 && cold_fraction < 1.0, "cold_fraction must lie in [0, 1)");
    require(expired_fraction >= 0.0 && expired_fraction < 1.0, "expired_fraction must lie in [0, 1)");
    require(job_lifetime_days >= 0, "job_lifetime_days must be non-negative");
    require(active_fraction >= 0.0 && passive_fraction >= 0.0 && active_fraction + passive_fraction <= 1.0,
            "user type fractions must be non-negative and sum to at most 1");
    require(active_resume_fraction >= 0.0 && active_resume_fraction <= 1.0,
            "active_resume_fraction must lie in [0, 1]");
    require(min_applies <= max_applies, "min_applies exceeds max_applies");
    require(max_clicks_per_session >= 1 || max_click_sessions == 0, "click sessions need clicks");
    require(apply_zipf >= 0.0 && click_zipf >= 0.0, "zipf exponents must be non-negative");
    require(embedding_dim >= 2, "embedding_dim must be at least 2");
    require(jitter >= 0.0 && std::isfinite(jitter), "jitter must be finite and non-negative");
}

std::string cluster_category(std::size_t cluster) {
    if (cluster < kCategoryNames.size()) {
        return std::string(kCategoryNames[cluster]);
    }
    return fmt::format("category-{:02}", cluster);
}

SynthCorpus synth_corpus(const SynthParams& params) {
    params.validate();
    Rng rng(params.seed);
    SynthCorpus corpus;
    corpus.embeddings = EmbeddingTable(params.embedding_dim);

    const auto window_seconds = static_cast<std::int64_t>(params.window_days) * 86400;
    const Timestamp window_start = params.reference - std::chrono::seconds(window_seconds);
    auto time_between = [&](Timestamp lo, Timestamp hi) {
        const auto span = std::max<std::int64_t>((hi - lo).count() - 1, 0);
        return lo + std::chrono::seconds(std::uniform_int_distribution<std::int64_t>(0, span)(rng));
    };
    const bool lifetimes = params.job_lifetime_days > 0;
    // Moment each job stops taking events, parallel to corpus.jobs.
    std::vector<Timestamp> closes_at;

    std::vector<ClusterPool> pools(params.clusters);
    for (std::size_t c = 0; c < params.clusters; ++c) {
        const auto centroid = gaussian_direction(rng, params.embedding_dim);
        const auto category = cluster_category(c);
        const auto n_expired = static_cast<std::size_t>(
            std::floor(params.expired_fraction * static_cast<double>(params.jobs_per_cluster)));
        std::vector<std::size_t> members;
        std::vector<std::size_t> active;

        for (std::size_t x = 0; x < params.jobs_per_cluster; ++x) {
            JobRecord job;
            job.job_id = fmt::format("j{:02}-{:04}", c, x);
            job.category = category;
            job.title = fmt::format("{} {}", kTitleWords[uniform_index(rng, kTitleWords.size())], category);
            job.location = near_city(rng);
            Timestamp closes = params.reference;
            if (lifetimes) {
                job.posted_at = time_between(window_start, params.reference);
                const double days = static_cast<double>(params.job_lifetime_days) * (0.5 + uniform01(rng));
                closes = job.posted_at + std::chrono::seconds(static_cast<std::int64_t>(days * 86400.0));
                job.status = closes > params.reference ? JobStatus::Active : JobStatus::Expired;
                closes = std::min(closes, params.reference);
            } else {
                job.status = x < params.jobs_per_cluster - n_expired ? JobStatus::Active : JobStatus::Expired;
                // Expired postings sit in the older half of the window.
                job.posted_at = job.is_active() ? time_between(window_start, params.reference)
                                                : time_between(window_start, window_start + (params.reference -
                                                                                              window_start) / 2);
            }

            auto v = gaussian_direction(rng, params.embedding_dim);
            for (std::size_t d = 0; d < v.size(); ++d) {
                v[d] = centroid[d] + params.jitter * v[d];
            }
            corpus.embeddings.add(job.job_id, std::move(v));

            corpus.job_cluster[job.job_id] = c;
            members.push_back(corpus.jobs.size());
            if (job.is_active()) {
                active.push_back(corpus.jobs.size());
            }
            corpus.jobs.push_back(std::move(job));
            closes_at.push_back(closes);
        }

        std::shuffle(active.begin(), active.end(), rng);
        const auto n_cold =
            static_cast<std::size_t>(std::round(params.cold_fraction * static_cast<double>(active.size())));
        const std::set<std::size_t> cold(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(n_cold));
        auto& pool = pools[c];
        for (std::size_t j : members) {
            if (cold.contains(j)) {
                corpus.cold_jobs.insert(corpus.jobs[j].job_id);
            } else {
                pool.warm.push_back(j);
            }
        }
        std::shuffle(pool.warm.begin(), pool.warm.end(), rng);
        pool.apply_pick = zipf(pool.warm.size(), params.apply_zipf);
        pool.click_pick = zipf(pool.warm.size(), params.click_zipf);
    }

    auto pick_cluster = [&](std::size_t home) {
        if (params.clusters == 1 || uniform01(rng) >= params.noise) {
            return home;
        }
        const auto other = uniform_index(rng, params.clusters - 1);
        return other >= home ? other + 1 : other;
    };
    // With lifetimes, popularity draws are repeated until they land on a job
    // open at `at`; a user who finds nothing open in a few tries skips the
    // event.
    auto pick_job = [&](std::size_t cluster, bool click, Timestamp at) -> const JobRecord* {
        auto& pool = pools[cluster];
        if (pool.warm.empty()) {
            return nullptr;
        }
        for (int attempt = 0; attempt < (lifetimes ? 64 : 1); ++attempt) {
            const auto j = pool.warm[click ? pool.click_pick(rng) : pool.apply_pick(rng)];
            if (!lifetimes || (corpus.jobs[j].posted_at <= at && at < closes_at[j])) {
                return &corpus.jobs[j];
            }
        }
        return nullptr;
    };
    // A standalone event (apply or ignored email). Without lifetimes the job
    // is drawn first and the time falls anywhere after its posting.
    auto standalone = [&](const std::string& user, std::size_t cluster, SignalKind kind) {
        if (lifetimes) {
            const auto at = time_between(window_start, params.reference);
            if (const auto* job = pick_job(cluster, false, at)) {
                corpus.events.push_back({user, job->job_id, kind, at, {}});
            }
        } else if (const auto* job = pick_job(cluster, false, {})) {
            corpus.events.push_back({user, job->job_id, kind, time_between(job->posted_at, params.reference), {}});
        }
    };

    for (std::size_t u = 0; u < params.users; ++u) {
        UserRecord user;
        user.user_id = fmt::format("u{:05}", u);
        const auto home = uniform_index(rng, params.clusters);
        corpus.user_cluster[user.user_id] = home;
        const double type_draw = uniform01(rng);
        const bool active = type_draw < params.active_fraction;
        const bool passive = !active && type_draw < params.active_fraction + params.passive_fraction;
        if (passive || (active && uniform01(rng) < params.active_resume_fraction)) {
            user.resume_category = cluster_category(home);
            user.registered = true;
        }
        if (active || passive) {
            user.location = near_city(rng);
        }

        if (active) {
            const auto applies =
                std::uniform_int_distribution<std::size_t>(params.min_applies, params.max_applies)(rng);
            for (std::size_t a = 0; a < applies; ++a) {
                standalone(user.user_id, pick_cluster(home), SignalKind::Apply);
            }
            const auto sessions = std::uniform_int_distribution<std::size_t>(0, params.max_click_sessions)(rng);
            for (std::size_t s = 0; s < sessions; ++s) {
                const auto clicks =
                    std::uniform_int_distribution<std::size_t>(1, params.max_clicks_per_session)(rng);
                auto at = time_between(window_start, params.reference - std::chrono::hours(2));
                std::optional<std::string> query;
                if (params.query_ids) {
                    query = fmt::format("q-{}-{}", user.user_id, s);
                }
                for (std::size_t x = 0; x < clicks; ++x) {
                    if (const auto* job = pick_job(pick_cluster(home), true, at)) {
                        corpus.events.push_back(
                            {user.user_id, job->job_id, SignalKind::Click, std::max(at, job->posted_at), query});
                    }
                    at += std::chrono::minutes(1 + uniform_index(rng, 5));
                }
            }
            const auto ignores = std::uniform_int_distribution<std::size_t>(0, params.max_email_ignores)(rng);
            for (std::size_t x = 0; x < ignores; ++x) {
                standalone(user.user_id, pick_cluster(home), SignalKind::EmailOpenNoClick);
            }
        }
        corpus.users.push_back(std::move(user));
    }

    std::stable_sort(corpus.events.begin(), corpus.events.end(),
                     [](const InteractionEvent& a, const InteractionEvent& b) { return a.timestamp < b.timestamp; });
    return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) {
            throw InputError(fmt::format("cannot write {}", (dir / name).string()));
        }
        return out;
    };
    {
        auto out = open("events.csv");
        write_events(out, corpus.events);
    }
    {
        auto out = open("jobs.csv");
        write_jobs(out, corpus.jobs);
    }
    {
        auto out = open("embeddings.txt");
        write_embeddings(out, corpus.embeddings);
    }
    {
        auto out = open("users.csv");
        write_users(out, corpus.users);
    }
}

}  // namespace jobrec::synth
