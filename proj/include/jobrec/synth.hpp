#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "jobrec/ingest.hpp"

namespace jobrec::synth {

/// Planted-cluster corpus generator. Each user prefers one cluster and draws
/// every event from it with probability 1 - noise (otherwise from a uniformly
/// chosen other cluster). Within a cluster, jobs are picked with Zipf-shaped
/// popularity; a `cold_fraction` of each cluster's active jobs never receives
/// any interaction.
struct SynthParams {
    std::size_t clusters = 5;
    std::size_t jobs_per_cluster = 200;
    std::size_t users = 2000;
    double noise = 0.1;
    std::uint64_t seed = 7;

    Timestamp reference = std::chrono::sys_days{std::chrono::year{2017} / 7 / 1};
    int window_days = kDefaultWindowDays;

    double cold_fraction = 0.2;
    double expired_fraction = 0.15;
    /// Mean days a posting stays open (each job draws from [0.5, 1.5] times
    /// this). Events on a job happen only while it is open, and a job is
    /// Active iff still open at the reference date; `expired_fraction` is then
    /// unused. Zero keeps postings open until the reference date.
    int job_lifetime_days = 30;
    /// Users with events; of the rest, `passive_fraction` of all users carry a
    /// resume only, and the remainder are anonymous.
    double active_fraction = 0.75;
    double passive_fraction = 0.15;
    /// Chance that an active user also has a resume category.
    double active_resume_fraction = 0.5;

    std::size_t min_applies = 1;
    std::size_t max_applies = 8;
    std::size_t max_click_sessions = 3;
    std::size_t max_clicks_per_session = 4;
    std::size_t max_email_ignores = 3;
    /// Zipf exponents of within-cluster popularity.
    double apply_zipf = 0.8;
    double click_zipf = 1.2;
    /// Attach query ids to click sessions; otherwise rely on session timing.
    bool query_ids = true;

    std::size_t embedding_dim = 32;
    /// Norm of the per-job perturbation around the unit cluster centroid.
    double jitter = 0.35;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

struct SynthCorpus {
    std::vector<InteractionEvent> events;
    std::vector<JobRecord> jobs;
    EmbeddingTable embeddings;
    std::vector<UserRecord> users;

    /// Planted truth.
    std::map<std::string, std::size_t> user_cluster;
    std::map<std::string, std::size_t> job_cluster;
    std::set<std::string> cold_jobs;
};

/// Fully determined by the parameters, including the seed.
SynthCorpus synth_corpus(const SynthParams& params);

std::string cluster_category(std::size_t cluster);

/// Writes events.csv, jobs.csv, embeddings.txt and users.csv into `dir`.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace jobrec::synth
