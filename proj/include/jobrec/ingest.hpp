#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jobrec/errors.hpp"
#include "jobrec/time.hpp"

namespace jobrec {

enum class SignalKind : std::uint8_t { Apply, Click, EmailOpenNoClick };

std::string_view to_string(SignalKind kind);
std::optional<SignalKind> parse_signal_kind(std::string_view token);

struct InteractionEvent {
    std::string user_id;
    std::string job_id;
    SignalKind kind = SignalKind::Apply;
    Timestamp timestamp{};
    /// Groups clicks made on the same search resultset.
    std::optional<std::string> query_id;

    friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

enum class JobStatus : std::uint8_t { Active, Expired };

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Great-circle distance in kilometres.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

struct JobRecord {
    std::string job_id;
    std::string title;
    std::string category;
    std::optional<GeoPoint> location;
    Timestamp posted_at{};
    JobStatus status = JobStatus::Active;

    bool is_active() const { return status == JobStatus::Active; }
    friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

struct UserRecord {
    std::string user_id;
    std::optional<std::string> resume_category;
    std::optional<GeoPoint> location;
    bool registered = false;

    friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

/// Closed set of fine-grained job categories.
using Taxonomy = std::set<std::string, std::less<>>;

/// Job corpus keyed by id; iteration is in id order.
class JobCatalog {
public:
    JobCatalog() = default;
    /// Throws InputError on duplicate ids.
    explicit JobCatalog(std::vector<JobRecord> jobs);

    const JobRecord* find(std::string_view job_id) const;
    std::span<const JobRecord> jobs() const { return jobs_; }
    std::size_t size() const { return jobs_.size(); }
    Taxonomy categories() const;

private:
    std::vector<JobRecord> jobs_;
};

/// Fixed-dimension job embeddings. Every vector is finite with non-zero norm.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    /// Throws InputError on dimension mismatch, non-finite component, zero norm,
    /// or duplicate id.
    void add(std::string job_id, std::vector<double> vector);

    const std::vector<double>* find(std::string_view job_id) const;
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }
    const std::map<std::string, std::vector<double>, std::less<>>& entries() const { return vectors_; }

private:
    std::size_t dim_ = 0;
    std::map<std::string, std::vector<double>, std::less<>> vectors_;
};

enum class EventFormat { Csv, JsonLines };

/// One event per line. Blank lines and a leading `user_id,...` header are
/// skipped; every other line either yields an event or a LineError.
Parsed<InteractionEvent> parse_events(std::istream& in, EventFormat format = EventFormat::Csv);
void write_events(std::ostream& out, std::span<const InteractionEvent> events,
                  EventFormat format = EventFormat::Csv);

/// `job_id,title,category,lat,lon,posted_at,status`; lat/lon may be empty.
/// When a taxonomy is given, categories outside it are line errors.
Parsed<JobRecord> parse_jobs(std::istream& in, const Taxonomy* taxonomy = nullptr);
void write_jobs(std::ostream& out, std::span<const JobRecord> jobs);

/// `job_id v1 v2 ... vd`. Any violation of the table invariants throws
/// InputError naming the line.
EmbeddingTable parse_embeddings(std::istream& in);
void write_embeddings(std::ostream& out, const EmbeddingTable& table);

/// `user_id,resume_category,lat,lon,registered`.
Parsed<UserRecord> parse_users(std::istream& in, const Taxonomy* taxonomy = nullptr);
void write_users(std::ostream& out, std::span<const UserRecord> users);

inline constexpr int kDefaultWindowDays = 180;

/// Keeps events with `reference - timestamp < window_days`.
std::vector<InteractionEvent> window_filter(std::span<const InteractionEvent> events,
                                            Timestamp reference,
                                            int window_days = kDefaultWindowDays);

/// Jobs posted within the window, by the same rule as window_filter.
std::vector<JobRecord> posted_within_window(std::span<const JobRecord> jobs, Timestamp reference,
                                           int window_days = kDefaultWindowDays);

struct JobFilterResult {
    std::vector<InteractionEvent> kept;
    std::size_t dropped = 0;
};

/// Drops events whose job id is not in `known_jobs`.
JobFilterResult drop_unknown_jobs(std::span<const InteractionEvent> events,
                                  const std::set<std::string, std::less<>>& known_jobs);

/// One (user, job, kind) triple after deduplication.
struct DedupedSignal {
    std::string user_id;
    std::string job_id;
    SignalKind kind = SignalKind::Apply;
    Timestamp latest{};
    /// Distinct query ids seen for this triple, sorted.
    std::vector<std::string> query_ids;
    /// Distinct timestamps of occurrences without a query id, sorted. Used for
    /// session-based co-click grouping.
    std::vector<Timestamp> unscoped_times;

    friend bool operator==(const DedupedSignal&, const DedupedSignal&) = default;
};

/// Collapses events to distinct (user, job, kind) triples, ordered by
/// (user_id, job_id, kind).
std::vector<DedupedSignal> dedupe(std::span<const InteractionEvent> events);

/// Deterministic feature-hashing embedder over title and category tokens, for
/// corpora without learned embeddings.
EmbeddingTable fallback_embeddings(std::span<const JobRecord> jobs, std::size_t dim = 64);

}  // namespace jobrec
