#include "jobrec/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "jobrec/csv.hpp"

namespace jobrec {

namespace {

bool is_header(std::string_view line, std::string_view first_column) {
    return line.substr(0, first_column.size()) == first_column;
}

std::optional<GeoPoint> parse_location(std::string_view lat, std::string_view lon,
                                       std::string& error) {
    lat = csv::trim(lat);
    lon = csv::trim(lon);
    if (lat.empty() && lon.empty()) {
        return std::nullopt;
    }
    const auto la = csv::parse_double(lat);
    const auto lo = csv::parse_double(lon);
    if (!la || !lo || !std::isfinite(*la) || !std::isfinite(*lo) || std::abs(*la) > 90.0 ||
        std::abs(*lo) > 180.0) {
        error = fmt::format("invalid location '{},{}'", lat, lon);
        return std::nullopt;
    }
    return GeoPoint{*la, *lo};
}

std::optional<InteractionEvent> event_from_fields(std::string_view user, std::string_view job,
                                                  std::string_view kind, std::string_view ts,
                                                  std::string_view query, std::string& error) {
    InteractionEvent ev;
    ev.user_id = std::string(csv::trim(user));
    ev.job_id = std::string(csv::trim(job));
    if (ev.user_id.empty() || ev.job_id.empty()) {
        error = "empty user_id or job_id";
        return std::nullopt;
    }
    const auto k = parse_signal_kind(csv::trim(kind));
    if (!k) {
        error = fmt::format("unknown kind '{}'", kind);
        return std::nullopt;
    }
    ev.kind = *k;
    const auto t = parse_timestamp(csv::trim(ts));
    if (!t) {
        error = fmt::format("invalid timestamp '{}'", ts);
        return std::nullopt;
    }
    ev.timestamp = *t;
    query = csv::trim(query);
    if (!query.empty()) {
        ev.query_id = std::string(query);
    }
    return ev;
}

std::optional<InteractionEvent> parse_event_csv(std::string_view line, std::string& error) {
    const auto fields = csv::split(line);
    if (!fields) {
        error = "unterminated quote";
        return std::nullopt;
    }
    const auto& f = *fields;
    if (f.size() != 4 && f.size() != 5) {
        error = fmt::format("expected 5 columns, got {}", f.size());
        return std::nullopt;
    }
    return event_from_fields(f[0], f[1], f[2], f[3], f.size() == 5 ? f[4] : std::string{}, error);
}

std::optional<InteractionEvent> parse_event_json(std::string_view line, std::string& error) {
    try {
        const auto j = nlohmann::json::parse(line);
        std::string query;
        if (j.contains("query_id") && !j.at("query_id").is_null()) {
            query = j.at("query_id").get<std::string>();
        }
        return event_from_fields(j.at("user_id").get<std::string>(), j.at("job_id").get<std::string>(),
                                 j.at("kind").get<std::string>(), j.at("timestamp").get<std::string>(),
                                 query, error);
    } catch (const nlohmann::json::exception& e) {
        error = e.what();
        return std::nullopt;
    }
}

template <class T, class LineParser>
Parsed<T> parse_lines(std::istream& in, std::string_view header, LineParser&& parse_line) {
    Parsed<T> out;
    std::string line;
    std::size_t line_no = 0;
    bool seen_content = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = csv::trim(line);
        if (trimmed.empty()) {
            continue;
        }
        if (!seen_content) {
            seen_content = true;
            if (!header.empty() && is_header(trimmed, header)) {
                continue;
            }
        }
        std::string error;
        if (auto rec = parse_line(trimmed, error)) {
            out.records.push_back(std::move(*rec));
        } else {
            out.errors.push_back({line_no, std::move(error)});
        }
    }
    return out;
}

std::string location_fields(const std::optional<GeoPoint>& loc) {
    if (!loc) {
        return ",";
    }
    return csv::format_double(loc->lat) + "," + csv::format_double(loc->lon);
}

}  // namespace

std::string_view to_string(SignalKind kind) {
    switch (kind) {
    case SignalKind::Apply:
        return "apply";
    case SignalKind::Click:
        return "click";
    case SignalKind::EmailOpenNoClick:
        return "email_open_no_click";
    }
    return "?";
}

std::optional<SignalKind> parse_signal_kind(std::string_view token) {
    if (token == "apply") {
        return SignalKind::Apply;
    }
    if (token == "click") {
        return SignalKind::Click;
    }
    if (token == "email_open_no_click") {
        return SignalKind::EmailOpenNoClick;
    }
    return std::nullopt;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    constexpr double kEarthRadiusKm = 6371.0088;
    constexpr double kRad = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * kRad;
    const double dlon = (b.lon - a.lon) * kRad;
    const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * std::sin(dlon / 2) *
                         std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

JobCatalog::JobCatalog(std::vector<JobRecord> jobs) : jobs_(std::move(jobs)) {
    std::sort(jobs_.begin(), jobs_.end(),
              [](const JobRecord& a, const JobRecord& b) { return a.job_id < b.job_id; });
    const auto dup = std::adjacent_find(jobs_.begin(), jobs_.end(),
                                        [](const JobRecord& a, const JobRecord& b) {
                                            return a.job_id == b.job_id;
                                        });
    if (dup != jobs_.end()) {
        throw InputError(fmt::format("duplicate job id '{}'", dup->job_id));
    }
}

const JobRecord* JobCatalog::find(std::string_view job_id) const {
    const auto it = std::lower_bound(
        jobs_.begin(), jobs_.end(), job_id,
        [](const JobRecord& rec, std::string_view id) { return rec.job_id < id; });
    if (it == jobs_.end() || it->job_id != job_id) {
        return nullptr;
    }
    return &*it;
}

Taxonomy JobCatalog::categories() const {
    Taxonomy out;
    for (const auto& job : jobs_) {
        out.insert(job.category);
    }
    return out;
}

void EmbeddingTable::add(std::string job_id, std::vector<double> vector) {
    if (vectors_.empty() && dim_ == 0) {
        dim_ = vector.size();
    }
    if (vector.empty() || vector.size() != dim_) {
        throw InputError(fmt::format("embedding for '{}' has dimension {}, expected {}", job_id,
                                     vector.size(), dim_));
    }
    double norm2 = 0.0;
    for (double v : vector) {
        if (!std::isfinite(v)) {
            throw InputError(fmt::format("embedding for '{}' has a non-finite component", job_id));
        }
        norm2 += v * v;
    }
    if (!(norm2 > 0.0)) {
        throw InputError(fmt::format("embedding for '{}' has zero norm", job_id));
    }
    const auto [it, inserted] = vectors_.emplace(std::move(job_id), std::move(vector));
    if (!inserted) {
        throw InputError(fmt::format("duplicate embedding for '{}'", it->first));
    }
}

const std::vector<double>* EmbeddingTable::find(std::string_view job_id) const {
    const auto it = vectors_.find(job_id);
    return it == vectors_.end() ? nullptr : &it->second;
}

Parsed<InteractionEvent> parse_events(std::istream& in, EventFormat format) {
    if (format == EventFormat::JsonLines) {
        return parse_lines<InteractionEvent>(in, "", parse_event_json);
    }
    return parse_lines<InteractionEvent>(in, "user_id,", parse_event_csv);
}

void write_events(std::ostream& out, std::span<const InteractionEvent> events, EventFormat format) {
    for (const auto& ev : events) {
        if (format == EventFormat::JsonLines) {
            nlohmann::json j = {{"user_id", ev.user_id},
                                {"job_id", ev.job_id},
                                {"kind", std::string(to_string(ev.kind))},
                                {"timestamp", format_timestamp(ev.timestamp)},
                                {"query_id", ev.query_id ? nlohmann::json(*ev.query_id) : nullptr}};
            out << j.dump() << '\n';
        } else {
            out << csv::quote(ev.user_id) << ',' << csv::quote(ev.job_id) << ',' << to_string(ev.kind)
                << ',' << format_timestamp(ev.timestamp) << ','
                << (ev.query_id ? csv::quote(*ev.query_id) : std::string{}) << '\n';
        }
    }
}

Parsed<JobRecord> parse_jobs(std::istream& in, const Taxonomy* taxonomy) {
    return parse_lines<JobRecord>(
        in, "job_id,", [taxonomy](std::string_view line, std::string& error) -> std::optional<JobRecord> {
            const auto fields = csv::split(line);
            if (!fields || fields->size() != 7) {
                error = "expected 7 columns";
                return std::nullopt;
            }
            const auto& f = *fields;
            JobRecord job;
            job.job_id = std::string(csv::trim(f[0]));
            job.title = std::string(csv::trim(f[1]));
            job.category = std::string(csv::trim(f[2]));
            if (job.job_id.empty() || job.category.empty()) {
                error = "empty job_id or category";
                return std::nullopt;
            }
            if (taxonomy && !taxonomy->contains(job.category)) {
                error = fmt::format("category '{}' not in taxonomy", job.category);
                return std::nullopt;
            }
            job.location = parse_location(f[3], f[4], error);
            if (!error.empty()) {
                return std::nullopt;
            }
            const auto posted = parse_timestamp(csv::trim(f[5]));
            if (!posted) {
                error = fmt::format("invalid posted_at '{}'", f[5]);
                return std::nullopt;
            }
            job.posted_at = *posted;
            const auto status = csv::trim(f[6]);
            if (status == "active") {
                job.status = JobStatus::Active;
            } else if (status == "expired") {
                job.status = JobStatus::Expired;
            } else {
                error = fmt::format("unknown status '{}'", status);
                return std::nullopt;
            }
            return job;
        });
}

void write_jobs(std::ostream& out, std::span<const JobRecord> jobs) {
    for (const auto& job : jobs) {
        out << csv::quote(job.job_id) << ',' << csv::quote(job.title) << ','
            << csv::quote(job.category) << ',' << location_fields(job.location) << ','
            << format_timestamp(job.posted_at) << ',' << (job.is_active() ? "active" : "expired")
            << '\n';
    }
}

EmbeddingTable parse_embeddings(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string id;
        fields >> id;
        std::vector<double> values;
        std::string token;
        while (fields >> token) {
            const auto v = csv::parse_double(token);
            if (!v) {
                throw InputError(fmt::format("embeddings line {}: invalid component '{}'", line_no, token));
            }
            values.push_back(*v);
        }
        try {
            table.add(std::move(id), std::move(values));
        } catch (const InputError& e) {
            throw InputError(fmt::format("embeddings line {}: {}", line_no, e.what()));
        }
    }
    return table;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
    for (const auto& [id, vec] : table.entries()) {
        out << id;
        for (double v : vec) {
            out << ' ' << csv::format_double(v);
        }
        out << '\n';
    }
}

Parsed<UserRecord> parse_users(std::istream& in, const Taxonomy* taxonomy) {
    return parse_lines<UserRecord>(
        in, "user_id,", [taxonomy](std::string_view line, std::string& error) -> std::optional<UserRecord> {
            const auto fields = csv::split(line);
            if (!fields || fields->size() != 5) {
                error = "expected 5 columns";
                return std::nullopt;
            }
            const auto& f = *fields;
            UserRecord user;
            user.user_id = std::string(csv::trim(f[0]));
            if (user.user_id.empty()) {
                error = "empty user_id";
                return std::nullopt;
            }
            const auto category = csv::trim(f[1]);
            if (!category.empty()) {
                if (taxonomy && !taxonomy->contains(category)) {
                    error = fmt::format("resume category '{}' not in taxonomy", category);
                    return std::nullopt;
                }
                user.resume_category = std::string(category);
            }
            user.location = parse_location(f[2], f[3], error);
            if (!error.empty()) {
                return std::nullopt;
            }
            const auto reg = csv::trim(f[4]);
            if (reg == "1" || reg == "true") {
                user.registered = true;
            } else if (reg == "0" || reg == "false" || reg.empty()) {
                user.registered = false;
            } else {
                error = fmt::format("invalid registered flag '{}'", reg);
                return std::nullopt;
            }
            return user;
        });
}

void write_users(std::ostream& out, std::span<const UserRecord> users) {
    for (const auto& user : users) {
        out << csv::quote(user.user_id) << ','
            << (user.resume_category ? csv::quote(*user.resume_category) : std::string{}) << ','
            << location_fields(user.location) << ',' << (user.registered ? "1" : "0") << '\n';
    }
}

std::vector<InteractionEvent> window_filter(std::span<const InteractionEvent> events,
                                            Timestamp reference, int window_days) {
    const std::chrono::seconds window = std::chrono::days{window_days};
    std::vector<InteractionEvent> out;
    for (const auto& ev : events) {
        if (reference - ev.timestamp < window) {
            out.push_back(ev);
        }
    }
    return out;
}

std::vector<JobRecord> posted_within_window(std::span<const JobRecord> jobs, Timestamp reference,
                                           int window_days) {
    const std::chrono::seconds window = std::chrono::days{window_days};
    std::vector<JobRecord> out;
    for (const auto& job : jobs) {
        if (reference - job.posted_at < window) {
            out.push_back(job);
        }
    }
    return out;
}

JobFilterResult drop_unknown_jobs(std::span<const InteractionEvent> events,
                                  const std::set<std::string, std::less<>>& known_jobs) {
    JobFilterResult out;
    for (const auto& ev : events) {
        if (known_jobs.contains(ev.job_id)) {
            out.kept.push_back(ev);
        } else {
            ++out.dropped;
        }
    }
    return out;
}

std::vector<DedupedSignal> dedupe(std::span<const InteractionEvent> events) {
    using Key = std::tuple<std::string_view, std::string_view, SignalKind>;
    std::map<Key, DedupedSignal> merged;
    for (const auto& ev : events) {
        auto [it, inserted] = merged.try_emplace(Key{ev.user_id, ev.job_id, ev.kind});
        auto& sig = it->second;
        if (inserted) {
            sig.user_id = ev.user_id;
            sig.job_id = ev.job_id;
            sig.kind = ev.kind;
            sig.latest = ev.timestamp;
        } else {
            sig.latest = std::max(sig.latest, ev.timestamp);
        }
        if (ev.query_id) {
            sig.query_ids.push_back(*ev.query_id);
        } else {
            sig.unscoped_times.push_back(ev.timestamp);
        }
    }
    std::vector<DedupedSignal> out;
    out.reserve(merged.size());
    for (auto& [key, sig] : merged) {
        std::sort(sig.query_ids.begin(), sig.query_ids.end());
        sig.query_ids.erase(std::unique(sig.query_ids.begin(), sig.query_ids.end()),
                            sig.query_ids.end());
        std::sort(sig.unscoped_times.begin(), sig.unscoped_times.end());
        sig.unscoped_times.erase(std::unique(sig.unscoped_times.begin(), sig.unscoped_times.end()),
                                 sig.unscoped_times.end());
        out.push_back(std::move(sig));
    }
    return out;
}

namespace {

std::vector<std::string> tokens_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

}  // namespace

EmbeddingTable fallback_embeddings(std::span<const JobRecord> jobs, std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("fallback embedding dimension must be positive");
    }
    EmbeddingTable table(dim);
    for (const auto& job : jobs) {
        std::vector<double> vec(dim, 0.0);
        auto tokens = tokens_of(job.title);
        for (auto& t : tokens_of(job.category)) {
            tokens.push_back("cat:" + t);
        }
        for (const auto& t : tokens) {
            const auto h = csv::fnv1a(t);
            vec[h % dim] += (h >> 63) != 0 ? -1.0 : 1.0;
        }
        if (std::all_of(vec.begin(), vec.end(), [](double v) { return v == 0.0; })) {
            vec[csv::fnv1a(job.job_id) % dim] = 1.0;
        }
        table.add(job.job_id, std::move(vec));
    }
    return table;
}

}  // namespace jobrec
