#include "jobrec/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <set>
#include <vector>

#include <fmt/format.h>

#include "jobrec/csv.hpp"

namespace jobrec {

namespace {

using Path = std::filesystem::path;

double as_double(std::string_view key, std::string_view value) {
    const auto v = csv::parse_double(value);
    if (!v || !std::isfinite(*v)) {
        throw ConfigError(fmt::format("{}: expected a finite number, got '{}'", key, value));
    }
    return *v;
}

long long as_int(std::string_view key, std::string_view value) {
    const auto v = csv::parse_int(value);
    if (!v) {
        throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, value));
    }
    return *v;
}

std::size_t as_count(std::string_view key, std::string_view value, long long min = 0) {
    const auto v = as_int(key, value);
    if (v < min) {
        throw ConfigError(fmt::format("{}: must be at least {}, got {}", key, min, v));
    }
    return static_cast<std::size_t>(v);
}

bool as_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no" || value == "off") {
        return false;
    }
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
}

Path as_path(std::string_view value, const Path& base) {
    Path p{std::string(value)};
    if (p.is_relative() && !base.empty()) {
        p = base / p;
    }
    return p.lexically_normal();
}

std::string show(double v) { return csv::format_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <class Int>
    requires std::is_integral_v<Int>
std::string show(Int v) {
    return fmt::format("{}", v);
}

struct Key {
    std::string_view name;
    std::function<void(EngineConfig&, std::string_view, const Path&)> set;
    /// Empty for path keys, which stay out of the canonical form.
    std::function<std::string(const EngineConfig&)> get;
};

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> t;
        auto add = [&](std::string_view name, auto set, auto get) { t.push_back({name, set, get}); };
        auto add_path = [&](std::string_view name, std::optional<Path> EngineConfig::*member) {
            t.push_back({name,
                         [member](EngineConfig& c, std::string_view v, const Path& base) {
                             c.*member = as_path(v, base);
                         },
                         {}});
        };

        add("window_days",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.window_days = static_cast<int>(as_count("window_days", v, 1));
            },
            [](const EngineConfig& c) { return show(c.window_days); });
        add("w1", [](EngineConfig& c, std::string_view v, const Path&) { c.weights.w1 = as_double("w1", v); },
            [](const EngineConfig& c) { return show(c.weights.w1); });
        add("w2", [](EngineConfig& c, std::string_view v, const Path&) { c.weights.w2 = as_double("w2", v); },
            [](const EngineConfig& c) { return show(c.weights.w2); });
        add("w3", [](EngineConfig& c, std::string_view v, const Path&) { c.weights.w3 = as_double("w3", v); },
            [](const EngineConfig& c) { return show(c.weights.w3); });
        add("gamma",
            [](EngineConfig& c, std::string_view v, const Path&) { c.weights.gamma = as_double("gamma", v); },
            [](const EngineConfig& c) { return show(c.weights.gamma); });
        add("normalize_pmi2",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.weights.normalize_pmi2 = as_bool("normalize_pmi2", v);
            },
            [](const EngineConfig& c) { return show(c.weights.normalize_pmi2); });
        add("session_gap_minutes",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.co_clicks.session_gap =
                    std::chrono::minutes(static_cast<long long>(as_count("session_gap_minutes", v)));
            },
            [](const EngineConfig& c) {
                return show(std::chrono::duration_cast<std::chrono::minutes>(c.co_clicks.session_gap).count());
            });
        add("category_blocking",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.category_blocking = as_bool("category_blocking", v);
            },
            [](const EngineConfig& c) { return show(c.category_blocking); });
        add("activity_lambda",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.activity_lambda = as_double("activity_lambda", v);
            },
            [](const EngineConfig& c) { return show(c.recommend.activity_lambda); });
        add("location_radius_km",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.location.radius_km = as_double("location_radius_km", v);
            },
            [](const EngineConfig& c) { return show(c.recommend.location.radius_km); });
        add("location_boost",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.location.boost = as_double("location_boost", v);
            },
            [](const EngineConfig& c) { return show(c.recommend.location.boost); });
        add("damping",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.pagerank.damping = as_double("damping", v);
            },
            [](const EngineConfig& c) { return show(c.recommend.pagerank.damping); });
        add("epsilon",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.pagerank.epsilon = as_double("epsilon", v);
            },
            [](const EngineConfig& c) { return show(c.recommend.pagerank.epsilon); });
        add("max_iters",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.pagerank.max_iters = static_cast<int>(as_count("max_iters", v, 1));
            },
            [](const EngineConfig& c) { return show(c.recommend.pagerank.max_iters); });
        add("k", [](EngineConfig& c, std::string_view v, const Path&) { c.recommend.k = as_count("k", v, 1); },
            [](const EngineConfig& c) { return show(c.recommend.k); });
        add("min_recs",
            [](EngineConfig& c, std::string_view v, const Path&) {
                if (v == "k") {
                    c.recommend.min_recs.reset();
                } else {
                    c.recommend.min_recs = as_count("min_recs", v);
                }
            },
            [](const EngineConfig& c) {
                return c.recommend.min_recs ? show(*c.recommend.min_recs) : std::string("k");
            });
        add("per_expired_similar",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.per_expired_similar = as_count("per_expired_similar", v);
            },
            [](const EngineConfig& c) { return show(c.recommend.per_expired_similar); });
        add("level2_fanout",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.level2_fanout = v == "unlimited" ? std::numeric_limits<std::size_t>::max()
                                                             : as_count("level2_fanout", v, 1);
            },
            [](const EngineConfig& c) {
                return c.recommend.level2_fanout == std::numeric_limits<std::size_t>::max()
                           ? std::string("unlimited")
                           : show(c.recommend.level2_fanout);
            });
        add("pagerank_within_category",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.recommend.pagerank_within_category = as_bool("pagerank_within_category", v);
            },
            [](const EngineConfig& c) { return show(c.recommend.pagerank_within_category); });
        add("mf_k", [](EngineConfig& c, std::string_view v, const Path&) { c.mf.k = as_count("mf_k", v, 1); },
            [](const EngineConfig& c) { return show(c.mf.k); });
        add("mf_lambda",
            [](EngineConfig& c, std::string_view v, const Path&) { c.mf.lambda = as_double("mf_lambda", v); },
            [](const EngineConfig& c) { return show(c.mf.lambda); });
        add("mf_iterations",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.mf.iterations = static_cast<int>(as_count("mf_iterations", v, 1));
            },
            [](const EngineConfig& c) { return show(c.mf.iterations); });
        add("mf_implicit",
            [](EngineConfig& c, std::string_view v, const Path&) { c.mf.implicit = as_bool("mf_implicit", v); },
            [](const EngineConfig& c) { return show(c.mf.implicit); });
        add("seed",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.seed = static_cast<std::uint64_t>(as_count("seed", v));
                c.mf.seed = c.seed;
            },
            [](const EngineConfig& c) { return show(c.seed); });
        add("reference_date",
            [](EngineConfig& c, std::string_view v, const Path&) {
                const auto ts = parse_timestamp(v);
                if (!ts) {
                    throw ConfigError(fmt::format("reference_date: cannot parse '{}'", v));
                }
                c.reference_date = *ts;
            },
            [](const EngineConfig& c) {
                return c.reference_date ? format_timestamp(*c.reference_date) : std::string();
            });
        add("cf_appliers_per_job",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.cf_appliers_per_job = as_count("cf_appliers_per_job", v, 1);
            },
            [](const EngineConfig& c) { return show(c.cf_appliers_per_job); });
        add("holdout_fraction",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.holdout_fraction = as_double("holdout_fraction", v);
            },
            [](const EngineConfig& c) { return show(c.holdout_fraction); });
        add("fallback_embedding_dim",
            [](EngineConfig& c, std::string_view v, const Path&) {
                c.fallback_embedding_dim = as_count("fallback_embedding_dim", v, 1);
            },
            [](const EngineConfig& c) { return show(c.fallback_embedding_dim); });
        add_path("events_file", &EngineConfig::events_file);
        add_path("jobs_file", &EngineConfig::jobs_file);
        add_path("embeddings_file", &EngineConfig::embeddings_file);
        add_path("users_file", &EngineConfig::users_file);
        add_path("digraph_dir", &EngineConfig::digraph_dir);
        return t;
    }();
    return table;
}

}  // namespace

void EngineConfig::validate() const {
    if (window_days <= 0) {
        throw ConfigError("window_days must be positive");
    }
    weights.validate();
    recommend.pagerank.validate();
    if (recommend.k == 0) {
        throw ConfigError("k must be at least 1");
    }
    if (!(recommend.activity_lambda >= 0.0)) {
        throw ConfigError("activity_lambda must be non-negative");
    }
    if (!(recommend.location.radius_km >= 0.0)) {
        throw ConfigError("location_radius_km must be non-negative");
    }
    if (!(recommend.location.boost >= 1.0)) {
        throw ConfigError("location_boost must be at least 1");
    }
    if (mf.k == 0 || mf.iterations < 1) {
        throw ConfigError("mf_k and mf_iterations must be at least 1");
    }
    if (!(mf.lambda >= 0.0)) {
        throw ConfigError("mf_lambda must be non-negative");
    }
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("holdout_fraction must lie in (0, 1)");
    }
    if (cf_appliers_per_job == 0 || fallback_embedding_dim == 0) {
        throw ConfigError("cf_appliers_per_job and fallback_embedding_dim must be at least 1");
    }
}

std::string EngineConfig::canonical() const {
    std::vector<std::string> lines;
    for (const auto& key : keys()) {
        if (key.get) {
            lines.push_back(fmt::format("{}={}", key.name, key.get(*this)));
        }
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::string EngineConfig::hash() const { return fmt::format("{:016x}", csv::fnv1a(canonical())); }

void set_config_value(EngineConfig& config, std::string_view key, std::string_view value,
                      const std::filesystem::path& base_dir) {
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) {
        throw ConfigError(fmt::format("unknown config key '{}'", key));
    }
    it->set(config, value, base_dir);
}

EngineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
    EngineConfig config;
    std::set<std::string, std::less<>> seen;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::string_view text = line;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = csv::trim(text);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("line {}: expected key = value", number));
        }
        const auto key = csv::trim(text.substr(0, eq));
        const auto value = csv::trim(text.substr(eq + 1));
        if (!seen.emplace(key).second) {
            throw ConfigError(fmt::format("line {}: key '{}' repeated", number, key));
        }
        try {
            set_config_value(config, key, value, base_dir);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("line {}: {}", number, e.what()));
        }
    }
    config.validate();
    return config;
}

EngineConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config file {}", file.string()));
    }
    return parse_config(in, file.parent_path());
}

}  // namespace jobrec
