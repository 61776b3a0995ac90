#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "jobrec/eval.hpp"
#include "jobrec/graph.hpp"
#include "jobrec/mf.hpp"
#include "jobrec/recommend.hpp"
#include "jobrec/scoring.hpp"

namespace jobrec {

/// Every tunable of the engine. Loaded from a `key = value` file with `#`
/// comments; keys left out keep their defaults.
struct EngineConfig {
    int window_days = kDefaultWindowDays;
    ScoreWeights weights;
    CoClickPolicy co_clicks;
    /// Compare embeddings only within a job category.
    bool category_blocking = false;
    RecommendConfig recommend;
    mf::TrainOptions mf;
    std::size_t cf_appliers_per_job = 50;
    double holdout_fraction = 0.3;
    std::size_t fallback_embedding_dim = 64;
    std::uint64_t seed = 7;
    std::optional<Timestamp> reference_date;

    /// Input locations; relative paths in a config file resolve against the
    /// file's directory.
    std::optional<std::filesystem::path> events_file;
    std::optional<std::filesystem::path> jobs_file;
    std::optional<std::filesystem::path> embeddings_file;
    std::optional<std::filesystem::path> users_file;
    std::optional<std::filesystem::path> digraph_dir;

    /// Throws ConfigError for any value outside its documented range.
    void validate() const;

    /// Sorted `key=value` lines covering every setting except file paths.
    std::string canonical() const;
    /// FNV-1a 64 of canonical(), as 16 hex digits.
    std::string hash() const;
};

/// Throws ConfigError on syntax errors, unknown or repeated keys and invalid
/// values.
EngineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
EngineConfig load_config(const std::filesystem::path& file);

/// Applies one setting; the same validation as in a file.
void set_config_value(EngineConfig& config, std::string_view key, std::string_view value,
                      const std::filesystem::path& base_dir = {});

}  // namespace jobrec
