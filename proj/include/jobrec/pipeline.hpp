#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jobrec/config.hpp"
#include "jobrec/eval.hpp"
#include "jobrec/graph.hpp"
#include "jobrec/recommend.hpp"
#include "jobrec/scoring.hpp"

namespace jobrec {

enum class EmbeddingSource { File, Fallback, None };
std::string_view to_string(EmbeddingSource source);

struct Corpus {
    std::vector<InteractionEvent> events;
    JobCatalog catalog;
    std::optional<EmbeddingTable> embeddings;
    EmbeddingSource embedding_source = EmbeddingSource::None;
    std::vector<UserRecord> users;
    /// Human-readable notes about skipped lines and degraded inputs.
    std::vector<std::string> warnings;
};

struct CorpusOptions {
    /// Derive embeddings from job text when no embeddings file is available.
    bool fallback_embeddings = false;
    /// Skip the embeddings file even when configured.
    bool load_embeddings = true;
};

/// Reads the files named in the config. Events and jobs are required (throws
/// InputError); a missing embeddings or users file is a warning. Malformed
/// event and user lines are skipped and reported in `warnings`.
Corpus load_corpus(const EngineConfig& config, const CorpusOptions& options = {});

/// Reference date from the config; throws ConfigError when unset.
Timestamp reference_of(const EngineConfig& config);

struct BuildStats {
    std::size_t events_read = 0;
    std::size_t events_in_window = 0;
    std::size_t events_unknown_job = 0;
    std::size_t signals = 0;
    std::size_t nodes = 0;
    std::size_t active_nodes = 0;
    std::size_t multigraph_edges = 0;
    std::size_t content_edges = 0;
    std::size_t digraph_edges = 0;
};

struct Engine {
    JobMultiGraph graph;
    std::vector<ContentEdge> content;
    RecDigraph digraph;
    BuildStats stats;
    eval::ConnectivityReport connectivity;
};

/// window -> drop unknown jobs -> dedupe -> multigraph -> content edges ->
/// aggregate. Nodes are the jobs posted inside the window plus any job with a
/// windowed event.
Engine build_engine(std::span<const InteractionEvent> events, const JobCatalog& catalog,
                    const EmbeddingTable* embeddings, const EngineConfig& config, Timestamp reference);

/// Writes digraph.csv, graph_nodes.csv, graph_edges.csv and manifest.json.
void write_engine(const Engine& engine, const EngineConfig& config, Timestamp reference,
                  EmbeddingSource embeddings, const std::filesystem::path& dir);

/// Reloads the digraph written by write_engine; activity comes from the
/// catalog. Throws InputError.
RecDigraph load_digraph(const std::filesystem::path& dir, const JobCatalog& catalog);

/// Profiles for every user in the users file and every user with an event.
std::map<std::string, UserProfile, std::less<>> build_profiles(std::span<const InteractionEvent> events,
                                                               std::span<const UserRecord> users,
                                                               Timestamp reference, int window_days);

inline const std::vector<std::string> kAllSystems = {"gbr", "cf", "mf"};

/// Per-user temporal holdout of applies, then GBR, classic CF and MF trained
/// on the same train events and scored by precision/recall at k over users
/// with held-out applies.
eval::EvalReport evaluate_systems(std::span<const InteractionEvent> events, const JobCatalog& catalog,
                                  const EmbeddingTable* embeddings, std::span<const UserRecord> users,
                                  const EngineConfig& config, Timestamp reference,
                                  std::span<const std::string> systems, std::size_t k, std::uint64_t seed);

}  // namespace jobrec
