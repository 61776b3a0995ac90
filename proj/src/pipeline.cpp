#include "jobrec/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "jobrec/csv.hpp"
#include "jobrec/mf.hpp"

namespace jobrec {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError(fmt::format("cannot open {}", path.string()));
    }
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError(fmt::format("cannot write {}", path.string()));
    }
    return out;
}

template <class T>
void note_line_errors(const Parsed<T>& parsed, const std::filesystem::path& file,
                      std::vector<std::string>& warnings) {
    if (parsed.errors.empty()) {
        return;
    }
    const auto& first = parsed.errors.front();
    warnings.push_back(fmt::format("{}: skipped {} malformed line(s); first at line {}: {}", file.string(),
                                   parsed.errors.size(), first.line, first.message));
}

}  // namespace

std::string_view to_string(EmbeddingSource source) {
    switch (source) {
        case EmbeddingSource::File:
            return "file";
        case EmbeddingSource::Fallback:
            return "fallback";
        case EmbeddingSource::None:
            break;
    }
    return "none";
}

Corpus load_corpus(const EngineConfig& config, const CorpusOptions& options) {
    if (!config.events_file || !config.jobs_file) {
        throw ConfigError("events_file and jobs_file must be configured");
    }
    Corpus corpus;
    {
        auto in = open_input(*config.jobs_file);
        auto parsed = parse_jobs(in);
        if (!parsed.ok()) {
            const auto& e = parsed.errors.front();
            throw InputError(fmt::format("{}:{}: {}", config.jobs_file->string(), e.line, e.message));
        }
        corpus.catalog = JobCatalog(std::move(parsed.records));
    }
    {
        auto in = open_input(*config.events_file);
        auto parsed = parse_events(in);
        note_line_errors(parsed, *config.events_file, corpus.warnings);
        corpus.events = std::move(parsed.records);
    }
    if (config.users_file) {
        if (std::filesystem::exists(*config.users_file)) {
            auto in = open_input(*config.users_file);
            const auto taxonomy = corpus.catalog.categories();
            auto parsed = parse_users(in, &taxonomy);
            note_line_errors(parsed, *config.users_file, corpus.warnings);
            corpus.users = std::move(parsed.records);
        } else {
            corpus.warnings.push_back(fmt::format("users file {} not found", config.users_file->string()));
        }
    }
    if (options.load_embeddings && config.embeddings_file && std::filesystem::exists(*config.embeddings_file)) {
        auto in = open_input(*config.embeddings_file);
        corpus.embeddings = parse_embeddings(in);
        corpus.embedding_source = EmbeddingSource::File;
    } else if (options.fallback_embeddings) {
        corpus.embeddings = fallback_embeddings(corpus.catalog.jobs(), config.fallback_embedding_dim);
        corpus.embedding_source = EmbeddingSource::Fallback;
    } else if (options.load_embeddings) {
        corpus.warnings.push_back(
            config.embeddings_file
                ? fmt::format("embeddings file {} not found; building without content edges",
                              config.embeddings_file->string())
                : std::string("no embeddings configured; building without content edges"));
    }
    return corpus;
}

Timestamp reference_of(const EngineConfig& config) {
    if (!config.reference_date) {
        throw ConfigError("reference_date is required (config key or --reference-date)");
    }
    return *config.reference_date;
}

Engine build_engine(std::span<const InteractionEvent> events, const JobCatalog& catalog,
                    const EmbeddingTable* embeddings, const EngineConfig& config, Timestamp reference) {
    Engine engine;
    auto& stats = engine.stats;
    stats.events_read = events.size();

    const auto windowed = window_filter(events, reference, config.window_days);
    stats.events_in_window = windowed.size();

    std::set<std::string, std::less<>> catalog_ids;
    for (const auto& job : catalog.jobs()) {
        catalog_ids.insert(job.job_id);
    }
    auto filtered = drop_unknown_jobs(windowed, catalog_ids);
    stats.events_unknown_job = filtered.dropped;
    const auto signals = dedupe(filtered.kept);
    stats.signals = signals.size();

    std::set<std::string, std::less<>> node_set;
    for (const auto& job : posted_within_window(catalog.jobs(), reference, config.window_days)) {
        node_set.insert(job.job_id);
    }
    for (const auto& s : signals) {
        node_set.insert(s.job_id);
    }
    const std::vector<std::string> node_ids(node_set.begin(), node_set.end());
    engine.graph = JobMultiGraph::build(signals, node_ids, config.co_clicks);
    stats.nodes = engine.graph.node_count();
    stats.multigraph_edges = engine.graph.edge_count();

    if (embeddings) {
        EmbeddingTable restricted(embeddings->dim());
        for (const auto& id : node_ids) {
            if (const auto* v = embeddings->find(id)) {
                restricted.add(id, *v);
            }
        }
        engine.content =
            content_edges(restricted, config.weights.gamma, config.category_blocking ? &catalog : nullptr);
    }
    stats.content_edges = engine.content.size();

    const auto active = active_mask(engine.graph.ids(), catalog);
    stats.active_nodes = static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
    engine.digraph = aggregate(engine.graph, engine.content, config.weights, active);
    stats.digraph_edges = engine.digraph.edge_count();
    engine.connectivity = eval::connectivity_report(engine.graph, engine.content, active);
    return engine;
}

void write_engine(const Engine& engine, const EngineConfig& config, Timestamp reference,
                  EmbeddingSource embeddings, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_output(dir / "digraph.csv");
        engine.digraph.write(out);
    }
    {
        auto out = open_output(dir / "graph_nodes.csv");
        engine.graph.write_nodes(out);
    }
    {
        auto out = open_output(dir / "graph_edges.csv");
        engine.graph.write_edges(out);
    }
    const auto& s = engine.stats;
    nlohmann::ordered_json m;
    m["config_hash"] = config.hash();
    m["reference_date"] = format_timestamp(reference);
    m["window_days"] = config.window_days;
    m["embeddings"] = std::string(to_string(embeddings));
    m["events_read"] = s.events_read;
    m["events_in_window"] = s.events_in_window;
    m["events_unknown_job"] = s.events_unknown_job;
    m["signals"] = s.signals;
    m["nodes"] = s.nodes;
    m["active_nodes"] = s.active_nodes;
    m["multigraph_edges"] = s.multigraph_edges;
    m["content_edges"] = s.content_edges;
    m["digraph_edges"] = s.digraph_edges;
    auto& conn = m["connectivity"];
    conn = nlohmann::ordered_json::object();
    for (unsigned mask = 1; mask < 8; ++mask) {
        conn[eval::ConnectivityReport::subset_name(mask)] = engine.connectivity.at(mask);
    }
    auto out = open_output(dir / "manifest.json");
    out << m.dump(2) << '\n';
}

RecDigraph load_digraph(const std::filesystem::path& dir, const JobCatalog& catalog) {
    std::vector<std::string> ids;
    {
        auto in = open_input(dir / "graph_nodes.csv");
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (csv::trim(line).empty()) {
                continue;
            }
            const auto fields = csv::split(line);
            if (!fields || fields->empty() || (*fields)[0].empty()) {
                throw InputError(fmt::format("graph_nodes.csv:{}: malformed line", number));
            }
            ids.push_back((*fields)[0]);
        }
    }
    std::sort(ids.begin(), ids.end());
    auto active = active_mask(ids, catalog);
    auto in = open_input(dir / "digraph.csv");
    return RecDigraph::load(in, std::move(ids), std::move(active));
}

std::map<std::string, UserProfile, std::less<>> build_profiles(std::span<const InteractionEvent> events,
                                                               std::span<const UserRecord> users,
                                                               Timestamp reference, int window_days) {
    std::map<std::string, std::vector<InteractionEvent>, std::less<>> by_user;
    for (const auto& ev : events) {
        by_user[ev.user_id].push_back(ev);
    }
    std::map<std::string, const UserRecord*, std::less<>> records;
    for (const auto& u : users) {
        records[u.user_id] = &u;
        by_user.try_emplace(u.user_id);
    }
    std::map<std::string, UserProfile, std::less<>> out;
    for (const auto& [user, evs] : by_user) {
        const auto rec = records.find(user);
        out.emplace(user, build_profile(user, rec == records.end() ? nullptr : rec->second, evs, reference,
                                        window_days));
    }
    return out;
}

eval::EvalReport evaluate_systems(std::span<const InteractionEvent> events, const JobCatalog& catalog,
                                  const EmbeddingTable* embeddings, std::span<const UserRecord> users,
                                  const EngineConfig& config, Timestamp reference,
                                  std::span<const std::string> systems, std::size_t k, std::uint64_t seed) {
    for (const auto& s : systems) {
        if (std::find(kAllSystems.begin(), kAllSystems.end(), s) == kAllSystems.end()) {
            throw ConfigError(fmt::format("unknown system '{}'", s));
        }
    }
    auto wants = [&](std::string_view name) {
        return std::find(systems.begin(), systems.end(), name) != systems.end();
    };

    std::set<std::string, std::less<>> known;
    std::set<std::string, std::less<>> active_jobs;
    for (const auto& job : catalog.jobs()) {
        known.insert(job.job_id);
        if (job.is_active()) {
            active_jobs.insert(job.job_id);
        }
    }
    const auto windowed = drop_unknown_jobs(window_filter(events, reference, config.window_days), known).kept;
    const auto split = eval::holdout_split(windowed, config.holdout_fraction, seed);

    std::map<std::string, std::set<std::string, std::less<>>, std::less<>> heldout;
    for (const auto& ev : split.test) {
        heldout[ev.user_id].insert(ev.job_id);
    }
    std::map<std::string, std::set<std::string, std::less<>>, std::less<>> history;
    for (const auto& ev : split.train) {
        history[ev.user_id].insert(ev.job_id);
    }

    std::optional<Engine> engine;
    std::optional<Recommender> gbr;
    std::map<std::string, UserProfile, std::less<>> profiles;
    if (wants("gbr")) {
        engine = build_engine(split.train, catalog, embeddings, config, reference);
        gbr.emplace(engine->digraph, catalog, embeddings, config.recommend, reference);
        profiles = build_profiles(split.train, users, reference, config.window_days);
    }
    std::optional<eval::ClassicCf> cf;
    if (wants("cf")) {
        cf.emplace(split.train, eval::ClassicCfParams{config.cf_appliers_per_job, reference, config.window_days,
                                                      config.recommend.activity_lambda});
    }
    std::optional<mf::FactorModel> model;
    mf::ImplicitSets implicit;
    if (wants("mf")) {
        const auto signals = dedupe(split.train);
        const auto matrix = mf::build_matrix(signals);
        if (matrix.entries.empty()) {
            throw InputError("no apply or email signals to train the factor model on");
        }
        auto options = config.mf;
        options.seed = seed;
        if (options.implicit) {
            implicit = mf::implicit_sets_from_clicks(matrix, signals);
        }
        model = mf::als_train(matrix, options, nullptr, options.implicit ? &implicit : nullptr);
    }

    eval::MetricsAccumulator acc;
    const std::set<std::string, std::less<>> no_history;
    for (const auto& [user, truth] : heldout) {
        const auto h = history.find(user);
        const auto& seen = h == history.end() ? no_history : h->second;
        auto score = [&](std::string_view system, const std::vector<std::string>& recs) {
            acc.add(system, *eval::precision_recall_at_k(recs, truth, k), !recs.empty());
        };
        for (const auto& system : systems) {
            std::vector<std::string> recs;
            if (system == "gbr") {
                const auto p = profiles.find(user);
                UserProfile fallback{user, {}, {}, {}, {}};
                for (const auto& r : gbr->recommend(p == profiles.end() ? fallback : p->second, k).entries) {
                    recs.push_back(r.job_id);
                }
            } else if (system == "cf") {
                for (const auto& r : cf->recommend(user, k, seen, &active_jobs)) {
                    recs.push_back(r.job_id);
                }
            } else if (const auto u = model->user_index(user)) {
                std::span<const std::size_t> items;
                if (config.mf.implicit) {
                    items = implicit[*u];
                }
                for (const auto& r : mf::recommend_mf(*model, user, k, seen, &active_jobs, items)) {
                    recs.push_back(r.job_id);
                }
            }
            score(system, recs);
        }
    }
    const std::vector<std::string> order(systems.begin(), systems.end());
    return acc.report(k, seed, order);
}

}  // namespace jobrec
