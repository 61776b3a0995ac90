// jobrec: build, query and evaluate the job recommendation engine.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jobrec/config.hpp"
#include "jobrec/csv.hpp"
#include "jobrec/eval.hpp"
#include "jobrec/mf.hpp"
#include "jobrec/pipeline.hpp"
#include "jobrec/synth.hpp"

namespace fs = std::filesystem;
using namespace jobrec;

namespace {

enum ExitCode { kOk = 0, kInput = 1, kConfig = 2, kInvariant = 3 };

struct Globals {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::string reference_date;
};

/// Reruns `body`, prefixing any error with the stage name while keeping its
/// type (and so its exit code).
template <class F>
auto stage(std::string_view name, F&& body) {
    try {
        return body();
    } catch (const InputError& e) {
        throw InputError(fmt::format("{}: {}", name, e.what()));
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", name, e.what()));
    } catch (const InvariantError& e) {
        throw InvariantError(fmt::format("{}: {}", name, e.what()));
    }
}

EngineConfig resolve_config(const Globals& g) {
    EngineConfig config;
    if (!g.config_file.empty()) {
        config = load_config(g.config_file);
    }
    if (g.seed) {
        set_config_value(config, "seed", fmt::format("{}", *g.seed));
    }
    if (!g.reference_date.empty()) {
        set_config_value(config, "reference_date", g.reference_date);
    }
    config.validate();
    return config;
}

void override_path(std::optional<fs::path>& slot, const std::string& value) {
    if (!value.empty()) {
        slot = fs::path(value);
    }
}

void print_warnings(const Corpus& corpus) {
    for (const auto& w : corpus.warnings) {
        fmt::print(stderr, "warning: {}\n", w);
    }
}

fs::path digraph_dir_of(const EngineConfig& config, const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (!config.digraph_dir) {
        throw ConfigError("digraph_dir must be configured or passed with --digraph");
    }
    return *config.digraph_dir;
}

EmbeddingSource manifest_embeddings(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find("\"embeddings\": \"fallback\"") != std::string::npos) {
        return EmbeddingSource::Fallback;
    }
    return EmbeddingSource::File;
}

void write_list(std::ostream& out, const RecommendationList& list, std::string_view prefix) {
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
        const auto& e = list.entries[r];
        out << prefix << (r + 1) << ',' << csv::quote(e.job_id) << ',' << csv::format_double(e.score) << ','
            << to_string(e.provenance) << '\n';
    }
}

struct Serving {
    Corpus corpus;
    RecDigraph digraph;
    Timestamp reference;
    std::map<std::string, UserProfile, std::less<>> profiles;
};

Serving prepare_serving(const EngineConfig& config, const fs::path& dir) {
    Serving s;
    s.reference = reference_of(config);
    s.corpus = stage("ingest", [&] {
        return load_corpus(config, {.fallback_embeddings = manifest_embeddings(dir) == EmbeddingSource::Fallback});
    });
    print_warnings(s.corpus);
    s.digraph = stage("load", [&] { return load_digraph(dir, s.corpus.catalog); });
    s.profiles = build_profiles(s.corpus.events, s.corpus.users, s.reference, config.window_days);
    return s;
}

int run_build(const Globals& g, const std::string& out_flag, bool fallback, const std::string& events,
              const std::string& jobs, const std::string& embeddings) {
    auto config = resolve_config(g);
    override_path(config.events_file, events);
    override_path(config.jobs_file, jobs);
    override_path(config.embeddings_file, embeddings);
    const auto reference = reference_of(config);
    const auto out = digraph_dir_of(config, out_flag);
    const auto corpus = stage("ingest", [&] { return load_corpus(config, {.fallback_embeddings = fallback}); });
    print_warnings(corpus);
    const auto engine = stage("graph", [&] {
        return build_engine(corpus.events, corpus.catalog, corpus.embeddings ? &*corpus.embeddings : nullptr,
                            config, reference);
    });
    stage("write", [&] { write_engine(engine, config, reference, corpus.embedding_source, out); });
    const auto& st = engine.stats;
    fmt::print("nodes={} active={} multigraph_edges={} content_edges={} digraph_edges={}\n", st.nodes,
               st.active_nodes, st.multigraph_edges, st.content_edges, st.digraph_edges);
    fmt::print("events read={} in_window={} unknown_job={} signals={}\n", st.events_read, st.events_in_window,
               st.events_unknown_job, st.signals);
    return kOk;
}

int run_recommend(const Globals& g, const std::string& user, std::optional<std::size_t> k,
                  const std::string& digraph_flag) {
    const auto config = resolve_config(g);
    const auto s = prepare_serving(config, digraph_dir_of(config, digraph_flag));
    const Recommender rec(s.digraph, s.corpus.catalog, s.corpus.embeddings ? &*s.corpus.embeddings : nullptr,
                          config.recommend, s.reference);
    const auto it = s.profiles.find(user);
    const UserProfile anonymous{user, {}, {}, {}, {}};
    const auto list = rec.recommend(it == s.profiles.end() ? anonymous : it->second, k.value_or(config.recommend.k));
    if (!list.diagnostic.empty()) {
        fmt::print(stderr, "note: {}\n", list.diagnostic);
    }
    write_list(std::cout, list, "");
    return kOk;
}

int run_serve_batch(const Globals& g, const std::string& user_list, const std::string& out_dir,
                    const std::string& merged, std::optional<std::size_t> k, const std::string& digraph_flag) {
    if (out_dir.empty() == merged.empty()) {
        throw ConfigError("pass exactly one of --out-dir or --merged");
    }
    const auto config = resolve_config(g);
    std::vector<std::string> ids;
    {
        std::ifstream in(user_list);
        if (!in) {
            throw InputError(fmt::format("cannot open {}", user_list));
        }
        std::string line;
        while (std::getline(in, line)) {
            const auto id = csv::trim(line);
            if (!id.empty()) {
                ids.emplace_back(id);
            }
        }
    }
    const auto s = prepare_serving(config, digraph_dir_of(config, digraph_flag));
    const Recommender rec(s.digraph, s.corpus.catalog, s.corpus.embeddings ? &*s.corpus.embeddings : nullptr,
                          config.recommend, s.reference);

    std::ofstream merged_out;
    if (!merged.empty()) {
        merged_out.open(merged, std::ios::binary);
        if (!merged_out) {
            throw InputError(fmt::format("cannot write {}", merged));
        }
    } else {
        fs::create_directories(out_dir);
    }
    std::map<std::string, std::size_t> by_provenance;
    std::map<std::string, std::size_t> by_type;
    std::size_t served = 0;
    std::size_t unknown = 0;
    for (const auto& id : ids) {
        const auto it = s.profiles.find(id);
        if (it == s.profiles.end()) {
            ++unknown;
            continue;
        }
        const auto list = rec.recommend(it->second, k.value_or(config.recommend.k));
        ++served;
        ++by_type[std::string(to_string(list.user_type))];
        for (const auto& e : list.entries) {
            ++by_provenance[std::string(to_string(e.provenance))];
        }
        if (merged_out.is_open()) {
            write_list(merged_out, list, csv::quote(id) + ",");
        } else {
            std::ofstream out(fs::path(out_dir) / (id + ".csv"), std::ios::binary);
            if (!out) {
                throw InputError(fmt::format("cannot write recommendations for {}", id));
            }
            write_list(out, list, "");
        }
    }
    fmt::print("users served={} unknown_skipped={}\n", served, unknown);
    for (const auto& [type, n] : by_type) {
        fmt::print("user_type {}={}\n", type, n);
    }
    for (const auto& [prov, n] : by_provenance) {
        fmt::print("provenance {}={}\n", prov, n);
    }
    return kOk;
}

int run_mf_train(const Globals& g, const std::string& out, bool implicit_flag, const std::string& events) {
    auto config = resolve_config(g);
    override_path(config.events_file, events);
    if (implicit_flag) {
        config.mf.implicit = true;
    }
    const auto reference = reference_of(config);
    const auto corpus = stage("ingest", [&] { return load_corpus(config, {.load_embeddings = false}); });
    print_warnings(corpus);
    std::set<std::string, std::less<>> known;
    for (const auto& job : corpus.catalog.jobs()) {
        known.insert(job.job_id);
    }
    const auto signals =
        dedupe(drop_unknown_jobs(window_filter(corpus.events, reference, config.window_days), known).kept);
    const auto matrix = mf::build_matrix(signals);
    mf::ImplicitSets implicit;
    if (config.mf.implicit) {
        implicit = mf::implicit_sets_from_clicks(matrix, signals);
    }
    mf::TrainReport report;
    const auto model = stage("mf", [&] {
        return mf::als_train(matrix, config.mf, &report, config.mf.implicit ? &implicit : nullptr);
    });
    std::ofstream file(out, std::ios::binary);
    if (!file) {
        throw InputError(fmt::format("cannot write {}", out));
    }
    model.write(file);
    fmt::print("users={} jobs={} entries={} k={} mu={}\n", matrix.rows(), matrix.cols(), matrix.entries.size(),
               model.k, csv::format_double(model.mu));
    for (std::size_t it = 0; it < report.mse_per_iteration.size(); ++it) {
        fmt::print("iteration {} mse={}\n", it + 1, csv::format_double(report.mse_per_iteration[it]));
    }
    return kOk;
}

int run_evaluate(const Globals& g, const std::string& train, std::optional<std::size_t> k,
                 const std::string& systems_flag, const std::string& json_out) {
    auto config = resolve_config(g);
    override_path(config.events_file, train);
    const auto reference = reference_of(config);
    std::vector<std::string> systems;
    std::stringstream ss(systems_flag);
    for (std::string item; std::getline(ss, item, ',');) {
        if (const auto t = csv::trim(item); !t.empty()) {
            systems.emplace_back(t);
        }
    }
    const auto corpus = stage("ingest", [&] { return load_corpus(config); });
    print_warnings(corpus);
    const auto report = stage("evaluate", [&] {
        return evaluate_systems(corpus.events, corpus.catalog, corpus.embeddings ? &*corpus.embeddings : nullptr,
                                corpus.users, config, reference, systems, k.value_or(config.recommend.k),
                                config.seed);
    });
    fmt::print("{}", report.to_text());
    if (json_out.empty()) {
        fmt::print("{}\n", report.to_json());
    } else {
        std::ofstream out(json_out, std::ios::binary);
        if (!out) {
            throw InputError(fmt::format("cannot write {}", json_out));
        }
        out << report.to_json() << '\n';
    }
    return kOk;
}

int run_synth(const Globals& g, synth::SynthParams params, const std::string& out) {
    if (g.seed) {
        params.seed = *g.seed;
    }
    if (!g.reference_date.empty()) {
        const auto ts = parse_timestamp(g.reference_date);
        if (!ts) {
            throw ConfigError(fmt::format("cannot parse reference date '{}'", g.reference_date));
        }
        params.reference = *ts;
    }
    try {
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto corpus = synth::synth_corpus(params);
    synth::write_corpus(corpus, out);
    std::ofstream conf(fs::path(out) / "engine.conf", std::ios::binary);
    conf << "# Generated alongside the synthetic corpus.\n"
         << "events_file = events.csv\n"
         << "jobs_file = jobs.csv\n"
         << "embeddings_file = embeddings.txt\n"
         << "users_file = users.csv\n"
         << "digraph_dir = engine\n"
         << "reference_date = " << format_timestamp(params.reference) << '\n'
         << "window_days = " << params.window_days << '\n'
         << "seed = " << params.seed << '\n';
    fmt::print("events={} jobs={} users={} cold_jobs={}\n", corpus.events.size(), corpus.jobs.size(),
               corpus.users.size(), corpus.cold_jobs.size());
    return kOk;
}

int run_connectivity(const Globals& g) {
    const auto config = resolve_config(g);
    const auto reference = reference_of(config);
    const auto corpus = stage("ingest", [&] { return load_corpus(config); });
    print_warnings(corpus);
    const auto engine = stage("graph", [&] {
        return build_engine(corpus.events, corpus.catalog, corpus.embeddings ? &*corpus.embeddings : nullptr,
                            config, reference);
    });
    fmt::print("active_jobs={}\n", engine.connectivity.active_jobs);
    for (unsigned mask = 1; mask < 8; ++mask) {
        fmt::print("{},{}\n", eval::ConnectivityReport::subset_name(mask),
                   csv::format_double(engine.connectivity.at(mask)));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"jobrec: graph-based job recommendation engine"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config_file, "Engine config file (key = value)");
    auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config");
    app.add_option("--reference-date", g.reference_date, "Reference date YYYY-MM-DD overriding the config");

    std::function<int()> action;

    auto* build = app.add_subcommand("build", "Build the recommendation digraph and its manifest");
    std::string build_out, events, jobs, embeddings;
    bool fallback = false;
    build->add_option("--out", build_out, "Output directory (default: digraph_dir)");
    build->add_option("--events", events, "Events file");
    build->add_option("--jobs", jobs, "Jobs file");
    build->add_option("--embeddings", embeddings, "Embeddings file");
    build->add_flag("--fallback-embeddings", fallback, "Embed job text when no embeddings file is present");
    build->callback([&] { action = [&] { return run_build(g, build_out, fallback, events, jobs, embeddings); }; });

    auto* recommend = app.add_subcommand("recommend", "Recommend jobs for one user");
    std::string user, digraph;
    std::optional<std::size_t> k;
    recommend->add_option("--user", user, "User id")->required();
    recommend->add_option("--k", k, "List length");
    recommend->add_option("--digraph", digraph, "Built engine directory (default: digraph_dir)");
    recommend->callback([&] { action = [&] { return run_recommend(g, user, k, digraph); }; });

    auto* batch = app.add_subcommand("serve-batch", "Recommend for every user id in a file");
    std::string user_list, out_dir, merged;
    batch->add_option("--users", user_list, "File with one user id per line")->required();
    batch->add_option("--out-dir", out_dir, "Write one <user>.csv per user here");
    batch->add_option("--merged", merged, "Write one file keyed by user id");
    batch->add_option("--k", k, "List length");
    batch->add_option("--digraph", digraph, "Built engine directory (default: digraph_dir)");
    batch->callback([&] { action = [&] { return run_serve_batch(g, user_list, out_dir, merged, k, digraph); }; });

    auto* mf_train = app.add_subcommand("mf-train", "Train the matrix factorization baseline");
    std::string model_out;
    bool implicit = false;
    mf_train->add_option("--out", model_out, "Model output file")->required();
    mf_train->add_option("--events", events, "Events file");
    mf_train->add_flag("--implicit", implicit, "Fit implicit-feedback factors from clicks");
    mf_train->callback([&] { action = [&] { return run_mf_train(g, model_out, implicit, events); }; });

    auto* evaluate = app.add_subcommand("evaluate", "Offline comparison on a temporal holdout");
    std::string train, systems = "gbr,cf,mf", json_out;
    evaluate->add_option("--train", train, "Events file to split");
    evaluate->add_option("--k", k, "Cutoff for precision and recall");
    evaluate->add_option("--systems", systems, "Comma-separated subset of gbr,cf,mf");
    evaluate->add_option("--json", json_out, "Write the structured report here instead of stdout");
    evaluate->callback([&] { action = [&] { return run_evaluate(g, train, k, systems, json_out); }; });

    auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-cluster corpus");
    synth::SynthParams params;
    std::string synth_out;
    synth_cmd->add_option("--clusters", params.clusters, "Number of clusters");
    synth_cmd->add_option("--jobs-per-cluster", params.jobs_per_cluster, "Jobs per cluster");
    synth_cmd->add_option("--users", params.users, "Number of users");
    synth_cmd->add_option("--noise", params.noise, "Chance an event leaves the user's cluster");
    synth_cmd->add_option("--lifetime-days", params.job_lifetime_days,
                          "Mean days a posting stays open; 0 keeps postings open until the reference date");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->callback([&] { action = [&] { return run_synth(g, params, synth_out); }; });

    auto* conn = app.add_subcommand("connectivity", "Report how many active jobs each edge type reaches");
    conn->callback([&] { action = [&] { return run_connectivity(g); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    if (seed_opt->count() > 0) {
        g.seed = seed;
    }
    try {
        return action();
    } catch (const InputError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return kInput;
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const InvariantError& e) {
        fmt::print(stderr, "invariant violation: {}\n", e.what());
        return kInvariant;
    } catch (const std::exception& e) {
        fmt::print(stderr, "internal error: {}\n", e.what());
        return kInvariant;
    }
}
