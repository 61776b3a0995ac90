#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>

#include <fmt/format.h>
#include <json.hpp>

#include "jobrec/pipeline.hpp"

using namespace jobrec;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

/// Runs the CLI with `args`, capturing stdout; stderr is discarded.
Run cli(const std::string& args) {
    const auto command = fmt::format("\"{}\" {} 2>/dev/null", JOBREC_CLI, args);
    Run r;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) {
        return r;
    }
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) {
        r.out.append(buf, n);
    }
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "jobrec_cli_test";
        fs::remove_all(dir_);
        const auto synth = cli(fmt::format(
            "--seed 4 synth --clusters 3 --jobs-per-cluster 40 --users 200 --out \"{}\"", dir_.string()));
        ASSERT_EQ(synth.code, 0);
        ASSERT_EQ(cli(fmt::format("--config \"{}\" build", conf().string())).code, 0);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static fs::path conf() { return dir_ / "engine.conf"; }
    static std::string with_config(const std::string& rest) {
        return fmt::format("--config \"{}\" {}", conf().string(), rest);
    }

    /// Users by type, replayed through the library.
    static std::map<UserType, std::vector<std::string>> users_by_type() {
        const auto config = load_config(conf());
        const auto corpus = load_corpus(config);
        const auto profiles = build_profiles(corpus.events, corpus.users, reference_of(config), config.window_days);
        std::map<UserType, std::vector<std::string>> out;
        for (const auto& [id, p] : profiles) out[classify_user(p)].push_back(id);
        return out;
    }

    static fs::path dir_;
};

fs::path CliTest::dir_;

}  // namespace

TEST_F(CliTest, BuildWritesManifestWithNodeCount) {
    const auto m = nlohmann::json::parse(slurp(dir_ / "engine" / "manifest.json"));
    EXPECT_EQ(m["nodes"].get<std::size_t>(), 3u * 40u);
    EXPECT_EQ(m["embeddings"], "file");
}

TEST_F(CliTest, RebuildIsByteIdentical) {
    const auto before = slurp(dir_ / "engine" / "digraph.csv");
    const auto out = dir_ / "rebuild";
    ASSERT_EQ(cli(with_config(fmt::format("build --out \"{}\"", out.string()))).code, 0);
    EXPECT_EQ(slurp(out / "digraph.csv"), before);
    EXPECT_EQ(slurp(out / "manifest.json"), slurp(dir_ / "engine" / "manifest.json"));
}

TEST_F(CliTest, BuildWithoutEmbeddingsStillSucceeds) {
    const auto out = dir_ / "no_embeddings";
    const auto r = cli(with_config(
        fmt::format("build --out \"{}\" --embeddings \"{}\"", out.string(), (dir_ / "missing.txt").string())));
    ASSERT_EQ(r.code, 0);
    const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(m["content_edges"], 0);
    EXPECT_EQ(m["embeddings"], "none");
}

TEST_F(CliTest, RecommendPrintsRankedList) {
    const auto active = users_by_type()[UserType::Active];
    ASSERT_FALSE(active.empty());
    const auto r = cli(with_config(fmt::format("recommend --user {} --k 5", active.front())));
    ASSERT_EQ(r.code, 0);
    const auto lines = lines_of(r.out);
    ASSERT_GE(lines.size(), 1u);
    EXPECT_LE(lines.size(), 5u);
    EXPECT_EQ(lines[0].rfind("1,", 0), 0u);
}

TEST_F(CliTest, UnknownUserIsServedAsAnonymous) {
    const auto r = cli(with_config("recommend --user nobody-at-all --k 3"));
    ASSERT_EQ(r.code, 0);
    const auto lines = lines_of(r.out);
    ASSERT_EQ(lines.size(), 3u);
    for (const auto& line : lines) {
        EXPECT_TRUE(line.ends_with(",GlobalPR")) << line;
    }
}

TEST_F(CliTest, ServeBatchAnonymousUsersGetGlobalRanking) {
    const auto anonymous = users_by_type()[UserType::Anonymous];
    ASSERT_FALSE(anonymous.empty());
    {
        std::ofstream out(dir_ / "anon.txt");
        for (const auto& u : anonymous) out << u << '\n';
    }
    const auto merged = dir_ / "anon.csv";
    const auto r = cli(with_config(
        fmt::format("serve-batch --users \"{}\" --merged \"{}\"", (dir_ / "anon.txt").string(), merged.string())));
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find(fmt::format("users served={}", anonymous.size())), std::string::npos) << r.out;
    std::size_t rows = 0;
    for (const auto& line : lines_of(slurp(merged))) {
        ++rows;
        EXPECT_TRUE(line.ends_with(",GlobalPR")) << line;
    }
    EXPECT_GT(rows, 0u);
}

TEST_F(CliTest, ServeBatchProvenanceMatchesClassification) {
    const auto types = users_by_type();
    {
        std::ofstream out(dir_ / "mixed.txt");
        for (const auto& [type, ids] : types) {
            for (std::size_t x = 0; x < ids.size() && x < 5; ++x) out << ids[x] << '\n';
        }
        out << "ghost-user\n";
    }
    const auto out_dir = dir_ / "mixed";
    const auto r = cli(with_config(
        fmt::format("serve-batch --users \"{}\" --out-dir \"{}\"", (dir_ / "mixed.txt").string(), out_dir.string())));
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("unknown_skipped=1"), std::string::npos) << r.out;
    for (const auto& [type, ids] : types) {
        for (std::size_t x = 0; x < ids.size() && x < 5; ++x) {
            const auto text = slurp(out_dir / (ids[x] + ".csv"));
            ASSERT_FALSE(text.empty()) << ids[x];
            if (type == UserType::Anonymous) {
                EXPECT_EQ(text.find("Level1"), std::string::npos);
                EXPECT_EQ(text.find("PersonalizedPR"), std::string::npos);
            }
            if (type == UserType::PassiveOrNewWithProfile) {
                EXPECT_EQ(text.find("Level1"), std::string::npos);
            }
        }
    }
    EXPECT_FALSE(fs::exists(out_dir / "ghost-user.csv"));
}

TEST_F(CliTest, ServeBatchEmptyUsersFile) {
    { std::ofstream out(dir_ / "empty.txt"); }
    const auto merged = dir_ / "empty.csv";
    const auto r = cli(with_config(
        fmt::format("serve-batch --users \"{}\" --merged \"{}\"", (dir_ / "empty.txt").string(), merged.string())));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("users served=0"), std::string::npos);
    EXPECT_TRUE(slurp(merged).empty());
}

TEST_F(CliTest, EvaluateWritesJsonReport) {
    const auto json = dir_ / "eval.json";
    const auto r = cli(with_config(fmt::format("evaluate --k 10 --systems gbr,cf --json \"{}\"", json.string())));
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(slurp(json));
    ASSERT_EQ(j["systems"].size(), 2u);
    EXPECT_EQ(j["systems"][0]["system"], "gbr");
    EXPECT_EQ(j["systems"][1]["system"], "cf");
    EXPECT_NE(r.out.find("precision@k"), std::string::npos);
}

TEST_F(CliTest, MfTrainWritesModel) {
    const auto model = dir_ / "model.txt";
    ASSERT_EQ(cli(with_config(fmt::format("mf-train --out \"{}\"", model.string()))).code, 0);
    std::ifstream in(model);
    EXPECT_NO_THROW(mf::FactorModel::load(in));
}

TEST_F(CliTest, ConnectivityListsSubsets) {
    const auto r = cli(with_config("connectivity"));
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("clicks+apps+content"), std::string::npos) << r.out;
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(cli("--config /nonexistent.conf build").code, 2);
    EXPECT_EQ(cli("recommend").code, 2);
    EXPECT_EQ(cli("no-such-command").code, 2);
    EXPECT_EQ(cli(with_config("evaluate --systems gbr,bogus")).code, 2);
    EXPECT_EQ(cli(with_config(fmt::format("build --events \"{}\"", (dir_ / "nope.csv").string()))).code, 1);
    EXPECT_EQ(cli(with_config("serve-batch --users /nonexistent/users.txt --merged /tmp/x.csv")).code, 1);
    {
        std::ofstream bad(dir_ / "bad.conf");
        bad << "damping = 2\n";
    }
    EXPECT_EQ(cli(fmt::format("--config \"{}\" connectivity", (dir_ / "bad.conf").string())).code, 2);
}
