#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using memfuse::testing::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
    json summary() const { return json::parse(out); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

Run memfuse_cli(const TempDir& dir, const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + MEMFUSE_CLI_PATH + "\" " + args + " >\"" + out.string() +
                            "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

const char* kSmallData = "--n 48 --n-val 16 --n-test 16 --dims 6,4,4 --max-len 5 --rerank-items 6 --candidates 2";
const char* kSmallModel = "--latent-dim 8 --heads 2 --fusion-hidden 8 --batch-size 8";

std::string gen(const TempDir& dir, const std::string& name, int seed = 1) {
    const auto out = (dir / name).string();
    const auto r = memfuse_cli(dir, "gen-synthetic " + std::string(kSmallData) + " --seed " + std::to_string(seed) +
                                        " --out \"" + out + "\"");
    EXPECT_EQ(r.code, 0) << r.err;
    return out;
}

std::string train_args(const std::string& data, const std::string& out) {
    return "train --train-manifest \"" + data + "/train.jsonl\" --val-manifest \"" + data + "/val.jsonl\" --out \"" +
           out + "\" " + kSmallModel;
}

std::string quick_train_args(const std::string& data, const std::string& out) {
    return train_args(data, out) + " --epochs 3 --lr 1e-2";
}

}  // namespace

TEST(Cli, GenSyntheticIsDeterministic) {
    TempDir dir("cli-gen");
    ASSERT_EQ(memfuse_cli(dir, "gen-synthetic --n 100 --seed 1 --out \"" + (dir / "a").string() + "\"").code, 0);
    ASSERT_EQ(memfuse_cli(dir, "gen-synthetic --n 100 --seed 1 --out \"" + (dir / "b").string() + "\"").code, 0);
    const auto a = tree(dir / "a");
    const auto b = tree(dir / "b");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, b);
}

TEST(Cli, GenSyntheticRejectsZeroWidth) {
    TempDir dir("cli-dims");
    const auto r = memfuse_cli(dir, "gen-synthetic --n 10 --dims 0,8,8 --out \"" + (dir / "x").string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
}

TEST(Cli, GenSyntheticSummaryLabelsInUnitInterval) {
    TempDir dir("cli-sum");
    const auto r = memfuse_cli(dir, "gen-synthetic " + std::string(kSmallData) + " --out \"" + (dir / "d").string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = r.summary();
    for (const char* split : {"train", "validation", "test"}) {
        EXPECT_GT(j[split]["label_min"].get<double>(), 0.0) << split;
        EXPECT_LT(j[split]["label_max"].get<double>(), 1.0) << split;
    }
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    TempDir dir("cli-usage");
    EXPECT_EQ(memfuse_cli(dir, "bogus").code, 2);
    EXPECT_EQ(memfuse_cli(dir, "").code, 2);
}

TEST(Cli, TrainTwiceGivesIdenticalArtifacts) {
    TempDir dir("cli-train");
    const auto data = gen(dir, "d");
    const auto a = memfuse_cli(dir, quick_train_args(data, (dir / "a").string()) + " --seed 4");
    const auto b = memfuse_cli(dir, quick_train_args(data, (dir / "b").string()) + " --seed 4");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(dir / "a" / "checkpoint.mmem"), slurp(dir / "b" / "checkpoint.mmem"));
    EXPECT_EQ(slurp(dir / "a" / "metrics.json"), slurp(dir / "b" / "metrics.json"));
    EXPECT_EQ(lines(slurp(dir / "a" / "train_log.jsonl")).size(), a.summary()["epochs_run"].get<std::size_t>());
    const auto run = json::parse(slurp(dir / "a" / "run.json"));
    EXPECT_EQ(run["subcommand"], "train");
    EXPECT_EQ(run["resolved"]["model"]["latent_dim"], 8);
}

TEST(Cli, TrainMissingManifestNamesPath) {
    TempDir dir("cli-missing");
    const auto ghost = (dir / "nope.jsonl").string();
    const auto r = memfuse_cli(dir, "train --train-manifest \"" + ghost + "\" --val-manifest \"" + ghost +
                                        "\" --out \"" + (dir / "o").string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find(ghost), std::string::npos) << r.err;
}

TEST(Cli, TrainWithZeroLearningRateWarns) {
    TempDir dir("cli-lr0");
    const auto data = gen(dir, "d");
    const auto r = memfuse_cli(dir, train_args(data, (dir / "o").string()) + " --epochs 3 --lr 0");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_TRUE(r.summary().contains("note"));
}

TEST(Cli, TrainRejectsBadConfig) {
    TempDir dir("cli-badcfg");
    const auto data = gen(dir, "d");
    const std::string base = "train --train-manifest \"" + data + "/train.jsonl\" --val-manifest \"" + data +
                             "/val.jsonl\" --out \"" + (dir / "o").string() + "\" --epochs 1";
    const auto bad_heads = memfuse_cli(dir, base + " --latent-dim 8 --heads 3");
    EXPECT_EQ(bad_heads.code, 2);
    EXPECT_NE(bad_heads.err.find("head"), std::string::npos) << bad_heads.err;
    EXPECT_EQ(memfuse_cli(dir, quick_train_args(data, (dir / "o").string()) + " --attention sideways").code, 2);
}

TEST(Cli, EvaluateAfterMemorizingOneSample) {
    TempDir dir("cli-memo");
    const auto data = gen(dir, "d");
    const auto first = lines(slurp(fs::path(data) / "train.jsonl")).at(0);
    auto entry = json::parse(first);
    {
        std::ofstream(fs::path(data) / "one.jsonl") << entry.dump() << '\n';
        entry["id"] = entry["id"].get<std::string>() + "-copy";
        entry["split"] = "validation";
        std::ofstream(fs::path(data) / "one_val.jsonl") << entry.dump() << '\n';
    }
    const auto out = (dir / "m").string();
    const auto t = memfuse_cli(dir, "train --train-manifest \"" + data + "/one.jsonl\" --val-manifest \"" + data +
                                        "/one_val.jsonl\" --out \"" + out +
                                        "\" --latent-dim 8 --heads 2 --fusion-hidden 8 --dropout 0 --epochs 200"
                                        " --batch-size 1 --lr 1e-2 --patience 500 --selection val_mse");
    ASSERT_EQ(t.code, 0) << t.err;
    const auto e = memfuse_cli(dir, "evaluate --checkpoint \"" + out + "/checkpoint.mmem\" --manifest \"" + data +
                                        "/one.jsonl\" --out \"" + (dir / "e").string() + "\"");
    ASSERT_EQ(e.code, 0) << e.err;
    const auto j = e.summary();
    EXPECT_LT(j["mse"].get<double>(), 1e-4);
    EXPECT_TRUE(j["spearman"].is_null());
    EXPECT_EQ(j["n"], 1);
}

TEST(Cli, PredictEvaluateAnalyzeRank) {
    TempDir dir("cli-flow");
    const auto data = gen(dir, "d");
    const auto model = (dir / "m").string();
    ASSERT_EQ(memfuse_cli(dir, quick_train_args(data, model)).code, 0);
    const auto ck = model + "/checkpoint.mmem";

    const auto p = memfuse_cli(dir, "predict --checkpoint \"" + ck + "\" --manifest \"" + data + "/test.jsonl\" --out \"" +
                                        (dir / "p").string() + "\"");
    ASSERT_EQ(p.code, 0) << p.err;
    const auto rows = lines(slurp(dir / "p" / "predictions.csv"));
    ASSERT_EQ(rows.size(), 17u);
    EXPECT_EQ(rows[0], "id,score");

    // evaluation does not depend on manifest order
    auto test_lines = lines(slurp(fs::path(data) / "test.jsonl"));
    std::reverse(test_lines.begin(), test_lines.end());
    {
        std::ofstream shuffled(fs::path(data) / "test_rev.jsonl");
        for (const auto& l : test_lines) shuffled << l << '\n';
    }
    const auto e1 = memfuse_cli(dir, "evaluate --checkpoint \"" + ck + "\" --manifest \"" + data +
                                         "/test.jsonl\" --out \"" + (dir / "e1").string() + "\"");
    const auto e2 = memfuse_cli(dir, "evaluate --checkpoint \"" + ck + "\" --manifest \"" + data +
                                         "/test_rev.jsonl\" --out \"" + (dir / "e2").string() + "\"");
    ASSERT_EQ(e1.code, 0) << e1.err;
    EXPECT_EQ(e1.out, e2.out);

    const auto an = memfuse_cli(dir, "analyze --checkpoint \"" + ck + "\" --manifest \"" + data +
                                         "/test.jsonl\" --permutations 99 --out \"" + (dir / "a").string() + "\"");
    ASSERT_EQ(an.code, 0) << an.err;
    EXPECT_EQ(an.summary()["factors"].size(), 6u);
    EXPECT_TRUE(fs::exists(dir / "a" / "factors.md"));

    const auto rk = memfuse_cli(dir, "rank --checkpoint \"" + ck + "\" --manifest \"" + data + "/rerank.jsonl\" --out \"" +
                                         (dir / "r").string() + "\"");
    ASSERT_EQ(rk.code, 0) << rk.err;
    EXPECT_EQ(rk.summary()["items"], 6);
    EXPECT_EQ(lines(slurp(dir / "r" / "rerank.csv")).size(), 7u);
}

TEST(Cli, AnalyzeWithoutMetadataFails) {
    TempDir dir("cli-nometa");
    const auto data = gen(dir, "d");
    const auto model = (dir / "m").string();
    ASSERT_EQ(memfuse_cli(dir, quick_train_args(data, model)).code, 0);
    std::ofstream stripped(fs::path(data) / "bare.jsonl");
    for (const auto& l : lines(slurp(fs::path(data) / "test.jsonl"))) {
        auto j = json::parse(l);
        j.erase("metadata");
        stripped << j.dump() << '\n';
    }
    stripped.close();
    const auto r = memfuse_cli(dir, "analyze --checkpoint \"" + model + "/checkpoint.mmem\" --manifest \"" + data +
                                        "/bare.jsonl\" --out \"" + (dir / "a").string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("no metadata"), std::string::npos) << r.err;

    const auto rk = memfuse_cli(dir, "rank --checkpoint \"" + model + "/checkpoint.mmem\" --manifest \"" + data +
                                         "/test.jsonl\" --out \"" + (dir / "r").string() + "\"");
    EXPECT_EQ(rk.code, 2);
}

TEST(Cli, CorruptCheckpointIsUsageError) {
    TempDir dir("cli-corrupt");
    const auto data = gen(dir, "d");
    std::ofstream(dir / "bad.mmem") << "not a checkpoint";
    const auto r = memfuse_cli(dir, "evaluate --checkpoint \"" + (dir / "bad.mmem").string() + "\" --manifest \"" +
                                        data + "/test.jsonl\" --out \"" + (dir / "e").string() + "\"");
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, AblateEmitsTwelveRows) {
    TempDir dir("cli-ablate");
    const auto data = gen(dir, "d");
    const auto r = memfuse_cli(dir, "ablate --manifests \"" + data + "/train.jsonl\",\"" + data +
                                        "/val.jsonl\" --out \"" + (dir / "a").string() + "\" " + kSmallModel +
                                        " --epochs 2 --lr 1e-2");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.summary()["rows"].size(), 12u);
    EXPECT_EQ(lines(slurp(dir / "a" / "ablation.csv")).size(), 13u);
}
