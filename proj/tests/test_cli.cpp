#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "divlex/cli.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "divlex");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = divlex::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

/// Shared small dataset: 12 queries keeps every command quick.
class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        data_ = tmp_.path() / "data";
        auto r = run_cli({"gen", "--seed", "3", "--queries", "12", "--charges", "14", "--out", data_.string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }

    TempDir tmp_;
    fs::path data_;
};

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run_cli({}).code, divlex::cli::kUsageError);
    EXPECT_EQ(run_cli({"frobnicate"}).code, divlex::cli::kUsageError);
    auto no_seed = run_cli({"gen", "--out", "/tmp/never-written"});
    EXPECT_EQ(no_seed.code, divlex::cli::kUsageError);
    EXPECT_NE(no_seed.err.find("--seed"), std::string::npos);
    EXPECT_EQ(run_cli({"validate"}).code, divlex::cli::kUsageError);
}

TEST(Cli, HelpIsSuccess) {
    auto r = run_cli({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("eval"), std::string::npos);
}

TEST_F(CliTest, UnknownEmbedderIsUsageError) {
    auto r = run_cli({"--embedder", "word2vec", "features", "--dataset", data_.string(), "--seed", "1"});
    EXPECT_EQ(r.code, divlex::cli::kUsageError);
}

TEST_F(CliTest, ValidateAcceptsGeneratedData) {
    auto r = run_cli({"validate", "--dataset", data_.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("ok", 0), 0u);
}

TEST_F(CliTest, ValidateReportsLineOfBadTriple) {
    auto lines = lines_of(slurp(data_ / "triples.jsonl"));
    ASSERT_GE(lines.size(), 3u);
    auto bad = nlohmann::json::parse(lines[2]);
    bad["grade"] = 7;
    lines[2] = bad.dump();
    {
        std::ofstream out(data_ / "triples.jsonl", std::ios::binary);
        for (const auto& l : lines) out << l << '\n';
    }
    auto r = run_cli({"validate", "--dataset", data_.string()});
    EXPECT_EQ(r.code, divlex::cli::kValidationFailure);
    EXPECT_NE(r.err.find("triples.jsonl:3"), std::string::npos) << r.err;
}

TEST_F(CliTest, GenIsByteDeterministic) {
    auto again = tmp_.path() / "again";
    ASSERT_EQ(run_cli({"gen", "--seed", "3", "--queries", "12", "--charges", "14", "--out", again.string()}).code, 0);
    for (const auto& e : fs::directory_iterator(data_)) {
        EXPECT_EQ(slurp(e.path()), slurp(again / e.path().filename())) << e.path().filename();
    }
}

TEST_F(CliTest, TrainEvalRoundTrip) {
    auto ckpt = tmp_.path() / "m.json";
    auto t = run_cli({"train", "--dataset", data_.string(), "--seed", "1", "--samples", "600", "--mc-samples", "16",
                      "--hidden", "16,4", "--out", ckpt.string()});
    ASSERT_EQ(t.code, 0) << t.err;
    ASSERT_TRUE(fs::exists(ckpt));

    auto table = tmp_.path() / "table.tsv";
    auto js = tmp_.path() / "detail.json";
    auto e = run_cli({"eval", "--dataset", data_.string(), "--model", "DLRM=" + ckpt.string(), "--out", table.string(),
                      "--json", js.string(), "--seed", "1"});
    ASSERT_EQ(e.code, 0) << e.err;
    auto rows = lines_of(slurp(table));
    ASSERT_GE(rows.size(), 6u);
    for (const auto& row : rows) EXPECT_EQ(std::count(row.begin(), row.end(), '\t'), 8) << row;
    EXPECT_NE(slurp(table).find("\nDLRM\t"), std::string::npos);
    EXPECT_NO_THROW(nlohmann::json::parse(slurp(js)));

    auto rank = run_cli({"rank", "--dataset", data_.string(), "--query", "q0001", "--method", "bm25", "--seed", "1"});
    EXPECT_EQ(rank.code, 0) << rank.err;
    EXPECT_FALSE(rank.out.empty());
}

TEST_F(CliTest, OtherSubcommandsProduceOutput) {
    for (auto cmd : {"graph", "agreement", "annotate-prep", "features"}) {
        auto r = run_cli({cmd, "--dataset", data_.string(), "--seed", "1"});
        EXPECT_EQ(r.code, 0) << cmd << ": " << r.err;
        EXPECT_FALSE(r.out.empty()) << cmd;
    }
}

TEST_F(CliTest, MissingModelFileIsFailure) {
    auto r = run_cli({"eval", "--dataset", data_.string(), "--model", (tmp_.path() / "none.json").string()});
    EXPECT_NE(r.code, 0);
}
