#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "bias_lens/cli.hpp"
#include "bias_lens/corpus.hpp"
#include "bias_lens/influence.hpp"
#include "bias_lens/synthetic.hpp"
#include "bias_lens/verbalizer.hpp"
#include "test_support.hpp"

namespace bias_lens {
namespace {

using nlohmann::json;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Writes a small synthetic world plus its initial checkpoint into `dir`.
void write_world(const TempDir& dir, std::size_t n_train = 40, std::size_t n_eval = 40) {
  SyntheticWorldConfig config;
  config.n_train = n_train;
  config.n_eval = n_eval;
  const auto world = make_synthetic_world(config);
  save_qa_dataset(world.train, dir / "qa.jsonl");
  save_qa_dataset(world.eval, dir / "eval.jsonl");
  save_reference_pairs(world.reference_pool, dir / "refs.jsonl");
  make_synthetic_scorer(world, config).save(dir / "init.json");
  json c;
  c["qa_data"] = "qa.jsonl";
  c["eval_data"] = "eval.jsonl";
  c["reference_pool"] = "refs.jsonl";
  c["init_checkpoint"] = "init.json";
  c["checkpoint"] = "out/ckpt.json";
  c["history_out"] = "out/history.jsonl";
  c["report_out"] = "out/report.json";
  c["learning_rate"] = 1e-4;
  c["max_epochs"] = 2;
  c["seeds"] = {1};
  write_file(dir / "config.json", c.dump(2));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("BIAS_LENS_SEED"); }
  void TearDown() override { unsetenv("BIAS_LENS_SEED"); }
};

TEST_F(CliTest, ConfigKeysAndOverrides) {
  TempDir dir("cli");
  write_world(dir);
  const auto config = load_run_config(dir / "config.json", {{"k_pairs", "3"}, {"seeds", "4,5"}});
  EXPECT_EQ(config.train.k_pairs, 3u);
  EXPECT_EQ(config.seeds, (std::vector<std::uint32_t>{4, 5}));
  EXPECT_EQ(config.runs, 2u);
  EXPECT_EQ(config.qa_data, dir.path() / "qa.jsonl");
  EXPECT_EQ(config.config_hash.size(), 16u);
  const auto other = load_run_config(dir / "config.json", {{"k_pairs", "4"}, {"seeds", "4,5"}});
  EXPECT_NE(config.config_hash, other.config_hash);
}

TEST_F(CliTest, RunsMustMatchSeeds) {
  EXPECT_THROW(make_run_config(json{{"runs", 2}, {"seeds", {1}}}, "."), ValidationError);
  EXPECT_THROW(make_run_config(json{{"no_such_key", 1}}, "."), ValidationError);
  EXPECT_THROW(make_run_config(json{{"baseline", "magic"}}, "."), ValidationError);
  const auto c = make_run_config(json::object(), ".");
  EXPECT_EQ(c.runs, 3u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint32_t>{1, 2, 3}));
}

TEST_F(CliTest, SeedEnvironmentOverride) {
  setenv("BIAS_LENS_SEED", "77", 1);
  const auto c = make_run_config(json{{"seeds", {1, 2, 3}}, {"runs", 3}}, ".");
  EXPECT_EQ(c.seeds, (std::vector<std::uint32_t>{77}));
  EXPECT_EQ(c.runs, 1u);
  setenv("BIAS_LENS_SEED", "x", 1);
  EXPECT_THROW(make_run_config(json::object(), "."), ValidationError);
}

TEST_F(CliTest, PerSeedPaths) {
  EXPECT_EQ(per_seed_path("a/ckpt.json", 3, 1), std::filesystem::path("a/ckpt.json"));
  EXPECT_EQ(per_seed_path("a/ckpt.json", 3, 2), std::filesystem::path("a/ckpt.seed3.json"));
  EXPECT_EQ(per_seed_path("a/run-{seed}.json", 3, 1), std::filesystem::path("a/run-3.json"));
}

TEST_F(CliTest, DetectEmptyFile) {
  TempDir dir("cli");
  write_world(dir);
  write_file(dir / "empty.jsonl", "");
  const auto r = run({"detect", "--config", (dir / "config.json").string(), "--eval_data",
                      (dir / "empty.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("empty dataset"), std::string::npos) << r.err;
}

// Table scorer whose ruler-given-query distributions produce chosen totals.
void write_detection_fixture(const TempDir& dir, const std::vector<double>& totals,
                             const std::vector<std::string>& gold_labels) {
  const auto pair = testing::make_reference_pair("fight", "x");
  save_reference_pairs({pair}, dir / "refs.jsonl");
  std::string eval;
  std::string table;
  const double neutral_share = 0.5;
  for (std::size_t i = 0; i < totals.size(); ++i) {
    auto q = testing::make_instance("d" + std::to_string(i), 0);
    q.context = "Context number " + std::to_string(i) + ".";
    json record = json::parse(to_json(q).dump());
    record["answer_index"] = 0;
    record["detection_label"] = gold_labels[i];
    eval += record.dump() + "\n";
    const auto [neu, given] = build_parallel_queries(q, 0, pair);
    // Ruler layout USN: SG at 1, NEG_SG at 2.
    const double share = neutral_share + totals[i];
    table += json{{"input_text", neu.text}, {"probs", {0.2, 0.4, 0.4}}}.dump() + "\n";
    table += json{{"input_text", given.text}, {"probs", {0.2, 0.8 * share, 0.8 * (1.0 - share)}}}.dump() + "\n";
  }
  write_file(dir / "labeled.jsonl", eval);
  write_file(dir / "table.jsonl", table);
}

TEST_F(CliTest, DetectPerfectDetector) {
  TempDir dir("cli");
  write_detection_fixture(dir, {0.3, -0.3, 0.0, 0.2, -0.1, 0.01},
                          {"BIASED", "ANTI_BIASED", "NEUTRAL", "BIASED", "ANTI_BIASED", "NEUTRAL"});
  const auto r = run({"detect", "--eval_data", (dir / "labeled.jsonl").string(), "--reference_pool",
                      (dir / "refs.jsonl").string(), "--scorer_table", (dir / "table.jsonl").string(),
                      "--report_out", (dir / "det.json").string(), "--k_pairs", "1", "--seeds", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(read_file(dir / "det.json"));
  for (const char* c : {"BIASED", "NEUTRAL", "ANTI_BIASED"}) {
    EXPECT_DOUBLE_EQ(report["report"]["classes"][c]["precision"].get<double>(), 1.0) << c;
    EXPECT_DOUBLE_EQ(report["report"]["classes"][c]["recall"].get<double>(), 1.0) << c;
  }
  EXPECT_EQ(report["seeds"], json({1}));
  EXPECT_TRUE(report.contains("config_hash"));
}

TEST_F(CliTest, DetectKnownConfusion) {
  TempDir dir("cli");
  // Predictions by threshold 0.05: B, N, A, B, N.
  write_detection_fixture(dir, {0.3, 0.02, -0.2, 0.1, -0.01},
                          {"BIASED", "BIASED", "ANTI_BIASED", "NEUTRAL", "NEUTRAL"});
  const auto r = run({"detect", "--eval_data", (dir / "labeled.jsonl").string(), "--reference_pool",
                      (dir / "refs.jsonl").string(), "--scorer_table", (dir / "table.jsonl").string(),
                      "--report_out", (dir / "det.json").string(), "--k_pairs", "1", "--seeds", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto classes = json::parse(read_file(dir / "det.json"))["report"]["classes"];
  EXPECT_DOUBLE_EQ(classes["BIASED"]["precision"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(classes["BIASED"]["recall"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(classes["NEUTRAL"]["precision"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(classes["NEUTRAL"]["recall"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(classes["ANTI_BIASED"]["precision"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(classes["ANTI_BIASED"]["recall"].get<double>(), 1.0);
}

TEST_F(CliTest, MitigateZeroEpochsKeepsInitialization) {
  TempDir dir("cli");
  write_world(dir);
  const auto r = run({"mitigate", "--config", (dir / "config.json").string(), "--max_epochs", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto init = ToyTrainableScorer::load(dir / "init.json");
  const auto out = ToyTrainableScorer::load(dir / "out/ckpt.json");
  ASSERT_EQ(init.parameters().size(), out.parameters().size());
  for (std::size_t i = 0; i < init.parameters().size(); ++i) {
    EXPECT_EQ(init.parameters()[i], out.parameters()[i]);
  }
  EXPECT_EQ(read_file(dir / "out/history.jsonl"), "");
}

TEST_F(CliTest, MitigateIsByteDeterministic) {
  TempDir dir("cli");
  write_world(dir);
  const auto cfg = (dir / "config.json").string();
  ASSERT_EQ(run({"mitigate", "--config", cfg, "--checkpoint", (dir / "a.json").string()}).code, 0);
  ASSERT_EQ(run({"mitigate", "--config", cfg, "--checkpoint", (dir / "b.json").string()}).code, 0);
  EXPECT_EQ(read_file(dir / "a.json"), read_file(dir / "b.json"));
  const auto history = read_file(dir / "out/history.jsonl");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 2);
}

TEST_F(CliTest, BundledToyFixtureDefaults) {
  TempDir dir("cli");
  const auto cfg = std::string(BIAS_LENS_DATA_DIR) + "/toy/config.json";
  const auto r = run({"mitigate", "--config", cfg, "--checkpoint", (dir / "ckpt.json").string(),
                      "--history_out", (dir / "history.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int seed : {1, 2, 3}) {
    const auto suffix = ".seed" + std::to_string(seed);
    EXPECT_TRUE(std::filesystem::exists(dir / ("ckpt" + suffix + ".json")));
    const auto history = read_file(dir / ("history" + suffix + ".jsonl"));
    EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 20);
  }
}

TEST_F(CliTest, MitigateMultiSeedNamesCheckpoints) {
  TempDir dir("cli");
  write_world(dir);
  const auto r = run({"mitigate", "--config", (dir / "config.json").string(), "--seeds", "1,2",
                      "--max_epochs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "out/ckpt.seed1.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out/ckpt.seed2.json"));
}

TEST_F(CliTest, MitigateRejectsTableScorer) {
  TempDir dir("cli");
  write_world(dir);
  write_file(dir / "t.jsonl", "");
  const auto r = run({"mitigate", "--config", (dir / "config.json").string(), "--scorer_table",
                      (dir / "t.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("not trainable"), std::string::npos);
}

TEST_F(CliTest, EvaluateMissingCheckpoint) {
  TempDir dir("cli");
  write_world(dir);
  const auto r = run({"evaluate", "--config", (dir / "config.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing checkpoint"), std::string::npos) << r.err;
}

TEST_F(CliTest, EvaluateIdenticalCheckpointsGiveZeroDeltas) {
  TempDir dir("cli");
  write_world(dir);
  const auto r = run({"evaluate", "--config", (dir / "config.json").string(), "--checkpoint",
                      (dir / "init.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(read_file(dir / "out/report.json"));
  std::size_t deltas = 0;
  for (const auto& row : report["after"]["rows"]) {
    for (const auto& [name, metric] : row.items()) {
      if (!metric.is_object() || metric["delta"].is_null()) continue;
      EXPECT_EQ(metric["delta"].get<double>(), 0.0) << name;
      ++deltas;
    }
  }
  EXPECT_GT(deltas, 0u);
  EXPECT_TRUE(std::filesystem::exists(dir / "out/report.csv"));
}

TEST_F(CliTest, EvaluateFourRecordFixture) {
  TempDir dir("cli");
  // Four records, (SG, NEG_SG, UNKNOWN) candidates, shares 0.2 0.9 0.3 0.4.
  struct Row {
    const char* condition;
    std::size_t gold;
    std::size_t predicted;
    double share;
  };
  const std::vector<Row> rows = {{"disambiguated", 2, 1, 0.2},
                                 {"disambiguated", 0, 0, 0.9},
                                 {"ambiguous", 2, 1, 0.3},
                                 {"ambiguous", 2, 0, 0.4}};
  std::string eval;
  std::string table;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto q = testing::make_instance(std::to_string(i + 1), rows[i].gold, parse_context_condition(rows[i].condition));
    q.context = "Fixture context " + std::to_string(i + 1) + ".";
    q.template_id = "fixture-" + std::to_string(i + 1);
    eval += to_json(q).dump() + "\n";
    const double s = rows[i].share;
    table += json{{"input_text", verbalize_instance(q.question, q.candidates, q.context)},
                  {"probs", {0.9 * s, 0.9 * (1.0 - s), 0.1}},
                  {"predicted_index", rows[i].predicted}}
                 .dump() +
             "\n";
  }
  write_file(dir / "eval.jsonl", eval);
  write_file(dir / "table.jsonl", table);
  save_reference_pairs({testing::make_reference_pair("fight", "x")}, dir / "refs.jsonl");
  const auto r = run({"evaluate", "--eval_data", (dir / "eval.jsonl").string(), "--reference_pool",
                      (dir / "refs.jsonl").string(), "--scorer_table", (dir / "table.jsonl").string(),
                      "--report_out", (dir / "report.json").string(), "--k_pairs", "1", "--seeds", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(read_file(dir / "report.json"));
  for (const auto& row : report["before"]["rows"]) {
    if (row["category"] != "*" || row["context_condition"] != "*") continue;
    EXPECT_NEAR(row["score_new"]["mean"].get<double>(), -0.40, 1e-12);
    EXPECT_DOUBLE_EQ(row["accuracy"]["mean"].get<double>(), 0.25);
    EXPECT_EQ(row["score_dis_legacy"]["mean"].get<double>(), 0.0);
    EXPECT_EQ(row["score_amb_legacy"]["mean"].get<double>(), 0.0);
  }
}

TEST_F(CliTest, EvaluateThreeSeedsPopulatesVariance) {
  TempDir dir("cli");
  write_world(dir);
  const auto cfg = (dir / "config.json").string();
  ASSERT_EQ(run({"mitigate", "--config", cfg, "--seeds", "1,2,3", "--max_epochs", "1"}).code, 0);
  const auto r = run({"evaluate", "--config", cfg, "--seeds", "1,2,3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(read_file(dir / "out/report.json"));
  EXPECT_EQ(report["after"]["runs"], 3);
  EXPECT_EQ(report["seeds"], json({1, 2, 3}));
  const auto& row = report["after"]["rows"][0];
  EXPECT_TRUE(row["accuracy"]["variance"].is_number());
  EXPECT_EQ(row["accuracy"]["runs"], 3);
}

TEST_F(CliTest, NlInterventionNeedsNoCheckpoint) {
  TempDir dir("cli");
  write_world(dir);
  const auto r = run({"evaluate", "--config", (dir / "config.json").string(), "--baseline",
                      "nl_intervention"});
  ASSERT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, AugmentWritesSwappedData) {
  TempDir dir("cli");
  write_world(dir, 10, 1);
  const auto r = run({"augment", "--config", (dir / "config.json").string(), "--swap_prob", "1",
                      "--augment_out", (dir / "aug.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto original = load_qa_dataset(dir / "qa.jsonl");
  const auto augmented = load_qa_dataset(dir / "aug.jsonl");
  ASSERT_EQ(original.size(), augmented.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    changed += original.instances[i].context != augmented.instances[i].context;
    EXPECT_EQ(original.instances[i].candidates, augmented.instances[i].candidates);
  }
  EXPECT_GT(changed, 0u);
}

TEST_F(CliTest, ReportAggregatesRuns) {
  TempDir dir("cli");
  write_world(dir);
  const auto cfg = (dir / "config.json").string();
  ASSERT_EQ(run({"mitigate", "--config", cfg, "--seeds", "1,2", "--max_epochs", "1"}).code, 0);
  for (const char* seed : {"1", "2"}) {
    const auto out = (dir / (std::string("run") + seed + ".json")).string();
    ASSERT_EQ(run({"evaluate", "--config", cfg, "--seeds", seed, "--checkpoint",
                   (dir / (std::string("out/ckpt.seed") + seed + ".json")).string(), "--report_out", out})
                  .code,
              0);
  }
  const auto r = run({"report", "--config", cfg, "--report_out", (dir / "agg.json").string(),
                      (dir / "run1.json").string(), (dir / "run2.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto agg = json::parse(read_file(dir / "agg.json"));
  EXPECT_EQ(agg["after"]["runs"], 2);
  EXPECT_EQ(agg["seeds"], json({1, 2}));
}

TEST_F(CliTest, BadUsageIsValidationFailure) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"detect", "--no-such-flag", "1"}).code, 2);
  EXPECT_EQ(run({"mitigate", "--config", "/nonexistent/config.json"}).code, 2);
}

}  // namespace
}  // namespace bias_lens
