#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "bias_lens/error.hpp"
#include "bias_lens/rng.hpp"
#include "bias_lens/scorer.hpp"
#include "bias_lens/verbalizer.hpp"
#include "test_support.hpp"

namespace bias_lens {
namespace {

TEST(ScoreClassification, ZerosAreUniform) {
  const std::vector<double> logits{0, 0, 0};
  const auto d = score_classification(logits);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(d[i], 1.0 / 3.0);
}

TEST(ScoreClassification, ShiftInvariant) {
  const std::vector<double> base{0.3, -1.7, 2.2, 0.0};
  const auto a = score_classification(base);
  for (double c : {-50.0, 1e-3, 7.5, 600.0}) {
    std::vector<double> shifted = base;
    for (auto& x : shifted) x += c;
    const auto b = score_classification(shifted);
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(ScoreClassification, MatchesHighPrecisionOracle) {
  const std::vector<double> logits{1, 2, 3};
  const auto d = score_classification(logits);
  EXPECT_NEAR(d[0], 0.090030573170380457998, 1e-12);
  EXPECT_NEAR(d[1], 0.24472847105479765247, 1e-12);
  EXPECT_NEAR(d[2], 0.66524095577482188953, 1e-12);
}

TEST(ScoreClassification, RejectsBadInput) {
  EXPECT_THROW(score_classification(std::vector<double>{}), ValidationError);
  EXPECT_THROW(score_classification(std::vector<double>{1.0, std::nan("")}), ValidationError);
  EXPECT_THROW(score_classification(std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}),
               ValidationError);
}

TokenLogprobFn table_fn(std::vector<std::vector<double>> per_candidate) {
  return [per_candidate](std::string_view, const std::vector<std::string>& tokens) {
    for (const auto& seq : per_candidate) {
      if (seq.size() == tokens.size()) return seq;
    }
    return std::vector<double>(tokens.size(), -1.0);
  };
}

TEST(ScoreGeneration, SingleCandidate) {
  const auto d = score_generation("x", {{"only answer", BiasLabel::kNone}}, table_fn({{-3.0, -4.0}}));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0], 1.0);
}

TEST(ScoreGeneration, IdenticalSequencesTie) {
  const TokenLogprobFn fn = [](std::string_view, const std::vector<std::string>& tokens) {
    return std::vector<double>(tokens.size(), -0.7);
  };
  const auto d = score_generation("x", {{"a b", BiasLabel::kNone}, {"c d", BiasLabel::kNone}}, fn);
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], 0.5);
}

TEST(ScoreGeneration, MatchesArithmeticOracle) {
  // Token counts 2, 1, 3 select the per-token log-prob rows.
  const std::vector<Candidate> candidates{
      {"two tokens", BiasLabel::kNone}, {"one", BiasLabel::kNone}, {"three whole tokens", BiasLabel::kNone}};
  const auto d = score_generation("x", candidates, table_fn({{-0.5, -1.25}, {-2.0}, {-0.1, -0.2, -3.0}}));
  EXPECT_NEAR(d[0], 0.47099413557597626634, 1e-12);
  EXPECT_NEAR(d[1], 0.15290940822605378202, 1e-12);
  EXPECT_NEAR(d[2], 0.37609645619796995164, 1e-12);
}

TEST(Tokenize, LowercaseAlphanumericRuns) {
  EXPECT_EQ(tokenize("Who's the Girl? (a) not-sure 42x"),
            (std::vector<std::string>{"who", "s", "the", "girl", "a", "not", "sure", "42x"}));
}

TEST(CandidateDistribution, ArgmaxExamples) {
  EXPECT_EQ(CandidateDistribution({0.72, 0.12, 0.16}).argmax(), 0u);
  EXPECT_EQ(CandidateDistribution({0.5, 0.5}).argmax(), 0u);
  EXPECT_EQ(CandidateDistribution({0.01, 0.03, 0.96}).argmax(), 2u);
}

TEST(CandidateDistribution, RejectsNonSimplex) {
  EXPECT_THROW(CandidateDistribution({0.5, 0.6}), ValidationError);
  EXPECT_THROW(CandidateDistribution({1.2, -0.2}), ValidationError);
  EXPECT_THROW(CandidateDistribution({}), ValidationError);
}

TEST(TableScorer, LookupAndDecode) {
  const auto q = testing::make_instance("q", 0);
  const std::string text = verbalize_instance(q.question, q.candidates, q.context);
  TableScorer table;
  table.add(text, {0.3, 0.3, 0.4}, 0);
  const auto p = predict(q, table);
  EXPECT_EQ(p.index, 0u);  // decoded answer wins over argmax
  EXPECT_DOUBLE_EQ(p.dist[2], 0.4);
  EXPECT_THROW(table.score("unknown text", q.candidates), RuntimeError);
}

TEST(TableScorer, LoadsJsonl) {
  testing::TempDir dir("table");
  testing::write_file(dir / "t.jsonl",
                      R"({"input_text":"hello","probs":[0.25,0.75]})" "\n"
                      R"({"input_text":"bye","probs":[1.0,0.0],"predicted_index":1})" "\n");
  const auto table = TableScorer::load(dir / "t.jsonl");
  const std::vector<Candidate> two{{"x", BiasLabel::kNone}, {"y", BiasLabel::kNone}};
  EXPECT_DOUBLE_EQ(table.score("hello", two)[1], 0.75);
  EXPECT_EQ(table.decode("bye", two), std::optional<std::size_t>(1));
  EXPECT_EQ(table.decode("hello", two), std::nullopt);
}

TEST(Rng, RawStreamIsStandardMt19937) {
  Rng rng(5489);
  EXPECT_EQ(rng.next_u32(), 3499211612u);
}

TEST(Rng, UniformRealMatchesOracle) {
  Rng rng(11);
  EXPECT_DOUBLE_EQ(rng.uniform_real(), 0.1802696888767692);
  EXPECT_EQ(rng.uniform_index(2), 0u);
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng rng(3);
  for (std::size_t bound : {1u, 2u, 3u, 7u, 1000u}) {
    for (int i = 0; i < 200; ++i) EXPECT_LT(rng.uniform_index(bound), bound);
  }
  EXPECT_THROW(rng.uniform_index(0), std::exception);
}

}  // namespace
}  // namespace bias_lens
