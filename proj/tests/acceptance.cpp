// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "bias_lens/baselines.hpp"
#include "bias_lens/cli.hpp"
#include "bias_lens/influence.hpp"
#include "bias_lens/metrics.hpp"
#include "cda_probe.hpp"
#include "gradient_check.hpp"
#include "properties.hpp"
#include "test_support.hpp"

#ifndef BIAS_LENS_DATA_DIR
#define BIAS_LENS_DATA_DIR "data"
#endif

namespace {

using namespace bias_lens;
using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_budget = seconds < budget_seconds;
  const bool pass = o.pass && in_budget;
  if (!pass) ++failures;
  std::ostringstream line;
  line << (pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << seconds << " s, budget "
       << budget_seconds << " s" << (in_budget ? "" : ", over budget") << "]";
  std::cout << line.str() << std::endl;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Outcome level_examples() {
  const double one = bias_level(CandidateDistribution({0.43, 0.34, 0.23}),
                                CandidateDistribution({0.61, 0.12, 0.27}), BiasAxis{1, 2, 0});
  const double two = bias_level(CandidateDistribution({0.14, 0.61, 0.25}),
                                CandidateDistribution({0.20, 0.59, 0.21}), BiasAxis{2, 0, 1});
  const bool pass = std::abs(one - 0.29) <= 0.005 && std::abs(two - 0.13) <= 0.005;
  return {pass, "example 1 = " + fmt(one) + " (0.29 +/- 0.005), example 2 = " + fmt(two) +
                    " (0.13 +/- 0.005)"};
}

Outcome four_record_scores() {
  auto rec = [](ContextCondition c, bool correct, std::size_t predicted, double share) {
    PredictionRecord r;
    r.correct = correct;
    r.dist = CandidateDistribution({0.9 * share, 0.9 * (1.0 - share), 0.1});
    r.predicted_index = predicted;
    r.axis = BiasAxis{0, 1, 2};
    r.context_condition = c;
    return r;
  };
  const auto dis = ContextCondition::kDisambiguated;
  const auto amb = ContextCondition::kAmbiguous;
  const std::vector<PredictionRecord> all = {rec(dis, false, 1, 0.2), rec(dis, true, 0, 0.9),
                                             rec(amb, false, 1, 0.3), rec(amb, false, 0, 0.4)};
  const std::vector<PredictionRecord> disambiguated(all.begin(), all.begin() + 2);
  const double s_new = *bias_score_new(all);
  const double s_dis = *bias_score_legacy_dis(disambiguated);
  const double s_amb = *bias_score_legacy_amb(all);
  const bool pass = std::abs(s_new + 0.40) <= 1e-12 && s_dis == 0.0 && s_amb == 0.0;
  return {pass, "score_new = " + fmt(s_new) + " (-0.40 +/- 1e-12), s_DIS = " + fmt(s_dis) +
                    ", s_AMB = " + fmt(s_amb)};
}

Outcome gradients() {
  const auto [ce, bm] = testing::run_gradient_checks(100, 2024);
  const bool pass = ce.worst_relative_error < 1e-4 && bm.worst_relative_error < 1e-4 &&
                    ce.draws == 100 && bm.draws == 100 && bm.active > 0;
  return {pass, "cross-entropy worst rel err " + fmt(ce.worst_relative_error) + " over " +
                    std::to_string(ce.draws) + " draws; mitigation loss worst rel err " +
                    fmt(bm.worst_relative_error) + " over " + std::to_string(bm.draws) + " draws (" +
                    std::to_string(bm.active) + " with positive loss, " + std::to_string(bm.skipped) +
                    " near-kink draws replaced); threshold 1e-4, h = 1e-5"};
}

Outcome level_properties() {
  const auto p = testing::check_level_properties(10000, 7);
  const bool pass = p.cases == 10000 && p.out_of_range == 0 && p.worst_antisymmetry <= 1e-12 &&
                    p.worst_unknown_invariance <= 1e-12 && p.relu_violations == 0;
  return {pass, std::to_string(p.cases) + " simplex pairs: out of [-1,1] " +
                    std::to_string(p.out_of_range) + ", worst antisymmetry " +
                    fmt(p.worst_antisymmetry) + ", worst unknown-mass drift " +
                    fmt(p.worst_unknown_invariance) + ", ReLU violations " +
                    std::to_string(p.relu_violations)};
}

Outcome metric_properties() {
  const auto p = testing::check_metric_properties(1000, 11);
  const bool pass = p.sets == 1000 && p.antisymmetry_failures == 0 && p.correct_append_failures == 0;
  return {pass, std::to_string(p.sets) + " record sets: antisymmetry failures " +
                    std::to_string(p.antisymmetry_failures) + ", correct-append changes " +
                    std::to_string(p.correct_append_failures)};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  if (code != 0) throw std::runtime_error("bias_lens " + args[0] + " failed: " + err.str());
  return code;
}

const json& overall_row(const json& report, const char* section) {
  for (const auto& row : report.at(section).at("rows")) {
    if (row.at("category") == "*" && row.at("context_condition") == "*") return row;
  }
  throw std::runtime_error("report has no overall row");
}

double mean_of(const json& row, const char* metric) { return row.at(metric).at("mean").get<double>(); }

const fs::path kFixtureConfig = fs::path(BIAS_LENS_DATA_DIR) / "toy" / "config.json";

Outcome end_to_end(const testing::TempDir& dir) {
  const std::string cfg = kFixtureConfig.string();
  const std::string ckpt = (dir / "e2e/ckpt.json").string();
  const std::string report_path = (dir / "e2e/report.json").string();
  cli({"mitigate", "--config", cfg, "--checkpoint", ckpt, "--history_out", (dir / "e2e/history.jsonl").string()});
  cli({"evaluate", "--config", cfg, "--checkpoint", ckpt, "--report_out", report_path});
  const json report = json::parse(testing::read_file(report_path));
  const auto& before = overall_row(report, "before");
  const auto& after = overall_row(report, "after");
  const double s_before = std::abs(mean_of(before, "score_new"));
  const double s_after = std::abs(mean_of(after, "score_new"));
  const double acc_before = mean_of(before, "accuracy");
  const double acc_after = mean_of(after, "accuracy");
  const double reduction = 1.0 - s_after / s_before;
  const bool pass = reduction >= 0.30 && acc_after >= acc_before - 0.02;
  return {pass, "|score_new| " + fmt(s_before) + " -> " + fmt(s_after) + " (" + fmt(100 * reduction) +
                    "% lower, need >= 30%), accuracy " + fmt(acc_before) + " -> " + fmt(acc_after) +
                    " (need >= before - 0.02); seeds 1,2,3, K=5, lr 1e-4, 20 epochs"};
}

Outcome determinism(const testing::TempDir& dir) {
  const std::string cfg = kFixtureConfig.string();
  for (const char* name : {"a", "b"}) {
    cli({"mitigate", "--config", cfg, "--seeds", "1", "--checkpoint",
         (dir / (std::string("det/") + name + ".json")).string(), "--history_out",
         (dir / (std::string("det/") + name + ".jsonl")).string()});
  }
  const bool identical = testing::read_file(dir / "det/a.json") == testing::read_file(dir / "det/b.json");

  // Per-seed reports against the three-run report from the end-to-end step.
  std::vector<json> per_seed;
  for (const char* seed : {"1", "2", "3"}) {
    const auto out = (dir / (std::string("det/seed") + seed + ".json")).string();
    cli({"evaluate", "--config", cfg, "--seeds", seed, "--checkpoint",
         (dir / (std::string("e2e/ckpt.seed") + seed + ".json")).string(), "--report_out", out});
    per_seed.push_back(json::parse(testing::read_file(out)));
  }
  const json combined = json::parse(testing::read_file(dir / "e2e/report.json"));
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (const char* section : {"before", "after"}) {
    const auto& rows = combined.at(section).at("rows");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (const auto& [metric, value] : rows[r].items()) {
        if (!value.is_object() || value.at("variance").is_null()) continue;
        double lo = INFINITY;
        double hi = -INFINITY;
        for (const auto& run : per_seed) {
          const auto& m = run.at(section).at("rows").at(r).at(metric).at("mean");
          if (m.is_null()) continue;
          lo = std::min(lo, m.get<double>());
          hi = std::max(hi, m.get<double>());
        }
        const double spread = hi - lo;
        const double sd = std::sqrt(value.at("variance").get<double>());
        ++checked;
        if (sd > spread + 1e-12) ++violations;
        if (spread > 0) worst_ratio = std::max(worst_ratio, sd / spread);
      }
    }
  }
  const bool pass = identical && checked > 0 && violations == 0;
  return {pass, std::string("checkpoints ") + (identical ? "byte-identical" : "DIFFER") + "; " +
                    std::to_string(checked) + " variance fields, " + std::to_string(violations) +
                    " with std dev above the per-seed spread (max sd/spread " + fmt(worst_ratio) + ")"};
}

Outcome cda_probe() {
  const auto sets =
      load_attribute_word_sets(fs::path(BIAS_LENS_DATA_DIR) / "attribute_words.json");
  for (const auto& set : sets) {
    if (set.category != "Gender identity") continue;
    const auto r = testing::run_cda_probe(set, 1);
    const bool pass = set.tuples.size() == 57 && r.matched == 114 && r.wrong_swaps == 0 &&
                      r.unmatched_diffs == 0;
    return {pass, std::to_string(set.tuples.size()) + " pairs, " + std::to_string(r.matched) +
                      " attribute tokens, " + std::to_string(r.wrong_swaps) + " wrong swaps, " +
                      std::to_string(r.unmatched_diffs) + " diffs on other tokens"};
  }
  return {false, "no gender word set"};
}

}  // namespace

int main() {
  unsetenv("BIAS_LENS_SEED");
  testing::TempDir dir("acceptance");
  criterion("bias_level_worked_examples", 1e-3, level_examples);
  criterion("score_new_four_record_set", 1e-3, four_record_scores);
  criterion("gradient_correctness", 10.0, gradients);
  criterion("bias_level_property_suite", 5.0, level_properties);
  criterion("metric_antisymmetry_and_wrong_only", 5.0, metric_properties);
  criterion("end_to_end_synthetic_mitigation", 120.0, [&] { return end_to_end(dir); });
  criterion("determinism", 120.0, [&] { return determinism(dir); });
  criterion("cda_gender_probe", 5.0, cda_probe);
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
