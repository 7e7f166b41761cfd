#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bias_lens/trainer.hpp"

namespace bias_lens {

enum class Baseline { kNone, kCda, kNlIntervention };

std::string_view to_string(Baseline baseline);
Baseline parse_baseline(std::string_view text);

// Flat JSON config; every key can be overridden on the command line with
// "--<key> <value>". Relative paths resolve against the config file's folder.
struct RunConfig {
  std::filesystem::path qa_data;
  std::filesystem::path reference_pool;
  std::filesystem::path eval_data;
  std::filesystem::path init_checkpoint;
  std::filesystem::path checkpoint;
  std::filesystem::path history_out;
  std::filesystem::path report_out;
  std::filesystem::path augment_out;
  std::filesystem::path attribute_words;
  std::filesystem::path scorer_table;  // when set, a TableScorer replaces the toy scorer

  TrainConfig train;
  std::size_t runs = 3;
  std::vector<std::uint32_t> seeds = {1, 2, 3};
  double threshold = 0.05;
  Baseline baseline = Baseline::kNone;
  double swap_prob = 0.5;
  std::string statement;

  nlohmann::json source;  // merged config, for provenance
  std::string config_hash;
};

// Keys accepted in config files and as flags.
const std::vector<std::string>& run_config_keys();

// `overrides` maps keys to raw flag values (parsed as JSON when possible,
// otherwise taken as strings). `base_dir` anchors relative paths.
RunConfig make_run_config(nlohmann::json merged, const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& config_path,
                          const std::map<std::string, std::string>& overrides);

// Output path for one seed: "{seed}" is substituted when present; otherwise
// ".seed<N>" is inserted before the extension when several seeds run.
std::filesystem::path per_seed_path(const std::filesystem::path& base, std::uint32_t seed,
                                    std::size_t n_seeds);

// Each command writes its outputs and returns an exit code; validation
// failures throw ValidationError, other failures RuntimeError.
int cmd_detect(const RunConfig& config, std::ostream& log);
int cmd_mitigate(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, std::ostream& log);
int cmd_augment(const RunConfig& config, std::ostream& log);
int cmd_report(const RunConfig& config, const std::vector<std::filesystem::path>& inputs,
               std::ostream& log);

// Full command line entry point. Exit codes: 0 success, 1 runtime failure,
// 2 input validation failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bias_lens
