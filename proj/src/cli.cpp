#include "bias_lens/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "bias_lens/baselines.hpp"
#include "bias_lens/corpus.hpp"
#include "bias_lens/error.hpp"
#include "bias_lens/influence.hpp"
#include "bias_lens/metrics.hpp"
#include "bias_lens/scorer.hpp"
#include "bias_lens/toy_scorer.hpp"

#ifndef BIAS_LENS_DATA_DIR
#define BIAS_LENS_DATA_DIR "data"
#endif

namespace bias_lens {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::kNone: return "none";
    case Baseline::kCda: return "cda";
    case Baseline::kNlIntervention: return "nl_intervention";
  }
  return "none";
}

Baseline parse_baseline(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "none") return Baseline::kNone;
  if (lower == "cda") return Baseline::kCda;
  if (lower == "nl_intervention") return Baseline::kNlIntervention;
  throw ValidationError("unknown baseline '" + std::string(text) + "'");
}

namespace {

const std::vector<std::string> kPathKeys = {
    "qa_data",   "reference_pool",  "eval_data",    "init_checkpoint", "checkpoint",
    "history_out", "report_out",    "augment_out",  "attribute_words", "scorer_table",
};

const std::vector<std::string> kTrainKeys = {
    "k_pairs",      "qa_batch", "bm_batch", "learning_rate", "max_epochs",
    "optimizer",    "weight_decay", "beta1", "beta2", "epsilon",
    "validation_fraction", "select_best_epoch", "mitigation_ratio", "enable_mitigation",
    "qa_weight",    "bm_weight",
};

const std::vector<std::string> kProtocolKeys = {
    "runs", "seeds", "threshold", "baseline", "swap_prob", "statement",
};

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json parse_flag_value(const std::string& key, const std::string& raw) {
  if (key == "seeds" && raw.find('[') == std::string::npos) {
    json seeds = json::array();
    std::stringstream ss(raw);
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        seeds.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw ValidationError("seeds must be a comma-separated list of integers");
      }
    }
    return seeds;
  }
  for (const auto& path_key : kPathKeys) {
    if (key == path_key) return raw;
  }
  if (key == "statement" || key == "baseline" || key == "optimizer") return raw;
  json parsed = json::parse(raw, nullptr, false);
  if (parsed.is_discarded()) return raw;
  return parsed;
}

std::uint32_t parse_seed(std::string_view text) {
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(std::string(text), &used);
    if (used != text.size() || v > 0xffffffffUL) throw std::out_of_range("seed");
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw ValidationError("BIAS_LENS_SEED must be an unsigned 32-bit integer");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeError("failed writing " + path.string());
}

void require_path(const fs::path& path, const char* key) {
  if (path.empty()) throw ValidationError(std::string("missing config key: ") + key);
}

void require_file(const fs::path& path, const char* key) {
  require_path(path, key);
  if (!fs::exists(path)) {
    throw ValidationError(std::string(key) + " not found: " + path.string());
  }
}

ordered_json provenance(const RunConfig& config) {
  ordered_json j;
  j["config_hash"] = config.config_hash;
  j["seeds"] = config.seeds;
  return j;
}

std::vector<std::string> vocabulary_texts(const Dataset& data,
                                          const std::vector<ReferencePair>& pool) {
  std::vector<std::string> texts = {"Answer"};
  auto add = [&](const std::string& context, const std::string& question,
                 const std::vector<Candidate>& candidates) {
    texts.push_back(context);
    texts.push_back(question);
    for (const auto& c : candidates) texts.push_back(c.text);
  };
  for (const auto& q : data.instances) add(q.context, q.question, q.candidates);
  for (const auto& pair : pool) {
    add(pair.neutral.context, pair.neutral.question, pair.neutral.candidates);
    add(pair.ruler.context, pair.ruler.question, pair.ruler.candidates);
  }
  return texts;
}

std::vector<LabeledInstance> load_labeled(const fs::path& path) {
  std::vector<LabeledInstance> labeled;
  for_each_jsonl_record(path, [&](std::size_t, const json& record) {
    LabeledInstance item;
    item.instance = qa_instance_from_json(record);
    if (!record.contains("answer_index") || !record.contains("detection_label")) {
      throw ValidationError("record needs answer_index and detection_label");
    }
    item.answer_index = record.at("answer_index").get<std::size_t>();
    if (item.answer_index >= item.instance.candidates.size()) {
      throw ValidationError("answer_index out of range");
    }
    item.gold = parse_detection_class(record.at("detection_label").get<std::string>());
    labeled.push_back(std::move(item));
  });
  if (labeled.empty()) throw ValidationError("empty dataset");
  return labeled;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> all = kPathKeys;
    all.insert(all.end(), kTrainKeys.begin(), kTrainKeys.end());
    all.insert(all.end(), kProtocolKeys.begin(), kProtocolKeys.end());
    return all;
  }();
  return keys;
}

RunConfig make_run_config(json merged, const fs::path& base_dir) {
  if (!merged.is_object()) throw ValidationError("config must be a JSON object");
  const auto& keys = run_config_keys();
  for (const auto& [key, _] : merged.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ValidationError("unknown config key: " + key);
    }
  }

  RunConfig config;
  try {
    auto path_of = [&](const char* key) -> fs::path {
      if (!merged.contains(key) || merged.at(key).is_null()) return {};
      fs::path p = merged.at(key).get<std::string>();
      if (p.empty() || p.is_absolute()) return p;
      return base_dir / p;
    };
    config.qa_data = path_of("qa_data");
    config.reference_pool = path_of("reference_pool");
    config.eval_data = path_of("eval_data");
    config.init_checkpoint = path_of("init_checkpoint");
    config.checkpoint = path_of("checkpoint");
    config.history_out = path_of("history_out");
    config.report_out = path_of("report_out");
    config.augment_out = path_of("augment_out");
    config.scorer_table = path_of("scorer_table");
    config.attribute_words = path_of("attribute_words");
    if (config.attribute_words.empty()) {
      config.attribute_words = fs::path(BIAS_LENS_DATA_DIR) / "attribute_words.json";
    }

    config.train = train_config_from_json(merged);
    config.threshold = merged.value("threshold", config.threshold);
    config.swap_prob = merged.value("swap_prob", config.swap_prob);
    config.statement = merged.value("statement", std::string(kDefaultFairnessStatement));
    if (merged.contains("baseline")) {
      config.baseline = parse_baseline(merged.at("baseline").get<std::string>());
    }
    if (merged.contains("seeds")) {
      config.seeds = merged.at("seeds").get<std::vector<std::uint32_t>>();
    }
    config.runs = merged.value("runs", config.seeds.size());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }

  if (const char* env = std::getenv("BIAS_LENS_SEED"); env != nullptr && *env != '\0') {
    config.seeds = {parse_seed(env)};
    config.runs = 1;
    merged["seeds"] = config.seeds;
    merged["runs"] = 1;
  }

  if (config.seeds.empty()) throw ValidationError("seeds must not be empty");
  if (config.runs != config.seeds.size()) {
    throw ValidationError("runs must equal the number of seeds");
  }
  if (!(config.threshold > 0.0)) throw ValidationError("threshold must be positive");
  if (!(config.swap_prob >= 0.0 && config.swap_prob <= 1.0)) {
    throw ValidationError("swap_prob must be in [0, 1]");
  }
  config.train.validate();

  config.source = merged;
  // Output locations do not change what a run computes, so they stay out of the hash.
  nlohmann::json hashed = merged;
  for (const char* key : {"checkpoint", "history_out", "report_out", "augment_out"}) hashed.erase(key);
  config.config_hash = fnv1a_hex(hashed.dump());
  return config;
}

RunConfig load_run_config(const fs::path& config_path,
                          const std::map<std::string, std::string>& overrides) {
  json merged = json::object();
  fs::path base_dir = fs::current_path();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("cannot open config " + config_path.string());
    merged = json::parse(in, nullptr, false);
    if (merged.is_discarded()) throw ValidationError("config is not valid JSON: " + config_path.string());
    base_dir = fs::absolute(config_path).parent_path();
  }
  for (const auto& [key, raw] : overrides) merged[key] = parse_flag_value(key, raw);
  // A seed list given on the command line carries its own run count.
  if (overrides.contains("seeds") && !overrides.contains("runs")) merged.erase("runs");
  // Flag values are relative to the working directory, not the config file.
  for (const auto& key : kPathKeys) {
    auto it = overrides.find(key);
    if (it == overrides.end()) continue;
    fs::path p = it->second;
    if (!p.empty() && p.is_relative()) merged[key] = fs::absolute(p).string();
  }
  return make_run_config(std::move(merged), base_dir);
}

fs::path per_seed_path(const fs::path& base, std::uint32_t seed, std::size_t n_seeds) {
  std::string text = base.string();
  const std::string placeholder = "{seed}";
  if (auto pos = text.find(placeholder); pos != std::string::npos) {
    text.replace(pos, placeholder.size(), std::to_string(seed));
    return text;
  }
  if (n_seeds <= 1) return base;
  fs::path out = base;
  out.replace_filename(base.stem().string() + ".seed" + std::to_string(seed) +
                       base.extension().string());
  return out;
}

int cmd_detect(const RunConfig& config, std::ostream& log) {
  require_file(config.eval_data, "eval_data");
  require_file(config.reference_pool, "reference_pool");
  require_path(config.report_out, "report_out");

  const auto labeled = load_labeled(config.eval_data);
  const auto pool = load_reference_pairs(config.reference_pool);
  const auto pairs = sample_reference_pairs(pool, config.train.k_pairs, config.seeds.front());

  std::unique_ptr<Scorer> scorer;
  if (!config.scorer_table.empty()) {
    require_file(config.scorer_table, "scorer_table");
    scorer = std::make_unique<TableScorer>(TableScorer::load(config.scorer_table));
  } else {
    const fs::path ckpt = config.checkpoint.empty() ? config.init_checkpoint : config.checkpoint;
    require_file(ckpt, "checkpoint");
    scorer = std::make_unique<ToyTrainableScorer>(ToyTrainableScorer::load(ckpt));
  }

  const auto report = detection_report(labeled, pairs, *scorer, config.threshold);
  ordered_json out = provenance(config);
  out["report"] = to_json(report);
  write_text(config.report_out, out.dump(2) + "\n");
  log << "detect: " << report.n << " instances -> " << config.report_out.string() << "\n";
  return 0;
}

int cmd_mitigate(const RunConfig& config, std::ostream& log) {
  require_file(config.qa_data, "qa_data");
  require_file(config.reference_pool, "reference_pool");
  require_path(config.checkpoint, "checkpoint");
  if (!config.scorer_table.empty()) throw ValidationError("scorer is not trainable");

  const Dataset qa_data = load_qa_dataset(config.qa_data);
  const auto pool = load_reference_pairs(config.reference_pool);
  std::vector<AttributeWordSet> word_sets;
  if (config.baseline == Baseline::kCda) word_sets = load_attribute_word_sets(config.attribute_words);

  const std::size_t n = config.seeds.size();
  for (std::uint32_t seed : config.seeds) {
    const auto pairs = sample_reference_pairs(pool, config.train.k_pairs, seed);
    const Dataset data =
        config.baseline == Baseline::kCda ? cda_augment(qa_data, word_sets, config.swap_prob, seed)
                                          : qa_data;
    TrainConfig train_config = config.train;
    train_config.seed = seed;
    if (config.baseline != Baseline::kNone) train_config.enable_mitigation = false;

    ToyTrainableScorer scorer =
        config.init_checkpoint.empty()
            ? ToyTrainableScorer(Vocabulary::from_texts(vocabulary_texts(qa_data, pool)))
            : ToyTrainableScorer::load(config.init_checkpoint);
    const TrainResult result = train(data, pairs, scorer, train_config);

    const fs::path ckpt = per_seed_path(config.checkpoint, seed, n);
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
    ordered_json saved = to_json(train_config);
    saved["baseline"] = to_string(config.baseline);
    saved["config_hash"] = config.config_hash;
    scorer.save(ckpt, saved, seed);

    if (!config.history_out.empty()) {
      std::string lines;
      for (const auto& record : result.history) lines += to_json(record).dump() + "\n";
      write_text(per_seed_path(config.history_out, seed, n), lines);
    }
    log << "mitigate: seed " << seed << ", " << result.history.size() << " epochs, best epoch "
        << result.best_epoch << " -> " << ckpt.string() << "\n";
  }
  return 0;
}

namespace {

void write_reports(const RunConfig& config, const BiasScoreReport& before,
                   const BiasScoreReport& after) {
  ordered_json out = provenance(config);
  out["baseline"] = to_string(config.baseline);
  out["before"] = to_json(before);
  out["after"] = to_json(after);
  write_text(config.report_out, out.dump(2) + "\n");
  fs::path csv = config.report_out;
  csv.replace_extension(".csv");
  write_text(csv, to_csv({{"before", before}, {"after", after}}));
}

}  // namespace

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
  require_file(config.eval_data, "eval_data");
  require_file(config.reference_pool, "reference_pool");
  require_path(config.report_out, "report_out");

  const Dataset eval_data = load_qa_dataset(config.eval_data);
  if (eval_data.empty()) throw ValidationError("empty dataset");
  const auto pool = load_reference_pairs(config.reference_pool);

  std::unique_ptr<TableScorer> table;
  if (!config.scorer_table.empty()) {
    require_file(config.scorer_table, "scorer_table");
    table = std::make_unique<TableScorer>(TableScorer::load(config.scorer_table));
  } else {
    require_file(config.init_checkpoint, "init_checkpoint");
  }

  std::vector<BiasScoreReport> before_runs;
  std::vector<BiasScoreReport> after_runs;
  const std::size_t n = config.seeds.size();
  for (std::uint32_t seed : config.seeds) {
    const auto pairs = sample_reference_pairs(pool, config.train.k_pairs, seed);
    const Dataset held_out = filter_template_overlap(eval_data, pairs);

    std::unique_ptr<ToyTrainableScorer> before_toy;
    std::unique_ptr<ToyTrainableScorer> after_toy;
    const Scorer* before = table.get();
    const Scorer* after = table.get();
    if (!table) {
      before_toy = std::make_unique<ToyTrainableScorer>(ToyTrainableScorer::load(config.init_checkpoint));
      before = before_toy.get();
      if (config.baseline == Baseline::kNlIntervention) {
        after = before;
      } else {
        require_path(config.checkpoint, "checkpoint");
        const fs::path ckpt = per_seed_path(config.checkpoint, seed, n);
        if (!fs::exists(ckpt)) throw ValidationError("missing checkpoint: " + ckpt.string());
        after_toy = std::make_unique<ToyTrainableScorer>(ToyTrainableScorer::load(ckpt));
        after = after_toy.get();
      }
    }
    std::unique_ptr<InterventionScorer> intervention;
    if (config.baseline == Baseline::kNlIntervention) {
      intervention = std::make_unique<InterventionScorer>(*after, config.statement);
      after = intervention.get();
    }

    before_runs.push_back(build_report(evaluate(held_out, *before)));
    after_runs.push_back(build_report(evaluate(held_out, *after)));
    log << "evaluate: seed " << seed << ", " << held_out.size() << " held-out instances\n";
  }

  const BiasScoreReport before = aggregate_report(before_runs);
  const BiasScoreReport after = with_deltas(aggregate_report(after_runs), before);
  write_reports(config, before, after);
  log << "evaluate: report -> " << config.report_out.string() << "\n";
  return 0;
}

int cmd_augment(const RunConfig& config, std::ostream& log) {
  require_file(config.qa_data, "qa_data");
  require_path(config.augment_out, "augment_out");
  const Dataset data = load_qa_dataset(config.qa_data);
  const auto word_sets = load_attribute_word_sets(config.attribute_words);
  const std::size_t n = config.seeds.size();
  for (std::uint32_t seed : config.seeds) {
    const fs::path out = per_seed_path(config.augment_out, seed, n);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_qa_dataset(cda_augment(data, word_sets, config.swap_prob, seed), out);
    log << "augment: seed " << seed << ", " << data.size() << " instances -> " << out.string()
        << "\n";
  }
  return 0;
}

int cmd_report(const RunConfig& config, const std::vector<fs::path>& inputs, std::ostream& log) {
  if (inputs.empty()) throw ValidationError("report needs at least one input file");
  require_path(config.report_out, "report_out");
  std::vector<BiasScoreReport> before_runs;
  std::vector<BiasScoreReport> after_runs;
  std::vector<std::uint32_t> seeds;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("before") || !j.contains("after")) {
      throw ValidationError("not an evaluate report: " + path.string());
    }
    try {
      // Each input contributes its per-run means as one run.
      before_runs.push_back(report_from_json(j.at("before")));
      after_runs.push_back(report_from_json(j.at("after")));
      for (auto s : j.value("seeds", std::vector<std::uint32_t>{})) seeds.push_back(s);
    } catch (const json::exception& e) {
      throw ValidationError("bad report " + path.string() + ": " + e.what());
    }
  }
  const BiasScoreReport before = aggregate_report(before_runs);
  const BiasScoreReport after = with_deltas(aggregate_report(after_runs), before);

  RunConfig merged = config;
  merged.seeds = seeds;
  write_reports(merged, before, after);
  log << "report: " << inputs.size() << " runs -> " << config.report_out.string() << "\n";
  return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detect and mitigate bias in multiple-choice QA", "bias_lens"};
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> report_inputs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config");
    for (const auto& key : run_config_keys()) {
      sub->add_option_function<std::string>(
          "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
          "override config key " + key);
    }
  };
  CLI::App* detect = app.add_subcommand("detect", "Label appended answers as biased/neutral/anti-biased");
  CLI::App* mitigate = app.add_subcommand("mitigate", "Fine-tune with the mitigation loss");
  CLI::App* eval = app.add_subcommand("evaluate", "Bias scores before and after mitigation");
  CLI::App* augment = app.add_subcommand("augment", "Counterfactual data augmentation pass");
  CLI::App* report = app.add_subcommand("report", "Aggregate existing evaluate outputs");
  for (auto* sub : {detect, mitigate, eval, augment, report}) add_common(sub);
  report->add_option("inputs", report_inputs, "evaluate report files")->required();

  std::vector<std::string> argv_reversed(args.rbegin(), args.rend());
  try {
    app.parse(argv_reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const RunConfig config = load_run_config(config_path, overrides);
    if (detect->parsed()) return cmd_detect(config, out);
    if (mitigate->parsed()) return cmd_mitigate(config, out);
    if (eval->parsed()) return cmd_evaluate(config, out);
    if (augment->parsed()) return cmd_augment(config, out);
    std::vector<fs::path> inputs(report_inputs.begin(), report_inputs.end());
    return cmd_report(config, inputs, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bias_lens
