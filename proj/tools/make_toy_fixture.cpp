// Writes the bundled toy fixture: synthetic QA/eval sets, the reference pool,
// a stereotype-preferring initial checkpoint and a run config.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bias_lens/corpus.hpp"
#include "bias_lens/synthetic.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Generate the toy fixture"};
  std::string out_dir = "data/toy";
  bias_lens::SyntheticWorldConfig world_config;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", world_config.seed, "world seed");
  app.add_option("--n-train", world_config.n_train, "training instances");
  app.add_option("--n-eval", world_config.n_eval, "evaluation instances");
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const auto world = bias_lens::make_synthetic_world(world_config);
    bias_lens::save_qa_dataset(world.train, dir / "qa.jsonl");
    bias_lens::save_qa_dataset(world.eval, dir / "eval.jsonl");
    bias_lens::save_reference_pairs(world.reference_pool, dir / "refs.jsonl");
    bias_lens::make_synthetic_scorer(world, world_config).save(dir / "init_checkpoint.json");

    nlohmann::ordered_json config;
    config["qa_data"] = "qa.jsonl";
    config["reference_pool"] = "refs.jsonl";
    config["eval_data"] = "eval.jsonl";
    config["init_checkpoint"] = "init_checkpoint.json";
    config["checkpoint"] = "out/checkpoint.json";
    config["history_out"] = "out/history.jsonl";
    config["report_out"] = "out/report.json";
    config["augment_out"] = "out/augmented.jsonl";
    config["k_pairs"] = 5;
    config["qa_batch"] = 3;
    config["bm_batch"] = 2;
    config["learning_rate"] = 1e-4;  // 1e-6 scaled for the toy scorer
    config["max_epochs"] = 20;
    config["runs"] = 3;
    config["seeds"] = {1, 2, 3};
    config["baseline"] = "none";
    std::ofstream(dir / "config.json") << config.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
