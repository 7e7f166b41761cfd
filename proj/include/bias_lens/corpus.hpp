#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace bias_lens {

// Role of a candidate on the bias axis: the stereotyped group, its
// anti-stereotyped counterpart, the neutral "can't tell" choice, or nothing.
enum class BiasLabel { kSG, kNegSG, kUnknown, kNone };

enum class ContextCondition { kAmbiguous, kDisambiguated };

std::string_view to_string(BiasLabel label);
std::string_view to_string(ContextCondition condition);
BiasLabel parse_bias_label(std::string_view text);
ContextCondition parse_context_condition(std::string_view text);

struct Candidate {
  std::string text;
  BiasLabel bias_label = BiasLabel::kNone;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Positions of the three axis candidates inside a candidate list.
struct BiasAxis {
  std::size_t sg = 0;
  std::size_t neg_sg = 0;
  std::size_t unknown = 0;

  friend bool operator==(const BiasAxis&, const BiasAxis&) = default;
};

// Returns the axis when the list carries exactly one SG, one NEG_SG and one
// UNKNOWN label; nullopt otherwise.
std::optional<BiasAxis> find_axis(const std::vector<Candidate>& candidates);

struct QAInstance {
  std::string id;
  std::string category;
  std::string context;
  std::string question;
  std::vector<Candidate> candidates;
  std::size_t gold_index = 0;
  ContextCondition context_condition = ContextCondition::kAmbiguous;
  std::string template_id;
  std::optional<std::size_t> predicted_index;

  friend bool operator==(const QAInstance&, const QAInstance&) = default;
};

// Throws ValidationError describing the first broken invariant.
void validate(const QAInstance& instance);

struct ReferenceInstance {
  std::string context;
  std::string question;
  std::vector<Candidate> candidates;
  // Answer used when the instance plays the neutral role; always the
  // UNKNOWN candidate.
  std::optional<std::size_t> neutral_answer_index;
  std::string template_id;
  bool is_ambiguous = false;
  bool is_negative_question = false;

  // Valid only after validate().
  BiasAxis axis() const;

  friend bool operator==(const ReferenceInstance&, const ReferenceInstance&) = default;
};

void validate(const ReferenceInstance& instance);

struct ReferencePair {
  ReferenceInstance neutral;
  ReferenceInstance ruler;
  std::string perspective;

  friend bool operator==(const ReferencePair&, const ReferencePair&) = default;
};

struct Dataset {
  std::vector<QAInstance> instances;
  std::string source_name;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
};

// JSON (de)serialization. The *_from_json functions validate.
nlohmann::ordered_json to_json(const Candidate& candidate);
nlohmann::ordered_json to_json(const QAInstance& instance);
nlohmann::ordered_json to_json(const ReferenceInstance& instance);
nlohmann::ordered_json to_json(const ReferencePair& pair);
QAInstance qa_instance_from_json(const nlohmann::json& record);
ReferencePair reference_pair_from_json(const nlohmann::json& record);

// Calls `fn(line_number, parsed_object)` for every non-blank line of a JSONL
// file. Parse errors are rethrown as ValidationError carrying the line number.
template <typename Fn>
void for_each_jsonl_record(const std::filesystem::path& path, Fn&& fn);

Dataset load_qa_dataset(const std::filesystem::path& path);
void save_qa_dataset(const Dataset& dataset, const std::filesystem::path& path);

std::vector<ReferencePair> load_reference_pairs(const std::filesystem::path& path);
void save_reference_pairs(const std::vector<ReferencePair>& pairs,
                          const std::filesystem::path& path);

// k pairs drawn uniformly without replacement (partial Fisher-Yates over a
// seeded Rng). Output order is the draw order.
std::vector<ReferencePair> sample_reference_pairs(const std::vector<ReferencePair>& pool,
                                                  std::size_t k, std::uint32_t seed);

enum class OverlapMode {
  kTemplateOrText,  // template_id when the reference has one, else exact context
  kTemplateId,
  kExactText,
};

// Drops every instance that shares a template (or context text) with any
// neutral or ruler instance in `refs`.
Dataset filter_template_overlap(const Dataset& eval_set, const std::vector<ReferencePair>& refs,
                                OverlapMode mode = OverlapMode::kTemplateOrText);

}  // namespace bias_lens

#include "bias_lens/detail/jsonl.hpp"
