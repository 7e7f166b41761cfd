#include "bias_lens/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "bias_lens/error.hpp"
#include "bias_lens/rng.hpp"

namespace bias_lens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(BiasLabel label) {
  switch (label) {
    case BiasLabel::kSG: return "SG";
    case BiasLabel::kNegSG: return "NEG_SG";
    case BiasLabel::kUnknown: return "UNKNOWN";
    case BiasLabel::kNone: return "NONE";
  }
  return "NONE";
}

std::string_view to_string(ContextCondition condition) {
  return condition == ContextCondition::kAmbiguous ? "ambiguous" : "disambiguated";
}

BiasLabel parse_bias_label(std::string_view text) {
  if (text == "SG") return BiasLabel::kSG;
  if (text == "NEG_SG") return BiasLabel::kNegSG;
  if (text == "UNKNOWN") return BiasLabel::kUnknown;
  if (text == "NONE") return BiasLabel::kNone;
  throw ValidationError("unknown bias_label '" + std::string(text) + "'");
}

ContextCondition parse_context_condition(std::string_view text) {
  if (text == "ambiguous") return ContextCondition::kAmbiguous;
  if (text == "disambiguated") return ContextCondition::kDisambiguated;
  throw ValidationError("unknown context_condition '" + std::string(text) + "'");
}

std::optional<BiasAxis> find_axis(const std::vector<Candidate>& candidates) {
  std::optional<std::size_t> sg, neg_sg, unknown;
  auto claim = [](std::optional<std::size_t>& slot, std::size_t i) {
    if (slot) return false;
    slot = i;
    return true;
  };
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool ok = true;
    switch (candidates[i].bias_label) {
      case BiasLabel::kSG: ok = claim(sg, i); break;
      case BiasLabel::kNegSG: ok = claim(neg_sg, i); break;
      case BiasLabel::kUnknown: ok = claim(unknown, i); break;
      case BiasLabel::kNone: break;
    }
    if (!ok) return std::nullopt;
  }
  if (!sg || !neg_sg || !unknown) return std::nullopt;
  return BiasAxis{*sg, *neg_sg, *unknown};
}

namespace {

void validate_candidates(const std::vector<Candidate>& candidates) {
  std::unordered_set<std::string> seen;
  for (const auto& c : candidates) {
    if (c.text.empty()) throw ValidationError("candidate text must be non-empty");
    if (!seen.insert(c.text).second) {
      throw ValidationError("duplicate candidate '" + c.text + "'");
    }
  }
}

std::size_t count_label(const std::vector<Candidate>& candidates, BiasLabel label) {
  return static_cast<std::size_t>(std::count_if(
      candidates.begin(), candidates.end(), [label](const Candidate& c) { return c.bias_label == label; }));
}

void validate_reference(const ReferenceInstance& instance, std::string_view role) {
  const std::string who(role);
  if (!instance.is_ambiguous) throw ValidationError(who + " context must be flagged ambiguous");
  if (!instance.is_negative_question) {
    throw ValidationError(who + " question must be flagged negative");
  }
  if (instance.candidates.size() != 3) {
    throw ValidationError(who + " must have exactly 3 candidates");
  }
  validate_candidates(instance.candidates);
  if (count_label(instance.candidates, BiasLabel::kUnknown) != 1) {
    throw ValidationError(who + " must contain exactly one UNKNOWN");
  }
  if (count_label(instance.candidates, BiasLabel::kSG) != 1) {
    throw ValidationError(who + " must contain exactly one SG");
  }
  if (count_label(instance.candidates, BiasLabel::kNegSG) != 1) {
    throw ValidationError(who + " must contain exactly one NEG_SG");
  }
  if (instance.neutral_answer_index &&
      *instance.neutral_answer_index != find_axis(instance.candidates)->unknown) {
    throw ValidationError(who + " neutral_answer_index must point at the UNKNOWN candidate");
  }
}

Candidate candidate_from_json(const json& j) {
  Candidate c;
  c.text = j.at("text").get<std::string>();
  c.bias_label = parse_bias_label(j.value("bias_label", std::string("NONE")));
  return c;
}

std::vector<Candidate> candidates_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("candidates must be an array");
  std::vector<Candidate> out;
  out.reserve(j.size());
  for (const auto& c : j) out.push_back(candidate_from_json(c));
  return out;
}

std::size_t index_from_json(const json& j, const char* field) {
  const auto& v = j.at(field);
  if (!v.is_number_integer()) throw ValidationError(std::string(field) + " must be an integer");
  const auto raw = v.get<long long>();
  if (raw < 0) throw ValidationError(std::string(field) + " index out of range");
  return static_cast<std::size_t>(raw);
}

ReferenceInstance reference_instance_from_json(const json& j, bool neutral_role) {
  const char* role = neutral_role ? "neutral" : "ruler";
  ReferenceInstance r;
  r.context = j.at("context").get<std::string>();
  r.question = j.at("question").get<std::string>();
  r.candidates = candidates_from_json(j.at("candidates"));
  if (!j.contains("is_ambiguous") || !j.contains("is_negative_question")) {
    throw ValidationError(std::string(role) + " must declare is_ambiguous and is_negative_question");
  }
  r.is_ambiguous = j.at("is_ambiguous").get<bool>();
  r.is_negative_question = j.at("is_negative_question").get<bool>();
  r.template_id = j.value("template_id", std::string());
  if (j.contains("neutral_answer_index")) {
    r.neutral_answer_index = index_from_json(j, "neutral_answer_index");
  }
  validate_reference(r, role);
  if (neutral_role && !r.neutral_answer_index) r.neutral_answer_index = r.axis().unknown;
  return r;
}

}  // namespace

void validate(const QAInstance& instance) {
  if (instance.id.empty()) throw ValidationError("instance id must be non-empty");
  if (instance.candidates.size() < 2) {
    throw ValidationError("instance " + instance.id + " needs at least 2 candidates");
  }
  validate_candidates(instance.candidates);
  if (instance.gold_index >= instance.candidates.size()) {
    throw ValidationError("instance " + instance.id + ": gold_index out of range");
  }
  if (instance.predicted_index && *instance.predicted_index >= instance.candidates.size()) {
    throw ValidationError("instance " + instance.id + ": predicted_index out of range");
  }
}

void validate(const ReferenceInstance& instance) { validate_reference(instance, "reference instance"); }

BiasAxis ReferenceInstance::axis() const {
  auto axis = find_axis(candidates);
  if (!axis) throw ValidationError("reference instance has no complete bias axis");
  return *axis;
}

ordered_json to_json(const Candidate& candidate) {
  ordered_json j;
  j["text"] = candidate.text;
  j["bias_label"] = to_string(candidate.bias_label);
  return j;
}

namespace {
ordered_json candidates_to_json(const std::vector<Candidate>& candidates) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : candidates) arr.push_back(to_json(c));
  return arr;
}
}  // namespace

ordered_json to_json(const QAInstance& instance) {
  ordered_json j;
  j["id"] = instance.id;
  j["category"] = instance.category;
  j["context"] = instance.context;
  j["question"] = instance.question;
  j["candidates"] = candidates_to_json(instance.candidates);
  j["gold_index"] = instance.gold_index;
  j["context_condition"] = to_string(instance.context_condition);
  j["template_id"] = instance.template_id;
  if (instance.predicted_index) j["predicted_index"] = *instance.predicted_index;
  return j;
}

ordered_json to_json(const ReferenceInstance& instance) {
  ordered_json j;
  j["context"] = instance.context;
  j["question"] = instance.question;
  j["candidates"] = candidates_to_json(instance.candidates);
  j["is_ambiguous"] = instance.is_ambiguous;
  j["is_negative_question"] = instance.is_negative_question;
  if (!instance.template_id.empty()) j["template_id"] = instance.template_id;
  if (instance.neutral_answer_index) j["neutral_answer_index"] = *instance.neutral_answer_index;
  return j;
}

ordered_json to_json(const ReferencePair& pair) {
  ordered_json j;
  j["perspective"] = pair.perspective;
  j["neutral"] = to_json(pair.neutral);
  j["ruler"] = to_json(pair.ruler);
  return j;
}

QAInstance qa_instance_from_json(const json& record) {
  QAInstance q;
  q.id = record.at("id").get<std::string>();
  q.category = record.value("category", std::string());
  q.context = record.at("context").get<std::string>();
  q.question = record.at("question").get<std::string>();
  q.candidates = candidates_from_json(record.at("candidates"));
  q.gold_index = index_from_json(record, "gold_index");
  q.context_condition = parse_context_condition(record.at("context_condition").get<std::string>());
  q.template_id = record.value("template_id", std::string());
  if (record.contains("predicted_index") && !record.at("predicted_index").is_null()) {
    q.predicted_index = index_from_json(record, "predicted_index");
  }
  validate(q);
  return q;
}

ReferencePair reference_pair_from_json(const json& record) {
  ReferencePair pair;
  pair.perspective = record.value("perspective", std::string());
  pair.neutral = reference_instance_from_json(record.at("neutral"), /*neutral_role=*/true);
  pair.ruler = reference_instance_from_json(record.at("ruler"), /*neutral_role=*/false);
  return pair;
}

Dataset load_qa_dataset(const std::filesystem::path& path) {
  Dataset dataset;
  dataset.source_name = path.filename().string();
  std::unordered_set<std::string> ids;
  for_each_jsonl_record(path, [&](std::size_t, const json& record) {
    QAInstance q = qa_instance_from_json(record);
    if (!ids.insert(q.id).second) throw ValidationError("duplicate instance id '" + q.id + "'");
    dataset.instances.push_back(std::move(q));
  });
  return dataset;
}

namespace {
template <typename Range>
void write_jsonl(const Range& items, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  for (const auto& item : items) out << to_json(item).dump() << '\n';
  if (!out) throw RuntimeError("write failed for " + path.string());
}
}  // namespace

void save_qa_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_jsonl(dataset.instances, path);
}

std::vector<ReferencePair> load_reference_pairs(const std::filesystem::path& path) {
  std::vector<ReferencePair> pairs;
  for_each_jsonl_record(path, [&](std::size_t, const json& record) {
    pairs.push_back(reference_pair_from_json(record));
  });
  return pairs;
}

void save_reference_pairs(const std::vector<ReferencePair>& pairs,
                          const std::filesystem::path& path) {
  write_jsonl(pairs, path);
}

std::vector<ReferencePair> sample_reference_pairs(const std::vector<ReferencePair>& pool,
                                                  std::size_t k, std::uint32_t seed) {
  if (k > pool.size()) {
    throw ValidationError("cannot sample " + std::to_string(k) + " pairs from a pool of " +
                          std::to_string(pool.size()));
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<ReferencePair> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool[order[i]]);
  return out;
}

Dataset filter_template_overlap(const Dataset& eval_set, const std::vector<ReferencePair>& refs,
                                OverlapMode mode) {
  std::unordered_set<std::string> templates;
  std::unordered_set<std::string> contexts;
  auto note = [&](const ReferenceInstance& r) {
    const bool use_template =
        mode == OverlapMode::kTemplateId || (mode == OverlapMode::kTemplateOrText && !r.template_id.empty());
    if (use_template) {
      if (!r.template_id.empty()) templates.insert(r.template_id);
    } else {
      contexts.insert(r.context);
    }
  };
  for (const auto& pair : refs) {
    note(pair.neutral);
    note(pair.ruler);
  }

  Dataset out;
  out.source_name = eval_set.source_name;
  for (const auto& q : eval_set.instances) {
    const bool template_hit = !q.template_id.empty() && templates.contains(q.template_id);
    if (template_hit || contexts.contains(q.context)) continue;
    out.instances.push_back(q);
  }
  return out;
}

}  // namespace bias_lens
