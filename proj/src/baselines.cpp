#include "bias_lens/baselines.hpp"

#include <cctype>
#include <fstream>
#include <unordered_map>

#include "bias_lens/error.hpp"

namespace bias_lens {

void validate(const AttributeWordSet& set) {
  if (set.tuples.empty()) throw ValidationError("word set '" + set.category + "' has no tuples");
  for (const auto& tuple : set.tuples) {
    if (tuple.size() < 2) throw ValidationError("word tuples need at least two members");
    for (const auto& word : tuple) {
      if (word.empty()) throw ValidationError("empty attribute word");
      for (char c : word) {
        if (std::isupper(static_cast<unsigned char>(c))) {
          throw ValidationError("attribute word '" + word + "' must be lowercase");
        }
      }
    }
  }
}

std::vector<AttributeWordSet> load_attribute_word_sets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open word sets " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed word sets " + path.string() + ": " + e.what());
  }
  std::vector<AttributeWordSet> sets;
  for (const auto& s : j.at("sets")) {
    AttributeWordSet set{s.at("category").get<std::string>(),
                         s.at("tuples").get<std::vector<std::vector<std::string>>>()};
    validate(set);
    sets.push_back(std::move(set));
  }
  return sets;
}

namespace {

struct Slot {
  const std::vector<std::string>* tuple;
  std::size_t position;
};

std::unordered_map<std::string, Slot> build_index(const std::vector<AttributeWordSet>& sets) {
  std::unordered_map<std::string, Slot> index;
  for (const auto& set : sets) {
    for (const auto& tuple : set.tuples) {
      for (std::size_t i = 0; i < tuple.size(); ++i) index.try_emplace(tuple[i], Slot{&tuple, i});
    }
  }
  return index;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Locates the matched core of a whitespace token: [begin, end) offsets.
std::optional<std::pair<std::size_t, std::size_t>> match_core(
    std::string_view token, const std::unordered_map<std::string, Slot>& index) {
  std::size_t begin = 0;
  while (begin < token.size() && !is_word_char(token[begin])) ++begin;
  if (begin == token.size()) return std::nullopt;
  // Longest suffix-trimmed core first, so "mr." wins over "mr".
  for (std::size_t end = token.size(); end > begin; --end) {
    if (end < token.size() && is_word_char(token[end])) break;
    if (index.contains(lower(token.substr(begin, end - begin)))) return std::pair{begin, end};
  }
  return std::nullopt;
}

std::string replacement_for(std::string_view original, const Slot& slot, double swap_prob,
                            Rng& rng) {
  const double u = rng.uniform_real();
  if (!(u < swap_prob)) return std::string(original);
  const auto& tuple = *slot.tuple;
  std::size_t pick = 0;
  if (tuple.size() == 2) {
    pick = 1 - slot.position;
  } else {
    pick = rng.uniform_index(tuple.size() - 1);
    if (pick >= slot.position) ++pick;
  }
  std::string out = tuple[pick];
  if (std::isupper(static_cast<unsigned char>(original.front()))) {
    out.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(out.front())));
  }
  return out;
}

}  // namespace

std::string cda_swap_text(std::string_view text, const std::vector<AttributeWordSet>& sets,
                          double swap_prob, Rng& rng) {
  if (!(swap_prob >= 0.0 && swap_prob <= 1.0)) {
    throw ValidationError("swap_prob must be in [0, 1]");
  }
  const auto index = build_index(sets);
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    const std::string_view token = text.substr(i, j - i);
    if (auto core = match_core(token, index)) {
      const auto [begin, end] = *core;
      const std::string_view word = token.substr(begin, end - begin);
      out += token.substr(0, begin);
      out += replacement_for(word, index.at(lower(word)), swap_prob, rng);
      out += token.substr(end);
    } else {
      out += token;
    }
    i = j;
  }
  return out;
}

QAInstance cda_augment(const QAInstance& instance, const std::vector<AttributeWordSet>& sets,
                       double swap_prob, std::uint32_t seed) {
  if (!(swap_prob >= 0.0 && swap_prob <= 1.0)) {
    throw ValidationError("swap_prob must be in [0, 1]");
  }
  std::vector<AttributeWordSet> applicable;
  for (const auto& set : sets) {
    if (set.category == instance.category) applicable.push_back(set);
  }
  if (applicable.empty()) return instance;
  Rng rng(seed);
  QAInstance out = instance;
  out.context = cda_swap_text(instance.context, applicable, swap_prob, rng);
  out.question = cda_swap_text(instance.question, applicable, swap_prob, rng);
  return out;
}

Dataset cda_augment(const Dataset& dataset, const std::vector<AttributeWordSet>& sets,
                    double swap_prob, std::uint32_t seed) {
  Dataset out;
  out.source_name = dataset.source_name;
  out.instances.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    // Instance i draws from its own stream seeded by (seed, i).
    out.instances.push_back(cda_augment(dataset.instances[i], sets, swap_prob,
                                        seed + static_cast<std::uint32_t>(i) * 2654435761u));
  }
  return out;
}

std::string nl_intervention(std::string_view prompt, std::string_view statement) {
  if (statement.empty()) return std::string(prompt);
  std::string out(statement);
  out += '\n';
  out += prompt;
  return out;
}

}  // namespace bias_lens
