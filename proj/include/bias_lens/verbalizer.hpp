#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bias_lens/corpus.hpp"

namespace bias_lens {

enum class QueryProvenance { kRulerGivenNeutral, kRulerGivenQuery };

// One of the two parallel in-context queries. `target_candidates` is always
// the ruler's candidate list in ruler order.
struct InContextQuery {
  std::string text;
  std::vector<Candidate> target_candidates;
  QueryProvenance provenance = QueryProvenance::kRulerGivenQuery;
};

// "(a) first (b) second ..." for up to 26 candidates.
std::string render_options(const std::vector<Candidate>& candidates);

// RACE layout: "<question>\n(a) c1 (b) c2 ...\n<context>".
std::string verbalize_instance(std::string_view question, const std::vector<Candidate>& candidates,
                               std::string_view context);

// In-context demonstration block: context, question, options and, when an
// answer is given, a trailing "Answer: <text>" line.
std::string render_block(std::string_view context, std::string_view question,
                         const std::vector<Candidate>& candidates, const Candidate* answer);

inline constexpr std::string_view kBlockSeparator = "\n\n";

// Returns {S_ruler|neu, S_ruler|Qi}. Both end with the unanswered ruler block
// and differ only in the influencing block that precedes it.
std::pair<InContextQuery, InContextQuery> build_parallel_queries(const QAInstance& query,
                                                                 std::size_t answer_index,
                                                                 const ReferencePair& pair);

}  // namespace bias_lens
