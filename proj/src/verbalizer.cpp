#include "bias_lens/verbalizer.hpp"

#include "bias_lens/error.hpp"

namespace bias_lens {

namespace {
constexpr std::size_t kMaxCandidates = 26;
}

std::string render_options(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw ValidationError("cannot verbalize an empty candidate list");
  if (candidates.size() > kMaxCandidates) {
    throw ValidationError("at most 26 candidates can be labeled (a)-(z)");
  }
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i > 0) out += ' ';
    out += '(';
    out += static_cast<char>('a' + i);
    out += ") ";
    out += candidates[i].text;
  }
  return out;
}

std::string verbalize_instance(std::string_view question, const std::vector<Candidate>& candidates,
                               std::string_view context) {
  std::string out(question);
  out += '\n';
  out += render_options(candidates);
  out += '\n';
  out += context;
  return out;
}

std::string render_block(std::string_view context, std::string_view question,
                         const std::vector<Candidate>& candidates, const Candidate* answer) {
  std::string out(context);
  out += '\n';
  out += question;
  out += '\n';
  out += render_options(candidates);
  if (answer != nullptr) {
    out += "\nAnswer: ";
    out += answer->text;
  }
  return out;
}

std::pair<InContextQuery, InContextQuery> build_parallel_queries(const QAInstance& query,
                                                                 std::size_t answer_index,
                                                                 const ReferencePair& pair) {
  if (answer_index >= query.candidates.size()) {
    throw ValidationError("answer index out of range for instance " + query.id);
  }
  const auto& neutral = pair.neutral;
  if (!neutral.neutral_answer_index || *neutral.neutral_answer_index >= neutral.candidates.size()) {
    throw ValidationError("neutral instance lacks a neutral_answer_index");
  }
  const auto& ruler = pair.ruler;
  const std::string ruler_block =
      render_block(ruler.context, ruler.question, ruler.candidates, nullptr);

  std::string given_neutral =
      render_block(neutral.context, neutral.question, neutral.candidates,
                   &neutral.candidates[*neutral.neutral_answer_index]);
  std::string given_query = render_block(query.context, query.question, query.candidates,
                                         &query.candidates[answer_index]);
  given_neutral.append(kBlockSeparator).append(ruler_block);
  given_query.append(kBlockSeparator).append(ruler_block);

  return {InContextQuery{std::move(given_neutral), ruler.candidates,
                         QueryProvenance::kRulerGivenNeutral},
          InContextQuery{std::move(given_query), ruler.candidates,
                         QueryProvenance::kRulerGivenQuery}};
}

}  // namespace bias_lens
