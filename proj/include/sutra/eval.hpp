#pragma once

// Evaluation harness: held-out perplexity, cross-language representation
// alignment, question-answering consistency across languages, and tokenizer
// fertility comparisons. All reports serialize deterministically (sorted
// keys, no timing fields) so identical runs produce identical bytes.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sutra/corpus.hpp"
#include "sutra/model.hpp"
#include "sutra/tokenizer.hpp"

namespace sutra {

// Perplexity of the pipeline's core language-model stack over a token stream.
//
// Texts are tokenized and concatenated with an end-of-text marker after each
// one, then cut into non-overlapping windows of `window + 1` tokens; each
// window contributes `window` next-token predictions. Returns
// exp(mean negative log-likelihood) over all predicted tokens. Leftover
// tokens that do not fill a window are dropped, mirroring the training
// loader. Throws DataError when no full window can be formed and ConfigError
// when `window` is zero or exceeds the model's context length.
double perplexity(const SutraPipeline& pipe, const std::vector<std::string>& texts,
                  size_t window = 32);

// Cross-language alignment of sentence representations.
//
// Each parallel item is embedded per language by mean-pooling the language
// encoder's output states. `parallel_cosine` averages cosine similarity over
// translation pairs, `random_cosine` over mismatched pairs (item i against
// item (i+1) mod N) as a baseline, and `retrieval` is top-1 accuracy of
// finding item i's language-B translation among all language-B candidates by
// cosine similarity.
struct AlignmentScore {
  int lang_a = 0;
  int lang_b = 0;
  size_t n_pairs = 0;
  double parallel_cosine = 0.0;
  double random_cosine = 0.0;
  double retrieval = 0.0;
  std::string to_json() const;
  std::string to_text() const;
};

AlignmentScore alignment_score(const SutraPipeline& pipe, const ParallelCorpus& corpus,
                               Split split, int lang_a, int lang_b);

// Question-answering consistency across languages.
//
// Each item's question is answered by greedy decoding in the question's own
// language; the item counts as correct when the decoded string equals the
// expected option exactly. Items must cover every language with the same set
// of meanings so per-language accuracies are comparable; `gap` is the spread
// (max minus min) across languages.
struct ConsistencyReport {
  std::map<int, double> accuracy;     // language id -> exact-match accuracy
  std::map<int, size_t> item_counts;  // language id -> items evaluated
  double gap = 0.0;
  std::string to_json() const;
  std::string to_text() const;
};

ConsistencyReport consistency_eval(const SutraPipeline& pipe, const std::vector<QaItem>& items,
                                   size_t max_answer_tokens = 16);

// Tokenizer fertility comparison: tokens per word under a baseline tokenizer
// versus an extended one, per language. `ratio` below 1 means the extended
// tokenizer spends fewer tokens on the same text.
struct FertilityComparison {
  struct Row {
    double base = 0.0;
    double extended = 0.0;
    double ratio = 0.0;
  };
  std::map<int, Row> per_language;
  std::string to_json() const;
  std::string to_text() const;
};

FertilityComparison fertility_comparison(
    const Tokenizer& base, const Tokenizer& extended,
    const std::vector<std::pair<int, std::vector<std::string>>>& by_language);

}  // namespace sutra
