#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace sutra {

// Synthetic multilingual world: a language-independent knowledge base whose
// statements are rendered into toy "languages" (disjoint scripts, bijective
// lexicons, permuted word order), giving exactly parallel corpora with known
// meaning keys.

// Concept inventory (shared by every language).
inline constexpr int kNumEntities = 512;
inline constexpr int kNumAttributes = 16;
inline constexpr int kNumValues = 64;
inline constexpr int kKbCapacity = kNumEntities * kNumAttributes;
inline constexpr int kMaxLanguageSeed = 15;  // distinct two-byte script blocks

// Permutation applied to the 4 template slots when rendering a sentence.
enum class WordOrder : int {
  kSubjectFirst = 0,  // identity
  kVerbFinal = 1,     // relation word moves to the end
  kVerbFirst = 2,     // relation word moves to the front
};

struct LanguageSpec {
  int lang_id = 0;
  std::uint64_t seed = 0;
  WordOrder order = WordOrder::kSubjectFirst;
  std::map<std::string, std::string> lexicon;  // concept symbol -> surface word
  std::unordered_map<std::string, std::string> inverse;
};

// All concept symbols every lexicon must cover, in a fixed order.
const std::vector<std::string>& concept_vocabulary();

// Deterministic language with a script disjoint from every other seed's
// (seed 0 is the ASCII pivot). seed outside [0, kMaxLanguageSeed] -> ConfigError.
LanguageSpec make_language(int seed, WordOrder order);
// Lexicon = identity, order = identity; for tests and debugging.
LanguageSpec identity_language();

struct ConceptStatement {
  int template_id = 0;  // 0 = fact "entity has attribute value", 1 = question
  std::vector<std::string> slots;
  std::string meaning_key;
};

// n distinct-meaning attribute facts. n < 1 -> DataError; n > kKbCapacity ->
// CapacityError.
std::vector<ConceptStatement> generate_kb(std::uint64_t seed, int n_statements);

// The question probing a fact: "what <attr> of <entity>"; same meaning key.
ConceptStatement question_for(const ConceptStatement& fact);

// Lexicon-map, permute, join with single spaces. Unknown symbol -> DataError.
std::string realize(const ConceptStatement& statement, const LanguageSpec& spec);
// Exact inverse of realize for the same spec. Unrecognized word or no
// matching template -> DataError.
ConceptStatement invert(const std::string& sentence, const LanguageSpec& spec);

enum class Split : int { kTrain = 0, kVal = 1, kTest = 2 };

struct ParallelItem {
  std::string meaning_key;
  std::map<int, std::string> texts;  // lang_id -> surface sentence
  bool operator==(const ParallelItem&) const = default;
};

struct ParallelCorpus {
  std::vector<ParallelItem> items;
  std::map<std::string, Split> split_of;  // by meaning key

  std::vector<std::size_t> indices(Split s) const;
  // every sentence of one language, in item order (tokenizer/fertility food)
  std::vector<std::string> texts(int lang_id, Split s) const;
  std::vector<std::string> all_texts(int lang_id) const;

  std::string to_jsonl() const;
  static ParallelCorpus from_jsonl(const std::string& text);
  void save(const std::string& path) const;
  static ParallelCorpus load(const std::string& path);

  bool operator==(const ParallelCorpus&) const = default;
};

// Cross-product realization of the KB plus a deterministic split of meaning
// keys. ratios must sum to 1 -> ConfigError; < 2 specs -> ConfigError.
ParallelCorpus build_parallel_corpus(const std::vector<ConceptStatement>& kb,
                                     const std::vector<LanguageSpec>& specs,
                                     const std::array<double, 3>& split_ratios,
                                     std::uint64_t seed);

struct QaItem {
  std::string meaning_key;
  int lang = 0;
  std::string question;
  std::array<std::string, 4> options;  // surface value words, same language
  int answer = 0;                      // index of the correct option
  bool operator==(const QaItem&) const = default;
};

// n_items facts, each rendered as a question in every language with the SAME
// option order and answer index (meaning-aligned across languages).
// Too few distinct distractor values -> CapacityError.
std::vector<QaItem> build_qa_corpus(const std::vector<ConceptStatement>& kb,
                                    const std::vector<LanguageSpec>& specs, int n_items,
                                    std::uint64_t seed);

std::string qa_to_jsonl(const std::vector<QaItem>& items);
std::vector<QaItem> qa_from_jsonl(const std::string& text);

}  // namespace sutra
