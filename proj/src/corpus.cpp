#include "sutra/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sutra/errors.hpp"
#include "sutra/rng.hpp"
#include "sutra/serde.hpp"

namespace sutra {
namespace {

using Json = nlohmann::json;

constexpr int kSlotsPerTemplate = 4;
const char* kHas = "has";
const char* kWhat = "what";
const char* kOf = "of";

const std::array<int, 4>& perm_for(WordOrder order) {
  static const std::array<int, 4> kIdentity = {0, 1, 2, 3};
  static const std::array<int, 4> kVerbFinal = {0, 2, 3, 1};
  static const std::array<int, 4> kVerbFirst = {1, 0, 2, 3};
  switch (order) {
    case WordOrder::kSubjectFirst:
      return kIdentity;
    case WordOrder::kVerbFinal:
      return kVerbFinal;
    case WordOrder::kVerbFirst:
      return kVerbFirst;
  }
  throw ConfigError("language: unknown word order");
}

std::string encode_codepoint(int cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else {  // all script blocks here stay below U+0800 (two bytes)
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::vector<std::string> alphabet_for(int seed) {
  std::vector<std::string> out;
  if (seed == 0) {
    for (char c = 'a'; c <= 'z'; ++c) out.push_back(std::string(1, c));
  } else {
    const int base = 0x0400 + (seed - 1) * 0x40;
    for (int i = 0; i < 32; ++i) out.push_back(encode_codepoint(base + i));
  }
  return out;
}

std::string fact_key(const std::string& entity, const std::string& attribute) {
  return entity + ":" + attribute;
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("corpus: unknown split label '" + s + "'");
}

const char* split_to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  throw DataError("corpus: unknown split value");
}

std::vector<std::string> split_words(const std::string& sentence) {
  std::vector<std::string> words;
  std::istringstream in(sentence);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

}  // namespace

const std::vector<std::string>& concept_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v = {kHas, kWhat, kOf};
    for (int i = 0; i < kNumEntities; ++i) v.push_back("ent" + std::to_string(i));
    for (int i = 0; i < kNumAttributes; ++i) v.push_back("attr" + std::to_string(i));
    for (int i = 0; i < kNumValues; ++i) v.push_back("val" + std::to_string(i));
    return v;
  }();
  return vocab;
}

LanguageSpec make_language(int seed, WordOrder order) {
  if (seed < 0 || seed > kMaxLanguageSeed)
    throw ConfigError("language: seed " + std::to_string(seed) + " outside [0, " +
                      std::to_string(kMaxLanguageSeed) + "]");
  perm_for(order);  // validates the enum
  LanguageSpec spec;
  spec.lang_id = seed;
  spec.seed = static_cast<std::uint64_t>(seed);
  spec.order = order;

  const std::vector<std::string> alphabet = alphabet_for(seed);
  Rng rng(0x6c6578ULL * 131 + static_cast<std::uint64_t>(seed));
  for (const std::string& symbol : concept_vocabulary()) {
    std::string word;
    const int len = rng.next_int(3, 7);
    for (int i = 0; i < len; ++i)
      word += alphabet[static_cast<size_t>(rng.next_int(0, static_cast<int>(alphabet.size())))];
    // keep the lexicon bijective: extend on collision (deterministic)
    while (spec.inverse.count(word))
      word += alphabet[static_cast<size_t>(rng.next_int(0, static_cast<int>(alphabet.size())))];
    spec.lexicon[symbol] = word;
    spec.inverse[word] = symbol;
  }
  return spec;
}

LanguageSpec identity_language() {
  LanguageSpec spec;
  spec.lang_id = 0;
  spec.seed = 0;
  spec.order = WordOrder::kSubjectFirst;
  for (const std::string& symbol : concept_vocabulary()) {
    spec.lexicon[symbol] = symbol;
    spec.inverse[symbol] = symbol;
  }
  return spec;
}

std::vector<ConceptStatement> generate_kb(std::uint64_t seed, int n_statements) {
  if (n_statements < 1) throw DataError("kb: need at least one statement");
  if (n_statements > kKbCapacity)
    throw CapacityError("kb: " + std::to_string(n_statements) + " statements exceed capacity " +
                        std::to_string(kKbCapacity));
  std::vector<int> pairs(static_cast<size_t>(kKbCapacity));
  std::iota(pairs.begin(), pairs.end(), 0);
  Rng rng(seed);
  rng.shuffle(pairs);

  std::vector<ConceptStatement> kb;
  kb.reserve(static_cast<size_t>(n_statements));
  for (int i = 0; i < n_statements; ++i) {
    const int e = pairs[static_cast<size_t>(i)] / kNumAttributes;
    const int a = pairs[static_cast<size_t>(i)] % kNumAttributes;
    const int v = rng.next_int(0, kNumValues);
    ConceptStatement st;
    st.template_id = 0;
    st.slots = {"ent" + std::to_string(e), kHas, "attr" + std::to_string(a),
                "val" + std::to_string(v)};
    st.meaning_key = fact_key(st.slots[0], st.slots[2]);
    kb.push_back(std::move(st));
  }
  return kb;
}

ConceptStatement question_for(const ConceptStatement& fact) {
  if (fact.template_id != 0 || fact.slots.size() != static_cast<size_t>(kSlotsPerTemplate))
    throw DataError("question_for: expected an attribute fact");
  ConceptStatement q;
  q.template_id = 1;
  q.slots = {kWhat, fact.slots[2], kOf, fact.slots[0]};
  q.meaning_key = fact.meaning_key;
  return q;
}

std::string realize(const ConceptStatement& statement, const LanguageSpec& spec) {
  if (statement.slots.size() != static_cast<size_t>(kSlotsPerTemplate))
    throw DataError("realize: statement must fill " + std::to_string(kSlotsPerTemplate) +
                    " slots");
  const auto& perm = perm_for(spec.order);
  std::string out;
  for (int j = 0; j < kSlotsPerTemplate; ++j) {
    const std::string& symbol = statement.slots[static_cast<size_t>(perm[j])];
    auto it = spec.lexicon.find(symbol);
    if (it == spec.lexicon.end())
      throw DataError("realize: symbol '" + symbol + "' missing from lexicon of language " +
                      std::to_string(spec.lang_id));
    if (j) out += ' ';
    out += it->second;
  }
  return out;
}

ConceptStatement invert(const std::string& sentence, const LanguageSpec& spec) {
  const std::vector<std::string> words = split_words(sentence);
  if (words.size() != static_cast<size_t>(kSlotsPerTemplate))
    throw DataError("invert: expected " + std::to_string(kSlotsPerTemplate) + " words, got " +
                    std::to_string(words.size()));
  const auto& perm = perm_for(spec.order);
  std::vector<std::string> slots(kSlotsPerTemplate);
  for (int j = 0; j < kSlotsPerTemplate; ++j) {
    auto it = spec.inverse.find(words[static_cast<size_t>(j)]);
    if (it == spec.inverse.end())
      throw DataError("invert: word '" + words[static_cast<size_t>(j)] +
                      "' not in lexicon of language " + std::to_string(spec.lang_id));
    slots[static_cast<size_t>(perm[j])] = it->second;
  }
  ConceptStatement st;
  st.slots = std::move(slots);
  if (st.slots[1] == kHas) {
    st.template_id = 0;
    st.meaning_key = fact_key(st.slots[0], st.slots[2]);
  } else if (st.slots[0] == kWhat && st.slots[2] == kOf) {
    st.template_id = 1;
    st.meaning_key = fact_key(st.slots[3], st.slots[1]);
  } else {
    throw DataError("invert: sentence matches no template");
  }
  return st;
}

std::vector<std::size_t> ParallelCorpus::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto it = split_of.find(items[i].meaning_key);
    if (it != split_of.end() && it->second == s) out.push_back(i);
  }
  return out;
}

std::vector<std::string> ParallelCorpus::texts(int lang_id, Split s) const {
  std::vector<std::string> out;
  for (std::size_t i : indices(s)) {
    auto it = items[i].texts.find(lang_id);
    if (it == items[i].texts.end())
      throw DataError("corpus: item " + items[i].meaning_key + " has no language " +
                      std::to_string(lang_id));
    out.push_back(it->second);
  }
  return out;
}

std::vector<std::string> ParallelCorpus::all_texts(int lang_id) const {
  std::vector<std::string> out;
  for (const ParallelItem& item : items) {
    auto it = item.texts.find(lang_id);
    if (it == item.texts.end())
      throw DataError("corpus: item " + item.meaning_key + " has no language " +
                      std::to_string(lang_id));
    out.push_back(it->second);
  }
  return out;
}

std::string ParallelCorpus::to_jsonl() const {
  std::string out;
  for (const ParallelItem& item : items) {
    auto split_it = split_of.find(item.meaning_key);
    if (split_it == split_of.end())
      throw DataError("corpus: item " + item.meaning_key + " has no split");
    for (const auto& [lang, text] : item.texts) {
      Json j;
      j["lang"] = lang;
      j["meaning_key"] = item.meaning_key;
      j["split"] = split_to_string(split_it->second);
      j["text"] = text;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

ParallelCorpus ParallelCorpus::from_jsonl(const std::string& text) {
  ParallelCorpus corpus;
  std::map<std::string, std::size_t> index_of;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
      const std::string key = j.at("meaning_key").get<std::string>();
      const int lang = j.at("lang").get<int>();
      const Split split = split_from_string(j.at("split").get<std::string>());
      const std::string sentence = j.at("text").get<std::string>();

      auto it = index_of.find(key);
      if (it == index_of.end()) {
        index_of[key] = corpus.items.size();
        corpus.items.push_back({key, {{lang, sentence}}});
        corpus.split_of[key] = split;
      } else {
        corpus.items[it->second].texts[lang] = sentence;
        if (corpus.split_of[key] != split)
          throw DataError("corpus: conflicting splits for " + key);
      }
    } catch (const Json::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

void ParallelCorpus::save(const std::string& path) const { write_file(path, to_jsonl()); }
ParallelCorpus ParallelCorpus::load(const std::string& path) {
  return from_jsonl(read_file(path));
}

ParallelCorpus build_parallel_corpus(const std::vector<ConceptStatement>& kb,
                                     const std::vector<LanguageSpec>& specs,
                                     const std::array<double, 3>& split_ratios,
                                     std::uint64_t seed) {
  if (specs.size() < 2) throw ConfigError("corpus: need at least two languages");
  {
    std::set<int> ids;
    for (const LanguageSpec& s : specs) ids.insert(s.lang_id);
    if (ids.size() != specs.size()) throw ConfigError("corpus: duplicate language ids");
  }
  double sum = 0.0;
  for (double r : split_ratios) {
    if (r < 0.0) throw ConfigError("corpus: negative split ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("corpus: split ratios must sum to 1");
  if (kb.empty()) throw DataError("corpus: empty knowledge base");

  ParallelCorpus corpus;
  corpus.items.reserve(kb.size());
  for (const ConceptStatement& st : kb) {
    ParallelItem item;
    item.meaning_key = st.meaning_key;
    for (const LanguageSpec& spec : specs) item.texts[spec.lang_id] = realize(st, spec);
    corpus.items.push_back(std::move(item));
  }

  std::vector<std::size_t> order(kb.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0x73706c6974ULL);  // decoupled from KB generation
  rng.shuffle(order);
  const auto n = static_cast<long long>(kb.size());
  const long long n_train = std::llround(split_ratios[0] * static_cast<double>(n));
  const long long n_val =
      std::llround((split_ratios[0] + split_ratios[1]) * static_cast<double>(n)) - n_train;
  for (long long i = 0; i < n; ++i) {
    const std::string& key = corpus.items[order[static_cast<std::size_t>(i)]].meaning_key;
    corpus.split_of[key] =
        i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
  }
  return corpus;
}

std::vector<QaItem> build_qa_corpus(const std::vector<ConceptStatement>& kb,
                                    const std::vector<LanguageSpec>& specs, int n_items,
                                    std::uint64_t seed) {
  if (specs.empty()) throw ConfigError("qa: need at least one language");
  if (n_items < 1) throw DataError("qa: need at least one item");
  if (n_items > static_cast<int>(kb.size()))
    throw CapacityError("qa: " + std::to_string(n_items) + " items from " +
                        std::to_string(kb.size()) + " statements");

  std::vector<std::string> value_pool;
  {
    std::set<std::string> seen;
    for (const ConceptStatement& st : kb) seen.insert(st.slots[3]);
    value_pool.assign(seen.begin(), seen.end());
  }
  if (value_pool.size() < 4)
    throw CapacityError("qa: only " + std::to_string(value_pool.size()) +
                        " distinct values; need 4 for one correct + three distractors");

  std::vector<std::size_t> order(kb.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed ^ 0x7161ULL);
  rng.shuffle(order);

  std::vector<QaItem> items;
  items.reserve(static_cast<size_t>(n_items) * specs.size());
  for (int i = 0; i < n_items; ++i) {
    const ConceptStatement& fact = kb[order[static_cast<std::size_t>(i)]];
    const std::string& correct = fact.slots[3];

    std::vector<std::string> pool = value_pool;
    rng.shuffle(pool);
    std::vector<std::string> options;
    for (const std::string& v : pool) {
      if (v != correct && options.size() < 3) options.push_back(v);
    }
    options.push_back(correct);
    rng.shuffle(options);
    int answer = -1;
    for (int k = 0; k < 4; ++k)
      if (options[static_cast<size_t>(k)] == correct) answer = k;

    const ConceptStatement question = question_for(fact);
    for (const LanguageSpec& spec : specs) {
      QaItem item;
      item.meaning_key = fact.meaning_key;
      item.lang = spec.lang_id;
      item.question = realize(question, spec);
      for (int k = 0; k < 4; ++k) {
        auto it = spec.lexicon.find(options[static_cast<size_t>(k)]);
        if (it == spec.lexicon.end())
          throw DataError("qa: value '" + options[static_cast<size_t>(k)] +
                          "' missing from lexicon of language " + std::to_string(spec.lang_id));
        item.options[static_cast<size_t>(k)] = it->second;
      }
      item.answer = answer;
      items.push_back(std::move(item));
    }
  }
  return items;
}

std::string qa_to_jsonl(const std::vector<QaItem>& items) {
  std::string out;
  for (const QaItem& item : items) {
    Json j;
    j["answer"] = item.answer;
    j["lang"] = item.lang;
    j["meaning_key"] = item.meaning_key;
    j["options"] = item.options;
    j["question"] = item.question;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<QaItem> qa_from_jsonl(const std::string& text) {
  std::vector<QaItem> items;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line);
      QaItem item;
      item.meaning_key = j.at("meaning_key").get<std::string>();
      item.lang = j.at("lang").get<int>();
      item.question = j.at("question").get<std::string>();
      const auto opts = j.at("options").get<std::vector<std::string>>();
      if (opts.size() != 4)
        throw DataError("qa line " + std::to_string(line_no) + ": need exactly 4 options");
      std::copy(opts.begin(), opts.end(), item.options.begin());
      item.answer = j.at("answer").get<int>();
      if (item.answer < 0 || item.answer > 3)
        throw DataError("qa line " + std::to_string(line_no) + ": answer index out of range");
      items.push_back(std::move(item));
    } catch (const Json::exception& e) {
      throw DataError("qa line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

}  // namespace sutra
