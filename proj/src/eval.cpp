#include "sutra/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sutra/errors.hpp"
#include "sutra/ops.hpp"

namespace sutra {

namespace {

using json = nlohmann::ordered_json;

// Mean-pooled encoder state for one sentence: (T, d) -> length-d vector.
std::vector<double> sentence_embedding(const SutraPipeline& pipe, const std::string& text,
                                       int lang) {
  NoGradGuard ng;
  std::vector<int> ids = pipe.tokenizer().encode(text);
  Tensor states = pipe.encode_language(ids, lang);
  const size_t t = states.shape()[0];
  const size_t d = states.shape()[1];
  std::vector<double> out(d, 0.0);
  const double* p = states.data();
  for (size_t i = 0; i < t; ++i)
    for (size_t j = 0; j < d; ++j) out[j] += p[i * d + j];
  for (double& v : out) v /= static_cast<double>(t);
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 0.0 ? dot / denom : 0.0;
}

}  // namespace

double perplexity(const SutraPipeline& pipe, const std::vector<std::string>& texts,
                  size_t window) {
  if (!pipe.initialized()) throw StateError("perplexity: pipeline is uninitialized");
  if (window == 0) throw ConfigError("perplexity: window must be positive");
  if (window > static_cast<size_t>(pipe.config().context_window))
    throw ConfigError("perplexity: window " + std::to_string(window) +
                      " exceeds the context window " +
                      std::to_string(pipe.config().context_window));

  std::vector<int> stream;
  for (const auto& text : texts) {
    std::vector<int> ids = pipe.tokenizer().encode(text);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(Tokenizer::kEos);
  }
  const size_t w = window;
  const size_t n_windows = stream.size() / (w + 1);
  if (n_windows == 0)
    throw DataError("perplexity: token stream too short for one window (" +
                    std::to_string(stream.size()) + " tokens, need " + std::to_string(w + 1) +
                    ")");

  NoGradGuard ng;
  constexpr size_t kBatch = 16;
  double total_nll = 0.0;
  size_t total_tokens = 0;
  for (size_t start = 0; start < n_windows; start += kBatch) {
    const size_t count = std::min(kBatch, n_windows - start);
    std::vector<std::vector<int>> inputs(count);
    std::vector<int> targets;
    targets.reserve(count * w);
    for (size_t b = 0; b < count; ++b) {
      const size_t base = (start + b) * (w + 1);
      inputs[b].assign(stream.begin() + base, stream.begin() + base + w);
      for (size_t t = 1; t <= w; ++t) targets.push_back(stream[base + t]);
    }
    Tensor logits = pipe.concept_model().lm_forward(inputs);  // (count, w, V)
    Tensor flat = reshape(logits, {static_cast<int>(count * w), logits.shape()[2]});
    Tensor loss = cross_entropy(flat, targets);  // mean over count*w tokens
    total_nll += loss.value() * static_cast<double>(count * w);
    total_tokens += count * w;
  }
  return std::exp(total_nll / static_cast<double>(total_tokens));
}

AlignmentScore alignment_score(const SutraPipeline& pipe, const ParallelCorpus& corpus,
                               Split split, int lang_a, int lang_b) {
  if (!pipe.initialized()) throw StateError("alignment_score: pipeline is uninitialized");
  const std::vector<std::string> texts_a = corpus.texts(lang_a, split);
  const std::vector<std::string> texts_b = corpus.texts(lang_b, split);
  const size_t n = texts_a.size();
  if (n < 2)
    throw DataError("alignment_score: need at least 2 parallel pairs, found " +
                    std::to_string(n));

  std::vector<std::vector<double>> emb_a(n), emb_b(n);
  for (size_t i = 0; i < n; ++i) {
    emb_a[i] = sentence_embedding(pipe, texts_a[i], lang_a);
    emb_b[i] = sentence_embedding(pipe, texts_b[i], lang_b);
  }

  AlignmentScore score;
  score.lang_a = lang_a;
  score.lang_b = lang_b;
  score.n_pairs = n;
  double parallel_sum = 0.0, random_sum = 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < n; ++i) {
    parallel_sum += cosine(emb_a[i], emb_b[i]);
    random_sum += cosine(emb_a[i], emb_b[(i + 1) % n]);
    size_t best = 0;
    double best_cos = cosine(emb_a[i], emb_b[0]);
    for (size_t j = 1; j < n; ++j) {
      const double c = cosine(emb_a[i], emb_b[j]);
      if (c > best_cos) {
        best_cos = c;
        best = j;
      }
    }
    if (best == i) ++hits;
  }
  score.parallel_cosine = parallel_sum / static_cast<double>(n);
  score.random_cosine = random_sum / static_cast<double>(n);
  score.retrieval = static_cast<double>(hits) / static_cast<double>(n);
  return score;
}

std::string AlignmentScore::to_json() const {
  json j;
  j["lang_a"] = lang_a;
  j["lang_b"] = lang_b;
  j["n_pairs"] = n_pairs;
  j["parallel_cosine"] = parallel_cosine;
  j["random_cosine"] = random_cosine;
  j["retrieval"] = retrieval;
  return j.dump(2) + "\n";
}

std::string AlignmentScore::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "alignment lang " << lang_a << " <-> lang " << lang_b << " (" << n_pairs << " pairs)\n";
  os << "  parallel cosine : " << parallel_cosine << "\n";
  os << "  random cosine   : " << random_cosine << "\n";
  os << "  retrieval@1     : " << retrieval << "\n";
  return os.str();
}

ConsistencyReport consistency_eval(const SutraPipeline& pipe, const std::vector<QaItem>& items,
                                   size_t max_answer_tokens) {
  if (!pipe.initialized()) throw StateError("consistency_eval: pipeline is uninitialized");
  if (items.empty()) throw DataError("consistency_eval: no items to evaluate");

  // Per-language accuracies are only comparable when every language answers
  // the same set of meanings.
  std::map<int, std::vector<std::string>> keys_by_lang;
  for (const auto& item : items) keys_by_lang[item.lang].push_back(item.meaning_key);
  for (auto& [lang, keys] : keys_by_lang) std::sort(keys.begin(), keys.end());
  const auto& reference = keys_by_lang.begin()->second;
  for (const auto& [lang, keys] : keys_by_lang)
    if (keys != reference)
      throw DataError("consistency_eval: language " + std::to_string(lang) +
                      " covers a different meaning set than language " +
                      std::to_string(keys_by_lang.begin()->first) +
                      "; per-language accuracies are not comparable");

  ConsistencyReport report;
  std::map<int, size_t> correct;
  for (const auto& item : items) {
    const std::string predicted =
        pipe.generate(item.question, item.lang, item.lang, max_answer_tokens);
    ++report.item_counts[item.lang];
    if (predicted == item.options[static_cast<size_t>(item.answer)]) ++correct[item.lang];
  }
  double max_acc = 0.0, min_acc = 1.0;
  for (const auto& [lang, count] : report.item_counts) {
    const double acc = static_cast<double>(correct[lang]) / static_cast<double>(count);
    report.accuracy[lang] = acc;
    max_acc = std::max(max_acc, acc);
    min_acc = std::min(min_acc, acc);
  }
  report.gap = max_acc - min_acc;
  return report;
}

std::string ConsistencyReport::to_json() const {
  json j;
  json acc = json::object();
  json counts = json::object();
  for (const auto& [lang, a] : accuracy) acc[std::to_string(lang)] = a;
  for (const auto& [lang, c] : item_counts) counts[std::to_string(lang)] = c;
  j["accuracy"] = acc;
  j["item_counts"] = counts;
  j["gap"] = gap;
  return j.dump(2) + "\n";
}

std::string ConsistencyReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "consistency (exact-match QA accuracy per language)\n";
  for (const auto& [lang, a] : accuracy)
    os << "  lang " << std::setw(3) << lang << " : " << a << "  ("
       << item_counts.at(lang) << " items)\n";
  os << "  gap      : " << gap << "\n";
  return os.str();
}

FertilityComparison fertility_comparison(
    const Tokenizer& base, const Tokenizer& extended,
    const std::vector<std::pair<int, std::vector<std::string>>>& by_language) {
  if (by_language.empty()) throw DataError("fertility_comparison: no languages given");
  FertilityReport base_rep = fertility(base, by_language);
  FertilityReport ext_rep = fertility(extended, by_language);

  FertilityComparison cmp;
  for (size_t i = 0; i < base_rep.rows.size(); ++i) {
    const FertilityRow& b = base_rep.rows[i];
    const FertilityRow& e = ext_rep.rows[i];
    if (b.flagged)
      throw DataError("fertility_comparison: language " + std::to_string(b.language) +
                      " has no countable words");
    FertilityComparison::Row row;
    row.base = b.fertility;
    row.extended = e.fertility;
    row.ratio = e.fertility / b.fertility;
    cmp.per_language[b.language] = row;
  }
  return cmp;
}

std::string FertilityComparison::to_json() const {
  json j = json::object();
  for (const auto& [lang, row] : per_language) {
    json r;
    r["base"] = row.base;
    r["extended"] = row.extended;
    r["ratio"] = row.ratio;
    j[std::to_string(lang)] = r;
  }
  return j.dump(2) + "\n";
}

std::string FertilityComparison::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "fertility (tokens per word): base vs extended tokenizer\n";
  for (const auto& [lang, row] : per_language)
    os << "  lang " << std::setw(3) << lang << " : " << row.base << " -> " << row.extended
       << "  (ratio " << row.ratio << ")\n";
  return os.str();
}

}  // namespace sutra
