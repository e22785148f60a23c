#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "sutra/corpus.hpp"
#include "sutra/errors.hpp"
#include "sutra/eval.hpp"
#include "sutra/ops.hpp"
#include "sutra/training.hpp"
#include "testutil.hpp"

using namespace sutra;

namespace {

struct World {
  std::vector<ConceptStatement> kb;
  std::vector<LanguageSpec> specs;
  ParallelCorpus corpus;
  Tokenizer tok;
  SutraPipeline pipe;

  static World make(int n_statements = 60, int n_langs = 2, std::uint64_t seed = 11) {
    World w;
    w.kb = generate_kb(seed, n_statements);
    for (int i = 0; i < n_langs; ++i)
      w.specs.push_back(make_language(i, static_cast<WordOrder>(i % 3)));
    w.corpus = build_parallel_corpus(w.kb, w.specs, {0.8, 0.1, 0.1}, seed);

    std::vector<std::string> all_texts;
    for (int i = 0; i < n_langs; ++i) {
      auto t = w.corpus.all_texts(i);
      all_texts.insert(all_texts.end(), t.begin(), t.end());
    }
    w.tok = Tokenizer::train(all_texts, 500);

    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.ffn_dim = 16;
    cfg.n_experts = 2;
    cfg.top_k = 1;
    cfg.context_window = 64;
    cfg.vocab_size = 0;
    cfg.enc_layers = 1;
    cfg.dec_layers = 1;
    cfg.enc_heads = 2;
    cfg.dec_heads = 2;
    cfg.n_langs = n_langs;
    cfg.seed = 42;
    w.pipe = SutraPipeline(cfg, w.tok);
    return w;
  }
};

void zero_params_with_prefix(SutraPipeline& pipe, const std::string& prefix) {
  for (const auto& [name, t] : pipe.named_params()) {
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
    Tensor shared = t;  // tensors share storage; writing through a copy edits the model
    for (size_t i = 0; i < shared.numel(); ++i) shared.data()[i] = 0.0;
  }
}

std::vector<double> mean_pooled(const SutraPipeline& pipe, const std::string& text, int lang) {
  NoGradGuard ng;
  Tensor states = pipe.encode_language(pipe.tokenizer().encode(text), lang);
  const size_t t = states.shape()[0], d = states.shape()[1];
  std::vector<double> out(d, 0.0);
  for (size_t i = 0; i < t; ++i)
    for (size_t j = 0; j < d; ++j) out[j] += states.data()[i * d + j];
  for (double& v : out) v /= static_cast<double>(t);
  return out;
}

double ref_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

QaItem make_item(const std::string& key, int lang, const std::string& question,
                 const std::string& correct) {
  QaItem item;
  item.meaning_key = key;
  item.lang = lang;
  item.question = question;
  item.options = {correct, "decoy-a", "decoy-b", "decoy-c"};
  item.answer = 0;
  return item;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("perplexity: uniform logits give exactly vocab-size perplexity") {
    World w = World::make(30);
    zero_params_with_prefix(w.pipe, "concept.emb");
    const double ppl = perplexity(w.pipe, w.corpus.all_texts(0), 16);
    const double v = static_cast<double>(w.pipe.config().vocab_size);
    CHECK(std::abs(ppl - v) / v < 1e-12);
  }

  TEST_CASE("perplexity: matches a window-by-window reference computation") {
    World w = World::make(40);
    const std::vector<std::string> texts = w.corpus.all_texts(1);
    const size_t window = 12;

    // independent accumulation, one window at a time
    std::vector<int> stream;
    for (const auto& text : texts) {
      auto ids = w.tok.encode(text);
      stream.insert(stream.end(), ids.begin(), ids.end());
      stream.push_back(Tokenizer::kEos);
    }
    const size_t n_windows = stream.size() / (window + 1);
    REQUIRE(n_windows >= 3);
    NoGradGuard ng;
    double nll = 0.0;
    for (size_t k = 0; k < n_windows; ++k) {
      std::vector<int> input(stream.begin() + k * (window + 1),
                             stream.begin() + k * (window + 1) + window);
      std::vector<int> targets(stream.begin() + k * (window + 1) + 1,
                               stream.begin() + k * (window + 1) + window + 1);
      Tensor logits = w.pipe.concept_model().lm_forward({input});
      Tensor flat = reshape(logits, {window, logits.shape()[2]});
      nll += cross_entropy(flat, targets).value() * static_cast<double>(window);
    }
    const double expected = std::exp(nll / static_cast<double>(n_windows * window));

    const double got = perplexity(w.pipe, texts, window);
    CHECK(std::abs(got - expected) / expected < 1e-9);
  }

  TEST_CASE("perplexity: training the language-model stack lowers it") {
    World w = World::make(60);
    std::vector<std::string> val_texts = w.corpus.texts(0, Split::kVal);
    auto t1 = w.corpus.texts(1, Split::kVal);
    val_texts.insert(val_texts.end(), t1.begin(), t1.end());

    const double before = perplexity(w.pipe, val_texts, 16);

    TrainConfig cfg = TrainConfig::phase1_defaults();
    cfg.steps = 60;
    cfg.batch_size = 8;
    cfg.lm_window = 16;
    cfg.checkpoint_every = 0;
    cfg.out_dir = "";
    std::vector<std::string> train_texts;
    for (int lang = 0; lang < 2; ++lang) {
      auto t = w.corpus.texts(lang, Split::kTrain);
      train_texts.insert(train_texts.end(), t.begin(), t.end());
    }
    train_phase1(cfg, train_texts, w.pipe);

    const double after = perplexity(w.pipe, val_texts, 16);
    CHECK(after < before);
  }

  TEST_CASE("perplexity: input validation") {
    World w = World::make(20);
    CHECK_THROWS_AS(perplexity(w.pipe, w.corpus.all_texts(0), 0), ConfigError);
    CHECK_THROWS_AS(perplexity(w.pipe, w.corpus.all_texts(0), 65), ConfigError);
    CHECK_THROWS_AS(perplexity(w.pipe, {}, 16), DataError);
    CHECK_THROWS_AS(perplexity(w.pipe, {"ab"}, 16), DataError);  // under one window
    SutraPipeline empty;
    CHECK_THROWS_AS(perplexity(empty, {"abc"}, 8), StateError);
  }

  TEST_CASE("alignment: a language against itself is perfectly aligned") {
    World w = World::make(60);
    AlignmentScore s = alignment_score(w.pipe, w.corpus, Split::kVal, 1, 1);
    CHECK(s.n_pairs == w.corpus.indices(Split::kVal).size());
    CHECK(s.lang_a == 1);
    CHECK(s.lang_b == 1);
    CHECK(s.parallel_cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.retrieval == 1.0);
    CHECK(s.random_cosine < 1.0);
  }

  TEST_CASE("alignment: agrees with a direct reference computation") {
    World w = World::make(50);
    AlignmentScore s = alignment_score(w.pipe, w.corpus, Split::kVal, 0, 1);

    const auto ta = w.corpus.texts(0, Split::kVal);
    const auto tb = w.corpus.texts(1, Split::kVal);
    const size_t n = ta.size();
    REQUIRE(n >= 2);
    std::vector<std::vector<double>> ea(n), eb(n);
    for (size_t i = 0; i < n; ++i) {
      ea[i] = mean_pooled(w.pipe, ta[i], 0);
      eb[i] = mean_pooled(w.pipe, tb[i], 1);
    }
    double par = 0, rnd = 0;
    size_t hits = 0;
    for (size_t i = 0; i < n; ++i) {
      par += ref_cosine(ea[i], eb[i]);
      rnd += ref_cosine(ea[i], eb[(i + 1) % n]);
      size_t best = 0;
      double best_cos = ref_cosine(ea[i], eb[0]);
      for (size_t j = 1; j < n; ++j) {
        double c = ref_cosine(ea[i], eb[j]);
        if (c > best_cos) { best_cos = c; best = j; }
      }
      if (best == i) ++hits;
    }
    CHECK(std::abs(s.parallel_cosine - par / n) < 1e-12);
    CHECK(std::abs(s.random_cosine - rnd / n) < 1e-12);
    CHECK(s.retrieval == doctest::Approx(double(hits) / n).epsilon(1e-12));
    CHECK(s.n_pairs == n);
  }

  TEST_CASE("alignment: rejections") {
    World w = World::make(30);
    CHECK_THROWS_AS(alignment_score(w.pipe, w.corpus, Split::kVal, 0, 5), DataError);

    // a split with fewer than two items cannot be scored
    auto kb = generate_kb(3, 4);
    auto tiny = build_parallel_corpus(kb, w.specs, {0.5, 0.25, 0.25}, 9);
    REQUIRE(tiny.indices(Split::kVal).size() < 2);
    CHECK_THROWS_AS(alignment_score(w.pipe, tiny, Split::kVal, 0, 1), DataError);

    SutraPipeline empty;
    CHECK_THROWS_AS(alignment_score(empty, w.corpus, Split::kVal, 0, 1), StateError);
  }

  TEST_CASE("consistency: exact-match counting and gap with a pinned decoder") {
    World w = World::make(30);
    // an all-zero model decodes padding forever, which renders as ""
    zero_params_with_prefix(w.pipe, "");
    CHECK(w.pipe.generate("ent0 has attr0 val0", 0, 0, 8) == "");

    std::vector<QaItem> items;
    // lang 0: two of five items expect the empty string -> accuracy 0.4
    items.push_back(make_item("k1", 0, "what attr0 of ent0", ""));
    items.push_back(make_item("k2", 0, "what attr1 of ent1", ""));
    items.push_back(make_item("k3", 0, "what attr2 of ent2", "zzz"));
    items.push_back(make_item("k4", 0, "what attr3 of ent3", "zzz"));
    items.push_back(make_item("k5", 0, "what attr4 of ent4", "zzz"));
    // lang 1: one of five -> accuracy 0.2
    items.push_back(make_item("k1", 1, "q1", ""));
    items.push_back(make_item("k2", 1, "q2", "zzz"));
    items.push_back(make_item("k3", 1, "q3", "zzz"));
    items.push_back(make_item("k4", 1, "q4", "zzz"));
    items.push_back(make_item("k5", 1, "q5", "zzz"));

    ConsistencyReport r = consistency_eval(w.pipe, items, 8);
    CHECK(r.item_counts.at(0) == 5);
    CHECK(r.item_counts.at(1) == 5);
    CHECK(r.accuracy.at(0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r.accuracy.at(1) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(r.gap == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("consistency: languages must cover the same meanings") {
    World w = World::make(20);
    std::vector<QaItem> items;
    items.push_back(make_item("k1", 0, "q", "x"));
    items.push_back(make_item("k2", 0, "q", "x"));
    items.push_back(make_item("k1", 1, "q", "x"));
    items.push_back(make_item("k3", 1, "q", "x"));  // k3 not covered by lang 0
    CHECK_THROWS_AS(consistency_eval(w.pipe, items, 8), DataError);

    CHECK_THROWS_AS(consistency_eval(w.pipe, {}, 8), DataError);
    SutraPipeline empty;
    CHECK_THROWS_AS(consistency_eval(empty, items, 8), StateError);
  }

  TEST_CASE("consistency: deterministic over repeated runs on generated items") {
    World w = World::make(30);
    auto items = build_qa_corpus(w.kb, w.specs, 6, 8);
    ConsistencyReport r1 = consistency_eval(w.pipe, items, 8);
    ConsistencyReport r2 = consistency_eval(w.pipe, items, 8);
    CHECK(r1.to_json() == r2.to_json());
    CHECK(r1.gap >= 0.0);

    auto j = nlohmann::json::parse(r1.to_json());
    CHECK(j.contains("accuracy"));
    CHECK(j.contains("item_counts"));
    CHECK(j.contains("gap"));
    CHECK(!j.contains("wall"));
    CHECK(r1.to_text().find("gap") != std::string::npos);
  }

  TEST_CASE("fertility: identical tokenizers give ratio one") {
    World w = World::make(30);
    auto texts0 = w.corpus.all_texts(0);
    FertilityComparison cmp = fertility_comparison(w.tok, w.tok, {{0, texts0}});
    CHECK(cmp.per_language.at(0).ratio == 1.0);
    CHECK(cmp.per_language.at(0).base == cmp.per_language.at(0).extended);
  }

  TEST_CASE("fertility: script-aware extension lowers fertility on its script only") {
    auto kb = generate_kb(5, 80);
    std::vector<LanguageSpec> specs = {make_language(0, WordOrder::kSubjectFirst),
                                       make_language(2, WordOrder::kVerbFinal)};
    auto corpus = build_parallel_corpus(kb, specs, {0.8, 0.1, 0.1}, 5);
    auto ascii_texts = corpus.all_texts(0);
    auto script_texts = corpus.all_texts(2);

    Tokenizer base = Tokenizer::train(ascii_texts, 400);
    Tokenizer ext = Tokenizer::train(script_texts, 400);
    Tokenizer merged = Tokenizer::merge_vocabs(base, ext);

    FertilityComparison cmp =
        fertility_comparison(base, merged, {{0, ascii_texts}, {2, script_texts}});
    // byte-fallback costs two tokens per script codepoint; learned pieces beat it
    CHECK(cmp.per_language.at(2).base > 2.0);
    CHECK(cmp.per_language.at(2).ratio < 1.0);
    // extension pieces never match ASCII text, so the pivot language is untouched
    CHECK(cmp.per_language.at(0).ratio == 1.0);

    auto j = nlohmann::json::parse(cmp.to_json());
    CHECK(j.contains("2"));
    CHECK(cmp.to_text().find("ratio") != std::string::npos);
  }

  TEST_CASE("fertility: rejections") {
    World w = World::make(20);
    CHECK_THROWS_AS(fertility_comparison(w.tok, w.tok, {}), DataError);
    CHECK_THROWS_AS(fertility_comparison(w.tok, w.tok, {{0, {}}}), DataError);
  }

  TEST_CASE("reports: serialization is deterministic and timing-free") {
    World w = World::make(40);
    AlignmentScore s1 = alignment_score(w.pipe, w.corpus, Split::kVal, 0, 1);
    AlignmentScore s2 = alignment_score(w.pipe, w.corpus, Split::kVal, 0, 1);
    CHECK(s1.to_json() == s2.to_json());
    auto j = nlohmann::json::parse(s1.to_json());
    CHECK(j.at("n_pairs").get<size_t>() == s1.n_pairs);
    CHECK(j.at("lang_a").get<int>() == 0);
    CHECK(!j.contains("wall"));
    CHECK(s1.to_text().find("retrieval") != std::string::npos);
  }
}
