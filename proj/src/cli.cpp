#include "sutra/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sutra/corpus.hpp"
#include "sutra/errors.hpp"
#include "sutra/eval.hpp"
#include "sutra/model.hpp"
#include "sutra/serde.hpp"
#include "sutra/tokenizer.hpp"
#include "sutra/training.hpp"

namespace sutra::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string hash_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
  return std::string(buf);
}

// Manifest accumulated by each artifact-producing command: records the exact
// invocation, content hashes of every input and output, and the effective
// configuration, so artifacts can be reproduced and verified bit-exactly.
// Nothing time- or host-dependent goes in here.
struct Manifest {
  json doc;

  Manifest(const std::string& command, const std::vector<std::string>& argv) {
    doc["tool"] = "sutra";
    doc["manifest_version"] = 1;
    doc["command"] = command;
    doc["argv"] = argv;
    doc["inputs"] = json::object();
    doc["outputs"] = json::object();
  }

  void add_input(const std::string& label, const std::string& path) {
    json entry;
    entry["path"] = path;
    entry["fnv1a"] = hash_hex(read_file(path));
    doc["inputs"][label] = entry;
  }

  void add_output(const std::string& label, const std::string& path) {
    json entry;
    entry["path"] = path;
    entry["fnv1a"] = hash_hex(read_file(path));
    doc["outputs"][label] = entry;
  }

  void set_config(const std::string& config_json_text) {
    doc["effective_config"] = json::parse(config_json_text);
    doc["config_hash"] = hash_hex(config_json_text);
  }

  void write(const std::string& path) const { write_file(path, doc.dump(2) + "\n"); }
};

std::vector<std::string> argv_vector(int argc, char** argv) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) out.emplace_back(argv[i]);
  return out;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (expected train, val, or test)");
}

// --corpus accepts either a directory produced by `corpus generate` or a
// direct path to the JSONL file itself.
std::string resolve_corpus_file(const std::string& path, const std::string& filename) {
  if (fs::is_directory(path)) return (fs::path(path) / filename).string();
  return path;
}

std::vector<int> languages_in(const ParallelCorpus& corpus) {
  std::set<int> langs;
  for (const auto& item : corpus.items)
    for (const auto& [lang, text] : item.texts) langs.insert(lang);
  return {langs.begin(), langs.end()};
}

const char* order_name(WordOrder order) {
  switch (order) {
    case WordOrder::kSubjectFirst: return "subject-first";
    case WordOrder::kVerbFinal: return "verb-final";
    default: return "verb-first";
  }
}

// ---------------------------------------------------------------- tokenizer

struct TokenizerTrainOpts {
  std::string corpus, out;
  int vocab_size = 0;
  int lang = -1;  // -1 = all languages in the file
};

void run_tokenizer_train(const TokenizerTrainOpts& o, const std::vector<std::string>& argv) {
  const std::string corpus_file = resolve_corpus_file(o.corpus, "parallel.jsonl");
  ParallelCorpus corpus = ParallelCorpus::load(corpus_file);
  std::vector<std::string> texts;
  if (o.lang >= 0) {
    texts = corpus.all_texts(o.lang);
  } else {
    for (const auto& item : corpus.items)
      for (const auto& [lang, text] : item.texts) texts.push_back(text);
  }
  Tokenizer tok = Tokenizer::train(texts, o.vocab_size);
  write_file(o.out, tok.to_json());

  Manifest m("tokenizer train", argv);
  json cfg;
  cfg["vocab_size"] = o.vocab_size;
  cfg["lang"] = o.lang;
  m.set_config(cfg.dump());
  m.add_input("corpus", corpus_file);
  m.add_output("tokenizer", o.out);
  m.write(o.out + ".manifest.json");
  std::cout << "wrote " << o.out << " (vocab " << tok.vocab_size() << ")\n";
}

struct TokenizerMergeOpts {
  std::string base, ext, out;
};

void run_tokenizer_merge(const TokenizerMergeOpts& o, const std::vector<std::string>& argv) {
  Tokenizer base = Tokenizer::from_json(read_file(o.base));
  Tokenizer ext = Tokenizer::from_json(read_file(o.ext));
  Tokenizer merged = Tokenizer::merge_vocabs(base, ext);
  write_file(o.out, merged.to_json());

  Manifest m("tokenizer merge", argv);
  m.set_config(json::object().dump());
  m.add_input("base", o.base);
  m.add_input("ext", o.ext);
  m.add_output("tokenizer", o.out);
  m.write(o.out + ".manifest.json");
  std::cout << "wrote " << o.out << " (vocab " << merged.vocab_size() << ")\n";
}

struct TokenizerFertilityOpts {
  std::string model, corpus, out;
};

void run_tokenizer_fertility(const TokenizerFertilityOpts& o,
                             const std::vector<std::string>& argv) {
  Tokenizer tok = Tokenizer::from_json(read_file(o.model));
  ParallelCorpus corpus = ParallelCorpus::load(resolve_corpus_file(o.corpus, "parallel.jsonl"));
  std::vector<std::pair<int, std::vector<std::string>>> by_language;
  for (int lang : languages_in(corpus)) by_language.emplace_back(lang, corpus.all_texts(lang));
  FertilityReport report = fertility(tok, by_language);

  std::cout << report.to_text();
  if (o.out.empty()) {
    std::cout << report.to_json();
  } else {
    write_file(o.out, report.to_json());
    Manifest m("tokenizer fertility", argv);
    m.set_config(json::object().dump());
    m.add_input("model", o.model);
    m.add_input("corpus", o.corpus);
    m.add_output("report", o.out);
    m.write(o.out + ".manifest.json");
  }
}

// ------------------------------------------------------------------- corpus

struct CorpusGenerateOpts {
  int langs = 3;
  int statements = 100;
  int qa_items = 100;
  std::uint64_t seed = 7;
  double train_frac = 0.8;
  double val_frac = 0.1;
  std::string out;
};

void run_corpus_generate(const CorpusGenerateOpts& o, const std::vector<std::string>& argv) {
  if (o.langs < 1 || o.langs > kMaxLanguageSeed + 1)
    throw ConfigError("--langs must be in [1," + std::to_string(kMaxLanguageSeed + 1) + "]");
  std::vector<ConceptStatement> kb = generate_kb(o.seed, static_cast<size_t>(o.statements));
  std::vector<LanguageSpec> specs;
  for (int i = 0; i < o.langs; ++i)
    specs.push_back(make_language(i, static_cast<WordOrder>(i % 3)));
  const double test_frac = 1.0 - o.train_frac - o.val_frac;
  ParallelCorpus corpus =
      build_parallel_corpus(kb, specs, {o.train_frac, o.val_frac, test_frac}, o.seed);
  std::vector<QaItem> qa =
      build_qa_corpus(kb, specs, static_cast<size_t>(o.qa_items), o.seed);

  fs::create_directories(o.out);
  const std::string parallel_path = (fs::path(o.out) / "parallel.jsonl").string();
  const std::string qa_path = (fs::path(o.out) / "qa.jsonl").string();
  corpus.save(parallel_path);
  write_file(qa_path, qa_to_jsonl(qa));

  json cfg;
  cfg["langs"] = o.langs;
  cfg["statements"] = o.statements;
  cfg["qa_items"] = o.qa_items;
  cfg["seed"] = o.seed;
  cfg["train_frac"] = o.train_frac;
  cfg["val_frac"] = o.val_frac;
  json lang_list = json::array();
  for (const auto& spec : specs) {
    json entry;
    entry["lang_id"] = spec.lang_id;
    entry["seed"] = spec.seed;
    entry["word_order"] = order_name(spec.order);
    lang_list.push_back(entry);
  }
  cfg["languages"] = lang_list;
  const std::string cfg_text = cfg.dump(2) + "\n";
  const std::string cfg_path = (fs::path(o.out) / "effective_config.json").string();
  write_file(cfg_path, cfg_text);

  Manifest m("corpus generate", argv);
  m.set_config(cfg_text);
  m.add_output("parallel", parallel_path);
  m.add_output("qa", qa_path);
  m.add_output("effective_config", cfg_path);
  m.write((fs::path(o.out) / "manifest.json").string());
  std::cout << "wrote " << parallel_path << " (" << corpus.items.size() << " items, "
            << o.langs << " languages) and " << qa_path << " (" << qa.size() << " QA items)\n";
}

// -------------------------------------------------------------------- train

struct TrainOpts {
  int phase = 0;  // 0 = take from config file
  std::string config, corpus, out, init, model_config, tokenizer;
  int lang = 0;  // phase-1 language
  // optional overrides; negative/zero sentinel means "not set" handled via counts
  int steps = -1;
  double lr = -1.0;
  int batch_size = -1;
  long long seed = -1;
};

void run_train(const TrainOpts& o, const std::vector<std::string>& argv) {
  TrainConfig cfg;
  if (!o.config.empty()) {
    cfg = TrainConfig::from_json(read_file(o.config));
    if (o.phase != 0) cfg.phase = o.phase;
  } else {
    const int phase = o.phase == 0 ? 1 : o.phase;
    switch (phase) {
      case 1: cfg = TrainConfig::phase1_defaults(); break;
      case 2: cfg = TrainConfig::phase2_defaults(); break;
      case 3: cfg = TrainConfig::phase3_defaults(); break;
      default: cfg = TrainConfig::phase1_defaults(); cfg.phase = phase; break;
    }
  }
  if (o.steps >= 0) cfg.steps = o.steps;
  if (o.lr > 0) cfg.lr = o.lr;
  if (o.batch_size > 0) cfg.batch_size = o.batch_size;
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  cfg.out_dir = o.out;
  cfg.validate();

  SutraPipeline pipe;
  if (!o.init.empty()) {
    pipe = SutraPipeline::load_checkpoint(o.init);
  } else {
    ModelConfig mc = o.model_config.empty() ? desk_config()
                                            : ModelConfig::from_json(read_file(o.model_config));
    // Without an explicit model config the vocabulary must come from the
    // tokenizer; a fixed default would only ever match one tokenizer size.
    if (o.model_config.empty()) mc.vocab_size = 0;
    if (o.tokenizer.empty())
      throw ConfigError(
          "starting a new model requires --tokenizer <file> (or continue one with --init "
          "<checkpoint>)");
    Tokenizer tok = Tokenizer::from_json(read_file(o.tokenizer));
    pipe = SutraPipeline(mc, tok);
  }

  fs::create_directories(o.out);
  TrainReport report;
  std::string corpus_file;
  if (cfg.phase == 3) {
    corpus_file = resolve_corpus_file(o.corpus, "qa.jsonl");
    std::vector<QaItem> items = qa_from_jsonl(read_file(corpus_file));
    report = train_phase3(cfg, items, pipe);
  } else {
    corpus_file = resolve_corpus_file(o.corpus, "parallel.jsonl");
    ParallelCorpus corpus = ParallelCorpus::load(corpus_file);
    if (cfg.phase == 1) {
      report = train_phase1(cfg, corpus.texts(o.lang, Split::kTrain), pipe);
    } else {
      report = train_phase2(cfg, corpus, pipe);
    }
  }

  const std::string report_json_path = (fs::path(o.out) / "report.json").string();
  const std::string report_text_path = (fs::path(o.out) / "report.txt").string();
  const std::string cfg_path = (fs::path(o.out) / "effective_config.json").string();
  write_file(report_json_path, report.to_json());
  write_file(report_text_path, report.to_text());
  write_file(cfg_path, cfg.to_json());

  Manifest m("train", argv);
  m.set_config(cfg.to_json());
  m.add_input("corpus", corpus_file);
  if (!o.config.empty()) m.add_input("config", o.config);
  if (!o.init.empty()) m.add_input("init", o.init);
  if (!o.model_config.empty()) m.add_input("model_config", o.model_config);
  if (!o.tokenizer.empty()) m.add_input("tokenizer", o.tokenizer);
  m.add_output("report", report_json_path);
  if (!report.checkpoint_path.empty()) m.add_output("checkpoint", report.checkpoint_path);
  m.write((fs::path(o.out) / "manifest.json").string());

  const double final_loss = report.loss.empty() ? 0.0 : report.loss.back();
  std::cout << "phase " << report.phase << " done: " << report.loss.size()
            << " steps, final loss " << final_loss;
  if (!report.checkpoint_path.empty()) std::cout << ", checkpoint " << report.checkpoint_path;
  std::cout << "\n";
}

// --------------------------------------------------------------------- eval

struct EvalOpts {
  std::string model, corpus, out, base_tokenizer;
  std::string split = "val";
  int lang = 0;
  int lang_a = 0;
  int lang_b = 1;
  int window = 32;
  int max_answer_tokens = 16;
};

void emit_report(const std::string& command, const EvalOpts& o, const std::string& text,
                 const std::string& json_text, const std::string& corpus_file,
                 const std::vector<std::string>& argv, const json& effective) {
  std::cout << text;
  if (o.out.empty()) {
    std::cout << json_text;
    return;
  }
  write_file(o.out, json_text);
  Manifest m(command, argv);
  m.set_config(effective.dump());
  m.add_input("model", o.model);
  m.add_input("corpus", corpus_file);
  if (!o.base_tokenizer.empty()) m.add_input("base_tokenizer", o.base_tokenizer);
  m.add_output("report", o.out);
  m.write(o.out + ".manifest.json");
}

void run_eval_perplexity(const EvalOpts& o, const std::vector<std::string>& argv) {
  SutraPipeline pipe = SutraPipeline::load_checkpoint(o.model);
  const std::string corpus_file = resolve_corpus_file(o.corpus, "parallel.jsonl");
  ParallelCorpus corpus = ParallelCorpus::load(corpus_file);
  std::vector<std::string> texts = corpus.texts(o.lang, parse_split(o.split));
  const double ppl = perplexity(pipe, texts, static_cast<size_t>(o.window));

  json rep;
  rep["perplexity"] = ppl;
  rep["lang"] = o.lang;
  rep["split"] = o.split;
  rep["window"] = o.window;
  rep["n_texts"] = texts.size();
  std::ostringstream text;
  text << "perplexity (lang " << o.lang << ", split " << o.split << ", window " << o.window
       << ", " << texts.size() << " texts): " << ppl << "\n";
  json eff;
  eff["lang"] = o.lang;
  eff["split"] = o.split;
  eff["window"] = o.window;
  emit_report("eval perplexity", o, text.str(), rep.dump(2) + "\n", corpus_file, argv, eff);
}

void run_eval_alignment(const EvalOpts& o, const std::vector<std::string>& argv) {
  SutraPipeline pipe = SutraPipeline::load_checkpoint(o.model);
  const std::string corpus_file = resolve_corpus_file(o.corpus, "parallel.jsonl");
  ParallelCorpus corpus = ParallelCorpus::load(corpus_file);
  AlignmentScore score =
      alignment_score(pipe, corpus, parse_split(o.split), o.lang_a, o.lang_b);
  json eff;
  eff["lang_a"] = o.lang_a;
  eff["lang_b"] = o.lang_b;
  eff["split"] = o.split;
  emit_report("eval alignment", o, score.to_text(), score.to_json(), corpus_file, argv, eff);
}

void run_eval_consistency(const EvalOpts& o, const std::vector<std::string>& argv) {
  SutraPipeline pipe = SutraPipeline::load_checkpoint(o.model);
  const std::string corpus_file = resolve_corpus_file(o.corpus, "qa.jsonl");
  std::vector<QaItem> items = qa_from_jsonl(read_file(corpus_file));
  ConsistencyReport report =
      consistency_eval(pipe, items, static_cast<size_t>(o.max_answer_tokens));
  json eff;
  eff["max_answer_tokens"] = o.max_answer_tokens;
  emit_report("eval consistency", o, report.to_text(), report.to_json(), corpus_file, argv,
              eff);
}

void run_eval_fertility(const EvalOpts& o, const std::vector<std::string>& argv) {
  SutraPipeline pipe = SutraPipeline::load_checkpoint(o.model);
  Tokenizer base = Tokenizer::from_json(read_file(o.base_tokenizer));
  const std::string corpus_file = resolve_corpus_file(o.corpus, "parallel.jsonl");
  ParallelCorpus corpus = ParallelCorpus::load(corpus_file);
  std::vector<std::pair<int, std::vector<std::string>>> by_language;
  for (int lang : languages_in(corpus)) by_language.emplace_back(lang, corpus.all_texts(lang));
  FertilityComparison cmp = fertility_comparison(base, pipe.tokenizer(), by_language);
  emit_report("eval fertility", o, cmp.to_text(), cmp.to_json(), corpus_file, argv,
              json::object());
}

// ----------------------------------------------------------- generate/params

struct GenerateOpts {
  std::string model, text;
  int source_lang = 0;
  int target_lang = 0;
  int max_len = 32;
};

void run_generate(const GenerateOpts& o) {
  SutraPipeline pipe = SutraPipeline::load_checkpoint(o.model);
  std::cout << pipe.generate(o.text, o.source_lang, o.target_lang,
                             static_cast<size_t>(o.max_len))
            << "\n";
}

struct ParamsOpts {
  std::string config, out;
  bool reference = false;
  bool as_json = false;
};

void run_params(const ParamsOpts& o, const std::vector<std::string>& argv) {
  ModelConfig mc = o.config.empty() ? (o.reference ? reference_config() : desk_config())
                                    : ModelConfig::from_json(read_file(o.config));
  mc.validate();
  const auto [total, active] = count_params(mc);

  json rep;
  rep["total_params"] = total;
  rep["active_params"] = active;
  rep["config"] = json::parse(mc.to_json());
  const std::string json_text = rep.dump(2) + "\n";

  std::ostringstream text;
  text << "d_model " << mc.d_model << ", concept layers " << mc.n_layers << ", experts "
       << mc.n_experts << " (top-" << mc.top_k << "), encoder/decoder layers " << mc.enc_layers
       << "/" << mc.dec_layers << ", vocab " << mc.vocab_size << "\n";
  text << "total parameters  : " << total << "\n";
  text << "active per token  : " << active << "\n";

  std::cout << (o.as_json ? json_text : text.str());
  if (!o.out.empty()) {
    write_file(o.out, json_text);
    Manifest m("params", argv);
    m.set_config(mc.to_json());
    if (!o.config.empty()) m.add_input("config", o.config);
    m.add_output("report", o.out);
    m.write(o.out + ".manifest.json");
  }
}

}  // namespace

int run(int argc, char** argv) {
  const std::vector<std::string> argv_copy = argv_vector(argc, argv);

  CLI::App app{"multilingual concept-core transformer toolkit"};
  app.name("sutra");
  app.require_subcommand(0, 1);

  // tokenizer ---------------------------------------------------------------
  auto* tok = app.add_subcommand("tokenizer", "train, merge, and inspect tokenizers");
  tok->require_subcommand(1);

  TokenizerTrainOpts tto;
  auto* tok_train = tok->add_subcommand("train", "train a byte-fallback BPE tokenizer");
  tok_train->add_option("--corpus", tto.corpus, "corpus directory or JSONL file")->required();
  tok_train->add_option("--vocab-size", tto.vocab_size, "target vocabulary size")->required();
  tok_train->add_option("--lang", tto.lang, "train on one language only (default: all)");
  tok_train->add_option("--out", tto.out, "output tokenizer JSON file")->required();
  tok_train->callback([&] { run_tokenizer_train(tto, argv_copy); });

  TokenizerMergeOpts tmo;
  auto* tok_merge = tok->add_subcommand("merge", "extend a base vocabulary with another");
  tok_merge->add_option("--base", tmo.base, "base tokenizer JSON file")->required();
  tok_merge->add_option("--ext", tmo.ext, "extension tokenizer JSON file")->required();
  tok_merge->add_option("--out", tmo.out, "output tokenizer JSON file")->required();
  tok_merge->callback([&] { run_tokenizer_merge(tmo, argv_copy); });

  TokenizerFertilityOpts tfo;
  auto* tok_fert = tok->add_subcommand("fertility", "tokens-per-word table per language");
  tok_fert->add_option("--model", tfo.model, "tokenizer JSON file")->required();
  tok_fert->add_option("--corpus", tfo.corpus, "corpus JSONL file or directory")->required();
  tok_fert->add_option("--out", tfo.out, "write the JSON table here instead of stdout");
  tok_fert->callback([&] { run_tokenizer_fertility(tfo, argv_copy); });

  // corpus ------------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "generate synthetic corpora");
  corpus_cmd->require_subcommand(1);

  CorpusGenerateOpts cgo;
  auto* corpus_gen =
      corpus_cmd->add_subcommand("generate", "deterministic parallel + QA corpora");
  corpus_gen->add_option("--langs", cgo.langs, "number of languages (ids 0..N-1)");
  corpus_gen->add_option("--statements", cgo.statements, "number of facts in the world");
  corpus_gen->add_option("--qa-items", cgo.qa_items, "number of QA meanings per language");
  corpus_gen->add_option("--seed", cgo.seed, "world seed");
  corpus_gen->add_option("--train-frac", cgo.train_frac, "train split fraction");
  corpus_gen->add_option("--val-frac", cgo.val_frac, "validation split fraction");
  corpus_gen->add_option("--out", cgo.out, "output directory")->required();
  corpus_gen->callback([&] { run_corpus_generate(cgo, argv_copy); });

  // train -------------------------------------------------------------------
  TrainOpts tro;
  auto* train_cmd = app.add_subcommand("train", "run one training phase");
  train_cmd->add_option("--phase", tro.phase, "1 concept LM, 2 language learning, 3 alignment");
  train_cmd->add_option("--config", tro.config, "training config JSON (flags override it)");
  train_cmd->add_option("--corpus", tro.corpus, "corpus directory or JSONL file")->required();
  train_cmd->add_option("--out", tro.out, "output directory")->required();
  train_cmd->add_option("--init", tro.init, "checkpoint to continue from");
  train_cmd->add_option("--model-config", tro.model_config, "model config JSON for a new model");
  train_cmd->add_option("--tokenizer", tro.tokenizer, "tokenizer JSON for a new model");
  train_cmd->add_option("--lang", tro.lang, "phase-1 language id");
  train_cmd->add_option("--steps", tro.steps, "override step count");
  train_cmd->add_option("--lr", tro.lr, "override learning rate");
  train_cmd->add_option("--batch-size", tro.batch_size, "override batch size");
  train_cmd->add_option("--seed", tro.seed, "override seed");
  train_cmd->callback([&] { run_train(tro, argv_copy); });

  // eval --------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluation reports");
  eval_cmd->require_subcommand(1);
  EvalOpts evo;

  auto add_common = [&evo](CLI::App* sub) {
    sub->add_option("--model", evo.model, "model checkpoint")->required();
    sub->add_option("--corpus", evo.corpus, "corpus directory or JSONL file")->required();
    sub->add_option("--out", evo.out, "write the JSON report here instead of stdout");
  };

  auto* ev_ppl = eval_cmd->add_subcommand("perplexity", "held-out language-model perplexity");
  add_common(ev_ppl);
  ev_ppl->add_option("--lang", evo.lang, "language id");
  ev_ppl->add_option("--split", evo.split, "train|val|test");
  ev_ppl->add_option("--window", evo.window, "evaluation window length");
  ev_ppl->callback([&] { run_eval_perplexity(evo, argv_copy); });

  auto* ev_align = eval_cmd->add_subcommand("alignment", "cross-language embedding alignment");
  add_common(ev_align);
  ev_align->add_option("--lang-a", evo.lang_a, "first language id");
  ev_align->add_option("--lang-b", evo.lang_b, "second language id");
  ev_align->add_option("--split", evo.split, "train|val|test");
  ev_align->callback([&] { run_eval_alignment(evo, argv_copy); });

  auto* ev_cons = eval_cmd->add_subcommand("consistency", "per-language QA accuracy and gap");
  add_common(ev_cons);
  ev_cons->add_option("--max-answer-tokens", evo.max_answer_tokens,
                      "decode budget per answer");
  ev_cons->callback([&] { run_eval_consistency(evo, argv_copy); });

  auto* ev_fert = eval_cmd->add_subcommand("fertility", "base vs checkpoint tokenizer fertility");
  add_common(ev_fert);
  ev_fert->add_option("--base", evo.base_tokenizer, "baseline tokenizer JSON")->required();
  ev_fert->callback([&] { run_eval_fertility(evo, argv_copy); });

  // generate ----------------------------------------------------------------
  GenerateOpts geo;
  auto* gen_cmd = app.add_subcommand("generate", "translate/answer with a checkpoint");
  gen_cmd->add_option("--model", geo.model, "model checkpoint")->required();
  gen_cmd->add_option("--text", geo.text, "input text")->required();
  gen_cmd->add_option("--source-lang", geo.source_lang, "source language id");
  gen_cmd->add_option("--target-lang", geo.target_lang, "target language id");
  gen_cmd->add_option("--max-len", geo.max_len, "maximum generated tokens");
  gen_cmd->callback([&] { run_generate(geo); });

  // params ------------------------------------------------------------------
  ParamsOpts pao;
  auto* params_cmd = app.add_subcommand("params", "total vs active parameter counts");
  params_cmd->add_option("--config", pao.config, "model config JSON (default: desk config)");
  params_cmd->add_flag("--reference", pao.reference, "use the full-scale reference config");
  params_cmd->add_flag("--json", pao.as_json, "print JSON instead of text");
  params_cmd->add_option("--out", pao.out, "also write the JSON report here");
  params_cmd->callback([&] { run_params(pao, argv_copy); });

  try {
    app.parse(argc, argv);
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the parse error
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sutra::cli
