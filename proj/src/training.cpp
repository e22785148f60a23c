#include "sutra/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "json.hpp"
#include "sutra/errors.hpp"
#include "sutra/ops.hpp"
#include "sutra/optim.hpp"
#include "sutra/serde.hpp"

namespace sutra {
namespace {

using Json = nlohmann::json;

std::string hex_u64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<size_t>(i)] = digits[v & 0xf];
  return out;
}

std::string fingerprint(const std::string& blob) { return hex_u64(fnv1a(blob.data(), blob.size())); }

double lr_at(const TrainConfig& cfg, int step) {
  const long long warmup = std::max<long long>(1, std::llround(cfg.warmup_frac * cfg.steps));
  const double frac = static_cast<double>(step + 1) / static_cast<double>(warmup);
  return cfg.lr * std::min(1.0, frac);
}

std::vector<Tensor> params_with_prefix(const SutraPipeline& pipe, const std::string& prefix) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : pipe.named_params())
    if (name.rfind(prefix, 0) == 0) out.push_back(t);
  return out;
}

struct FreezePlan {
  std::vector<Tensor> trainable;
  std::vector<Tensor> frozen;

  // frozen tensors get requires_grad=false for the run so they accumulate
  // exactly no gradient; restore() puts them back
  void apply() {
    for (Tensor& t : frozen) t.set_requires_grad(false);
  }
  void restore() {
    for (Tensor& t : frozen) t.set_requires_grad(true);
  }
};

FreezePlan plan_freeze(const SutraPipeline& pipe, bool freeze_concept, bool freeze_encoder,
                       bool freeze_decoder) {
  FreezePlan plan;
  auto route = [&](const std::string& prefix, bool freeze) {
    auto ps = params_with_prefix(pipe, prefix);
    auto& dst = freeze ? plan.frozen : plan.trainable;
    dst.insert(dst.end(), ps.begin(), ps.end());
  };
  route("encoder.", freeze_encoder);
  route("concept.", freeze_concept);
  route("decoder.", freeze_decoder);
  return plan;
}

Tensor length_mask(const std::vector<int>& lengths, int T) {
  const int B = static_cast<int>(lengths.size());
  Tensor mask = Tensor::zeros({B, T});
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < lengths[static_cast<size_t>(b)]; ++t)
      mask.data()[static_cast<size_t>(b) * T + t] = 1.0;
  return mask;
}

// teacher-forced per-token cross-entropy given already-computed concept
// vectors; shared by translation_loss, phase 2, and phase 3
Tensor decode_ce(const SutraPipeline& pipe, const Tensor& concepts,
                 const std::vector<int>& src_lengths, const std::vector<std::vector<int>>& targets,
                 const std::vector<int>& target_langs) {
  const int B = static_cast<int>(targets.size());
  std::vector<std::vector<int>> prefixes(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    const auto& tgt = targets[static_cast<size_t>(b)];
    if (tgt.empty()) throw DataError("translation: empty target sequence");
    auto& p = prefixes[static_cast<size_t>(b)];
    p.push_back(Tokenizer::kBos);
    p.insert(p.end(), tgt.begin(), tgt.end() - 1);
  }
  Tensor logits = pipe.decoder().forward(prefixes, target_langs, concepts, src_lengths);
  const int Tq = logits.dim(1), V = logits.dim(2);

  std::vector<int> rows, flat_targets;
  for (int b = 0; b < B; ++b)
    for (size_t t = 0; t < targets[static_cast<size_t>(b)].size(); ++t) {
      rows.push_back(b * Tq + static_cast<int>(t));
      flat_targets.push_back(targets[static_cast<size_t>(b)][t]);
    }
  return cross_entropy(gather_rows(reshape(logits, {B * Tq, V}), rows), flat_targets);
}

void write_checkpoint(const TrainConfig& cfg, SutraPipeline& pipe, const std::string& stem,
                      std::string& path_out) {
  if (cfg.out_dir.empty()) return;
  std::filesystem::create_directories(cfg.out_dir);
  path_out = cfg.out_dir + "/" + stem + ".ckpt";
  pipe.save_checkpoint(path_out);
}

void require_finite_loss(double v, int phase, int step) {
  if (!std::isfinite(v))
    throw NumericError("phase " + std::to_string(phase) + " step " + std::to_string(step) +
                       " (batch " + std::to_string(step) + "): non-finite loss " +
                       std::to_string(v));
}

}  // namespace

void TrainConfig::validate() const {
  if (phase < 1 || phase > 3)
    throw ConfigError("train config: phase " + std::to_string(phase) + " not in {1,2,3}");
  if (!(lr > 0.0)) throw ConfigError("train config: learning rate must be positive");
  if (steps < 0) throw ConfigError("train config: negative step count");
  if (batch_size < 1) throw ConfigError("train config: batch size must be >= 1");
  if (lambda_align < 0.0 || lambda_translate < 0.0 || lambda_contrast < 0.0)
    throw ConfigError("train config: loss weights must be >= 0");
  if (margin < 0.0) throw ConfigError("train config: margin must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train config: negative checkpoint cadence");
  if (!(clip_norm > 0.0)) throw ConfigError("train config: clip norm must be positive");
  if (warmup_frac < 0.0 || warmup_frac > 1.0)
    throw ConfigError("train config: warmup fraction outside [0,1]");
  if (lm_window < 2) throw ConfigError("train config: LM window must be >= 2");
}

std::string TrainConfig::to_json() const {
  Json j;
  j["phase"] = phase;
  j["lr"] = lr;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["lambda_align"] = lambda_align;
  j["lambda_translate"] = lambda_translate;
  j["lambda_contrast"] = lambda_contrast;
  j["margin"] = margin;
  j["freeze_concept"] = freeze_concept;
  j["freeze_encoder"] = freeze_encoder;
  j["freeze_decoder"] = freeze_decoder;
  j["checkpoint_every"] = checkpoint_every;
  j["out_dir"] = out_dir;
  j["clip_norm"] = clip_norm;
  j["warmup_frac"] = warmup_frac;
  j["lm_window"] = lm_window;
  return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
  TrainConfig c;
  try {
    c.phase = j.at("phase").get<int>();
    c.lr = j.at("lr").get<double>();
    c.steps = j.at("steps").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.lambda_align = j.value("lambda_align", c.lambda_align);
    c.lambda_translate = j.value("lambda_translate", c.lambda_translate);
    c.lambda_contrast = j.value("lambda_contrast", c.lambda_contrast);
    c.margin = j.value("margin", c.margin);
    c.freeze_concept = j.value("freeze_concept", c.freeze_concept);
    c.freeze_encoder = j.value("freeze_encoder", c.freeze_encoder);
    c.freeze_decoder = j.value("freeze_decoder", c.freeze_decoder);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
    c.lm_window = j.value("lm_window", c.lm_window);
  } catch (const Json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::phase1_defaults() {
  TrainConfig c;
  c.phase = 1;
  c.lr = 3e-3;
  c.steps = 500;
  c.batch_size = 8;
  return c;
}

TrainConfig TrainConfig::phase2_defaults() {
  TrainConfig c;
  c.phase = 2;
  c.lr = 3e-3;
  c.steps = 800;
  c.batch_size = 8;
  c.freeze_concept = true;  // the concept core stays put while codecs learn
  return c;
}

TrainConfig TrainConfig::phase3_defaults() {
  TrainConfig c;
  c.phase = 3;
  c.lr = 1e-3;
  c.steps = 800;
  c.batch_size = 8;
  return c;
}

std::string TrainReport::to_json() const {
  Json j;
  j["phase"] = phase;
  j["seed"] = seed;
  j["steps"] = loss.size();
  j["loss"] = loss;
  j["loss_translate"] = loss_translate;
  j["loss_align"] = loss_align;
  j["final_loss"] = loss.empty() ? 0.0 : loss.back();
  j["checkpoint"] = checkpoint_path;
  j["data_fingerprint"] = data_fingerprint;
  return j.dump(2) + "\n";
}

std::string TrainReport::to_text() const {
  std::string out = "phase " + std::to_string(phase) + "  seed " + std::to_string(seed) +
                    "  steps " + std::to_string(loss.size()) + "\n";
  out += "data fingerprint: " + data_fingerprint + "\n";
  const size_t stride = std::max<size_t>(1, loss.size() / 20);
  char line[160];
  for (size_t s = 0; s < loss.size(); s += stride) {
    if (!loss_translate.empty() && !loss_align.empty())
      std::snprintf(line, sizeof line, "step %6zu  loss %.6f  translate %.6f  align %.6f\n", s,
                    loss[s], loss_translate[s], loss_align[s]);
    else
      std::snprintf(line, sizeof line, "step %6zu  loss %.6f\n", s, loss[s]);
    out += line;
  }
  if (!loss.empty()) {
    std::snprintf(line, sizeof line, "final loss %.6f\n", loss.back());
    out += line;
  }
  std::snprintf(line, sizeof line, "wall seconds %.2f\n", wall_seconds);
  out += line;
  if (!checkpoint_path.empty()) out += "checkpoint: " + checkpoint_path + "\n";
  return out;
}

Tensor alignment_loss(const Tensor& a, const Tensor& b, double margin, double lambda_contrast) {
  if (!a.defined() || !b.defined() || a.ndim() != 2 || b.ndim() != 2 || a.shape() != b.shape())
    throw ShapeError("alignment loss: need two equal (B,d) batches");
  if (margin < 0.0 || lambda_contrast < 0.0)
    throw ConfigError("alignment loss: margin and weight must be >= 0");
  const int B = a.dim(0);
  if (B < 1) throw ShapeError("alignment loss: empty batch");

  Tensor ones = Tensor::full({B}, 1.0);
  Tensor ahat = scale_rows(a, div(ones, sqrt_elem(sum_lastdim(mul(a, a)))));
  Tensor bhat = scale_rows(b, div(ones, sqrt_elem(sum_lastdim(mul(b, b)))));
  Tensor cosmat = matmul_nt(ahat, bhat);  // (B,B): cos(a_i, b_j)
  check_finite(cosmat, "alignment loss cosines (zero-norm row?)");

  Tensor flat = reshape(cosmat, {B * B, 1});
  std::vector<int> diag_idx(static_cast<size_t>(B));
  for (int i = 0; i < B; ++i) diag_idx[static_cast<size_t>(i)] = i * B + i;
  Tensor pos = gather_rows(flat, diag_idx);  // (B,1)
  Tensor cos_term = add_scalar(scale(mean_all(pos), -1.0), 1.0);

  if (B < 2 || lambda_contrast == 0.0) return cos_term;  // no in-batch negatives

  // hardest negative per row, chosen on forward values (selection is
  // discrete; gradients flow through the selected entries only)
  std::vector<int> neg_idx(static_cast<size_t>(B));
  for (int i = 0; i < B; ++i) {
    int best = -1;
    double best_v = 0.0;
    for (int j = 0; j < B; ++j) {
      if (j == i) continue;
      const double v = cosmat[static_cast<size_t>(i) * B + j];
      if (best < 0 || v > best_v) {
        best = j;
        best_v = v;
      }
    }
    neg_idx[static_cast<size_t>(i)] = i * B + best;
  }
  Tensor neg = gather_rows(flat, neg_idx);
  Tensor hinge = mean_all(relu(add_scalar(sub(neg, pos), margin)));
  return add(cos_term, scale(hinge, lambda_contrast));
}

Tensor translation_loss(const SutraPipeline& pipe, const std::vector<TranslationExample>& batch) {
  if (!pipe.initialized()) throw StateError("translation loss: pipeline not initialized");
  if (batch.empty()) throw DataError("translation loss: empty batch");

  std::vector<std::vector<int>> sources, targets;
  std::vector<int> src_langs, tgt_langs, src_lengths;
  for (const TranslationExample& ex : batch) {
    sources.push_back(ex.source);
    targets.push_back(ex.target);
    src_langs.push_back(ex.source_lang);
    tgt_langs.push_back(ex.target_lang);
    src_lengths.push_back(static_cast<int>(ex.source.size()));
  }
  Tensor enc = pipe.encoder().forward(sources, src_langs);
  Tensor concepts = pipe.concept_model().transform(enc, src_lengths);
  return decode_ce(pipe, concepts, src_lengths, targets, tgt_langs);
}

TrainReport train_phase1(const TrainConfig& cfg, const std::vector<std::string>& texts,
                         SutraPipeline& pipe) {
  cfg.validate();
  if (cfg.phase != 1) throw ConfigError("train_phase1: config says phase " + std::to_string(cfg.phase));
  if (!pipe.initialized()) throw StateError("phase 1: pipeline not initialized");
  if (texts.empty()) throw DataError("phase 1: empty corpus");
  const auto start = std::chrono::steady_clock::now();

  std::string joined;
  std::vector<int> stream;
  for (const std::string& text : texts) {
    joined += text;
    joined += '\n';
    const std::vector<int> ids = pipe.tokenizer().encode(text);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(Tokenizer::kEos);
  }
  const int W = cfg.lm_window;
  const int n_windows = static_cast<int>(stream.size() / static_cast<size_t>(W + 1));
  if (n_windows < 1)
    throw DataError("phase 1: corpus shorter than one window of " + std::to_string(W + 1) +
                    " tokens");

  TrainReport report;
  report.phase = 1;
  report.seed = cfg.seed;
  report.data_fingerprint = fingerprint(joined);

  std::vector<Tensor> params = params_with_prefix(pipe, "concept.");
  Adam opt(params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng(cfg.seed);
  std::vector<int> order(static_cast<size_t>(n_windows));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  size_t cursor = 0;

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<std::vector<int>> inputs, batch_targets;
    for (int k = 0; k < cfg.batch_size; ++k) {
      if (cursor >= order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const size_t at = static_cast<size_t>(order[cursor++]) * static_cast<size_t>(W + 1);
      inputs.emplace_back(stream.begin() + at, stream.begin() + at + W);
      batch_targets.emplace_back(stream.begin() + at + 1, stream.begin() + at + W + 1);
    }
    Tensor logits = pipe.concept_model().lm_forward(inputs);
    const int B = logits.dim(0), T = logits.dim(1), V = logits.dim(2);
    std::vector<int> flat_targets;
    flat_targets.reserve(static_cast<size_t>(B) * T);
    for (const auto& row : batch_targets) flat_targets.insert(flat_targets.end(), row.begin(), row.end());
    Tensor loss = cross_entropy(reshape(logits, {B * T, V}), flat_targets);
    const double v = loss.value();
    require_finite_loss(v, 1, step);

    opt.zero_grad();
    backward(loss);
    clip_grad_norm(params, cfg.clip_norm);
    opt.set_lr(lr_at(cfg, step));
    opt.step();
    report.loss.push_back(v);

    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      std::string ignored;
      write_checkpoint(cfg, pipe, "phase1_step" + std::to_string(step + 1), ignored);
    }
  }
  write_checkpoint(cfg, pipe, "phase1", report.checkpoint_path);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train_phase2(const TrainConfig& cfg, const ParallelCorpus& corpus,
                         SutraPipeline& pipe) {
  cfg.validate();
  if (cfg.phase != 2) throw ConfigError("train_phase2: config says phase " + std::to_string(cfg.phase));
  if (!pipe.initialized()) throw StateError("phase 2: pipeline not initialized");
  if (corpus.items.empty()) throw DataError("phase 2: empty corpus");
  const auto start = std::chrono::steady_clock::now();

  std::vector<int> langs;
  for (const auto& [lang, text] : corpus.items[0].texts) langs.push_back(lang);
  if (langs.size() < 2)
    throw ConfigError("phase 2: parallel corpus has " + std::to_string(langs.size()) +
                      " language(s); need at least 2");
  const std::vector<std::size_t> train_items = corpus.indices(Split::kTrain);
  if (train_items.empty()) throw DataError("phase 2: empty training split");

  TrainReport report;
  report.phase = 2;
  report.seed = cfg.seed;
  report.data_fingerprint = fingerprint(corpus.to_jsonl());

  FreezePlan plan = plan_freeze(pipe, cfg.freeze_concept, cfg.freeze_encoder, cfg.freeze_decoder);
  if (plan.trainable.empty()) throw ConfigError("phase 2: every submodule is frozen");
  plan.apply();
  // Shorter second-moment memory than the phase-1 default: the contrastive
  // term's gradients are small while pairs and negatives are still entangled,
  // and a long variance memory keeps the step size pinned to the much larger
  // early gradients. A faster-decaying estimate lets the optimizer follow the
  // separation signal as soon as it appears.
  Adam opt(plan.trainable, AdamConfig{cfg.lr, 0.9, 0.99, 1e-8});
  Rng rng(cfg.seed);
  const Tokenizer& tok = pipe.tokenizer();
  const int L = static_cast<int>(langs.size());

  for (int step = 0; step < cfg.steps; ++step) {
    // One language pair per step: with a single target language in the batch,
    // the hardest in-batch negative is a same-language sentence about a
    // different fact, which is the comparison the contrastive term needs.
    const int ia = rng.next_int(0, L);
    const int ib = (ia + 1 + rng.next_int(0, L - 1)) % L;
    const int la = langs[static_cast<size_t>(ia)], lb = langs[static_cast<size_t>(ib)];
    std::vector<std::vector<int>> srcs, tgt_sentences, targets;
    std::vector<int> src_langs, tgt_langs, src_lengths, tgt_lengths;
    for (int k = 0; k < cfg.batch_size; ++k) {
      const ParallelItem& item =
          corpus.items[train_items[static_cast<size_t>(rng.next_below(train_items.size()))]];

      std::vector<int> src = tok.encode(item.texts.at(la));
      std::vector<int> tgt_sentence = tok.encode(item.texts.at(lb));
      std::vector<int> tgt = tgt_sentence;
      tgt.push_back(Tokenizer::kEos);

      src_lengths.push_back(static_cast<int>(src.size()));
      tgt_lengths.push_back(static_cast<int>(tgt_sentence.size()));
      srcs.push_back(std::move(src));
      tgt_sentences.push_back(std::move(tgt_sentence));
      targets.push_back(std::move(tgt));
      src_langs.push_back(la);
      tgt_langs.push_back(lb);
    }

    // one encoder pass per side feeds both loss components
    Tensor enc_src = pipe.encoder().forward(srcs, src_langs);
    Tensor enc_tgt = pipe.encoder().forward(tgt_sentences, tgt_langs);
    Tensor pooled_src = masked_mean_axis1(enc_src, length_mask(src_lengths, enc_src.dim(1)));
    Tensor pooled_tgt = masked_mean_axis1(enc_tgt, length_mask(tgt_lengths, enc_tgt.dim(1)));
    Tensor align = alignment_loss(pooled_src, pooled_tgt, cfg.margin, cfg.lambda_contrast);

    Tensor concepts = pipe.concept_model().transform(enc_src, src_lengths);
    Tensor translate = decode_ce(pipe, concepts, src_lengths, targets, tgt_langs);

    Tensor total = add(scale(translate, cfg.lambda_translate), scale(align, cfg.lambda_align));
    const double v = total.value();
    require_finite_loss(v, 2, step);

    opt.zero_grad();
    backward(total);
    clip_grad_norm(plan.trainable, cfg.clip_norm);
    opt.set_lr(lr_at(cfg, step));
    opt.step();
    report.loss.push_back(v);
    report.loss_translate.push_back(translate.value());
    report.loss_align.push_back(align.value());

    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      std::string ignored;
      write_checkpoint(cfg, pipe, "phase2_step" + std::to_string(step + 1), ignored);
    }
  }
  plan.restore();
  write_checkpoint(cfg, pipe, "phase2", report.checkpoint_path);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train_phase3(const TrainConfig& cfg, const std::vector<QaItem>& items,
                         SutraPipeline& pipe) {
  cfg.validate();
  if (cfg.phase != 3) throw ConfigError("train_phase3: config says phase " + std::to_string(cfg.phase));
  if (!pipe.initialized())
    throw StateError("phase 3: pipeline not initialized (run phases 1 and 2 first)");
  if (items.empty()) throw DataError("phase 3: empty task corpus");
  const auto start = std::chrono::steady_clock::now();

  TrainReport report;
  report.phase = 3;
  report.seed = cfg.seed;
  report.data_fingerprint = fingerprint(qa_to_jsonl(items));

  FreezePlan plan = plan_freeze(pipe, cfg.freeze_concept, cfg.freeze_encoder, cfg.freeze_decoder);
  const bool all_frozen = plan.trainable.empty();
  plan.apply();
  Adam opt(all_frozen ? std::vector<Tensor>{} : plan.trainable,
           AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng(cfg.seed);
  const Tokenizer& tok = pipe.tokenizer();

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<std::vector<int>> srcs, targets;
    std::vector<int> src_langs, src_lengths;
    for (int k = 0; k < cfg.batch_size; ++k) {
      const QaItem& item = items[static_cast<size_t>(rng.next_below(items.size()))];
      std::vector<int> src = tok.encode(item.question);
      std::vector<int> tgt = tok.encode(item.options[static_cast<size_t>(item.answer)]);
      tgt.push_back(Tokenizer::kEos);
      src_lengths.push_back(static_cast<int>(src.size()));
      srcs.push_back(std::move(src));
      targets.push_back(std::move(tgt));
      src_langs.push_back(item.lang);
    }

    double v;
    if (all_frozen) {
      NoGradGuard ng;  // nothing can learn; just record the loss trajectory
      Tensor enc = pipe.encoder().forward(srcs, src_langs);
      Tensor concepts = pipe.concept_model().transform(enc, src_lengths);
      v = decode_ce(pipe, concepts, src_lengths, targets, src_langs).value();
      require_finite_loss(v, 3, step);
    } else {
      Tensor enc = pipe.encoder().forward(srcs, src_langs);
      Tensor concepts = pipe.concept_model().transform(enc, src_lengths);
      Tensor loss = decode_ce(pipe, concepts, src_lengths, targets, src_langs);
      v = loss.value();
      require_finite_loss(v, 3, step);
      opt.zero_grad();
      backward(loss);
      clip_grad_norm(plan.trainable, cfg.clip_norm);
      opt.set_lr(lr_at(cfg, step));
      opt.step();
    }
    report.loss.push_back(v);
    report.loss_translate.push_back(v);

    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      std::string ignored;
      write_checkpoint(cfg, pipe, "phase3_step" + std::to_string(step + 1), ignored);
    }
  }
  plan.restore();
  write_checkpoint(cfg, pipe, "phase3", report.checkpoint_path);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace sutra
