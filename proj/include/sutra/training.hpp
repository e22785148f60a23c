#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sutra/corpus.hpp"
#include "sutra/model.hpp"

namespace sutra {

// Three-phase recipe: (1) concept learning — causal LM over the pivot
// language; (2) language learning — encoder/decoder translation training with
// a concept-alignment loss while the concept core stays frozen; (3) language
// alignment — end-to-end fine-tuning on the multilingual QA task.

struct TrainConfig {
  int phase = 1;
  double lr = 1e-3;
  int steps = 0;
  int batch_size = 8;  // sequences (phase 1: LM windows; 2: pairs; 3: QA items)
  std::uint64_t seed = 0;
  double lambda_align = 1.0;
  double lambda_translate = 1.0;
  double lambda_contrast = 1.0;  // weight of the margin term inside the alignment loss
  double margin = 0.2;
  bool freeze_concept = false;
  bool freeze_encoder = false;
  bool freeze_decoder = false;
  int checkpoint_every = 0;  // extra checkpoints every N steps; 0 = final only
  std::string out_dir;       // empty = keep everything in memory
  double clip_norm = 1.0;
  double warmup_frac = 0.05;  // linear warmup, then constant
  int lm_window = 32;         // phase-1 window length

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);

  static TrainConfig phase1_defaults();
  static TrainConfig phase2_defaults();  // freezes the concept core
  static TrainConfig phase3_defaults();
};

struct TrainReport {
  int phase = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss;            // total per executed step
  std::vector<double> loss_translate;  // components (empty when not applicable)
  std::vector<double> loss_align;
  std::string checkpoint_path;  // empty if no checkpoint was written
  std::string data_fingerprint;
  double wall_seconds = 0.0;  // in the text rendering only, never in the JSON

  std::string to_json() const;  // deterministic: excludes wall time
  std::string to_text() const;
};

// (1/B)·Σ [1 − cos(a_i, b_i)]  +  λ_contrast·(1/B)·Σ max(0, m + cos(a_i, b_j*) − cos(a_i, b_i))
// where j* is the in-batch hardest negative for row i. Rows of a and b are
// mean-pooled encodings of parallel sentences. Fewer than 2 rows: the
// contrastive term is dropped (there are no negatives).
Tensor alignment_loss(const Tensor& a, const Tensor& b, double margin, double lambda_contrast);

struct TranslationExample {
  std::vector<int> source;
  int source_lang = 0;
  std::vector<int> target;  // without <bos>; trained to end in <eos>
  int target_lang = 0;
};

// Teacher-forced cross-entropy over all target tokens, averaged per token,
// through encode -> concept transform -> decode.
Tensor translation_loss(const SutraPipeline& pipe, const std::vector<TranslationExample>& batch);

// Phase 1: causal-LM training of the concept core on pivot-language text.
TrainReport train_phase1(const TrainConfig& cfg, const std::vector<std::string>& texts,
                         SutraPipeline& pipe);

// Phase 2: encoder/decoder training on a parallel corpus (train split), loss
// = λ_translate·translation + λ_align·alignment; concept core frozen by flag.
TrainReport train_phase2(const TrainConfig& cfg, const ParallelCorpus& corpus,
                         SutraPipeline& pipe);

// Phase 3: end-to-end fine-tuning on QA items (source question -> answer in
// the same language).
TrainReport train_phase3(const TrainConfig& cfg, const std::vector<QaItem>& items,
                         SutraPipeline& pipe);

}  // namespace sutra
