#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sutra/layers.hpp"
#include "sutra/tokenizer.hpp"

namespace sutra {

struct ModelConfig {
  int d_model = 64;
  int n_layers = 2;       // concept stack depth
  int n_heads = 4;
  int ffn_dim = 128;
  int n_experts = 4;
  int top_k = 2;
  int context_window = 128;
  int vocab_size = 0;     // normally taken from the tokenizer
  int enc_layers = 2;
  int dec_layers = 2;
  int enc_heads = 4;
  int dec_heads = 4;
  int moe_every_k_layers = 1;  // layer i mixes experts iff (i+1) % k == 0
  int n_langs = 3;
  std::uint64_t seed = 1234;

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

// CPU-trainable defaults used across tests and the CLI.
ModelConfig desk_config();
// Reference-scale configuration; used for parameter accounting only.
ModelConfig reference_config();

// Every named parameter tensor the pipeline owns, in construction order.
std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& cfg);
// (total, active-per-token): active drops the unrouted experts per mixture.
std::pair<long long, long long> count_params(const ModelConfig& cfg);

// Causal transformer over concept vectors; doubles as a plain causal LM via
// its own (tied in/out) token embedding.
class ConceptModel {
 public:
  ConceptModel() = default;
  ConceptModel(const ModelConfig& cfg, Rng& rng);

  // ids: B rows of equal length T (LM batches are fixed windows)
  Tensor lm_forward(const std::vector<std::vector<int>>& ids) const;
  // (B,T,d) -> (B,T,d); zero-layer config returns the input untouched
  Tensor transform(const Tensor& x, const std::vector<int>& lengths = {}) const;

  const Tensor& embedding() const { return emb_; }
  void collect(std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  ModelConfig cfg_;
  Tensor emb_;  // (V, d); also the tied output projection
  std::vector<ConceptBlock> blocks_;
  LayerNormModule final_ln_;
  Tensor cos_, sin_;
  friend class SutraPipeline;
};

// Bidirectional encoder from token ids (plus language id) to concept vectors.
class LanguageEncoder {
 public:
  LanguageEncoder() = default;
  LanguageEncoder(const ModelConfig& cfg, Rng& rng);

  // variable-length rows; output (B, Tmax, d) with pad positions masked from
  // attention (callers pool with the matching mask)
  Tensor forward(const std::vector<std::vector<int>>& seqs, const std::vector<int>& langs) const;

  void collect(std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  ModelConfig cfg_;
  Tensor emb_;       // (V, d)
  Tensor lang_emb_;  // (n_langs, d)
  std::vector<EncoderBlock> blocks_;
  LayerNormModule final_ln_;
  Tensor cos_, sin_;
  friend class SutraPipeline;
};

// Causal decoder with cross-attention into concept vectors; logits tied to
// its own embedding table.
class LanguageDecoder {
 public:
  LanguageDecoder() = default;
  LanguageDecoder(const ModelConfig& cfg, Rng& rng);

  // prefix rows (B variable-length), concepts (B,Tk,d); returns (B,Tq,V)
  Tensor forward(const std::vector<std::vector<int>>& prefixes, const std::vector<int>& langs,
                 const Tensor& concepts, const std::vector<int>& src_lengths) const;

  void collect(std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  ModelConfig cfg_;
  Tensor emb_;
  Tensor lang_emb_;
  std::vector<DecoderBlock> blocks_;
  LayerNormModule final_ln_;
  Tensor cos_, sin_;
  friend class SutraPipeline;
};

// Encoder -> concept stack -> decoder, plus checkpointing.
class SutraPipeline {
 public:
  SutraPipeline() = default;
  SutraPipeline(const ModelConfig& cfg, Tokenizer tokenizer);

  bool initialized() const { return !named_cache_.empty(); }
  const ModelConfig& config() const { return cfg_; }
  const Tokenizer& tokenizer() const { return tok_; }
  LanguageEncoder& encoder() { return encoder_; }
  ConceptModel& concept_model() { return concept_; }
  LanguageDecoder& decoder() { return decoder_; }
  const LanguageEncoder& encoder() const { return encoder_; }
  const ConceptModel& concept_model() const { return concept_; }
  const LanguageDecoder& decoder() const { return decoder_; }

  // single-sequence conveniences used by generate and the eval module
  Tensor encode_language(const std::vector<int>& ids, int lang) const;  // (T,d)
  Tensor concept_transform(const Tensor& concepts) const;               // (T,d)
  Tensor decode_language(const Tensor& concepts, int target_lang,
                         const std::vector<int>& prefix_ids) const;     // (V)

  std::string generate(const std::string& text, int source_lang, int target_lang,
                       int max_len) const;
  // token-id level greedy decode (QA eval uses this directly)
  std::vector<int> generate_ids(const std::vector<int>& source_ids, int source_lang,
                                int target_lang, int max_len) const;

  const std::vector<std::pair<std::string, Tensor>>& named_params() const { return named_cache_; }
  std::vector<Tensor> params() const;

  void save_checkpoint(const std::string& path) const;
  static SutraPipeline load_checkpoint(const std::string& path);

 private:
  ModelConfig cfg_;
  Tokenizer tok_;
  LanguageEncoder encoder_;
  ConceptModel concept_;
  LanguageDecoder decoder_;
  std::vector<std::pair<std::string, Tensor>> named_cache_;
};

}  // namespace sutra
