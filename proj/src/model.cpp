#include "sutra/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "json.hpp"
#include "sutra/errors.hpp"
#include "sutra/ops.hpp"
#include "sutra/serde.hpp"

namespace sutra {
namespace {

using Json = nlohmann::json;

constexpr char kMagic[] = "SUTRACKPT";
constexpr size_t kMagicLen = 9;
constexpr std::uint32_t kCkptVersion = 1;
constexpr double kEmbInitStd = 0.02;

bool layer_uses_moe(const ModelConfig& cfg, int layer_idx) {
  return (layer_idx + 1) % cfg.moe_every_k_layers == 0;
}

void append_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void append_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint32_t read_u32(const std::string& s, size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}
std::uint64_t read_u64(const std::string& s, size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

void append_ln(std::vector<std::pair<std::string, Shape>>& out, const std::string& p, int d) {
  out.emplace_back(p + ".gain", Shape{d});
  out.emplace_back(p + ".bias", Shape{d});
}
void append_attn(std::vector<std::pair<std::string, Shape>>& out, const std::string& p, int d) {
  out.emplace_back(p + ".wq", Shape{d, d});
  out.emplace_back(p + ".wk", Shape{d, d});
  out.emplace_back(p + ".wv", Shape{d, d});
  out.emplace_back(p + ".wo", Shape{d, d});
}
void append_ffn(std::vector<std::pair<std::string, Shape>>& out, const std::string& p, int d,
                int f) {
  out.emplace_back(p + ".w1", Shape{d, f});
  out.emplace_back(p + ".w3", Shape{d, f});
  out.emplace_back(p + ".w2", Shape{f, d});
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model <= 0 || ffn_dim <= 0 || context_window < 1 || vocab_size < 1)
    throw ConfigError("model config: non-positive core dimension");
  if (n_layers < 0 || enc_layers < 0 || dec_layers < 0)
    throw ConfigError("model config: negative layer count");
  if (n_heads <= 0 || enc_heads <= 0 || dec_heads <= 0)
    throw ConfigError("model config: non-positive head count");
  for (int h : {n_heads, enc_heads, dec_heads}) {
    if (d_model % h != 0)
      throw ConfigError("model config: d_model " + std::to_string(d_model) +
                        " not divisible by head count " + std::to_string(h));
    if ((d_model / h) % 2 != 0)
      throw ConfigError("model config: head dim " + std::to_string(d_model / h) +
                        " must be even for rotary pairs");
  }
  if (n_experts < 1 || top_k < 1 || top_k > n_experts)
    throw ConfigError("model config: bad expert mixture (n=" + std::to_string(n_experts) +
                      ", k=" + std::to_string(top_k) + ")");
  if (moe_every_k_layers < 1) throw ConfigError("model config: moe_every_k_layers < 1");
  if (n_langs < 1) throw ConfigError("model config: need at least one language");
}

std::string ModelConfig::to_json() const {
  Json j;
  j["d_model"] = d_model;
  j["n_layers"] = n_layers;
  j["n_heads"] = n_heads;
  j["ffn_dim"] = ffn_dim;
  j["n_experts"] = n_experts;
  j["top_k"] = top_k;
  j["context_window"] = context_window;
  j["vocab_size"] = vocab_size;
  j["enc_layers"] = enc_layers;
  j["dec_layers"] = dec_layers;
  j["enc_heads"] = enc_heads;
  j["dec_heads"] = dec_heads;
  j["moe_every_k_layers"] = moe_every_k_layers;
  j["n_langs"] = n_langs;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  ModelConfig c;
  try {
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.n_experts = j.at("n_experts").get<int>();
    c.top_k = j.at("top_k").get<int>();
    c.context_window = j.at("context_window").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.enc_layers = j.at("enc_layers").get<int>();
    c.dec_layers = j.at("dec_layers").get<int>();
    c.enc_heads = j.at("enc_heads").get<int>();
    c.dec_heads = j.at("dec_heads").get<int>();
    c.moe_every_k_layers = j.at("moe_every_k_layers").get<int>();
    c.n_langs = j.at("n_langs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  // No validate() here: a file config may carry vocab_size 0 ("adopt the
  // tokenizer's vocabulary"), which only becomes checkable when a pipeline
  // is built around it.
  return c;
}

ModelConfig desk_config() {
  ModelConfig c;
  c.d_model = 64;
  c.n_layers = 2;
  c.n_heads = 4;
  c.ffn_dim = 128;
  c.n_experts = 4;
  c.top_k = 2;
  c.context_window = 128;
  c.vocab_size = 2048;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.enc_heads = 4;
  c.dec_heads = 4;
  c.moe_every_k_layers = 1;
  c.n_langs = 3;
  c.seed = 1234;
  return c;
}

ModelConfig reference_config() {
  ModelConfig c;
  c.d_model = 1024;
  c.n_layers = 32;
  c.n_heads = 32;
  c.ffn_dim = 14336;
  c.n_experts = 8;
  c.top_k = 2;
  c.context_window = 8192;
  c.vocab_size = 32000;  // representative vocabulary size
  c.enc_layers = 6;      // representative codec depth
  c.dec_layers = 6;
  c.enc_heads = 16;
  c.dec_heads = 16;
  c.moe_every_k_layers = 1;
  c.n_langs = 50;
  c.seed = 1234;
  return c;
}

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model, f = cfg.ffn_dim, V = cfg.vocab_size, L = cfg.n_langs;
  std::vector<std::pair<std::string, Shape>> out;

  out.emplace_back("encoder.emb", Shape{V, d});
  out.emplace_back("encoder.lang_emb", Shape{L, d});
  for (int i = 0; i < cfg.enc_layers; ++i) {
    const std::string p = "encoder.block" + std::to_string(i);
    append_ln(out, p + ".ln1", d);
    append_attn(out, p + ".attn", d);
    append_ln(out, p + ".ln2", d);
    append_ffn(out, p + ".ffn", d, f);
  }
  append_ln(out, "encoder.final_ln", d);

  out.emplace_back("concept.emb", Shape{V, d});
  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::string p = "concept.block" + std::to_string(i);
    append_ln(out, p + ".ln1", d);
    append_attn(out, p + ".attn", d);
    append_ln(out, p + ".ln2", d);
    if (layer_uses_moe(cfg, i)) {
      out.emplace_back(p + ".moe.wg", Shape{d, cfg.n_experts});
      for (int e = 0; e < cfg.n_experts; ++e)
        append_ffn(out, p + ".moe.expert" + std::to_string(e), d, f);
    } else {
      append_ffn(out, p + ".ffn", d, f);
    }
  }
  append_ln(out, "concept.final_ln", d);

  out.emplace_back("decoder.emb", Shape{V, d});
  out.emplace_back("decoder.lang_emb", Shape{L, d});
  for (int i = 0; i < cfg.dec_layers; ++i) {
    const std::string p = "decoder.block" + std::to_string(i);
    append_ln(out, p + ".ln1", d);
    append_attn(out, p + ".self_attn", d);
    append_ln(out, p + ".lnx", d);
    append_attn(out, p + ".cross_attn", d);
    append_ln(out, p + ".ln2", d);
    append_ffn(out, p + ".ffn", d, f);
  }
  append_ln(out, "decoder.final_ln", d);
  return out;
}

std::pair<long long, long long> count_params(const ModelConfig& cfg) {
  long long total = 0;
  for (const auto& [name, shape] : param_layout(cfg))
    total += static_cast<long long>(shape_numel(shape));
  // per token only top_k experts run; the rest of each mixture idles
  const long long per_expert = 3LL * cfg.d_model * cfg.ffn_dim;
  long long idle = 0;
  for (int i = 0; i < cfg.n_layers; ++i)
    if (layer_uses_moe(cfg, i)) idle += (cfg.n_experts - cfg.top_k) * per_expert;
  return {total, total - idle};
}

// ---------------------------------------------------------------------------
// ConceptModel

ConceptModel::ConceptModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  emb_ = Tensor::randn({cfg.vocab_size, cfg.d_model}, rng, kEmbInitStd, true);
  for (int i = 0; i < cfg.n_layers; ++i)
    blocks_.push_back(ConceptBlock::init(cfg.d_model, cfg.n_heads, cfg.ffn_dim, cfg.n_experts,
                                         cfg.top_k, layer_uses_moe(cfg, i), rng));
  final_ln_ = LayerNormModule::init(cfg.d_model);
  std::tie(cos_, sin_) = rotary_tables(cfg.context_window, cfg.d_model / cfg.n_heads);
}

Tensor ConceptModel::lm_forward(const std::vector<std::vector<int>>& ids) const {
  if (ids.empty() || ids[0].empty()) throw DataError("lm_forward: empty batch");
  const int B = static_cast<int>(ids.size());
  const int T = static_cast<int>(ids[0].size());
  if (T > cfg_.context_window)
    throw CapacityError("lm_forward: sequence length " + std::to_string(T) +
                        " exceeds context window " + std::to_string(cfg_.context_window));
  std::vector<int> flat;
  flat.reserve(static_cast<size_t>(B) * T);
  for (const auto& row : ids) {
    if (static_cast<int>(row.size()) != T)
      throw ShapeError("lm_forward: ragged batch (LM windows must be equal length)");
    for (int id : row) {
      if (id < 0 || id >= cfg_.vocab_size)
        throw IndexError("lm_forward: token id " + std::to_string(id) + " outside vocab " +
                         std::to_string(cfg_.vocab_size));
      flat.push_back(id);
    }
  }
  Tensor x = reshape(gather_rows(emb_, flat), {B, T, cfg_.d_model});
  Tensor h = transform(x);
  Tensor logits = matmul_nt(reshape(h, {B * T, cfg_.d_model}), emb_);
  return reshape(logits, {B, T, cfg_.vocab_size});
}

Tensor ConceptModel::transform(const Tensor& x, const std::vector<int>& lengths) const {
  if (x.ndim() != 3 || x.dim(2) != cfg_.d_model)
    throw ShapeError("concept transform: input " + shape_str(x.shape()) + " vs d_model " +
                     std::to_string(cfg_.d_model));
  const int T = x.dim(1);
  if (T > cfg_.context_window)
    throw CapacityError("concept transform: length " + std::to_string(T) +
                        " exceeds context window " + std::to_string(cfg_.context_window));
  if (blocks_.empty()) return x;  // degenerate config: identity
  Tensor mask = lengths.empty() ? causal_mask(T) : causal_pad_mask(T, lengths);
  Tensor h = x;
  for (const ConceptBlock& blk : blocks_) h = blk.forward(h, mask, cos_, sin_);
  return final_ln_.forward(h);
}

void ConceptModel::collect(std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back("concept.emb", emb_);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect("concept.block" + std::to_string(i), out);
  final_ln_.collect("concept.final_ln", out);
}

// ---------------------------------------------------------------------------
// LanguageEncoder

LanguageEncoder::LanguageEncoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  emb_ = Tensor::randn({cfg.vocab_size, cfg.d_model}, rng, kEmbInitStd, true);
  lang_emb_ = Tensor::randn({cfg.n_langs, cfg.d_model}, rng, kEmbInitStd, true);
  for (int i = 0; i < cfg.enc_layers; ++i)
    blocks_.push_back(EncoderBlock::init(cfg.d_model, cfg.enc_heads, cfg.ffn_dim, rng));
  final_ln_ = LayerNormModule::init(cfg.d_model);
  std::tie(cos_, sin_) = rotary_tables(cfg.context_window, cfg.d_model / cfg.enc_heads);
}

Tensor LanguageEncoder::forward(const std::vector<std::vector<int>>& seqs,
                                const std::vector<int>& langs) const {
  if (seqs.empty()) throw DataError("encoder: empty batch");
  if (seqs.size() != langs.size())
    throw ShapeError("encoder: " + std::to_string(langs.size()) + " language ids for " +
                     std::to_string(seqs.size()) + " rows");
  const int B = static_cast<int>(seqs.size());
  int T = 0;
  std::vector<int> lengths(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    if (seqs[static_cast<size_t>(b)].empty()) throw DataError("encoder: empty sequence in batch");
    lengths[static_cast<size_t>(b)] = static_cast<int>(seqs[static_cast<size_t>(b)].size());
    T = std::max(T, lengths[static_cast<size_t>(b)]);
  }
  if (T > cfg_.context_window)
    throw CapacityError("encoder: length " + std::to_string(T) + " exceeds context window " +
                        std::to_string(cfg_.context_window));
  for (int lang : langs)
    if (lang < 0 || lang >= cfg_.n_langs)
      throw ConfigError("encoder: unknown language id " + std::to_string(lang));

  std::vector<int> flat(static_cast<size_t>(B) * T, Tokenizer::kPad);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < lengths[static_cast<size_t>(b)]; ++t) {
      const int id = seqs[static_cast<size_t>(b)][static_cast<size_t>(t)];
      if (id < 0 || id >= cfg_.vocab_size)
        throw IndexError("encoder: token id " + std::to_string(id) + " outside vocab " +
                         std::to_string(cfg_.vocab_size));
      flat[static_cast<size_t>(b) * T + t] = id;
    }

  Tensor x = reshape(gather_rows(emb_, flat), {B, T, cfg_.d_model});
  x = add_per_batch_row(x, gather_rows(lang_emb_, langs));
  if (blocks_.empty()) return x;
  bool padded = false;
  for (int len : lengths) padded = padded || len < T;
  Tensor mask = padded ? key_pad_mask(T, T, lengths) : Tensor();
  Tensor h = x;
  for (const EncoderBlock& blk : blocks_) h = blk.forward(h, mask, cos_, sin_);
  return final_ln_.forward(h);
}

void LanguageEncoder::collect(std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back("encoder.emb", emb_);
  out.emplace_back("encoder.lang_emb", lang_emb_);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect("encoder.block" + std::to_string(i), out);
  final_ln_.collect("encoder.final_ln", out);
}

// ---------------------------------------------------------------------------
// LanguageDecoder

LanguageDecoder::LanguageDecoder(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  emb_ = Tensor::randn({cfg.vocab_size, cfg.d_model}, rng, kEmbInitStd, true);
  lang_emb_ = Tensor::randn({cfg.n_langs, cfg.d_model}, rng, kEmbInitStd, true);
  for (int i = 0; i < cfg.dec_layers; ++i)
    blocks_.push_back(DecoderBlock::init(cfg.d_model, cfg.dec_heads, cfg.ffn_dim, rng));
  final_ln_ = LayerNormModule::init(cfg.d_model);
  std::tie(cos_, sin_) = rotary_tables(cfg.context_window, cfg.d_model / cfg.dec_heads);
}

Tensor LanguageDecoder::forward(const std::vector<std::vector<int>>& prefixes,
                                const std::vector<int>& langs, const Tensor& concepts,
                                const std::vector<int>& src_lengths) const {
  if (prefixes.empty()) throw DataError("decoder: empty batch");
  if (!concepts.defined() || concepts.ndim() != 3 || concepts.dim(2) != cfg_.d_model)
    throw ShapeError("decoder: concepts must be (B,Tk,d_model)");
  const int B = static_cast<int>(prefixes.size());
  if (concepts.dim(0) != B || static_cast<int>(langs.size()) != B ||
      static_cast<int>(src_lengths.size()) != B)
    throw ShapeError("decoder: batch size mismatch across prefixes/langs/concepts");
  int Tq = 0;
  std::vector<int> lengths(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    if (prefixes[static_cast<size_t>(b)].empty())
      throw DataError("decoder: empty prefix (start from <bos>)");
    lengths[static_cast<size_t>(b)] = static_cast<int>(prefixes[static_cast<size_t>(b)].size());
    Tq = std::max(Tq, lengths[static_cast<size_t>(b)]);
  }
  if (Tq > cfg_.context_window)
    throw CapacityError("decoder: prefix length " + std::to_string(Tq) +
                        " exceeds context window " + std::to_string(cfg_.context_window));
  for (int lang : langs)
    if (lang < 0 || lang >= cfg_.n_langs)
      throw ConfigError("decoder: unknown language id " + std::to_string(lang));

  std::vector<int> flat(static_cast<size_t>(B) * Tq, Tokenizer::kPad);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < lengths[static_cast<size_t>(b)]; ++t) {
      const int id = prefixes[static_cast<size_t>(b)][static_cast<size_t>(t)];
      if (id < 0 || id >= cfg_.vocab_size)
        throw IndexError("decoder: token id " + std::to_string(id) + " outside vocab " +
                         std::to_string(cfg_.vocab_size));
      flat[static_cast<size_t>(b) * Tq + t] = id;
    }

  Tensor x = reshape(gather_rows(emb_, flat), {B, Tq, cfg_.d_model});
  x = add_per_batch_row(x, gather_rows(lang_emb_, langs));
  Tensor self_mask = causal_pad_mask(Tq, lengths);
  Tensor cross_mask = key_pad_mask(Tq, concepts.dim(1), src_lengths);
  Tensor h = x;
  for (const DecoderBlock& blk : blocks_)
    h = blk.forward(h, self_mask, concepts, cross_mask, cos_, sin_);
  if (!blocks_.empty()) h = final_ln_.forward(h);
  Tensor logits = matmul_nt(reshape(h, {B * Tq, cfg_.d_model}), emb_);
  return reshape(logits, {B, Tq, cfg_.vocab_size});
}

void LanguageDecoder::collect(std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back("decoder.emb", emb_);
  out.emplace_back("decoder.lang_emb", lang_emb_);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect("decoder.block" + std::to_string(i), out);
  final_ln_.collect("decoder.final_ln", out);
}

// ---------------------------------------------------------------------------
// SutraPipeline

SutraPipeline::SutraPipeline(const ModelConfig& cfg, Tokenizer tokenizer)
    : cfg_(cfg), tok_(std::move(tokenizer)) {
  if (cfg_.vocab_size == 0) cfg_.vocab_size = tok_.vocab_size();
  if (cfg_.vocab_size != tok_.vocab_size())
    throw ConfigError("pipeline: config vocab " + std::to_string(cfg_.vocab_size) +
                      " vs tokenizer vocab " + std::to_string(tok_.vocab_size()));
  cfg_.validate();
  Rng rng(cfg_.seed);
  encoder_ = LanguageEncoder(cfg_, rng);
  concept_ = ConceptModel(cfg_, rng);
  decoder_ = LanguageDecoder(cfg_, rng);

  encoder_.collect(named_cache_);
  concept_.collect(named_cache_);
  decoder_.collect(named_cache_);
  const auto layout = param_layout(cfg_);
  if (layout.size() != named_cache_.size())
    throw StateError("pipeline: parameter layout drifted from construction");
  for (size_t i = 0; i < layout.size(); ++i)
    if (layout[i].first != named_cache_[i].first ||
        layout[i].second != named_cache_[i].second.shape())
      throw StateError("pipeline: layout mismatch at " + layout[i].first);
}

Tensor SutraPipeline::encode_language(const std::vector<int>& ids, int lang) const {
  if (!initialized()) throw StateError("pipeline: not initialized");
  if (ids.empty()) throw DataError("encode_language: empty token sequence");
  Tensor h = encoder_.forward({ids}, {lang});
  return reshape(h, {static_cast<int>(ids.size()), cfg_.d_model});
}

Tensor SutraPipeline::concept_transform(const Tensor& concepts) const {
  if (!initialized()) throw StateError("pipeline: not initialized");
  if (concepts.ndim() != 2 || concepts.dim(1) != cfg_.d_model)
    throw ShapeError("concept_transform: input " + shape_str(concepts.shape()) +
                     " vs d_model " + std::to_string(cfg_.d_model));
  const int T = concepts.dim(0);
  return reshape(concept_.transform(reshape(concepts, {1, T, cfg_.d_model})),
                 {T, cfg_.d_model});
}

Tensor SutraPipeline::decode_language(const Tensor& concepts, int target_lang,
                                      const std::vector<int>& prefix_ids) const {
  if (!initialized()) throw StateError("pipeline: not initialized");
  if (!concepts.defined() || concepts.ndim() != 2 || concepts.dim(1) != cfg_.d_model)
    throw ShapeError("decode_language: concepts must be (T,d_model)");
  if (prefix_ids.empty()) throw DataError("decode_language: empty prefix (start from <bos>)");
  if (static_cast<int>(prefix_ids.size()) >= cfg_.context_window)
    throw CapacityError("decode_language: prefix length " +
                        std::to_string(prefix_ids.size()) + " must stay below context window " +
                        std::to_string(cfg_.context_window));
  const int Tk = concepts.dim(0);
  Tensor logits = decoder_.forward({prefix_ids}, {target_lang},
                                   reshape(concepts, {1, Tk, cfg_.d_model}), {Tk});
  const int Tq = static_cast<int>(prefix_ids.size());
  Tensor flat = reshape(logits, {Tq, cfg_.vocab_size});
  return reshape(gather_rows(flat, {Tq - 1}), {cfg_.vocab_size});
}

std::vector<int> SutraPipeline::generate_ids(const std::vector<int>& source_ids, int source_lang,
                                             int target_lang, int max_len) const {
  if (!initialized()) throw StateError("pipeline: not initialized");
  if (max_len < 0 || max_len > cfg_.context_window)
    throw CapacityError("generate: max_len " + std::to_string(max_len) +
                        " outside [0, context window " + std::to_string(cfg_.context_window) +
                        "]");
  NoGradGuard ng;
  std::vector<int> out;
  if (max_len == 0) return out;
  Tensor concepts = concept_transform(encode_language(source_ids, source_lang));
  std::vector<int> prefix = {Tokenizer::kBos};
  for (int step = 0; step < max_len && static_cast<int>(prefix.size()) < cfg_.context_window;
       ++step) {
    Tensor logits = decode_language(concepts, target_lang, prefix);
    int best = 0;
    for (int v = 1; v < cfg_.vocab_size; ++v)
      if (logits[static_cast<size_t>(v)] > logits[static_cast<size_t>(best)]) best = v;
    if (best == Tokenizer::kEos) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

std::string SutraPipeline::generate(const std::string& text, int source_lang, int target_lang,
                                    int max_len) const {
  const std::vector<int> ids = tok_.encode(text);
  if (ids.empty() && max_len > 0) throw DataError("generate: input produced no tokens");
  if (max_len == 0) return "";
  return tok_.decode(generate_ids(ids, source_lang, target_lang, max_len));
}

std::vector<Tensor> SutraPipeline::params() const {
  std::vector<Tensor> out;
  out.reserve(named_cache_.size());
  for (const auto& [name, t] : named_cache_) out.push_back(t);
  return out;
}

void SutraPipeline::save_checkpoint(const std::string& path) const {
  if (!initialized()) throw StateError("save_checkpoint: pipeline not initialized");
  Json header;
  header["config"] = Json::parse(cfg_.to_json());
  header["tokenizer"] = tok_.to_json();
  Json tensors = Json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : named_cache_) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  header["tensors"] = std::move(tensors);
  const std::string header_str = header.dump();

  std::string blob;
  blob.reserve(kMagicLen + 12 + header_str.size() + offset * 8 + 8);
  blob.append(kMagic, kMagicLen);
  append_u32(blob, kCkptVersion);
  append_u64(blob, header_str.size());
  blob += header_str;
  for (const auto& [name, t] : named_cache_) {
    for (size_t i = 0; i < t.numel(); ++i) {
      std::uint64_t bits;
      const double v = t[i];
      std::memcpy(&bits, &v, 8);
      append_u64(blob, bits);
    }
  }
  append_u64(blob, fnv1a(blob.data(), blob.size()));
  write_file(path, blob);
}

SutraPipeline SutraPipeline::load_checkpoint(const std::string& path) {
  const std::string blob = read_file(path);
  if (blob.size() < kMagicLen + 12 + 8) throw CheckpointError("file too small: " + path);
  if (blob.compare(0, kMagicLen, kMagic) != 0)
    throw CheckpointError("bad magic (not a checkpoint): " + path);
  const std::uint32_t version = read_u32(blob, kMagicLen);
  if (version != kCkptVersion)
    throw CheckpointError("version mismatch: expected " + std::to_string(kCkptVersion) +
                          ", found " + std::to_string(version));
  const std::uint64_t stored_sum = read_u64(blob, blob.size() - 8);
  const std::uint64_t actual_sum = fnv1a(blob.data(), blob.size() - 8);
  if (stored_sum != actual_sum) throw CheckpointError("checksum mismatch (corrupt file)");

  const std::uint64_t header_len = read_u64(blob, kMagicLen + 4);
  const size_t header_start = kMagicLen + 12;
  if (header_start + header_len + 8 > blob.size())
    throw CheckpointError("header length out of bounds");
  Json header;
  try {
    header = Json::parse(blob.substr(header_start, header_len));
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("unparseable header: ") + e.what());
  }

  ModelConfig cfg;
  Tokenizer tok;
  try {
    cfg = ModelConfig::from_json(header.at("config").dump());
    tok = Tokenizer::from_json(header.at("tokenizer").get<std::string>());
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("bad header fields: ") + e.what());
  }

  SutraPipeline pipe(cfg, std::move(tok));

  const size_t payload_start = header_start + header_len;
  const size_t payload_doubles = (blob.size() - 8 - payload_start) / 8;
  std::unordered_map<std::string, std::pair<Shape, std::uint64_t>> stored;
  try {
    for (const auto& e : header.at("tensors"))
      stored[e.at("name").get<std::string>()] = {e.at("shape").get<Shape>(),
                                                 e.at("offset").get<std::uint64_t>()};
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("bad tensor directory: ") + e.what());
  }
  if (stored.size() != pipe.named_cache_.size())
    throw CheckpointError("tensor count mismatch: expected " +
                          std::to_string(pipe.named_cache_.size()) + ", found " +
                          std::to_string(stored.size()));
  for (auto& [name, t] : pipe.named_cache_) {
    auto it = stored.find(name);
    if (it == stored.end()) throw CheckpointError("missing tensor: " + name);
    const auto& [shape, off] = it->second;
    if (shape != t.shape())
      throw CheckpointError("shape mismatch for " + name + ": expected " + shape_str(t.shape()) +
                            ", found " + shape_str(shape));
    if (off + t.numel() > payload_doubles)
      throw CheckpointError("payload out of bounds for " + name);
    for (size_t i = 0; i < t.numel(); ++i) {
      const std::uint64_t bits = read_u64(blob, payload_start + (off + i) * 8);
      double v;
      std::memcpy(&v, &bits, 8);
      t.data()[i] = v;
    }
  }
  return pipe;
}

}  // namespace sutra
