#include "sutra/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sutra/errors.hpp"
#include "sutra/serde.hpp"

namespace sutra {
namespace {

using Json = nlohmann::json;

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Split into maximal runs of whitespace / non-whitespace bytes. Merges never
// cross run boundaries, and concatenating runs reconstructs the text exactly.
std::vector<std::string> pretokenize(const std::string& text) {
  std::vector<std::string> runs;
  size_t i = 0;
  while (i < text.size()) {
    const bool ws = is_space_byte(static_cast<unsigned char>(text[i]));
    size_t j = i + 1;
    while (j < text.size() && is_space_byte(static_cast<unsigned char>(text[j])) == ws) ++j;
    runs.push_back(text.substr(i, j - i));
    i = j;
  }
  return runs;
}

std::vector<std::string> to_byte_symbols(const std::string& run) {
  std::vector<std::string> syms;
  syms.reserve(run.size());
  for (char c : run) syms.emplace_back(1, c);
  return syms;
}

// Merge every non-overlapping adjacent (left, right) occurrence, scanning
// left to right.
void apply_merge(std::vector<std::string>& syms, const std::string& left,
                 const std::string& right) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      out.push_back(left + right);
      i += 2;
    } else {
      out.push_back(std::move(syms[i]));
      ++i;
    }
  }
  syms = std::move(out);
}

const std::vector<std::string>& special_names() {
  static const std::vector<std::string> names = {"<pad>", "<bos>", "<eos>", "<unk>"};
  return names;
}

}  // namespace

void Tokenizer::rebuild_index() {
  piece_rank_.clear();
  for (size_t r = 0; r < pieces_.size(); ++r) {
    if (!piece_rank_.emplace(pieces_[r], static_cast<int>(r)).second)
      throw DataError("tokenizer: duplicate piece at rank " + std::to_string(r));
  }
}

Tokenizer Tokenizer::train(const std::vector<std::string>& corpus, int target_vocab_size) {
  if (corpus.empty()) throw DataError("tokenizer train: empty corpus");
  if (target_vocab_size <= kByteAlphabet)
    throw ConfigError("tokenizer train: target vocab " + std::to_string(target_vocab_size) +
                      " not above byte alphabet " + std::to_string(kByteAlphabet));
  const int max_merges = target_vocab_size - kByteAlphabet;

  // unique pretokenized runs with multiplicities
  std::map<std::string, long long> run_counts;
  for (const std::string& doc : corpus)
    for (std::string& run : pretokenize(doc)) run_counts[std::move(run)] += 1;

  std::vector<std::vector<std::string>> words;
  std::vector<long long> counts;
  for (const auto& [run, n] : run_counts) {
    words.push_back(to_byte_symbols(run));
    counts.push_back(n);
  }

  Tokenizer model;
  for (int m = 0; m < max_merges; ++m) {
    std::map<std::pair<std::string, std::string>, long long> stats;
    for (size_t w = 0; w < words.size(); ++w)
      for (size_t i = 0; i + 1 < words[w].size(); ++i)
        stats[{words[w][i], words[w][i + 1]}] += counts[w];

    long long best = 1;  // require a pair that repeats
    const std::pair<std::string, std::string>* best_pair = nullptr;
    for (const auto& [pair, n] : stats) {
      if (n > best) {  // map iteration is sorted, so first max is the
        best = n;      // lexicographically smallest pair at that count
        best_pair = &pair;
      }
    }
    if (!best_pair) break;

    model.pieces_.push_back(best_pair->first + best_pair->second);
    for (auto& w : words) apply_merge(w, best_pair->first, best_pair->second);
  }
  model.rebuild_index();
  return model;
}

Tokenizer Tokenizer::merge_vocabs(const Tokenizer& base, const Tokenizer& extension) {
  // byte alphabet and specials are fixed by construction in this format, but a
  // file-level mismatch is caught at load time; nothing to reconcile here.
  Tokenizer merged = base;
  for (const std::string& p : extension.pieces_)
    if (!merged.piece_rank_.count(p)) {
      merged.piece_rank_.emplace(p, static_cast<int>(merged.pieces_.size()));
      merged.pieces_.push_back(p);
    }
  return merged;
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& run : pretokenize(text)) {
    std::vector<std::string> syms = to_byte_symbols(run);
    // repeatedly apply the lowest-rank merge that is still possible
    while (syms.size() > 1) {
      int best_rank = std::numeric_limits<int>::max();
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        auto it = piece_rank_.find(syms[i] + syms[i + 1]);
        if (it != piece_rank_.end() && it->second < best_rank) best_rank = it->second;
      }
      if (best_rank == std::numeric_limits<int>::max()) break;
      const std::string& piece = pieces_[static_cast<size_t>(best_rank)];
      // split the winning piece back into the (left, right) that formed it:
      // scan for the adjacent pair concatenating to it
      bool merged_any = false;
      std::vector<std::string> out;
      out.reserve(syms.size());
      size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i].size() + syms[i + 1].size() == piece.size() &&
            syms[i] + syms[i + 1] == piece) {
          out.push_back(piece);
          i += 2;
          merged_any = true;
        } else {
          out.push_back(std::move(syms[i]));
          ++i;
        }
      }
      syms = std::move(out);
      if (!merged_any) break;  // defensive; cannot happen
    }
    for (const std::string& s : syms) {
      if (s.size() == 1) {
        ids.push_back(kByteOffset + static_cast<unsigned char>(s[0]));
      } else {
        auto it = piece_rank_.find(s);
        if (it == piece_rank_.end()) throw StateError("tokenizer encode: unindexed piece");
        ids.push_back(kMergeOffset + it->second);
      }
    }
  }
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size())
      throw IndexError("tokenizer decode: id " + std::to_string(id) + " outside [0," +
                       std::to_string(vocab_size()) + ")");
    if (id < kByteOffset) continue;  // specials carry no text
    if (id < kMergeOffset)
      out.push_back(static_cast<char>(id - kByteOffset));
    else
      out += pieces_[static_cast<size_t>(id - kMergeOffset)];
  }
  return out;
}

std::string Tokenizer::piece_of(int id) const {
  if (id < 0 || id >= vocab_size())
    throw IndexError("tokenizer piece_of: id " + std::to_string(id) + " outside [0," +
                     std::to_string(vocab_size()) + ")");
  if (id < kByteOffset) return special_names()[static_cast<size_t>(id)];
  if (id < kMergeOffset) return std::string(1, static_cast<char>(id - kByteOffset));
  return pieces_[static_cast<size_t>(id - kMergeOffset)];
}

std::string Tokenizer::to_json() const {
  Json j;
  j["algorithm"] = "bpe";
  j["byte_fallback"] = true;
  j["piece_encoding"] = "hex";
  j["special_tokens"] = special_names();
  j["version"] = 1;
  Json arr = Json::array();
  for (size_t r = 0; r < pieces_.size(); ++r)
    arr.push_back({{"piece", hex_encode(pieces_[r])}, {"rank", static_cast<int>(r)}});
  j["pieces"] = std::move(arr);
  return j.dump(2) + "\n";
}

Tokenizer Tokenizer::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError(std::string("tokenizer file: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw ConfigError("tokenizer file: unsupported version");
    if (j.at("algorithm").get<std::string>() != "bpe")
      throw ConfigError("tokenizer file: unsupported algorithm");
    if (!j.at("byte_fallback").get<bool>())
      throw ConfigError("tokenizer file: byte_fallback must be on");
    if (j.at("special_tokens").get<std::vector<std::string>>() != special_names())
      throw ConfigError("tokenizer file: special token set differs");
    Tokenizer model;
    int expect = 0;
    for (const auto& e : j.at("pieces")) {
      if (e.at("rank").get<int>() != expect)
        throw DataError("tokenizer file: ranks not contiguous at " + std::to_string(expect));
      model.pieces_.push_back(hex_decode(e.at("piece").get<std::string>()));
      ++expect;
    }
    model.rebuild_index();
    return model;
  } catch (const Json::exception& e) {
    throw DataError(std::string("tokenizer file: ") + e.what());
  }
}

void Tokenizer::save(const std::string& path) const { write_file(path, to_json()); }

Tokenizer Tokenizer::load(const std::string& path) { return from_json(read_file(path)); }

FertilityReport fertility(const Tokenizer& model,
                          const std::vector<std::pair<int, std::vector<std::string>>>& by_language) {
  if (by_language.empty()) throw DataError("fertility: no languages given");
  FertilityReport rep;
  for (const auto& [lang, texts] : by_language) {
    FertilityRow row;
    row.language = lang;
    for (const std::string& text : texts)
      for (const std::string& run : pretokenize(text)) {
        if (is_space_byte(static_cast<unsigned char>(run[0]))) continue;
        row.words += 1;
        row.tokens += static_cast<long long>(model.encode(run).size());
      }
    if (row.words == 0) {
      row.flagged = true;
      row.fertility = 0.0;
    } else {
      row.fertility = static_cast<double>(row.tokens) / static_cast<double>(row.words);
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::string FertilityReport::to_json() const {
  Json arr = Json::array();
  for (const FertilityRow& r : rows)
    arr.push_back({{"language", r.language},
                   {"tokens", r.tokens},
                   {"words", r.words},
                   {"fertility", r.fertility},
                   {"flagged", r.flagged}});
  Json j;
  j["rows"] = std::move(arr);
  return j.dump(2) + "\n";
}

std::string FertilityReport::to_text() const {
  std::ostringstream os;
  os << "language  tokens  words  fertility\n";
  for (const FertilityRow& r : rows) {
    os << r.language << "  " << r.tokens << "  " << r.words << "  ";
    if (r.flagged)
      os << "(no words)";
    else
      os << r.fertility;
    os << "\n";
  }
  return os.str();
}

}  // namespace sutra
