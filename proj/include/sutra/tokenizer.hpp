#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sutra {

// Byte-level BPE with byte fallback. Token id layout:
//   0..3      specials (pad, bos, eos, unk)
//   4..259    raw bytes
//   260..     learned merges, in training rank order
// target_vocab_size at train time counts bytes + merges (specials ride on
// top), so target 260 leaves room for four merges.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kByteOffset = 4;
  static constexpr int kMergeOffset = 260;
  static constexpr int kByteAlphabet = 256;

  Tokenizer() = default;

  // Greedy most-frequent-pair training; ties broken lexicographically by the
  // (left, right) piece pair. Stops early when no adjacent pair repeats.
  static Tokenizer train(const std::vector<std::string>& corpus, int target_vocab_size);

  // Base-priority union: base pieces keep their ranks, extension pieces not
  // already present are appended in extension order.
  static Tokenizer merge_vocabs(const Tokenizer& base, const Tokenizer& extension);

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  int vocab_size() const { return kMergeOffset + static_cast<int>(pieces_.size()); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  std::string piece_of(int id) const;  // printable owner of an id (specials as <pad> etc.)

  std::string to_json() const;  // byte-exact: sorted keys, hex-encoded pieces
  static Tokenizer from_json(const std::string& text);
  void save(const std::string& path) const;
  static Tokenizer load(const std::string& path);

  bool operator==(const Tokenizer& other) const { return pieces_ == other.pieces_; }

 private:
  void rebuild_index();

  std::vector<std::string> pieces_;                  // merge pieces by rank
  std::unordered_map<std::string, int> piece_rank_;  // piece -> rank
};

struct FertilityRow {
  int language = 0;
  long long tokens = 0;
  long long words = 0;
  double fertility = 0.0;
  bool flagged = false;  // set when the language had no countable words
};

struct FertilityReport {
  std::vector<FertilityRow> rows;
  std::string to_json() const;
  std::string to_text() const;
};

// Words are whitespace-delimited; each word is encoded on its own so
// separator tokens never inflate the ratio.
FertilityReport fertility(const Tokenizer& model,
                          const std::vector<std::pair<int, std::vector<std::string>>>& by_language);

}  // namespace sutra
