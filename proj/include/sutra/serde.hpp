#pragma once

#include <cstdint>
#include <string>

namespace sutra {

// Byte-level helpers shared by the tokenizer / checkpoint / report writers.
// Hex keeps arbitrary byte strings (BPE pieces may be invalid UTF-8) safe
// inside JSON and makes serialization byte-exact.

std::string hex_encode(const std::string& bytes);
std::string hex_decode(const std::string& hex);  // throws DataError on odd/bad input

std::string read_file(const std::string& path);              // throws IoError
void write_file(const std::string& path, const std::string& contents);  // throws IoError

// FNV-1a over a byte range; used as the checkpoint integrity checksum.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace sutra
