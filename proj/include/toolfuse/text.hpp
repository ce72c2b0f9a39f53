#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace toolfuse {

// Lowercases and splits on non-alphanumeric characters, dropping empty tokens.
// Shared by the BM25 tokenizer, token accounting, and the mock name rules.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view text);

// 64-bit FNV-1a. Fixed constants so hashes are stable across platforms.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// 128 bits of FNV-1a (two independent seeds), hex-encoded. Used as a cache key.
std::string stable_hash_hex(std::string_view data);

// Token -> canonical-token map used by the deterministic mock classifiers.
// Tokens without an entry map to themselves.
class SynonymTable {
 public:
  SynonymTable() = default;
  explicit SynonymTable(std::map<std::string, std::string> canonical)
      : canonical_(std::move(canonical)) {}

  std::string canonical(const std::string& token) const;

  // Canonical token multiset of a function name, sorted ascending.
  std::vector<std::string> name_key(std::string_view name) const;

  bool names_equivalent(std::string_view a, std::string_view b) const;

  // Table used across the test fixtures and the mock chat model.
  static SynonymTable builtin();

 private:
  std::map<std::string, std::string> canonical_;
};

}  // namespace toolfuse
