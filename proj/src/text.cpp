#include "toolfuse/text.hpp"

#include <algorithm>
#include <cctype>

namespace toolfuse {

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) {
    tokens.push_back(std::move(current));
  }
  return tokens;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (unsigned char c : data) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string stable_hash_hex(std::string_view data) {
  static const char* kHex = "0123456789abcdef";
  std::uint64_t parts[2] = {
      fnv1a64(data),
      fnv1a64(data, 0x9e3779b97f4a7c15ULL),
  };
  std::string out;
  out.reserve(32);
  for (std::uint64_t part : parts) {
    for (int shift = 60; shift >= 0; shift -= 4) {
      out.push_back(kHex[(part >> shift) & 0xF]);
    }
  }
  return out;
}

std::string SynonymTable::canonical(const std::string& token) const {
  auto it = canonical_.find(token);
  return it == canonical_.end() ? token : it->second;
}

std::vector<std::string> SynonymTable::name_key(std::string_view name) const {
  std::vector<std::string> key;
  for (const auto& token : tokenize(name)) {
    key.push_back(canonical(token));
  }
  std::sort(key.begin(), key.end());
  return key;
}

bool SynonymTable::names_equivalent(std::string_view a, std::string_view b) const {
  return name_key(a) == name_key(b);
}

SynonymTable SynonymTable::builtin() {
  return SynonymTable({
      {"calc", "calculate"},
      {"compute", "calculate"},
      {"computation", "calculate"},
      {"conversion", "convert"},
      {"converter", "convert"},
      {"fetch", "get"},
      {"retrieve", "get"},
      {"lookup", "get"},
      {"msg", "message"},
      {"geometry", "geo"},
      {"translation", "translate"},
      {"fx", "currency"},
      {"temp", "temperature"},
      {"info", "details"},
      {"remove", "delete"},
      {"find", "search"},
      {"gen", "generate"},
      {"pwd", "password"},
  });
}

}  // namespace toolfuse
