#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "toolfuse/errors.hpp"

namespace toolfuse {

// One callable tool as exposed to an agent: name, parameter signature, and a
// natural-language description. `id` is the stable key (defaults to name).
struct ToolSpec {
  std::string id;
  std::string name;
  std::string signature;
  std::string description;

  bool operator==(const ToolSpec&) const = default;
};

// Canonical text embedded and indexed for a tool.
std::string doc_text(const ToolSpec& tool);

// Ordered tool collection with unique ids. Immutable after construction;
// iteration order is insertion order.
class Toolset {
 public:
  Toolset() = default;
  Toolset(std::vector<ToolSpec> tools, std::string source_label);

  const std::vector<ToolSpec>& tools() const { return tools_; }
  const std::string& source_label() const { return source_label_; }
  std::size_t size() const { return tools_.size(); }
  bool empty() const { return tools_.empty(); }

  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  const ToolSpec& at(const std::string& id) const;
  const ToolSpec& at(std::size_t row) const { return tools_.at(row); }
  std::optional<std::size_t> index_of(const std::string& id) const;

 private:
  std::vector<ToolSpec> tools_;
  std::string source_label_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One benchmark query: full text, optional decomposed steps, and the gold tool
// ids the query should resolve to.
struct QueryRecord {
  std::string query_id;
  std::string query;
  std::vector<std::string> subqueries;
  std::vector<std::string> gold_tools;

  bool single_tool_mode() const { return subqueries.size() <= 1; }
};

class Benchmark {
 public:
  Benchmark() = default;
  explicit Benchmark(std::vector<QueryRecord> records);

  const std::vector<QueryRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<QueryRecord> records_;
};

// Toolset file: JSON array of {"id"?, "name", "signature", "description"}.
Toolset load_toolset(const std::string& path);
Toolset parse_toolset_json(const std::string& json_text, const std::string& source_label);
void save_toolset(const Toolset& toolset, const std::string& path);
std::string toolset_to_json(const Toolset& toolset);

// Benchmark file: JSONL, one record per line:
// {"query_id", "query", "subqueries": [...], "gold_tools": [...]}.
Benchmark load_benchmark(const std::string& path, const Toolset& toolset);
Benchmark parse_benchmark_jsonl(const std::string& jsonl_text, const Toolset& toolset);
void save_benchmark(const Benchmark& benchmark, const std::string& path);
std::string benchmark_to_jsonl(const Benchmark& benchmark);

// File helpers shared across modules (canonical output: UTF-8, LF endings).
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
// Write-temp-then-rename, for cache entries written concurrently.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace toolfuse
