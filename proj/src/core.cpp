#include "toolfuse/core.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace toolfuse {

using json = nlohmann::json;

std::string doc_text(const ToolSpec& tool) {
  return tool.name + "\n" + tool.signature + "\n" + tool.description;
}

Toolset::Toolset(std::vector<ToolSpec> tools, std::string source_label)
    : tools_(std::move(tools)), source_label_(std::move(source_label)) {
  for (std::size_t i = 0; i < tools_.size(); ++i) {
    ToolSpec& tool = tools_[i];
    if (tool.name.empty()) {
      throw EmptyName("tool at position " + std::to_string(i) + " has an empty name");
    }
    if (tool.id.empty()) {
      tool.id = tool.name;
    }
    auto [it, inserted] = index_.emplace(tool.id, i);
    (void)it;
    if (!inserted) {
      throw DuplicateToolId(tool.id);
    }
  }
}

const ToolSpec& Toolset::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw UnknownTool("unknown tool id: " + id);
  }
  return tools_[it->second];
}

std::optional<std::size_t> Toolset::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

Benchmark::Benchmark(std::vector<QueryRecord> records) : records_(std::move(records)) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    auto [it, inserted] = seen.emplace(records_[i].query_id, i);
    (void)it;
    if (!inserted) {
      throw DuplicateQueryId("duplicate query_id: " + records_[i].query_id);
    }
  }
}

namespace {

std::string require_string(const json& obj, const char* key, const std::string& context) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError(context + ": missing or non-string field \"" + key + "\"");
  }
  return it->get<std::string>();
}

json tool_to_json(const ToolSpec& tool) {
  return json{
      {"description", tool.description},
      {"id", tool.id},
      {"name", tool.name},
      {"signature", tool.signature},
  };
}

}  // namespace

Toolset parse_toolset_json(const std::string& json_text, const std::string& source_label) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& ex) {
    throw ParseError("toolset " + source_label + ": " + ex.what());
  }
  if (!doc.is_array()) {
    throw ParseError("toolset " + source_label + ": top-level value must be a JSON array");
  }
  std::vector<ToolSpec> tools;
  tools.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& entry = doc[i];
    if (!entry.is_object()) {
      throw ParseError("toolset " + source_label + ": entry " + std::to_string(i) +
                       " is not an object");
    }
    ToolSpec tool;
    const std::string context = "toolset " + source_label + " entry " + std::to_string(i);
    tool.name = require_string(entry, "name", context);
    tool.signature = require_string(entry, "signature", context);
    tool.description = require_string(entry, "description", context);
    if (entry.contains("id")) {
      if (!entry["id"].is_string()) {
        throw ParseError(context + ": field \"id\" must be a string");
      }
      tool.id = entry["id"].get<std::string>();
    }
    tools.push_back(std::move(tool));
  }
  return Toolset(std::move(tools), source_label);
}

Toolset load_toolset(const std::string& path) {
  return parse_toolset_json(read_file(path), path);
}

std::string toolset_to_json(const Toolset& toolset) {
  json arr = json::array();
  for (const ToolSpec& tool : toolset.tools()) {
    arr.push_back(tool_to_json(tool));
  }
  return arr.dump(2) + "\n";
}

void save_toolset(const Toolset& toolset, const std::string& path) {
  write_file(path, toolset_to_json(toolset));
}

Benchmark parse_benchmark_jsonl(const std::string& jsonl_text, const Toolset& toolset) {
  std::vector<QueryRecord> records;
  std::istringstream stream(jsonl_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& ex) {
      throw ParseError("benchmark line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!doc.is_object()) {
      throw ParseError("benchmark line " + std::to_string(line_no) + ": not a JSON object");
    }
    QueryRecord record;
    const std::string context = "benchmark line " + std::to_string(line_no);
    record.query_id = require_string(doc, "query_id", context);
    record.query = require_string(doc, "query", context);
    if (doc.contains("subqueries")) {
      if (!doc["subqueries"].is_array()) {
        throw ParseError(context + ": \"subqueries\" must be an array");
      }
      for (const json& step : doc["subqueries"]) {
        if (!step.is_string()) {
          throw ParseError(context + ": subquery entries must be strings");
        }
        record.subqueries.push_back(step.get<std::string>());
      }
    }
    auto gold_it = doc.find("gold_tools");
    if (gold_it == doc.end() || !gold_it->is_array()) {
      throw ParseError(context + ": missing \"gold_tools\" array");
    }
    for (const json& gold : *gold_it) {
      if (!gold.is_string()) {
        throw ParseError(context + ": gold_tools entries must be strings");
      }
      record.gold_tools.push_back(gold.get<std::string>());
    }
    if (record.gold_tools.empty()) {
      throw EmptyGold(context + ": gold_tools must be non-empty");
    }
    for (const std::string& gold : record.gold_tools) {
      if (!toolset.contains(gold)) {
        throw UnknownGoldTool(record.query_id, gold);
      }
    }
    records.push_back(std::move(record));
  }
  return Benchmark(std::move(records));
}

Benchmark load_benchmark(const std::string& path, const Toolset& toolset) {
  return parse_benchmark_jsonl(read_file(path), toolset);
}

std::string benchmark_to_jsonl(const Benchmark& benchmark) {
  std::string out;
  for (const QueryRecord& record : benchmark.records()) {
    json doc{
        {"gold_tools", record.gold_tools},
        {"query", record.query},
        {"query_id", record.query_id},
        {"subqueries", record.subqueries},
    };
    out += doc.dump();
    out += "\n";
  }
  return out;
}

void save_benchmark(const Benchmark& benchmark, const std::string& path) {
  write_file(path, benchmark_to_jsonl(benchmark));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot write file: " + path);
  }
  out << content;
  if (!out) {
    throw InputError("short write: " + path);
  }
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  write_file(tmp, content);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InputError("cannot rename " + tmp + " to " + path);
  }
}

}  // namespace toolfuse
