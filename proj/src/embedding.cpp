#include "toolfuse/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "toolfuse/text.hpp"

namespace toolfuse {

using json = nlohmann::json;

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::vector<float>> rows,
                                 std::vector<std::string> tool_ids, std::string model_id)
    : tool_ids_(std::move(tool_ids)), model_id_(std::move(model_id)) {
  if (rows.size() != tool_ids_.size()) {
    throw InputError("embedding matrix: row count does not match tool id count");
  }
  if (rows.empty()) {
    throw InputError("embedding matrix: no rows");
  }
  dim_ = rows.front().size();
  data_.reserve(rows.size() * dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim_) {
      throw InputError("embedding matrix: inconsistent dimension at row " + std::to_string(i));
    }
    double norm_sq = 0.0;
    for (float x : rows[i]) {
      norm_sq += static_cast<double>(x) * static_cast<double>(x);
    }
    const double norm = std::sqrt(norm_sq);
    if (norm < 1e-12) {
      throw ZeroVector("zero vector: embedding for tool " + tool_ids_[i]);
    }
    for (float x : rows[i]) {
      data_.push_back(static_cast<double>(x) / norm);
    }
  }
}

double EmbeddingMatrix::cosine(std::size_t i, std::size_t j) const {
  const double* a = row(i);
  const double* b = row(j);
  double dot = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    dot += a[k] * b[k];
  }
  return std::clamp(dot, -1.0, 1.0);
}

void normalize_vector(std::vector<float>& v, const std::string& what) {
  double norm_sq = 0.0;
  for (float x : v) {
    norm_sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    throw ZeroVector("zero vector: " + what);
  }
  for (float& x : v) {
    x = static_cast<float>(static_cast<double>(x) / norm);
  }
}

std::vector<float> mock_embed(const std::string& text, std::size_t d) {
  if (d < 8) {
    throw InputError("mock_embed requires d >= 8");
  }
  std::vector<float> v(d, 0.0f);
  const std::string lowered = to_lower(text);
  auto bump = [&](std::string_view gram) {
    const std::uint64_t h = fnv1a64(gram);
    const std::size_t bucket = static_cast<std::size_t>(h % d);
    const float sign = (h >> 63) ? -1.0f : 1.0f;
    v[bucket] += sign;
  };
  if (lowered.size() < 3) {
    if (!lowered.empty()) {
      bump(lowered);
    }
  } else {
    for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) {
      bump(std::string_view(lowered).substr(i, 3));
    }
  }
  double norm_sq = 0.0;
  for (float x : v) {
    norm_sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm > 0.0) {
    for (float& x : v) {
      x = static_cast<float>(static_cast<double>(x) / norm);
    }
  }
  return v;
}

std::vector<std::vector<float>> MockEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    out.push_back(mock_embed(text, dim_));
  }
  return out;
}

EmbeddingMatrix embed_toolset(const Toolset& toolset, EmbeddingProvider& provider) {
  if (toolset.empty()) {
    throw InputError("embed_toolset: toolset is empty");
  }
  std::vector<std::string> texts;
  std::vector<std::string> ids;
  texts.reserve(toolset.size());
  ids.reserve(toolset.size());
  for (const ToolSpec& tool : toolset.tools()) {
    texts.push_back(doc_text(tool));
    ids.push_back(tool.id);
  }
  auto rows = provider.embed_batch(texts);
  if (rows.size() != texts.size()) {
    throw ProviderError("embedding provider returned " + std::to_string(rows.size()) +
                        " vectors for " + std::to_string(texts.size()) + " texts");
  }
  return EmbeddingMatrix(std::move(rows), std::move(ids), provider.model_id());
}

std::vector<std::pair<std::string, double>> top_k_neighbors(const EmbeddingMatrix& matrix,
                                                            std::size_t row_index,
                                                            std::size_t k) {
  const std::size_t n = matrix.rows();
  if (row_index >= n) {
    throw IndexOutOfRange("top_k_neighbors: row " + std::to_string(row_index) + " out of range");
  }
  if (k < 1 || k > n - 1) {
    throw KTooLarge("top_k_neighbors: k=" + std::to_string(k) + " outside [1, " +
                    std::to_string(n - 1) + "]");
  }
  std::vector<std::pair<std::string, double>> all;
  all.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == row_index) {
      continue;
    }
    all.emplace_back(matrix.tool_ids()[j], matrix.cosine(row_index, j));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) {
      return a.second > b.second;
    }
    return a.first < b.first;
  });
  all.resize(k);
  return all;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEmbeddingConfig config)
    : config_(std::move(config)) {
  if (!config_.cache_dir.empty()) {
    std::string safe_model;
    for (char c : config_.model) {
      safe_model.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    cache_subdir_ = config_.cache_dir + "/" + safe_model;
    std::filesystem::create_directories(cache_subdir_);
  }
}

namespace {

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  // "http://host:port/prefix" -> {"http://host:port", "/prefix"}
  auto scheme_end = base_url.find("://");
  auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') {
    prefix.pop_back();
  }
  return {base_url.substr(0, path_start), prefix};
}

}  // namespace

std::vector<std::vector<float>> HttpEmbeddingProvider::fetch(
    const std::vector<std::string>& texts) {
  json body{{"model", config_.model}, {"input", texts}};
  const std::string payload = body.dump();
  auto [host, prefix] = split_base_url(config_.base_url);
  const std::string path = prefix + "/embeddings";

  std::string last_error;
  int last_status = 0;
  std::string last_body;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    }
    httplib::Client client(host);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      last_status = 0;
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      last_status = res->status;
      last_body = res->body;
      continue;
    }
    if (res->status != 200) {
      throw ApiError(res->status, res->body);
    }
    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::exception& ex) {
      throw ProviderError(std::string("embedding reply is not JSON: ") + ex.what());
    }
    if (!doc.contains("data") || !doc["data"].is_array() || doc["data"].size() != texts.size()) {
      throw ProviderError("embedding reply has wrong shape");
    }
    std::vector<std::vector<float>> rows(texts.size());
    for (const json& item : doc["data"]) {
      const std::size_t index = item.value("index", rows.size());
      if (index >= rows.size() || !item.contains("embedding")) {
        throw ProviderError("embedding reply has bad data entry");
      }
      rows[index] = item["embedding"].get<std::vector<float>>();
    }
    return rows;
  }
  if (last_status != 0) {
    throw ApiError(last_status, last_body);
  }
  throw TransportError("embedding request failed after " + std::to_string(config_.max_retries) +
                       " retries: " + last_error);
}

std::vector<std::vector<float>> HttpEmbeddingProvider::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out(texts.size());
  std::vector<std::size_t> missing;
  if (!cache_subdir_.empty()) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const std::string path = cache_subdir_ + "/" + stable_hash_hex(texts[i]) + ".json";
      if (std::filesystem::exists(path)) {
        json doc = json::parse(read_file(path));
        out[i] = doc.at("vector").get<std::vector<float>>();
      } else {
        missing.push_back(i);
      }
    }
  } else {
    missing.resize(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      missing[i] = i;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> chunks;  // [begin, end) into missing
  for (std::size_t start = 0; start < missing.size(); start += config_.batch_size) {
    chunks.emplace_back(start, std::min(missing.size(), start + config_.batch_size));
  }
  auto fetched = parallel_map(chunks.size(), config_.max_in_flight, [&](std::size_t c) {
    std::vector<std::string> chunk;
    chunk.reserve(chunks[c].second - chunks[c].first);
    for (std::size_t i = chunks[c].first; i < chunks[c].second; ++i) {
      chunk.push_back(texts[missing[i]]);
    }
    return fetch(chunk);
  });
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    for (std::size_t i = chunks[c].first; i < chunks[c].second; ++i) {
      out[missing[i]] = std::move(fetched[c][i - chunks[c].first]);
      if (!cache_subdir_.empty()) {
        const std::string path =
            cache_subdir_ + "/" + stable_hash_hex(texts[missing[i]]) + ".json";
        json doc{{"text_hash", stable_hash_hex(texts[missing[i]])}, {"vector", out[missing[i]]}};
        write_file_atomic(path, doc.dump());
      }
    }
  }
  return out;
}

}  // namespace toolfuse
