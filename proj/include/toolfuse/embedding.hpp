#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "toolfuse/core.hpp"

namespace toolfuse {

// Dense embeddings for a toolset: one L2-normalized row per tool, aligned with
// tool_ids. Immutable after construction.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  // Rows are normalized in place; an all-zero row raises ZeroVector.
  EmbeddingMatrix(std::vector<std::vector<float>> rows, std::vector<std::string> tool_ids,
                  std::string model_id);

  std::size_t rows() const { return tool_ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& tool_ids() const { return tool_ids_; }
  const std::string& model_id() const { return model_id_; }
  bool normalized() const { return true; }

  const double* row(std::size_t i) const { return data_.data() + i * dim_; }
  // Dot product of the unit rows, clamped into [-1, 1].
  double cosine(std::size_t i, std::size_t j) const;

 private:
  std::vector<double> data_;  // row-major, rows() x dim()
  std::vector<std::string> tool_ids_;
  std::string model_id_;
  std::size_t dim_ = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // One vector per input text, same order. Must be deterministic within a
  // process (hash-based or cached).
  virtual std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) = 0;
  virtual std::string model_id() const = 0;
};

// Deterministic test double: hashes character 3-grams of the lowercased text
// into d signed buckets (fixed FNV-1a hash) and L2-normalizes.
std::vector<float> mock_embed(const std::string& text, std::size_t d);

class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(std::size_t dim = 256) : dim_(dim) {}
  std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override;
  std::string model_id() const override { return "mock-3gram-" + std::to_string(dim_); }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

struct HttpEmbeddingConfig {
  std::string base_url;           // e.g. http://localhost:8080/v1
  std::string model;
  std::string api_key;            // empty -> no Authorization header
  std::string cache_dir;          // empty -> caching disabled
  int max_retries = 3;
  int timeout_seconds = 60;
  std::size_t batch_size = 128;
  std::size_t max_in_flight = 4;  // concurrent batch requests
};

// POSTs {"model", "input": [texts]} to {base}/embeddings and reads the
// OpenAI-shaped reply. Responses are cached on disk, one file per
// (model, text hash): <cache_dir>/<model>/<hash>.json {"text_hash","vector"}.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config);
  std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override;
  std::string model_id() const override { return config_.model; }

 private:
  std::vector<std::vector<float>> fetch(const std::vector<std::string>& texts);
  HttpEmbeddingConfig config_;
  std::string cache_subdir_;
};

// Embeds doc_text of every tool in toolset order. Rows come back normalized.
EmbeddingMatrix embed_toolset(const Toolset& toolset, EmbeddingProvider& provider);

// Exact brute-force top-k by cosine, self excluded. Ties break by tool_id
// ascending. 1 <= k <= rows-1.
std::vector<std::pair<std::string, double>> top_k_neighbors(const EmbeddingMatrix& matrix,
                                                            std::size_t row_index, std::size_t k);

// L2-normalizes in place; throws ZeroVector when the norm is ~0.
void normalize_vector(std::vector<float>& v, const std::string& what);

// Applies fn(index) over [0, count) with at most `workers` threads, collecting
// results in index order. Exceptions rethrow after all workers join.
template <typename Fn>
auto parallel_map(std::size_t count, std::size_t workers, Fn&& fn);

}  // namespace toolfuse

#include "toolfuse/parallel_impl.hpp"
