#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toolfuse/core.hpp"
#include "toolfuse/embedding.hpp"

namespace toolfuse {

struct RetrieverConfig {
  double alpha = 1.0;      // hybrid weight: 1 = dense only, 0 = sparse only
  int rerank_pool = 50;    // top-M candidates passed to the reranker
  int top_k = 5;           // tools returned per query
  double epsilon = 1e-8;   // min-max normalization guard
  double bm25_k1 = 1.2;
  double bm25_b = 0.75;
  bool rerank_enabled = true;
};

// Okapi BM25 over doc_text of every tool. Tokenizer: lowercase, split on
// non-alphanumerics.
class BM25Index {
 public:
  BM25Index() = default;
  explicit BM25Index(const Toolset& toolset, double k1 = 1.2, double b = 0.75);

  double score(const std::string& query, const std::string& tool_id) const;
  std::map<std::string, double> scores(const std::string& query) const;

  std::size_t doc_count() const { return doc_ids_.size(); }
  double avgdl() const { return avgdl_; }
  std::size_t df(const std::string& token) const;
  std::size_t tf(const std::string& tool_id, const std::string& token) const;

 private:
  double score_row(const std::vector<std::string>& query_tokens, std::size_t row) const;
  std::vector<std::string> doc_ids_;
  std::map<std::string, std::size_t> id_to_row_;
  std::vector<std::map<std::string, std::size_t>> term_counts_;
  std::vector<std::size_t> doc_lengths_;
  std::map<std::string, std::size_t> doc_freq_;
  double avgdl_ = 0.0;
  double k1_ = 1.2;
  double b_ = 0.75;
};

std::map<std::string, double> dense_scores(const std::string& query, const EmbeddingMatrix& matrix,
                                           EmbeddingProvider& provider);

// s = alpha * dense + (1 - alpha) * sparse over identical key sets. Inputs are
// expected to be min-max normalized over the candidate pool already.
std::map<std::string, double> hybrid_scores(const std::map<std::string, double>& sparse,
                                            const std::map<std::string, double>& dense,
                                            double alpha);

// (s - min) / (max - min + epsilon); an all-equal input maps to all zeros.
std::map<std::string, double> min_max_normalize(const std::map<std::string, double>& scores,
                                                double epsilon);

struct ScoredTool {
  std::string tool_id;
  double s_sparse = 0.0;
  double s_dense = 0.0;
  double s_hybrid = 0.0;
  std::optional<double> s_rerank;
  std::optional<double> s_norm;
  int subquery_index = 0;
  int rank_in_subquery = 0;
};

struct SubqueryResult {
  int index = 0;
  std::string text;
  std::vector<ScoredTool> ranked;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<SubqueryResult> subqueries;
  std::vector<std::string> final_top_k;
};

// Scores query-tool relevance; the live pipeline uses a cross-encoder here.
class Reranker {
 public:
  virtual ~Reranker() = default;
  virtual double score(const std::string& query, const ToolSpec& tool) = 0;
};

// Cosine of provider embeddings of query and doc_text, scaled so values leave
// [0,1] like raw cross-encoder logits. Over the mock provider this is the
// deterministic mock reranker.
class CosineReranker : public Reranker {
 public:
  explicit CosineReranker(EmbeddingProvider& provider, double scale = 10.0)
      : provider_(provider), scale_(scale) {}
  double score(const std::string& query, const ToolSpec& tool) override;

 private:
  EmbeddingProvider& provider_;
  double scale_;
};

struct RetrievalIndexes {
  BM25Index bm25;
  EmbeddingMatrix dense;
};

RetrievalIndexes build_indexes(const Toolset& toolset, const RetrieverConfig& config,
                               EmbeddingProvider& provider);

// Hybrid-scores the full toolset, reranks the top-M pool, and returns the
// pool ordered by (rerank desc, hybrid desc, tool_id asc), ranks from 1.
std::vector<ScoredTool> retrieve_subquery(const std::string& subquery, const Toolset& toolset,
                                          const RetrievalIndexes& indexes,
                                          EmbeddingProvider& provider,
                                          const RetrieverConfig& config, Reranker* reranker);

// Min-max normalizes ranking scores of ranks 2..M in place; the top-1 keeps
// no s_norm.
void normalize_subquery_tail(std::vector<ScoredTool>& scored, double epsilon);

// Phase 1: every subquery's top-1 in subquery order. Phase 2: the pooled
// tails by (s_norm desc, subquery asc, rank asc, tool_id asc). Duplicates
// skipped throughout; stops at k.
std::vector<std::string> assemble_top_k(const std::vector<SubqueryResult>& per_subquery, int k);

RetrievalResult retrieve_query(const QueryRecord& record, const Toolset& toolset,
                               const RetrievalIndexes& indexes, EmbeddingProvider& provider,
                               const RetrieverConfig& config, Reranker* reranker);

// Picks one tool name (or "None") for a step from the retrieved candidates.
class SelectionAgent {
 public:
  virtual ~SelectionAgent() = default;
  virtual std::string select(const std::string& query, const std::string& step,
                             const std::vector<ToolSpec>& candidates) = 0;
};

// Echoes the candidate with the highest reranker score for the step.
class MockSelectionAgent : public SelectionAgent {
 public:
  explicit MockSelectionAgent(Reranker& reranker) : reranker_(reranker) {}
  std::string select(const std::string& query, const std::string& step,
                     const std::vector<ToolSpec>& candidates) override;

 private:
  Reranker& reranker_;
};

struct HallucinationRecord {
  int subquery_index = 0;
  std::string returned_name;
};

struct SelectionResult {
  std::string query_id;
  std::vector<std::string> selected;  // deduplicated, subquery order
  std::vector<HallucinationRecord> hallucinations;
};

SelectionResult select_tools(const QueryRecord& record, const RetrievalResult& retrieved,
                             const Toolset& toolset, SelectionAgent& agent);

// One JSONL line per result: {"query_id", "final_top_k", "subqueries": [...]}.
std::string retrieval_result_to_json(const RetrievalResult& result);
RetrievalResult parse_retrieval_result_json(const std::string& line);
std::string selection_result_to_json(const SelectionResult& result);
SelectionResult parse_selection_result_json(const std::string& line);

}  // namespace toolfuse
