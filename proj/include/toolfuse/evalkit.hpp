#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "toolfuse/core.hpp"
#include "toolfuse/embedding.hpp"
#include "toolfuse/merger.hpp"
#include "toolfuse/retriever.hpp"

namespace toolfuse {

struct ContextAccounting {
  std::int64_t original_total = 0;   // tokens to present the whole toolset
  double retrieved_total = 0.0;      // mean tokens across queries' top-k
  double pct_reduction = 0.0;        // 1 - retrieved/original
};

struct PerQueryOutcome {
  std::string query_id;
  std::vector<std::string> selected;
  std::vector<std::string> gold;
  bool hit = false;
};

struct EvalReport {
  std::map<int, double> csr_at_k;
  std::map<int, double> recall_at_k;
  std::vector<PerQueryOutcome> per_query;
  ContextAccounting context_tokens;
  std::map<int, double> silhouette_by_clusters;  // optional diagnostics
};

// Fraction of queries whose selected set equals the gold set exactly.
double csr_at_k(const std::map<std::string, std::set<std::string>>& selections,
                const Benchmark& benchmark);

// Mean per-query fraction of gold tools present in the top-k list.
double recall_at_k(const std::map<std::string, std::vector<std::string>>& retrieved,
                   const Benchmark& benchmark);

// Mean silhouette over all points, distance = 1 - cosine. Singleton-cluster
// points score 0. Needs at least two clusters.
double silhouette(const EmbeddingMatrix& matrix,
                  const std::map<std::string, int>& assignments);

// Seeded k-means++ initialization plus Lloyd iterations (max 100 or centroid
// shift < 1e-6) over the normalized embedding rows.
std::map<std::string, int> kmeans(const EmbeddingMatrix& matrix, int cluster_count,
                                  std::uint64_t seed);

// Alphanumeric-token count of the concatenated doc_texts (a documented
// approximation of model tokens).
std::int64_t context_tokens(const std::vector<ToolSpec>& tools);

ContextAccounting context_accounting(const Toolset& toolset,
                                     const std::map<std::string, std::vector<std::string>>& top_k);

// ---- in-memory pipeline for the harness and ablations ----

struct PipelineDeps {
  EmbeddingProvider* provider = nullptr;
  PairClassifier* classifier = nullptr;
  ClusterValidator* validator = nullptr;
  DocMerger* doc_merger = nullptr;
  Reranker* reranker = nullptr;
  SelectionAgent* agent = nullptr;
};

struct PipelineOptions {
  MergerConfig merger;
  RetrieverConfig retriever;
  bool merge_enabled = true;
};

struct PipelineOutcome {
  Toolset toolset;                    // post-merge (or original)
  Benchmark benchmark;                // relabeled (or original)
  std::optional<MergePlan> plan;
  std::vector<RetrievalResult> retrievals;
  std::vector<SelectionResult> selections;
  double csr = 0.0;
  double recall = 0.0;
};

PipelineOutcome run_pipeline(const Toolset& toolset, const Benchmark& benchmark,
                             const PipelineDeps& deps, const PipelineOptions& options);

struct AblationSetting {
  bool reranker = false;
  bool merger = false;
  bool autocorrect = false;
};

struct AblationRow {
  AblationSetting setting;
  double csr = 0.0;
};

// One pipeline run per setting; rows come back in grid order.
std::vector<AblationRow> run_ablation(const Toolset& toolset, const Benchmark& benchmark,
                                      const std::vector<AblationSetting>& grid,
                                      const PipelineDeps& deps, const PipelineOptions& base);

std::string ablation_table(const std::vector<AblationRow>& rows, const std::string& dataset);
std::string ablation_csv(const std::vector<AblationRow>& rows);

EvalReport build_eval_report(const Benchmark& benchmark, const Toolset& toolset,
                             const std::vector<RetrievalResult>& retrievals,
                             const std::vector<SelectionResult>& selections,
                             const std::vector<int>& recall_ks);

std::string eval_report_to_json(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);
// Plot-ready (metric, k, value) series.
std::string eval_report_tsv(const EvalReport& report);

}  // namespace toolfuse
