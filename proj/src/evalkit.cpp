#include "toolfuse/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <json.hpp>

#include "toolfuse/text.hpp"

namespace toolfuse {

using json = nlohmann::json;

double csr_at_k(const std::map<std::string, std::set<std::string>>& selections,
                const Benchmark& benchmark) {
  if (benchmark.size() == 0) {
    throw InputError("csr_at_k: benchmark is empty");
  }
  std::size_t hits = 0;
  for (const QueryRecord& record : benchmark.records()) {
    auto it = selections.find(record.query_id);
    if (it == selections.end()) {
      throw MissingSelection("no selection entry for query " + record.query_id);
    }
    const std::set<std::string> gold(record.gold_tools.begin(), record.gold_tools.end());
    if (it->second == gold) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(benchmark.size());
}

double recall_at_k(const std::map<std::string, std::vector<std::string>>& retrieved,
                   const Benchmark& benchmark) {
  if (benchmark.size() == 0) {
    throw InputError("recall_at_k: benchmark is empty");
  }
  double total = 0.0;
  for (const QueryRecord& record : benchmark.records()) {
    auto it = retrieved.find(record.query_id);
    if (it == retrieved.end()) {
      throw MissingSelection("no retrieval entry for query " + record.query_id);
    }
    const std::set<std::string> gold(record.gold_tools.begin(), record.gold_tools.end());
    if (gold.empty()) {
      throw EmptyGold("query " + record.query_id + " has an empty gold set");
    }
    std::size_t found = 0;
    const std::set<std::string> top(it->second.begin(), it->second.end());
    for (const std::string& id : gold) {
      if (top.count(id)) {
        ++found;
      }
    }
    total += static_cast<double>(found) / static_cast<double>(gold.size());
  }
  return total / static_cast<double>(benchmark.size());
}

double silhouette(const EmbeddingMatrix& matrix,
                  const std::map<std::string, int>& assignments) {
  std::map<int, std::vector<std::size_t>> clusters;
  std::vector<int> labels(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    auto it = assignments.find(matrix.tool_ids()[i]);
    if (it == assignments.end()) {
      throw InputError("silhouette: missing assignment for " + matrix.tool_ids()[i]);
    }
    labels[i] = it->second;
    clusters[it->second].push_back(i);
  }
  if (clusters.size() < 2) {
    throw SingleCluster("silhouette needs at least two clusters");
  }
  auto distance = [&](std::size_t i, std::size_t j) { return 1.0 - matrix.cosine(i, j); };
  double total = 0.0;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const auto& own = clusters[labels[i]];
    if (own.size() == 1) {
      continue;  // singleton convention: s = 0
    }
    double a = 0.0;
    for (std::size_t j : own) {
      if (j != i) {
        a += distance(i, j);
      }
    }
    a /= static_cast<double>(own.size() - 1);
    double b = 0.0;
    bool first = true;
    for (const auto& [label, members] : clusters) {
      if (label == labels[i]) {
        continue;
      }
      double mean = 0.0;
      for (std::size_t j : members) {
        mean += distance(i, j);
      }
      mean /= static_cast<double>(members.size());
      if (first || mean < b) {
        b = mean;
        first = false;
      }
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(matrix.rows());
}

namespace {

double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double sq_distance(const double* a, const std::vector<double>& b, std::size_t dim) {
  double total = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double diff = a[i] - b[i];
    total += diff * diff;
  }
  return total;
}

}  // namespace

std::map<std::string, int> kmeans(const EmbeddingMatrix& matrix, int cluster_count,
                                  std::uint64_t seed) {
  const std::size_t n = matrix.rows();
  const std::size_t dim = matrix.dim();
  if (cluster_count < 2 || static_cast<std::size_t>(cluster_count) > n) {
    throw InputError("kmeans: cluster_count must be in [2, n]");
  }
  const std::size_t k = static_cast<std::size_t>(cluster_count);
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<std::vector<double>> centroids;
  std::vector<double> min_dist(n, 0.0);
  std::vector<bool> chosen(n, false);
  std::size_t first = static_cast<std::size_t>(rng() % n);
  centroids.push_back(std::vector<double>(matrix.row(first), matrix.row(first) + dim));
  chosen[first] = true;
  for (std::size_t i = 0; i < n; ++i) {
    min_dist[i] = sq_distance(matrix.row(i), centroids[0], dim);
  }
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += min_dist[i];
    }
    std::size_t pick = n;
    if (total <= 0.0) {
      // All remaining points coincide with a centroid; take the first free one.
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    } else {
      double r = unit_double(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        r -= min_dist[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        pick = n - 1;
      }
    }
    chosen[pick] = true;
    centroids.push_back(std::vector<double>(matrix.row(pick), matrix.row(pick) + dim));
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(min_dist[i], sq_distance(matrix.row(i), centroids.back(), dim));
    }
  }

  // Lloyd iterations.
  std::vector<std::size_t> assignment(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_distance(matrix.row(i), centroids[0], dim);
      std::size_t best_c = 0;
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_distance(matrix.row(i), centroids[c], dim);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assignment[i] = best_c;
    }
    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = matrix.row(i);
      auto& target = next[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) {
        target[d] += row[d];
      }
      ++counts[assignment[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        continue;  // empty cluster keeps its centroid
      }
      for (std::size_t d = 0; d < dim; ++d) {
        next[c][d] /= static_cast<double>(counts[c]);
        const double diff = next[c][d] - centroids[c][d];
        shift += diff * diff;
      }
      centroids[c] = std::move(next[c]);
    }
    if (std::sqrt(shift) < 1e-6) {
      break;
    }
  }
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < n; ++i) {
    out[matrix.tool_ids()[i]] = static_cast<int>(assignment[i]);
  }
  return out;
}

std::int64_t context_tokens(const std::vector<ToolSpec>& tools) {
  std::int64_t total = 0;
  for (const ToolSpec& tool : tools) {
    total += static_cast<std::int64_t>(tokenize(doc_text(tool)).size());
  }
  return total;
}

ContextAccounting context_accounting(
    const Toolset& toolset, const std::map<std::string, std::vector<std::string>>& top_k) {
  ContextAccounting accounting;
  accounting.original_total = context_tokens(toolset.tools());
  if (!top_k.empty()) {
    double sum = 0.0;
    for (const auto& [query_id, ids] : top_k) {
      (void)query_id;
      std::vector<ToolSpec> specs;
      specs.reserve(ids.size());
      for (const std::string& id : ids) {
        specs.push_back(toolset.at(id));
      }
      sum += static_cast<double>(context_tokens(specs));
    }
    accounting.retrieved_total = sum / static_cast<double>(top_k.size());
  }
  if (accounting.original_total > 0) {
    accounting.pct_reduction =
        1.0 - accounting.retrieved_total / static_cast<double>(accounting.original_total);
  }
  return accounting;
}

PipelineOutcome run_pipeline(const Toolset& toolset, const Benchmark& benchmark,
                             const PipelineDeps& deps, const PipelineOptions& options) {
  if (!deps.provider || !deps.agent) {
    throw InputError("run_pipeline: provider and agent are required");
  }
  PipelineOutcome outcome;
  if (options.merge_enabled) {
    if (!deps.classifier || !deps.validator || !deps.doc_merger) {
      throw InputError("run_pipeline: merge enabled but merger dependencies missing");
    }
    const EmbeddingMatrix matrix = embed_toolset(toolset, *deps.provider);
    MergePlan plan = build_merge_plan(toolset, matrix, options.merger, *deps.classifier,
                                      *deps.validator, *deps.doc_merger);
    outcome.toolset = apply_merge(toolset, plan);
    outcome.benchmark = relabel_benchmark(benchmark, plan);
    outcome.plan = std::move(plan);
  } else {
    outcome.toolset = toolset;
    outcome.benchmark = benchmark;
  }

  const RetrievalIndexes indexes =
      build_indexes(outcome.toolset, options.retriever, *deps.provider);
  const auto& records = outcome.benchmark.records();
  auto retrievals = parallel_map(records.size(), options.merger.max_workers, [&](std::size_t i) {
    return retrieve_query(records[i], outcome.toolset, indexes, *deps.provider, options.retriever,
                          options.retriever.rerank_enabled ? deps.reranker : nullptr);
  });
  auto selections = parallel_map(records.size(), options.merger.max_workers, [&](std::size_t i) {
    return select_tools(records[i], retrievals[i], outcome.toolset, *deps.agent);
  });
  outcome.retrievals = std::move(retrievals);
  outcome.selections = std::move(selections);

  std::map<std::string, std::set<std::string>> selected_sets;
  std::map<std::string, std::vector<std::string>> retrieved_lists;
  for (const SelectionResult& sel : outcome.selections) {
    selected_sets[sel.query_id] = std::set<std::string>(sel.selected.begin(), sel.selected.end());
  }
  for (const RetrievalResult& ret : outcome.retrievals) {
    retrieved_lists[ret.query_id] = ret.final_top_k;
  }
  outcome.csr = csr_at_k(selected_sets, outcome.benchmark);
  outcome.recall = recall_at_k(retrieved_lists, outcome.benchmark);
  return outcome;
}

std::vector<AblationRow> run_ablation(const Toolset& toolset, const Benchmark& benchmark,
                                      const std::vector<AblationSetting>& grid,
                                      const PipelineDeps& deps, const PipelineOptions& base) {
  std::vector<AblationRow> rows;
  rows.reserve(grid.size());
  for (const AblationSetting& setting : grid) {
    PipelineOptions options = base;
    options.merge_enabled = setting.merger;
    options.merger.autocorrect_enabled = setting.autocorrect;
    options.retriever.rerank_enabled = setting.reranker;
    const PipelineOutcome outcome = run_pipeline(toolset, benchmark, deps, options);
    rows.push_back(AblationRow{setting, outcome.csr});
  }
  return rows;
}

namespace {

std::string format_double(double value, int precision = 3) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", precision, value);
  return buffer;
}

}  // namespace

std::string ablation_table(const std::vector<AblationRow>& rows, const std::string& dataset) {
  std::string out = "Dataset        Reranker  Merger  AutoCorrect  CSR\n";
  for (const AblationRow& row : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-14s %-9s %-7s %-12s %s\n", dataset.c_str(),
                  row.setting.reranker ? "yes" : "no", row.setting.merger ? "yes" : "no",
                  row.setting.autocorrect ? "yes" : "no", format_double(row.csr).c_str());
    out += line;
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "reranker,merger,autocorrect,csr\n";
  for (const AblationRow& row : rows) {
    out += std::string(row.setting.reranker ? "1" : "0") + "," +
           (row.setting.merger ? "1" : "0") + "," + (row.setting.autocorrect ? "1" : "0") + "," +
           format_double(row.csr, 6) + "\n";
  }
  return out;
}

EvalReport build_eval_report(const Benchmark& benchmark, const Toolset& toolset,
                             const std::vector<RetrievalResult>& retrievals,
                             const std::vector<SelectionResult>& selections,
                             const std::vector<int>& recall_ks) {
  EvalReport report;
  std::map<std::string, std::vector<std::string>> retrieved;
  std::size_t retrieval_k = 0;
  for (const RetrievalResult& result : retrievals) {
    retrieved[result.query_id] = result.final_top_k;
    retrieval_k = std::max(retrieval_k, result.final_top_k.size());
  }
  std::map<std::string, std::set<std::string>> selected;
  for (const SelectionResult& result : selections) {
    selected[result.query_id] =
        std::set<std::string>(result.selected.begin(), result.selected.end());
  }

  report.csr_at_k[static_cast<int>(retrieval_k)] = csr_at_k(selected, benchmark);
  for (int k : recall_ks) {
    if (k < 1 || static_cast<std::size_t>(k) > retrieval_k) {
      continue;
    }
    std::map<std::string, std::vector<std::string>> truncated;
    for (const auto& [query_id, ids] : retrieved) {
      truncated[query_id] = std::vector<std::string>(
          ids.begin(), ids.begin() + std::min<std::size_t>(ids.size(), k));
    }
    report.recall_at_k[k] = recall_at_k(truncated, benchmark);
  }

  for (const QueryRecord& record : benchmark.records()) {
    PerQueryOutcome outcome;
    outcome.query_id = record.query_id;
    outcome.gold = record.gold_tools;
    auto it = selected.find(record.query_id);
    if (it == selected.end()) {
      throw MissingSelection("no selection entry for query " + record.query_id);
    }
    outcome.selected = std::vector<std::string>(it->second.begin(), it->second.end());
    const std::set<std::string> gold(record.gold_tools.begin(), record.gold_tools.end());
    outcome.hit = it->second == gold;
    report.per_query.push_back(std::move(outcome));
  }
  report.context_tokens = context_accounting(toolset, retrieved);
  return report;
}

std::string eval_report_to_json(const EvalReport& report) {
  json csr = json::object();
  for (const auto& [k, value] : report.csr_at_k) {
    csr[std::to_string(k)] = value;
  }
  json recall = json::object();
  for (const auto& [k, value] : report.recall_at_k) {
    recall[std::to_string(k)] = value;
  }
  json per_query = json::array();
  for (const PerQueryOutcome& outcome : report.per_query) {
    per_query.push_back(json{
        {"gold", outcome.gold},
        {"hit", outcome.hit},
        {"query_id", outcome.query_id},
        {"selected", outcome.selected},
    });
  }
  json doc{
      {"context_tokens",
       json{{"original_total", report.context_tokens.original_total},
            {"pct_reduction", report.context_tokens.pct_reduction},
            {"retrieved_total", report.context_tokens.retrieved_total}}},
      {"csr_at_k", csr},
      {"per_query", per_query},
      {"recall_at_k", recall},
  };
  if (!report.silhouette_by_clusters.empty()) {
    json silhouettes = json::object();
    for (const auto& [k, value] : report.silhouette_by_clusters) {
      silhouettes[std::to_string(k)] = value;
    }
    doc["silhouette"] = silhouettes;
  }
  return doc.dump(2) + "\n";
}

std::string eval_report_tsv(const EvalReport& report) {
  std::string out = "metric\tk\tvalue\n";
  for (const auto& [k, value] : report.csr_at_k) {
    out += "csr\t" + std::to_string(k) + "\t" + format_double(value, 6) + "\n";
  }
  for (const auto& [k, value] : report.recall_at_k) {
    out += "recall\t" + std::to_string(k) + "\t" + format_double(value, 6) + "\n";
  }
  for (const auto& [k, value] : report.silhouette_by_clusters) {
    out += "silhouette\t" + std::to_string(k) + "\t" + format_double(value, 6) + "\n";
  }
  return out;
}

std::string eval_report_table(const EvalReport& report) {
  std::string out;
  out += "Metric      k     Value\n";
  for (const auto& [k, value] : report.csr_at_k) {
    char line[96];
    std::snprintf(line, sizeof(line), "CSR@k       %-5d %s\n", k, format_double(value).c_str());
    out += line;
  }
  for (const auto& [k, value] : report.recall_at_k) {
    char line[96];
    std::snprintf(line, sizeof(line), "Recall@k    %-5d %s\n", k, format_double(value).c_str());
    out += line;
  }
  char context[192];
  std::snprintf(context, sizeof(context),
                "Context tokens: original %lld, retrieved mean %.1f, reduction %.2f%%\n",
                static_cast<long long>(report.context_tokens.original_total),
                report.context_tokens.retrieved_total,
                100.0 * report.context_tokens.pct_reduction);
  out += context;
  for (const auto& [k, value] : report.silhouette_by_clusters) {
    char line[96];
    std::snprintf(line, sizeof(line), "Silhouette  %-5d %s\n", k, format_double(value).c_str());
    out += line;
  }
  return out;
}

}  // namespace toolfuse
