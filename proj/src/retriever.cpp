#include "toolfuse/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "toolfuse/text.hpp"

namespace toolfuse {

using json = nlohmann::json;

BM25Index::BM25Index(const Toolset& toolset, double k1, double b) : k1_(k1), b_(b) {
  if (toolset.empty()) {
    throw InputError("bm25: toolset is empty");
  }
  std::size_t total_length = 0;
  for (const ToolSpec& tool : toolset.tools()) {
    const auto tokens = tokenize(doc_text(tool));
    std::map<std::string, std::size_t> counts;
    for (const std::string& token : tokens) {
      ++counts[token];
    }
    for (const auto& [token, count] : counts) {
      (void)count;
      ++doc_freq_[token];
    }
    id_to_row_.emplace(tool.id, doc_ids_.size());
    doc_ids_.push_back(tool.id);
    doc_lengths_.push_back(tokens.size());
    term_counts_.push_back(std::move(counts));
    total_length += tokens.size();
  }
  avgdl_ = static_cast<double>(total_length) / static_cast<double>(doc_ids_.size());
}

std::size_t BM25Index::df(const std::string& token) const {
  auto it = doc_freq_.find(token);
  return it == doc_freq_.end() ? 0 : it->second;
}

std::size_t BM25Index::tf(const std::string& tool_id, const std::string& token) const {
  auto row = id_to_row_.find(tool_id);
  if (row == id_to_row_.end()) {
    throw UnknownTool("bm25: unknown tool id: " + tool_id);
  }
  const auto& counts = term_counts_[row->second];
  auto it = counts.find(token);
  return it == counts.end() ? 0 : it->second;
}

double BM25Index::score_row(const std::vector<std::string>& query_tokens, std::size_t row) const {
  const double n_docs = static_cast<double>(doc_ids_.size());
  const double dl = static_cast<double>(doc_lengths_[row]);
  double total = 0.0;
  for (const std::string& token : query_tokens) {
    auto tf_it = term_counts_[row].find(token);
    if (tf_it == term_counts_[row].end()) {
      continue;
    }
    const double tf = static_cast<double>(tf_it->second);
    const double df = static_cast<double>(doc_freq_.at(token));
    const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    const double denom = tf + k1_ * (1.0 - b_ + b_ * dl / avgdl_);
    total += idf * tf * (k1_ + 1.0) / denom;
  }
  return total;
}

double BM25Index::score(const std::string& query, const std::string& tool_id) const {
  auto row = id_to_row_.find(tool_id);
  if (row == id_to_row_.end()) {
    throw UnknownTool("bm25: unknown tool id: " + tool_id);
  }
  return score_row(tokenize(query), row->second);
}

std::map<std::string, double> BM25Index::scores(const std::string& query) const {
  const auto query_tokens = tokenize(query);
  std::map<std::string, double> out;
  for (std::size_t row = 0; row < doc_ids_.size(); ++row) {
    out[doc_ids_[row]] = score_row(query_tokens, row);
  }
  return out;
}

std::map<std::string, double> dense_scores(const std::string& query, const EmbeddingMatrix& matrix,
                                           EmbeddingProvider& provider) {
  auto rows = provider.embed_batch({query});
  if (rows.size() != 1) {
    throw ProviderError("dense_scores: provider returned wrong batch size");
  }
  if (rows[0].size() != matrix.dim()) {
    throw ProviderError("dense_scores: query dimension does not match the matrix");
  }
  double norm_sq = 0.0;
  for (float x : rows[0]) {
    norm_sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    throw ZeroVector("zero vector: query embedding");
  }
  std::vector<double> q(rows[0].size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = static_cast<double>(rows[0][k]) / norm;
  }
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const double* row = matrix.row(i);
    double dot = 0.0;
    for (std::size_t k = 0; k < matrix.dim(); ++k) {
      dot += q[k] * row[k];
    }
    out[matrix.tool_ids()[i]] = std::clamp(dot, -1.0, 1.0);
  }
  return out;
}

std::map<std::string, double> min_max_normalize(const std::map<std::string, double>& scores,
                                                double epsilon) {
  std::map<std::string, double> out;
  if (scores.empty()) {
    return out;
  }
  double lo = scores.begin()->second;
  double hi = lo;
  for (const auto& [id, s] : scores) {
    (void)id;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (const auto& [id, s] : scores) {
    out[id] = (s - lo) / (hi - lo + epsilon);
  }
  return out;
}

std::map<std::string, double> hybrid_scores(const std::map<std::string, double>& sparse,
                                            const std::map<std::string, double>& dense,
                                            double alpha) {
  if (sparse.size() != dense.size()) {
    throw KeyMismatch("hybrid_scores: sparse and dense key sets differ in size");
  }
  std::map<std::string, double> out;
  for (const auto& [id, s_sparse] : sparse) {
    auto it = dense.find(id);
    if (it == dense.end()) {
      throw KeyMismatch("hybrid_scores: key missing from dense scores: " + id);
    }
    out[id] = alpha * it->second + (1.0 - alpha) * s_sparse;
  }
  return out;
}

double CosineReranker::score(const std::string& query, const ToolSpec& tool) {
  auto rows = provider_.embed_batch({query, doc_text(tool)});
  if (rows.size() != 2) {
    throw ProviderError("reranker: provider returned wrong batch size");
  }
  normalize_vector(rows[0], "reranker query embedding");
  normalize_vector(rows[1], "reranker tool embedding");
  double dot = 0.0;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    dot += static_cast<double>(rows[0][i]) * static_cast<double>(rows[1][i]);
  }
  return scale_ * dot;
}

RetrievalIndexes build_indexes(const Toolset& toolset, const RetrieverConfig& config,
                               EmbeddingProvider& provider) {
  RetrievalIndexes indexes;
  indexes.bm25 = BM25Index(toolset, config.bm25_k1, config.bm25_b);
  indexes.dense = embed_toolset(toolset, provider);
  return indexes;
}

std::vector<ScoredTool> retrieve_subquery(const std::string& subquery, const Toolset& toolset,
                                          const RetrievalIndexes& indexes,
                                          EmbeddingProvider& provider,
                                          const RetrieverConfig& config, Reranker* reranker) {
  if (config.top_k < 1 || config.rerank_pool < 1 || config.epsilon <= 0.0) {
    throw InputError("retriever config: top_k >= 1, rerank_pool >= 1, epsilon > 0 required");
  }
  const auto sparse_raw = indexes.bm25.scores(subquery);
  const auto dense_raw = dense_scores(subquery, indexes.dense, provider);
  // BM25 is unbounded while cosine lives in [-1,1]; normalizing both over the
  // full pool keeps alpha interpretable. At alpha = 1 this is inert.
  const auto sparse = min_max_normalize(sparse_raw, config.epsilon);
  const auto dense = min_max_normalize(dense_raw, config.epsilon);
  const auto hybrid = hybrid_scores(sparse, dense, config.alpha);

  std::vector<ScoredTool> pool;
  pool.reserve(hybrid.size());
  for (const auto& [id, s] : hybrid) {
    ScoredTool scored;
    scored.tool_id = id;
    scored.s_sparse = sparse.at(id);
    scored.s_dense = dense.at(id);
    scored.s_hybrid = s;
    pool.push_back(std::move(scored));
  }
  std::sort(pool.begin(), pool.end(), [](const ScoredTool& a, const ScoredTool& b) {
    if (a.s_hybrid != b.s_hybrid) {
      return a.s_hybrid > b.s_hybrid;
    }
    return a.tool_id < b.tool_id;
  });
  if (pool.size() > static_cast<std::size_t>(config.rerank_pool)) {
    pool.resize(static_cast<std::size_t>(config.rerank_pool));
  }

  if (config.rerank_enabled && reranker != nullptr) {
    for (ScoredTool& scored : pool) {
      scored.s_rerank = reranker->score(subquery, toolset.at(scored.tool_id));
    }
    std::sort(pool.begin(), pool.end(), [](const ScoredTool& a, const ScoredTool& b) {
      if (*a.s_rerank != *b.s_rerank) {
        return *a.s_rerank > *b.s_rerank;
      }
      if (a.s_hybrid != b.s_hybrid) {
        return a.s_hybrid > b.s_hybrid;
      }
      return a.tool_id < b.tool_id;
    });
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    pool[i].rank_in_subquery = static_cast<int>(i) + 1;
  }
  return pool;
}

namespace {

double ranking_score(const ScoredTool& scored) {
  return scored.s_rerank ? *scored.s_rerank : scored.s_hybrid;
}

}  // namespace

void normalize_subquery_tail(std::vector<ScoredTool>& scored, double epsilon) {
  if (scored.size() <= 1) {
    return;  // no tail to normalize
  }
  double lo = ranking_score(scored[1]);
  double hi = lo;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    lo = std::min(lo, ranking_score(scored[i]));
    hi = std::max(hi, ranking_score(scored[i]));
  }
  for (std::size_t i = 1; i < scored.size(); ++i) {
    scored[i].s_norm = (ranking_score(scored[i]) - lo) / (hi - lo + epsilon);
  }
}

std::vector<std::string> assemble_top_k(const std::vector<SubqueryResult>& per_subquery, int k) {
  if (k < 1) {
    throw InputError("assemble_top_k: k must be >= 1");
  }
  std::vector<std::string> out;
  std::set<std::string> used;
  // Phase 1: top-1 of each subquery, in subquery order.
  for (const SubqueryResult& sub : per_subquery) {
    if (static_cast<int>(out.size()) >= k) {
      break;
    }
    if (sub.ranked.empty()) {
      continue;
    }
    const std::string& id = sub.ranked.front().tool_id;
    if (used.insert(id).second) {
      out.push_back(id);
    }
  }
  // Phase 2: pooled tails by normalized score.
  std::vector<const ScoredTool*> tail;
  for (const SubqueryResult& sub : per_subquery) {
    for (std::size_t i = 1; i < sub.ranked.size(); ++i) {
      tail.push_back(&sub.ranked[i]);
    }
  }
  std::sort(tail.begin(), tail.end(), [](const ScoredTool* a, const ScoredTool* b) {
    const double na = a->s_norm.value_or(0.0);
    const double nb = b->s_norm.value_or(0.0);
    if (na != nb) {
      return na > nb;
    }
    if (a->subquery_index != b->subquery_index) {
      return a->subquery_index < b->subquery_index;
    }
    if (a->rank_in_subquery != b->rank_in_subquery) {
      return a->rank_in_subquery < b->rank_in_subquery;
    }
    return a->tool_id < b->tool_id;
  });
  for (const ScoredTool* scored : tail) {
    if (static_cast<int>(out.size()) >= k) {
      break;
    }
    if (used.insert(scored->tool_id).second) {
      out.push_back(scored->tool_id);
    }
  }
  return out;
}

RetrievalResult retrieve_query(const QueryRecord& record, const Toolset& toolset,
                               const RetrievalIndexes& indexes, EmbeddingProvider& provider,
                               const RetrieverConfig& config, Reranker* reranker) {
  RetrievalResult result;
  result.query_id = record.query_id;
  std::vector<std::string> steps = record.subqueries;
  if (steps.empty()) {
    steps.push_back(record.query);
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    SubqueryResult sub;
    sub.index = static_cast<int>(i);
    sub.text = steps[i];
    sub.ranked = retrieve_subquery(steps[i], toolset, indexes, provider, config, reranker);
    for (ScoredTool& scored : sub.ranked) {
      scored.subquery_index = sub.index;
    }
    normalize_subquery_tail(sub.ranked, config.epsilon);
    result.subqueries.push_back(std::move(sub));
  }
  result.final_top_k = assemble_top_k(result.subqueries, config.top_k);
  return result;
}

std::string MockSelectionAgent::select(const std::string& query, const std::string& step,
                                       const std::vector<ToolSpec>& candidates) {
  (void)query;
  if (candidates.empty()) {
    return "None";
  }
  std::string best_name;
  double best_score = 0.0;
  bool first = true;
  for (const ToolSpec& candidate : candidates) {
    const double s = reranker_.score(step, candidate);
    if (first || s > best_score) {
      best_score = s;
      best_name = candidate.name;
      first = false;
    }
  }
  return best_name;
}

SelectionResult select_tools(const QueryRecord& record, const RetrievalResult& retrieved,
                             const Toolset& toolset, SelectionAgent& agent) {
  if (retrieved.final_top_k.empty()) {
    throw InputError("select_tools: retrieval produced no candidates for " + record.query_id);
  }
  std::vector<ToolSpec> candidates;
  candidates.reserve(retrieved.final_top_k.size());
  for (const std::string& id : retrieved.final_top_k) {
    candidates.push_back(toolset.at(id));
  }
  std::vector<std::string> steps = record.subqueries;
  if (steps.empty()) {
    steps.push_back(record.query);
  }
  SelectionResult result;
  result.query_id = record.query_id;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string name = agent.select(record.query, steps[i], candidates);
    if (name == "None") {
      continue;
    }
    const ToolSpec* match = nullptr;
    for (const ToolSpec& candidate : candidates) {
      if (candidate.name == name) {
        match = &candidate;
        break;
      }
    }
    if (match == nullptr) {
      result.hallucinations.push_back(HallucinationRecord{static_cast<int>(i), name});
      continue;
    }
    if (std::find(result.selected.begin(), result.selected.end(), match->id) ==
        result.selected.end()) {
      result.selected.push_back(match->id);
    }
  }
  return result;
}

// ---- serialization ----

std::string retrieval_result_to_json(const RetrievalResult& result) {
  json subqueries = json::array();
  for (const SubqueryResult& sub : result.subqueries) {
    json ranked = json::array();
    for (const ScoredTool& scored : sub.ranked) {
      json entry{
          {"s_dense", scored.s_dense},
          {"s_hybrid", scored.s_hybrid},
          {"s_sparse", scored.s_sparse},
          {"tool_id", scored.tool_id},
      };
      if (scored.s_rerank) {
        entry["s_rerank"] = *scored.s_rerank;
      }
      if (scored.s_norm) {
        entry["s_norm"] = *scored.s_norm;
      }
      ranked.push_back(std::move(entry));
    }
    subqueries.push_back(json{{"index", sub.index}, {"ranked", std::move(ranked)}});
  }
  json doc{
      {"final_top_k", result.final_top_k},
      {"query_id", result.query_id},
      {"subqueries", std::move(subqueries)},
  };
  return doc.dump();
}

RetrievalResult parse_retrieval_result_json(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("retrieval result: ") + ex.what());
  }
  RetrievalResult result;
  try {
    result.query_id = doc.at("query_id").get<std::string>();
    result.final_top_k = doc.at("final_top_k").get<std::vector<std::string>>();
    for (const json& sub_json : doc.at("subqueries")) {
      SubqueryResult sub;
      sub.index = sub_json.at("index").get<int>();
      for (const json& entry : sub_json.at("ranked")) {
        ScoredTool scored;
        scored.tool_id = entry.at("tool_id").get<std::string>();
        scored.s_sparse = entry.at("s_sparse").get<double>();
        scored.s_dense = entry.at("s_dense").get<double>();
        scored.s_hybrid = entry.at("s_hybrid").get<double>();
        if (entry.contains("s_rerank")) {
          scored.s_rerank = entry["s_rerank"].get<double>();
        }
        if (entry.contains("s_norm")) {
          scored.s_norm = entry["s_norm"].get<double>();
        }
        scored.subquery_index = sub.index;
        scored.rank_in_subquery = static_cast<int>(sub.ranked.size()) + 1;
        sub.ranked.push_back(std::move(scored));
      }
      result.subqueries.push_back(std::move(sub));
    }
  } catch (const json::exception& ex) {
    throw SchemaMismatch(std::string("retrieval result: ") + ex.what());
  }
  return result;
}

std::string selection_result_to_json(const SelectionResult& result) {
  json hallucinations = json::array();
  for (const HallucinationRecord& record : result.hallucinations) {
    hallucinations.push_back(
        json{{"returned_name", record.returned_name}, {"subquery_index", record.subquery_index}});
  }
  json doc{
      {"hallucinations", std::move(hallucinations)},
      {"query_id", result.query_id},
      {"selected", result.selected},
  };
  return doc.dump();
}

SelectionResult parse_selection_result_json(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("selection result: ") + ex.what());
  }
  SelectionResult result;
  try {
    result.query_id = doc.at("query_id").get<std::string>();
    result.selected = doc.at("selected").get<std::vector<std::string>>();
    if (doc.contains("hallucinations")) {
      for (const json& entry : doc["hallucinations"]) {
        result.hallucinations.push_back(HallucinationRecord{
            entry.at("subquery_index").get<int>(), entry.at("returned_name").get<std::string>()});
      }
    }
  } catch (const json::exception& ex) {
    throw SchemaMismatch(std::string("selection result: ") + ex.what());
  }
  return result;
}

}  // namespace toolfuse
