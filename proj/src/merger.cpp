#include "toolfuse/merger.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

namespace toolfuse {

using json = nlohmann::json;

PairClassifier::Result RulePairClassifier::classify(const ToolSpec& target,
                                                    const ToolSpec& candidate) {
  if (table_.names_equivalent(target.name, candidate.name)) {
    return {true, "name tokens match under synonym table"};
  }
  return {false, "name tokens differ"};
}

Verdict RuleClusterValidator::validate(const std::vector<ToolSpec>& members) {
  // Group members by canonical name key; one group -> MERGE_OK, else split.
  std::vector<std::vector<std::string>> groups;
  std::vector<std::vector<std::string>> keys;
  for (const ToolSpec& member : members) {
    auto key = table_.name_key(member.name);
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      groups.push_back({member.id});
    } else {
      groups[static_cast<std::size_t>(it - keys.begin())].push_back(member.id);
    }
  }
  Verdict verdict;
  if (groups.size() <= 1) {
    verdict.kind = Verdict::Kind::MergeOk;
    verdict.reason = "all member names share one token multiset";
  } else {
    verdict.kind = Verdict::Kind::MergeBad;
    verdict.sub_clusters = std::move(groups);
    verdict.reason = "member names split into " + std::to_string(verdict.sub_clusters.size()) +
                     " token groups";
  }
  return verdict;
}

ToolSpec MockDocMerger::merge(const ToolSpec& representative,
                              const std::vector<ToolSpec>& members) {
  ToolSpec merged = representative;
  std::vector<std::string> descriptions;
  for (const ToolSpec& member : members) {
    if (std::find(descriptions.begin(), descriptions.end(), member.description) ==
        descriptions.end()) {
      descriptions.push_back(member.description);
    }
  }
  std::string joined;
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    if (i > 0) {
      joined += " | ";
    }
    joined += descriptions[i];
  }
  merged.description = joined;
  return merged;
}

std::vector<CandidatePair> generate_candidates(const EmbeddingMatrix& matrix,
                                               const MergerConfig& config) {
  if (config.candidate_k < 1 || config.cosine_threshold <= 0.0 ||
      config.cosine_threshold >= 1.0) {
    throw InputError("merger config: candidate_k >= 1 and 0 < cosine_threshold < 1 required");
  }
  const std::size_t n = matrix.rows();
  std::vector<CandidatePair> pairs;
  if (n < 2) {
    return pairs;
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(config.candidate_k), n - 1);
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [neighbor_id, cosine] : top_k_neighbors(matrix, i, k)) {
      if (cosine < config.cosine_threshold) {
        continue;
      }
      const std::string& self_id = matrix.tool_ids()[i];
      CandidatePair pair;
      pair.a = std::min(self_id, neighbor_id);
      pair.b = std::max(self_id, neighbor_id);
      pair.cosine = cosine;
      if (seen.emplace(pair.a, pair.b).second) {
        pairs.push_back(std::move(pair));
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const CandidatePair& x, const CandidatePair& y) {
    if (x.cosine != y.cosine) {
      return x.cosine > y.cosine;
    }
    if (x.a != y.a) {
      return x.a < y.a;
    }
    return x.b < y.b;
  });
  return pairs;
}

OverlapGraph classify_pairs(const std::vector<CandidatePair>& pairs, const Toolset& toolset,
                            PairClassifier& classifier, std::size_t max_workers) {
  OverlapGraph graph;
  graph.nodes.reserve(toolset.size());
  for (const ToolSpec& tool : toolset.tools()) {
    graph.nodes.push_back(tool.id);
  }
  for (const CandidatePair& pair : pairs) {
    if (!toolset.contains(pair.a) || !toolset.contains(pair.b)) {
      throw InputError("classify_pairs: pair references unknown tool " + pair.a + "/" + pair.b);
    }
  }
  auto results = parallel_map(pairs.size(), max_workers, [&](std::size_t i) {
    const CandidatePair& pair = pairs[i];
    // target = lexicographically smaller id, so each unordered pair is
    // classified exactly once and the graph is well-defined.
    return classifier.classify(toolset.at(pair.a), toolset.at(pair.b));
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (results[i].equivalent) {
      graph.edges.push_back(pairs[i]);
    }
  }
  return graph;
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];  // path compression
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) {
      return;
    }
    if (rank_[a] < rank_[b]) {
      std::swap(a, b);
    }
    parent_[b] = a;
    if (rank_[a] == rank_[b]) {
      ++rank_[a];
    }
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

}  // namespace

std::vector<Cluster> connected_components(const OverlapGraph& graph) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    index.emplace(graph.nodes[i], i);
  }
  UnionFind uf(graph.nodes.size());
  for (const CandidatePair& edge : graph.edges) {
    auto a = index.find(edge.a);
    auto b = index.find(edge.b);
    if (a == index.end() || b == index.end()) {
      throw InputError("connected_components: edge references unknown node");
    }
    uf.unite(a->second, b->second);
  }
  std::map<std::size_t, std::vector<std::string>> groups;
  for (const auto& [id, i] : index) {
    groups[uf.find(i)].push_back(id);
  }
  std::vector<Cluster> clusters;
  for (auto& [root, members] : groups) {
    (void)root;
    if (members.size() < 2) {
      continue;
    }
    std::sort(members.begin(), members.end());
    clusters.push_back(Cluster{std::move(members), ""});
  }
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& x, const Cluster& y) {
    return x.members.front() < y.members.front();
  });
  return clusters;
}

std::string choose_representative(const Cluster& cluster, const Toolset& toolset) {
  if (cluster.members.empty()) {
    throw InputError("choose_representative: empty cluster");
  }
  const std::string* best = nullptr;
  const ToolSpec* best_tool = nullptr;
  for (const std::string& id : cluster.members) {
    const ToolSpec& tool = toolset.at(id);
    if (!best) {
      best = &id;
      best_tool = &tool;
      continue;
    }
    const bool better = tool.name.size() != best_tool->name.size()
                            ? tool.name.size() < best_tool->name.size()
                            : (tool.name != best_tool->name ? tool.name < best_tool->name
                                                            : tool.id < best_tool->id);
    if (better) {
      best = &id;
      best_tool = &tool;
    }
  }
  return *best;
}

std::vector<Cluster> autocorrect(const std::vector<Cluster>& clusters, const Toolset& toolset,
                                 ClusterValidator& validator, std::size_t max_workers,
                                 std::vector<AuditRecord>* audit_log) {
  auto verdicts = parallel_map(clusters.size(), max_workers, [&](std::size_t i) {
    std::vector<ToolSpec> members;
    members.reserve(clusters[i].members.size());
    for (const std::string& id : clusters[i].members) {
      members.push_back(toolset.at(id));
    }
    return validator.validate(members);
  });

  std::vector<Cluster> corrected;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const Cluster& cluster = clusters[i];
    const Verdict& verdict = verdicts[i];
    AuditRecord record;
    record.members_before = cluster.members;
    if (verdict.kind == Verdict::Kind::MergeOk) {
      record.verdict = "MERGE_OK";
      record.reason = verdict.reason;
      corrected.push_back(cluster);
    } else {
      record.verdict = "MERGE_BAD";
      record.reason = verdict.reason;
      record.sub_clusters = verdict.sub_clusters;
      const std::set<std::string> parent(cluster.members.begin(), cluster.members.end());
      std::set<std::string> assigned;
      for (const auto& sub : verdict.sub_clusters) {
        for (const std::string& id : sub) {
          if (!parent.count(id)) {
            throw IntegrityViolation("autocorrect: sub-cluster member " + id +
                                     " is outside its parent cluster");
          }
          if (!assigned.insert(id).second) {
            throw IntegrityViolation("autocorrect: tool " + id +
                                     " appears in two sub-clusters");
          }
        }
      }
      for (const auto& sub : verdict.sub_clusters) {
        if (sub.size() < 2) {
          continue;  // singleton survives unmerged
        }
        Cluster split;
        split.members = sub;
        std::sort(split.members.begin(), split.members.end());
        corrected.push_back(std::move(split));
      }
    }
    if (audit_log) {
      audit_log->push_back(std::move(record));
    }
  }
  return corrected;
}

ToolSpec synthesize_merged_doc(const Cluster& cluster, const Toolset& toolset,
                               DocMerger& merger) {
  if (cluster.representative.empty()) {
    throw InputError("synthesize_merged_doc: cluster has no representative");
  }
  const ToolSpec& representative = toolset.at(cluster.representative);
  if (cluster.members.size() == 1) {
    return representative;
  }
  std::vector<ToolSpec> members;
  members.reserve(cluster.members.size());
  for (const std::string& id : cluster.members) {
    members.push_back(toolset.at(id));
  }
  ToolSpec merged = merger.merge(representative, members);
  if (merged.signature.empty() && merged.description.empty()) {
    throw EmptySynthesis("doc merger produced a blank spec for " + representative.id);
  }
  // Identity and name always stay with the representative.
  merged.id = representative.id;
  merged.name = representative.name;
  return merged;
}

MergePlan build_merge_plan(const Toolset& toolset, const EmbeddingMatrix& matrix,
                           const MergerConfig& config, PairClassifier& classifier,
                           ClusterValidator& validator, DocMerger& doc_merger) {
  MergePlan plan;
  auto pairs = generate_candidates(matrix, config);
  auto graph = classify_pairs(pairs, toolset, classifier, config.max_workers);
  auto clusters = connected_components(graph);
  if (config.autocorrect_enabled) {
    clusters = autocorrect(clusters, toolset, validator, config.max_workers, &plan.audit_log);
  }
  for (Cluster& cluster : clusters) {
    cluster.representative = choose_representative(cluster, toolset);
  }
  plan.clusters = std::move(clusters);

  for (const ToolSpec& tool : toolset.tools()) {
    plan.phi[tool.id] = tool.id;
  }
  for (const Cluster& cluster : plan.clusters) {
    for (const std::string& id : cluster.members) {
      plan.phi[id] = cluster.representative;
    }
    plan.merged_docs[cluster.representative] =
        synthesize_merged_doc(cluster, toolset, doc_merger);
  }
  check_plan_integrity(plan, toolset);
  return plan;
}

Toolset apply_merge(const Toolset& toolset, const MergePlan& plan) {
  std::set<std::string> pruned;
  std::map<std::string, const ToolSpec*> replacements;
  for (const Cluster& cluster : plan.clusters) {
    if (!toolset.contains(cluster.representative)) {
      throw PlanMismatch("apply_merge: plan references unknown tool " + cluster.representative);
    }
    for (const std::string& id : cluster.members) {
      if (!toolset.contains(id)) {
        throw PlanMismatch("apply_merge: plan references unknown tool " + id);
      }
      if (id != cluster.representative) {
        pruned.insert(id);
      }
    }
    auto doc = plan.merged_docs.find(cluster.representative);
    if (doc != plan.merged_docs.end()) {
      replacements.emplace(cluster.representative, &doc->second);
    }
  }
  for (const auto& [from, to] : plan.phi) {
    if (!toolset.contains(from) || !toolset.contains(to)) {
      throw PlanMismatch("apply_merge: phi references unknown tool " + from + " -> " + to);
    }
  }
  std::vector<ToolSpec> kept;
  for (const ToolSpec& tool : toolset.tools()) {
    if (pruned.count(tool.id)) {
      continue;
    }
    auto replacement = replacements.find(tool.id);
    kept.push_back(replacement == replacements.end() ? tool : *replacement->second);
  }
  return Toolset(std::move(kept), toolset.source_label());
}

Benchmark relabel_benchmark(const Benchmark& benchmark, const MergePlan& plan) {
  std::vector<QueryRecord> records;
  records.reserve(benchmark.size());
  for (const QueryRecord& record : benchmark.records()) {
    QueryRecord relabeled = record;
    relabeled.gold_tools.clear();
    for (const std::string& gold : record.gold_tools) {
      auto it = plan.phi.find(gold);
      if (it == plan.phi.end()) {
        throw UnknownGoldTool(record.query_id, gold);
      }
      if (std::find(relabeled.gold_tools.begin(), relabeled.gold_tools.end(), it->second) ==
          relabeled.gold_tools.end()) {
        relabeled.gold_tools.push_back(it->second);
      }
    }
    records.push_back(std::move(relabeled));
  }
  return Benchmark(std::move(records));
}

void check_plan_integrity(const MergePlan& plan, const Toolset& toolset) {
  std::set<std::string> kept;
  std::set<std::string> pruned;
  std::set<std::string> clustered;
  for (const Cluster& cluster : plan.clusters) {
    if (cluster.representative.empty()) {
      throw IntegrityViolation("integrity: cluster without representative");
    }
    if (std::find(cluster.members.begin(), cluster.members.end(), cluster.representative) ==
        cluster.members.end()) {
      throw IntegrityViolation("integrity: representative " + cluster.representative +
                               " not a member of its cluster");
    }
    for (const std::string& id : cluster.members) {
      if (!clustered.insert(id).second) {
        throw IntegrityViolation("integrity: tool " + id + " appears in two clusters");
      }
      if (id == cluster.representative) {
        kept.insert(id);
      } else {
        pruned.insert(id);
      }
    }
  }
  for (const std::string& id : pruned) {
    if (kept.count(id)) {
      throw IntegrityViolation("integrity: tool " + id + " is both kept and pruned");
    }
  }
  for (const ToolSpec& tool : toolset.tools()) {
    auto it = plan.phi.find(tool.id);
    if (it == plan.phi.end()) {
      throw IntegrityViolation("integrity: phi is not total, missing " + tool.id);
    }
    const std::string& target = it->second;
    if (pruned.count(target)) {
      throw IntegrityViolation("integrity: phi maps " + tool.id + " to pruned tool " + target);
    }
    auto target_it = plan.phi.find(target);
    if (target_it == plan.phi.end() || target_it->second != target) {
      throw IntegrityViolation("integrity: phi is not idempotent at " + tool.id);
    }
  }
}

namespace {

json cluster_to_json(const Cluster& cluster) {
  // Verdict per cluster lives in the audit log; surviving clusters are
  // implicitly MERGE_OK.
  return json{
      {"members", cluster.members},
      {"representative", cluster.representative},
      {"verdict", "MERGE_OK"},
  };
}

json tool_to_json(const ToolSpec& tool) {
  return json{
      {"description", tool.description},
      {"id", tool.id},
      {"name", tool.name},
      {"signature", tool.signature},
  };
}

ToolSpec tool_from_json(const json& doc) {
  ToolSpec tool;
  tool.id = doc.at("id").get<std::string>();
  tool.name = doc.at("name").get<std::string>();
  tool.signature = doc.at("signature").get<std::string>();
  tool.description = doc.at("description").get<std::string>();
  return tool;
}

}  // namespace

std::string merge_plan_to_json(const MergePlan& plan) {
  json clusters = json::array();
  for (const Cluster& cluster : plan.clusters) {
    clusters.push_back(cluster_to_json(cluster));
  }
  json audit = json::array();
  for (const AuditRecord& record : plan.audit_log) {
    audit.push_back(json{
        {"members_before", record.members_before},
        {"reason", record.reason},
        {"sub_clusters", record.sub_clusters},
        {"verdict", record.verdict},
    });
  }
  json docs = json::object();
  for (const auto& [id, spec] : plan.merged_docs) {
    docs[id] = tool_to_json(spec);
  }
  json doc{
      {"audit", audit},
      {"clusters", clusters},
      {"merged_docs", docs},
      {"phi", plan.phi},
  };
  return doc.dump(2) + "\n";
}

MergePlan parse_merge_plan_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("merge plan: ") + ex.what());
  }
  MergePlan plan;
  try {
    for (const json& entry : doc.at("clusters")) {
      Cluster cluster;
      cluster.members = entry.at("members").get<std::vector<std::string>>();
      cluster.representative = entry.at("representative").get<std::string>();
      plan.clusters.push_back(std::move(cluster));
    }
    plan.phi = doc.at("phi").get<std::map<std::string, std::string>>();
    for (const auto& [id, spec] : doc.at("merged_docs").items()) {
      plan.merged_docs.emplace(id, tool_from_json(spec));
    }
    if (doc.contains("audit")) {
      for (const json& entry : doc["audit"]) {
        AuditRecord record;
        record.members_before = entry.at("members_before").get<std::vector<std::string>>();
        record.verdict = entry.at("verdict").get<std::string>();
        record.reason = entry.value("reason", "");
        record.sub_clusters =
            entry.value("sub_clusters", std::vector<std::vector<std::string>>{});
        plan.audit_log.push_back(std::move(record));
      }
    }
  } catch (const json::exception& ex) {
    throw ParseError(std::string("merge plan: ") + ex.what());
  }
  return plan;
}

void save_merge_plan(const MergePlan& plan, const std::string& path) {
  write_file(path, merge_plan_to_json(plan));
}

MergePlan load_merge_plan(const std::string& path) {
  return parse_merge_plan_json(read_file(path));
}

}  // namespace toolfuse
