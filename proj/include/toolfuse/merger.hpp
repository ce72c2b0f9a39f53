#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "toolfuse/core.hpp"
#include "toolfuse/embedding.hpp"
#include "toolfuse/text.hpp"

namespace toolfuse {

struct MergerConfig {
  int candidate_k = 30;           // top cosine neighbors per tool
  double cosine_threshold = 0.82; // pairs below this never become candidates
  bool autocorrect_enabled = true;
  std::size_t max_workers = 4;    // bound on concurrent classifier/validator calls
};

// Unordered candidate pair, stored with a < b lexicographically.
struct CandidatePair {
  std::string a;
  std::string b;
  double cosine = 0.0;

  bool operator==(const CandidatePair&) const = default;
};

// Undirected overlap graph over all tool ids; an edge means the classifier
// called the pair semantically equivalent.
struct OverlapGraph {
  std::vector<std::string> nodes;
  std::vector<CandidatePair> edges;
};

struct Cluster {
  std::vector<std::string> members;  // sorted ascending
  std::string representative;        // empty until chosen
};

// Audit verdict for one cluster.
struct Verdict {
  enum class Kind { MergeOk, MergeBad };
  Kind kind = Kind::MergeOk;
  std::vector<std::vector<std::string>> sub_clusters;  // MergeBad only
  std::string reason;
};

struct AuditRecord {
  std::vector<std::string> members_before;
  std::string verdict;  // "MERGE_OK" | "MERGE_BAD"
  std::string reason;
  std::vector<std::vector<std::string>> sub_clusters;  // as returned, MERGE_BAD only
};

// The full merge outcome: clusters, the total idempotent mapping phi from
// every tool to its surviving representative, synthesized docs for merged
// representatives, and the audit trail.
struct MergePlan {
  std::vector<Cluster> clusters;
  std::map<std::string, std::string> phi;
  std::map<std::string, ToolSpec> merged_docs;
  std::vector<AuditRecord> audit_log;
};

// Binary semantic-equivalence classifier over a tool pair (target, candidate).
class PairClassifier {
 public:
  struct Result {
    bool equivalent = false;
    std::string rationale;
  };
  virtual ~PairClassifier() = default;
  virtual Result classify(const ToolSpec& target, const ToolSpec& candidate) = 0;
};

// Audits a proposed cluster; MergeBad comes with a refined split.
class ClusterValidator {
 public:
  virtual ~ClusterValidator() = default;
  virtual Verdict validate(const std::vector<ToolSpec>& members) = 0;
};

// Synthesizes the canonical signature/description for a merged cluster.
class DocMerger {
 public:
  virtual ~DocMerger() = default;
  virtual ToolSpec merge(const ToolSpec& representative, const std::vector<ToolSpec>& members) = 0;
};

// Deterministic rule doubles used by tests and mock mode. Two tools count as
// equivalent when their name token multisets match under the synonym table.
class RulePairClassifier : public PairClassifier {
 public:
  explicit RulePairClassifier(SynonymTable table = SynonymTable::builtin())
      : table_(std::move(table)) {}
  Result classify(const ToolSpec& target, const ToolSpec& candidate) override;

 private:
  SynonymTable table_;
};

class RuleClusterValidator : public ClusterValidator {
 public:
  explicit RuleClusterValidator(SynonymTable table = SynonymTable::builtin())
      : table_(std::move(table)) {}
  Verdict validate(const std::vector<ToolSpec>& members) override;

 private:
  SynonymTable table_;
};

// Keeps the representative's id/name/signature; joins the distinct member
// descriptions with " | ".
class MockDocMerger : public DocMerger {
 public:
  ToolSpec merge(const ToolSpec& representative, const std::vector<ToolSpec>& members) override;
};

// ---- pipeline operations ----

// Top-candidate_k neighbors per tool, thresholded, deduplicated, sorted by
// (cosine desc, a asc, b asc).
std::vector<CandidatePair> generate_candidates(const EmbeddingMatrix& matrix,
                                               const MergerConfig& config);

// Classifies each unordered pair exactly once (target = smaller id).
OverlapGraph classify_pairs(const std::vector<CandidatePair>& pairs, const Toolset& toolset,
                            PairClassifier& classifier, std::size_t max_workers = 4);

// Connected components via union-find; singletons dropped; components ordered
// by smallest member id. Representatives not yet chosen.
std::vector<Cluster> connected_components(const OverlapGraph& graph);

// Shortest name wins; ties break lexicographically (then by id).
std::string choose_representative(const Cluster& cluster, const Toolset& toolset);

// One validation pass per cluster; MergeBad splits, singleton sub-clusters
// drop out of the merge.
std::vector<Cluster> autocorrect(const std::vector<Cluster>& clusters, const Toolset& toolset,
                                 ClusterValidator& validator, std::size_t max_workers = 4,
                                 std::vector<AuditRecord>* audit_log = nullptr);

// Synthesized spec for a cluster; singletons pass through unchanged.
ToolSpec synthesize_merged_doc(const Cluster& cluster, const Toolset& toolset, DocMerger& merger);

MergePlan build_merge_plan(const Toolset& toolset, const EmbeddingMatrix& matrix,
                           const MergerConfig& config, PairClassifier& classifier,
                           ClusterValidator& validator, DocMerger& doc_merger);

// Kept tools in original order, cluster representatives replaced by their
// synthesized specs.
Toolset apply_merge(const Toolset& toolset, const MergePlan& plan);

// Gold ids mapped through phi; duplicates collapse keeping first occurrence.
Benchmark relabel_benchmark(const Benchmark& benchmark, const MergePlan& plan);

// Throws IntegrityViolation unless: clusters disjoint, representatives are
// members, phi is total over the toolset, idempotent, maps into the kept set,
// and no tool is both kept and pruned.
void check_plan_integrity(const MergePlan& plan, const Toolset& toolset);

// Serialization: {"clusters": [...], "phi": {...}, "merged_docs": {...},
// "audit": [...]}.
std::string merge_plan_to_json(const MergePlan& plan);
MergePlan parse_merge_plan_json(const std::string& json_text);
void save_merge_plan(const MergePlan& plan, const std::string& path);
MergePlan load_merge_plan(const std::string& path);

}  // namespace toolfuse
