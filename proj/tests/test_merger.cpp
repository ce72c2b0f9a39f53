#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <queue>
#include <random>
#include <set>

#include "support/fixtures.hpp"
#include "toolfuse/llm_gateway.hpp"
#include "toolfuse/merger.hpp"

using namespace toolfuse;
using namespace toolfuse::testing;

namespace {

class ConstantClassifier : public PairClassifier {
 public:
  explicit ConstantClassifier(bool answer) : answer_(answer) {}
  Result classify(const ToolSpec&, const ToolSpec&) override { return {answer_, "fixed"}; }

 private:
  bool answer_;
};

class ConstantValidator : public ClusterValidator {
 public:
  Verdict validate(const std::vector<ToolSpec>&) override {
    Verdict verdict;
    verdict.kind = Verdict::Kind::MergeOk;
    return verdict;
  }
};

class ScriptedValidator : public ClusterValidator {
 public:
  explicit ScriptedValidator(Verdict verdict) : verdict_(std::move(verdict)) {}
  Verdict validate(const std::vector<ToolSpec>&) override { return verdict_; }

 private:
  Verdict verdict_;
};

// Independent BFS partition used as the components oracle.
std::vector<std::vector<std::string>> bfs_components(const OverlapGraph& graph) {
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const std::string& node : graph.nodes) {
    adjacency[node];
  }
  for (const CandidatePair& edge : graph.edges) {
    adjacency[edge.a].push_back(edge.b);
    adjacency[edge.b].push_back(edge.a);
  }
  std::set<std::string> visited;
  std::vector<std::vector<std::string>> components;
  for (const auto& [start, unused] : adjacency) {
    (void)unused;
    if (visited.count(start)) {
      continue;
    }
    std::vector<std::string> component;
    std::queue<std::string> frontier;
    frontier.push(start);
    visited.insert(start);
    while (!frontier.empty()) {
      std::string node = frontier.front();
      frontier.pop();
      component.push_back(node);
      for (const std::string& next : adjacency[node]) {
        if (visited.insert(next).second) {
          frontier.push(next);
        }
      }
    }
    if (component.size() >= 2) {
      std::sort(component.begin(), component.end());
      components.push_back(std::move(component));
    }
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return components;
}

Toolset two_identical_tools() {
  return Toolset({{"a1", "same_tool", "same_tool(x)", "Shared description for both entries."},
                  {"a2", "same_tool", "same_tool(x)", "Shared description for both entries."}},
                 "pair");
}

}  // namespace

TEST_CASE("generate_candidates keeps thresholded deduplicated pairs") {
  MockEmbeddingProvider provider(128);
  MergerConfig config;

  Toolset identical = two_identical_tools();
  auto pairs = generate_candidates(embed_toolset(identical, provider), config);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].a == "a1");
  CHECK(pairs[0].b == "a2");
  CHECK(pairs[0].cosine == doctest::Approx(1.0).epsilon(1e-9));

  Toolset far({{"", "alpha_one", "alpha_one(x)", "Completely different wording here."},
               {"", "beta_two", "beta_two(y)", "Nothing shared with the other entry."}},
              "far");
  CHECK(generate_candidates(embed_toolset(far, provider), config).empty());
}

TEST_CASE("generate_candidates equals the quadratic threshold oracle") {
  Toolset toolset = planted_toolset();
  std::vector<ToolSpec> twenty(toolset.tools().begin(), toolset.tools().begin() + 20);
  Toolset subset(std::move(twenty), "subset");
  MockEmbeddingProvider provider(256);
  EmbeddingMatrix matrix = embed_toolset(subset, provider);
  MergerConfig config;

  auto got = generate_candidates(matrix, config);

  std::vector<CandidatePair> oracle;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    for (std::size_t j = i + 1; j < matrix.rows(); ++j) {
      const double cosine = matrix.cosine(i, j);
      if (cosine >= config.cosine_threshold) {
        CandidatePair pair;
        pair.a = std::min(matrix.tool_ids()[i], matrix.tool_ids()[j]);
        pair.b = std::max(matrix.tool_ids()[i], matrix.tool_ids()[j]);
        pair.cosine = cosine;
        oracle.push_back(pair);
      }
    }
  }
  std::sort(oracle.begin(), oracle.end(), [](const CandidatePair& x, const CandidatePair& y) {
    if (x.cosine != y.cosine) {
      return x.cosine > y.cosine;
    }
    if (x.a != y.a) {
      return x.a < y.a;
    }
    return x.b < y.b;
  });
  REQUIRE(got.size() == oracle.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].a == oracle[i].a);
    CHECK(got[i].b == oracle[i].b);
    CHECK(got[i].cosine == doctest::Approx(oracle[i].cosine).epsilon(1e-12));
  }
}

TEST_CASE("classify_pairs builds the overlap graph from classifier votes") {
  Toolset toolset({{"", "a", "a(x)", "da"}, {"", "b", "b(x)", "db"}, {"", "c", "c(x)", "dc"}},
                  "tri");
  std::vector<CandidatePair> pairs = {{"a", "b", 0.9}, {"a", "c", 0.9}, {"b", "c", 0.9}};

  ConstantClassifier never(false);
  CHECK(classify_pairs(pairs, toolset, never).edges.empty());

  ConstantClassifier always(true);
  OverlapGraph graph = classify_pairs(pairs, toolset, always);
  CHECK(graph.edges.size() == 3);
  auto clusters = connected_components(graph);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].members == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("rule classifier recovers exactly the planted edges") {
  Toolset toolset = planted_toolset();
  MockEmbeddingProvider provider(256);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  MergerConfig config;
  RulePairClassifier classifier;

  OverlapGraph graph = classify_pairs(generate_candidates(matrix, config), toolset, classifier);

  // Every edge stays inside one topic triple.
  std::map<std::string, std::size_t> topic_of;
  const auto& topics = planted_topics();
  for (std::size_t t = 0; t < topics.size(); ++t) {
    for (const std::string& name : topics[t].names) {
      topic_of[name] = t;
    }
  }
  for (const CandidatePair& edge : graph.edges) {
    CHECK(topic_of.at(edge.a) == topic_of.at(edge.b));
  }
  // And every triple is one connected component.
  auto clusters = connected_components(graph);
  REQUIRE(clusters.size() == topics.size());
  for (const Cluster& cluster : clusters) {
    CHECK(cluster.members.size() == 3);
    CHECK(topic_of.at(cluster.members[0]) == topic_of.at(cluster.members[2]));
  }
}

namespace {

class ThrowingClassifier : public PairClassifier {
 public:
  Result classify(const ToolSpec&, const ToolSpec&) override {
    throw ClassifierError("model unavailable");
  }
};

}  // namespace

TEST_CASE("generate_candidates validates its configuration") {
  MockEmbeddingProvider provider(64);
  EmbeddingMatrix matrix = embed_toolset(two_identical_tools(), provider);
  MergerConfig bad_k;
  bad_k.candidate_k = 0;
  CHECK_THROWS_AS(generate_candidates(matrix, bad_k), InputError);
  MergerConfig bad_theta;
  bad_theta.cosine_threshold = 1.5;
  CHECK_THROWS_AS(generate_candidates(matrix, bad_theta), InputError);
}

TEST_CASE("classifier failures propagate out of classify_pairs") {
  Toolset toolset({{"", "a", "a(x)", "da"}, {"", "b", "b(x)", "db"}}, "two");
  std::vector<CandidatePair> pairs = {{"a", "b", 0.95}};
  ThrowingClassifier broken;
  CHECK_THROWS_AS(classify_pairs(pairs, toolset, broken), ClassifierError);

  std::vector<CandidatePair> unknown = {{"a", "zz", 0.95}};
  RulePairClassifier rule;
  CHECK_THROWS_AS(classify_pairs(unknown, toolset, rule), InputError);
}

TEST_CASE("connected_components matches a BFS oracle on random graphs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    OverlapGraph graph;
    for (std::size_t i = 0; i < n; ++i) {
      graph.nodes.push_back("n" + std::to_string(100 + i));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng() % 10 == 0) {
          graph.edges.push_back({graph.nodes[i], graph.nodes[j], 0.9});
        }
      }
    }
    auto got = connected_components(graph);
    auto oracle = bfs_components(graph);
    REQUIRE(got.size() == oracle.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].members == oracle[i]);
    }
  }
}

TEST_CASE("connected_components edge cases") {
  OverlapGraph chain;
  chain.nodes = {"a", "b", "c", "d"};
  chain.edges = {{"a", "b", 0.9}, {"b", "c", 0.9}};
  auto clusters = connected_components(chain);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].members == std::vector<std::string>{"a", "b", "c"});

  OverlapGraph empty;
  empty.nodes = {"a", "b"};
  CHECK(connected_components(empty).empty());
}

TEST_CASE("choose_representative prefers the shortest name, then lexicographic") {
  Toolset toolset({{"", "calculate_triangle_area", "s", "d"},
                   {"", "calc_area_triangle", "s", "d"},
                   {"", "f_a", "s", "d"},
                   {"", "f_b", "s", "d"}},
                  "reps");
  Cluster pairwise{{"calc_area_triangle", "calculate_triangle_area"}, ""};
  CHECK(choose_representative(pairwise, toolset) == "calc_area_triangle");

  Cluster tie{{"f_a", "f_b"}, ""};
  CHECK(choose_representative(tie, toolset) == "f_a");
}

TEST_CASE("choose_representative on the documented triangle cluster") {
  Toolset toolset({{"", "calculate_area", "calculate_area(base, height, unit)", "d"},
                   {"", "calculate_triangle_area", "calculate_triangle_area(base, height)", "d"},
                   {"", "geometry_area_triangle", "geometry_area_triangle(base, height)", "d"},
                   {"", "calc_area_triangle", "calc_area_triangle(base, height)", "d"}},
                  "tri");
  Cluster cluster{{"calc_area_triangle", "calculate_area", "calculate_triangle_area",
                   "geometry_area_triangle"},
                  ""};
  CHECK(choose_representative(cluster, toolset) == "calculate_area");
}

TEST_CASE("autocorrect keeps MERGE_OK clusters and applies MERGE_BAD splits") {
  Toolset toolset({{"27", "final_velocity", "final_velocity(v, a, t)", "General acceleration."},
                   {"29", "calculate_final_speed", "calculate_final_speed(t)", "Free fall."},
                   {"31", "calculate_final_velocity", "calculate_final_velocity(v, a, t)",
                    "Constant acceleration."}},
                  "phys");
  std::vector<Cluster> clusters = {{{"27", "29", "31"}, ""}};

  ConstantValidator keep;
  auto kept = autocorrect(clusters, toolset, keep);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].members == std::vector<std::string>{"27", "29", "31"});

  Verdict split;
  split.kind = Verdict::Kind::MergeBad;
  split.sub_clusters = {{"27", "31"}, {"29"}};
  split.reason = "free fall differs";
  ScriptedValidator splitter(split);
  std::vector<AuditRecord> audit;
  auto corrected = autocorrect(clusters, toolset, splitter, 1, &audit);
  REQUIRE(corrected.size() == 1);  // singleton {29} leaves the merge
  CHECK(corrected[0].members == std::vector<std::string>{"27", "31"});
  REQUIRE(audit.size() == 1);
  CHECK(audit[0].verdict == "MERGE_BAD");
  CHECK(audit[0].sub_clusters.size() == 2);

  Verdict foreign;
  foreign.kind = Verdict::Kind::MergeBad;
  foreign.sub_clusters = {{"27", "99"}};
  ScriptedValidator bad(foreign);
  CHECK_THROWS_AS(autocorrect(clusters, toolset, bad), IntegrityViolation);

  Verdict overlapping;
  overlapping.kind = Verdict::Kind::MergeBad;
  overlapping.sub_clusters = {{"27", "29"}, {"29", "31"}};
  ScriptedValidator dup(overlapping);
  CHECK_THROWS_AS(autocorrect(clusters, toolset, dup), IntegrityViolation);
}

TEST_CASE("synthesize_merged_doc keeps identity and merges descriptions") {
  Toolset toolset({{"10", "calculate_area",
                    "calculate_area(base: int, height: int, unit: str = None)",
                    "Calculate the area of a right-angled triangle."},
                   {"95", "calc_area_triangle", "calc_area_triangle(base: int, height: int)",
                    "Calculate the area of a triangle."}},
                  "tri");
  MockDocMerger merger;

  Cluster singleton{{"10"}, "10"};
  ToolSpec unchanged = synthesize_merged_doc(singleton, toolset, merger);
  CHECK(unchanged == toolset.at("10"));

  Cluster pair{{"10", "95"}, "10"};
  ToolSpec merged = synthesize_merged_doc(pair, toolset, merger);
  CHECK(merged.id == "10");
  CHECK(merged.name == "calculate_area");
  // Representative signature carries its optional unit parameter.
  CHECK(merged.signature.find("unit") != std::string::npos);
  CHECK(merged.description.find("right-angled") != std::string::npos);
  CHECK(merged.description.find("area of a triangle") != std::string::npos);
}

TEST_CASE("build_merge_plan with no positive classifications is the identity") {
  Toolset toolset = two_identical_tools();
  MockEmbeddingProvider provider(128);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  MergerConfig config;
  ConstantClassifier never(false);
  ConstantValidator validator;
  MockDocMerger doc_merger;

  MergePlan plan = build_merge_plan(toolset, matrix, config, never, validator, doc_merger);
  CHECK(plan.clusters.empty());
  for (const ToolSpec& tool : toolset.tools()) {
    CHECK(plan.phi.at(tool.id) == tool.id);
  }
  Toolset merged = apply_merge(toolset, plan);
  CHECK(merged.size() == toolset.size());
  CHECK(merged.tools() == toolset.tools());
}

TEST_CASE("planted fixture merges 60 tools into exactly 20 representatives") {
  Toolset toolset = planted_toolset();
  REQUIRE(toolset.size() == 60);
  MockEmbeddingProvider provider(256);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  MergerConfig config;
  RulePairClassifier classifier;
  RuleClusterValidator validator;
  MockDocMerger doc_merger;

  MergePlan plan = build_merge_plan(toolset, matrix, config, classifier, validator, doc_merger);
  CHECK(plan.clusters.size() == 20);
  Toolset merged = apply_merge(toolset, plan);
  CHECK(merged.size() == 20);

  // phi is idempotent and lands in the kept set.
  std::set<std::string> kept;
  for (const ToolSpec& tool : merged.tools()) {
    kept.insert(tool.id);
  }
  for (const ToolSpec& tool : toolset.tools()) {
    const std::string& target = plan.phi.at(tool.id);
    CHECK(kept.count(target) == 1);
    CHECK(plan.phi.at(target) == target);
  }

  // Merging strictly shrinks the toolset whenever any edge exists.
  CHECK(merged.size() < toolset.size());
}

TEST_CASE("apply_merge prunes cluster members and validates the plan") {
  std::vector<ToolSpec> tools;
  for (int i = 0; i < 10; ++i) {
    tools.push_back(
        {"t" + std::to_string(i), "tool_" + std::to_string(i), "sig", "description"});
  }
  Toolset toolset(std::move(tools), "ten");
  MergePlan plan;
  for (const ToolSpec& tool : toolset.tools()) {
    plan.phi[tool.id] = tool.id;
  }
  plan.clusters.push_back(Cluster{{"t1", "t4", "t7"}, "t1"});
  plan.phi["t4"] = "t1";
  plan.phi["t7"] = "t1";
  plan.merged_docs["t1"] = ToolSpec{"t1", "tool_1", "sig", "merged description"};

  Toolset merged = apply_merge(toolset, plan);
  CHECK(merged.size() == 8);
  CHECK(merged.at("t1").description == "merged description");
  CHECK_FALSE(merged.contains("t4"));
  CHECK_FALSE(merged.contains("t7"));
  // Original relative order is preserved.
  CHECK(merged.tools()[0].id == "t0");
  CHECK(merged.tools()[1].id == "t1");
  CHECK(merged.tools()[2].id == "t2");

  MergePlan bogus = plan;
  bogus.clusters[0].members.push_back("missing");
  CHECK_THROWS_AS(apply_merge(toolset, bogus), PlanMismatch);
}

TEST_CASE("relabel_benchmark maps gold ids through phi and deduplicates") {
  Toolset toolset({{"", "a", "a(x)", "d"}, {"", "b", "b(x)", "d"}, {"", "r", "r(x)", "d"}}, "t");
  Benchmark benchmark({{"q1", "query", {}, {"a", "b"}}});

  MergePlan identity;
  identity.phi = {{"a", "a"}, {"b", "b"}, {"r", "r"}};
  Benchmark same = relabel_benchmark(benchmark, identity);
  CHECK(same.records()[0].gold_tools == std::vector<std::string>{"a", "b"});

  MergePlan collapse;
  collapse.phi = {{"a", "r"}, {"b", "r"}, {"r", "r"}};
  collapse.clusters.push_back(Cluster{{"a", "b", "r"}, "r"});
  Benchmark relabeled = relabel_benchmark(benchmark, collapse);
  CHECK(relabeled.records()[0].gold_tools == std::vector<std::string>{"r"});
  CHECK(relabeled.records()[0].query == "query");

  MergePlan partial;
  partial.phi = {{"a", "r"}};
  CHECK_THROWS_AS(relabel_benchmark(benchmark, partial), UnknownGoldTool);
}

TEST_CASE("relabeled planted benchmark resolves entirely in the merged toolset") {
  Toolset toolset = planted_toolset();
  Benchmark benchmark = planted_benchmark(toolset);
  MockEmbeddingProvider provider(256);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  MergerConfig config;
  RulePairClassifier classifier;
  RuleClusterValidator validator;
  MockDocMerger doc_merger;
  MergePlan plan = build_merge_plan(toolset, matrix, config, classifier, validator, doc_merger);
  Toolset merged = apply_merge(toolset, plan);
  Benchmark relabeled = relabel_benchmark(benchmark, plan);
  for (const QueryRecord& record : relabeled.records()) {
    for (const std::string& gold : record.gold_tools) {
      CHECK(merged.contains(gold));
    }
  }
}

TEST_CASE("check_plan_integrity rejects injected violations") {
  Toolset toolset({{"", "a", "s", "d"}, {"", "b", "s", "d"}, {"", "c", "s", "d"},
                   {"", "d", "s", "d"}},
                  "t");
  MergePlan good;
  good.phi = {{"a", "a"}, {"b", "a"}, {"c", "c"}, {"d", "c"}};
  good.clusters = {Cluster{{"a", "b"}, "a"}, Cluster{{"c", "d"}, "c"}};
  CHECK_NOTHROW(check_plan_integrity(good, toolset));

  MergePlan two_clusters = good;
  two_clusters.clusters[1].members = {"b", "c", "d"};  // b already clustered under a
  CHECK_THROWS_AS(check_plan_integrity(two_clusters, toolset), IntegrityViolation);

  MergePlan kept_and_pruned = good;
  kept_and_pruned.clusters[1] = Cluster{{"a", "c", "d"}, "c"};  // a kept by cluster 0, pruned here
  CHECK_THROWS_AS(check_plan_integrity(kept_and_pruned, toolset), IntegrityViolation);

  MergePlan not_total = good;
  not_total.phi.erase("d");
  CHECK_THROWS_AS(check_plan_integrity(not_total, toolset), IntegrityViolation);

  MergePlan not_idempotent = good;
  not_idempotent.phi["c"] = "a";  // d -> c -> a breaks idempotence
  CHECK_THROWS_AS(check_plan_integrity(not_idempotent, toolset), IntegrityViolation);

  MergePlan into_pruned = good;
  into_pruned.phi["c"] = "b";
  into_pruned.phi["d"] = "b";
  CHECK_THROWS_AS(check_plan_integrity(into_pruned, toolset), IntegrityViolation);
}

TEST_CASE("raising the threshold never increases the pruned count") {
  Toolset toolset = planted_toolset();
  MockEmbeddingProvider provider(256);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  RulePairClassifier classifier;
  RuleClusterValidator validator;
  MockDocMerger doc_merger;

  std::size_t previous = toolset.size();
  for (double theta : {0.77, 0.82, 0.86, 0.90}) {
    MergerConfig config;
    config.cosine_threshold = theta;
    MergePlan plan =
        build_merge_plan(toolset, matrix, config, classifier, validator, doc_merger);
    std::size_t pruned = 0;
    for (const Cluster& cluster : plan.clusters) {
      pruned += cluster.members.size() - 1;
    }
    CHECK(pruned <= previous);
    previous = pruned;
  }
}

TEST_CASE("merge plan JSON round-trips") {
  Toolset toolset = planted_toolset();
  Benchmark benchmark = planted_benchmark(toolset);
  (void)benchmark;
  MockEmbeddingProvider provider(256);
  EmbeddingMatrix matrix = embed_toolset(toolset, provider);
  MergerConfig config;
  RulePairClassifier classifier;
  RuleClusterValidator validator;
  MockDocMerger doc_merger;
  MergePlan plan = build_merge_plan(toolset, matrix, config, classifier, validator, doc_merger);

  MergePlan reloaded = parse_merge_plan_json(merge_plan_to_json(plan));
  CHECK(reloaded.phi == plan.phi);
  REQUIRE(reloaded.clusters.size() == plan.clusters.size());
  for (std::size_t i = 0; i < plan.clusters.size(); ++i) {
    CHECK(reloaded.clusters[i].members == plan.clusters[i].members);
    CHECK(reloaded.clusters[i].representative == plan.clusters[i].representative);
  }
  CHECK(reloaded.merged_docs.size() == plan.merged_docs.size());
  CHECK(reloaded.audit_log.size() == plan.audit_log.size());
  CHECK(merge_plan_to_json(reloaded) == merge_plan_to_json(plan));
}
