#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <functional>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "toolfuse/core.hpp"
#include "toolfuse/embedding.hpp"
#include "toolfuse/evalkit.hpp"
#include "toolfuse/llm_gateway.hpp"
#include "toolfuse/merger.hpp"
#include "toolfuse/retriever.hpp"
#include "toolfuse/text.hpp"

namespace {

using json = nlohmann::json;
using namespace toolfuse;

constexpr const char* kVersion = "0.1.0";

struct ProviderSettings {
  std::string mode = "mock";  // "mock" | "live"
  std::string base_url = "http://localhost:8000/v1";
  std::string chat_model = "gpt-4o";
  std::string embed_model = "text-embedding-3-small";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string cache_dir;
  int mock_dim = 256;
};

struct RunConfig {
  std::string toolset_path;
  std::string benchmark_path;
  std::string output_dir = "out";
  std::string retrieval_path;   // input for select/eval
  std::string selections_path;  // input for eval
  std::string plan_path;        // input for audit
  MergerConfig merger;
  RetrieverConfig retriever;
  ProviderSettings providers;
  std::uint64_t seed = 42;
  std::vector<int> recall_ks = {1, 3, 5};
  std::vector<int> silhouette_clusters;
  bool merge_enabled = true;
  bool doc_fallback = false;
};

json config_to_json(const RunConfig& config) {
  return json{
      {"benchmark", config.benchmark_path},
      {"doc_fallback", config.doc_fallback},
      {"merge_enabled", config.merge_enabled},
      {"merger",
       json{{"autocorrect", config.merger.autocorrect_enabled},
            {"candidate_k", config.merger.candidate_k},
            {"cosine_threshold", config.merger.cosine_threshold},
            {"max_workers", config.merger.max_workers}}},
      {"output_dir", config.output_dir},
      {"providers",
       json{{"api_key_env", config.providers.api_key_env},
            {"base_url", config.providers.base_url},
            {"cache_dir", config.providers.cache_dir},
            {"chat_model", config.providers.chat_model},
            {"embed_model", config.providers.embed_model},
            {"mock_dim", config.providers.mock_dim},
            {"mode", config.providers.mode}}},
      {"recall_ks", config.recall_ks},
      {"retriever",
       json{{"alpha", config.retriever.alpha},
            {"bm25_b", config.retriever.bm25_b},
            {"bm25_k1", config.retriever.bm25_k1},
            {"epsilon", config.retriever.epsilon},
            {"rerank", config.retriever.rerank_enabled},
            {"rerank_pool", config.retriever.rerank_pool},
            {"top_k", config.retriever.top_k}}},
      {"seed", config.seed},
      {"silhouette_clusters", config.silhouette_clusters},
      {"toolset", config.toolset_path},
  };
}

void apply_config_file(RunConfig& config, const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& ex) {
    throw ParseError("config " + path + ": " + ex.what());
  }
  config.toolset_path = doc.value("toolset", config.toolset_path);
  config.benchmark_path = doc.value("benchmark", config.benchmark_path);
  config.output_dir = doc.value("output_dir", config.output_dir);
  config.seed = doc.value("seed", config.seed);
  config.merge_enabled = doc.value("merge_enabled", config.merge_enabled);
  config.doc_fallback = doc.value("doc_fallback", config.doc_fallback);
  config.recall_ks = doc.value("recall_ks", config.recall_ks);
  config.silhouette_clusters = doc.value("silhouette_clusters", config.silhouette_clusters);
  if (doc.contains("merger")) {
    const json& m = doc["merger"];
    config.merger.candidate_k = m.value("candidate_k", config.merger.candidate_k);
    config.merger.cosine_threshold = m.value("cosine_threshold", config.merger.cosine_threshold);
    config.merger.autocorrect_enabled = m.value("autocorrect", config.merger.autocorrect_enabled);
    config.merger.max_workers = m.value("max_workers", config.merger.max_workers);
  }
  if (doc.contains("retriever")) {
    const json& r = doc["retriever"];
    config.retriever.alpha = r.value("alpha", config.retriever.alpha);
    config.retriever.rerank_pool = r.value("rerank_pool", config.retriever.rerank_pool);
    config.retriever.top_k = r.value("top_k", config.retriever.top_k);
    config.retriever.epsilon = r.value("epsilon", config.retriever.epsilon);
    config.retriever.bm25_k1 = r.value("bm25_k1", config.retriever.bm25_k1);
    config.retriever.bm25_b = r.value("bm25_b", config.retriever.bm25_b);
    config.retriever.rerank_enabled = r.value("rerank", config.retriever.rerank_enabled);
  }
  if (doc.contains("providers")) {
    const json& p = doc["providers"];
    config.providers.mode = p.value("mode", config.providers.mode);
    config.providers.base_url = p.value("base_url", config.providers.base_url);
    config.providers.chat_model = p.value("chat_model", config.providers.chat_model);
    config.providers.embed_model = p.value("embed_model", config.providers.embed_model);
    config.providers.api_key_env = p.value("api_key_env", config.providers.api_key_env);
    config.providers.cache_dir = p.value("cache_dir", config.providers.cache_dir);
    config.providers.mock_dim = p.value("mock_dim", config.providers.mock_dim);
  }
}

struct Providers {
  std::unique_ptr<EmbeddingProvider> embedding;
  std::unique_ptr<ChatModel> chat;
  std::unique_ptr<Reranker> reranker;
  std::unique_ptr<PairClassifier> classifier;
  std::unique_ptr<ClusterValidator> validator;
  std::unique_ptr<DocMerger> doc_merger;
  std::unique_ptr<SelectionAgent> agent;
};

void probe_endpoint(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string host =
      path_start == std::string::npos ? base_url : base_url.substr(0, path_start);
  httplib::Client client(host);
  client.set_connection_timeout(5, 0);
  auto res = client.Get("/");
  if (!res) {
    throw TransportError("live endpoint unreachable: " + base_url);
  }
}

Providers make_providers(const RunConfig& config) {
  Providers providers;
  const ProviderSettings& settings = config.providers;
  if (settings.mode == "mock") {
    providers.embedding =
        std::make_unique<MockEmbeddingProvider>(static_cast<std::size_t>(settings.mock_dim));
    providers.chat = std::make_unique<MockChatModel>(SynonymTable::builtin(),
                                                     static_cast<std::size_t>(settings.mock_dim));
  } else if (settings.mode == "live") {
    probe_endpoint(settings.base_url);
    const char* api_key = std::getenv(settings.api_key_env.c_str());
    HttpEmbeddingConfig embed_config;
    embed_config.base_url = settings.base_url;
    embed_config.model = settings.embed_model;
    embed_config.api_key = api_key ? api_key : "";
    embed_config.cache_dir =
        settings.cache_dir.empty() ? "" : settings.cache_dir + "/embeddings";
    providers.embedding = std::make_unique<HttpEmbeddingProvider>(embed_config);
    ChatClientConfig chat_config;
    chat_config.base_url = settings.base_url;
    chat_config.api_key = api_key ? api_key : "";
    chat_config.cache_dir = settings.cache_dir.empty() ? "" : settings.cache_dir + "/chat";
    providers.chat = std::make_unique<HttpChatModel>(chat_config);
  } else {
    throw InputError("providers.mode must be \"mock\" or \"live\"");
  }
  providers.reranker = std::make_unique<CosineReranker>(*providers.embedding);
  providers.classifier =
      std::make_unique<LlmPairClassifier>(*providers.chat, settings.chat_model);
  providers.validator =
      std::make_unique<LlmClusterValidator>(*providers.chat, settings.chat_model);
  providers.doc_merger = std::make_unique<LlmDocMerger>(*providers.chat, settings.chat_model,
                                                        config.doc_fallback);
  providers.agent = std::make_unique<LlmSelectionAgent>(*providers.chat, settings.chat_model);
  return providers;
}

std::string dataset_label(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

void write_manifest(const RunConfig& config, const std::string& command,
                    const std::vector<std::string>& input_paths,
                    const std::vector<std::string>& output_names) {
  const json config_json = config_to_json(config);
  json inputs = json::object();
  for (const std::string& path : input_paths) {
    inputs[path] = stable_hash_hex(read_file(path));
  }
  const json manifest{
      {"command", command},
      {"config", config_json},
      {"config_hash", stable_hash_hex(config_json.dump())},
      {"inputs", inputs},
      {"outputs", output_names},
      {"seed", config.seed},
      {"version", kVersion},
  };
  write_file(config.output_dir + "/manifest_" + command + ".json", manifest.dump(2) + "\n");
}

MergePlan identity_plan(const Toolset& toolset) {
  MergePlan plan;
  for (const ToolSpec& tool : toolset.tools()) {
    plan.phi[tool.id] = tool.id;
  }
  return plan;
}

std::string format_pct(double fraction) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.1f%%", 100.0 * fraction);
  return buffer;
}

int cmd_merge(const RunConfig& config) {
  const Toolset toolset = load_toolset(config.toolset_path);
  const Benchmark benchmark = load_benchmark(config.benchmark_path, toolset);
  Providers providers = make_providers(config);

  MergePlan plan;
  if (config.merge_enabled) {
    const EmbeddingMatrix matrix = embed_toolset(toolset, *providers.embedding);
    plan = build_merge_plan(toolset, matrix, config.merger, *providers.classifier,
                            *providers.validator, *providers.doc_merger);
  } else {
    plan = identity_plan(toolset);
  }
  const Toolset merged = apply_merge(toolset, plan);
  const Benchmark relabeled = relabel_benchmark(benchmark, plan);

  std::filesystem::create_directories(config.output_dir);
  save_merge_plan(plan, config.output_dir + "/merge_plan.json");
  save_toolset(merged, config.output_dir + "/merged_toolset.json");
  save_benchmark(relabeled, config.output_dir + "/merged_benchmark.jsonl");
  write_manifest(config, "merge", {config.toolset_path, config.benchmark_path},
                 {"merge_plan.json", "merged_toolset.json", "merged_benchmark.jsonl"});

  const double change = toolset.size() == 0
                            ? 0.0
                            : (static_cast<double>(merged.size()) -
                               static_cast<double>(toolset.size())) /
                                  static_cast<double>(toolset.size());
  std::cout << "Toolset Size Comparison After Merging\n";
  std::cout << "Dataset          Original Size  Merged Size  % Change\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %-14zu %-12zu %s\n",
                dataset_label(config.toolset_path).c_str(), toolset.size(), merged.size(),
                format_pct(change).c_str());
  std::cout << line;
  return 0;
}

int cmd_retrieve(const RunConfig& config) {
  const Toolset toolset = load_toolset(config.toolset_path);
  const Benchmark benchmark = load_benchmark(config.benchmark_path, toolset);
  Providers providers = make_providers(config);

  const RetrievalIndexes indexes = build_indexes(toolset, config.retriever, *providers.embedding);
  const auto& records = benchmark.records();
  auto results = parallel_map(records.size(), config.merger.max_workers, [&](std::size_t i) {
    return retrieve_query(records[i], toolset, indexes, *providers.embedding, config.retriever,
                          config.retriever.rerank_enabled ? providers.reranker.get() : nullptr);
  });
  std::string out;
  for (const RetrievalResult& result : results) {
    out += retrieval_result_to_json(result);
    out += "\n";
  }
  std::filesystem::create_directories(config.output_dir);
  write_file(config.output_dir + "/retrieval.jsonl", out);
  write_manifest(config, "retrieve", {config.toolset_path, config.benchmark_path},
                 {"retrieval.jsonl"});
  std::cout << "retrieved top-" << config.retriever.top_k << " for " << results.size()
            << " queries\n";
  return 0;
}

std::vector<RetrievalResult> load_retrievals(const std::string& path) {
  std::vector<RetrievalResult> results;
  std::istringstream stream(read_file(path));
  std::string line;
  while (std::getline(stream, line)) {
    if (!line.empty()) {
      results.push_back(parse_retrieval_result_json(line));
    }
  }
  return results;
}

int cmd_select(const RunConfig& config) {
  const Toolset toolset = load_toolset(config.toolset_path);
  const Benchmark benchmark = load_benchmark(config.benchmark_path, toolset);
  Providers providers = make_providers(config);
  const std::string retrieval_path = config.retrieval_path.empty()
                                         ? config.output_dir + "/retrieval.jsonl"
                                         : config.retrieval_path;
  auto retrievals = load_retrievals(retrieval_path);
  std::map<std::string, const RetrievalResult*> by_query;
  for (const RetrievalResult& result : retrievals) {
    by_query[result.query_id] = &result;
  }
  const auto& records = benchmark.records();
  auto selections = parallel_map(records.size(), config.merger.max_workers, [&](std::size_t i) {
    auto it = by_query.find(records[i].query_id);
    if (it == by_query.end()) {
      throw SchemaMismatch("retrieval file lacks query " + records[i].query_id);
    }
    return select_tools(records[i], *it->second, toolset, *providers.agent);
  });
  std::string out;
  for (const SelectionResult& selection : selections) {
    out += selection_result_to_json(selection);
    out += "\n";
  }
  std::filesystem::create_directories(config.output_dir);
  write_file(config.output_dir + "/selections.jsonl", out);
  write_manifest(config, "select",
                 {config.toolset_path, config.benchmark_path, retrieval_path},
                 {"selections.jsonl"});
  std::cout << "selected tools for " << selections.size() << " queries\n";
  return 0;
}

int cmd_eval(const RunConfig& config) {
  const Toolset toolset = load_toolset(config.toolset_path);
  const Benchmark benchmark = load_benchmark(config.benchmark_path, toolset);
  const std::string retrieval_path = config.retrieval_path.empty()
                                         ? config.output_dir + "/retrieval.jsonl"
                                         : config.retrieval_path;
  const std::string selections_path = config.selections_path.empty()
                                          ? config.output_dir + "/selections.jsonl"
                                          : config.selections_path;
  auto retrievals = load_retrievals(retrieval_path);
  std::vector<SelectionResult> selections;
  {
    std::istringstream stream(read_file(selections_path));
    std::string line;
    while (std::getline(stream, line)) {
      if (!line.empty()) {
        selections.push_back(parse_selection_result_json(line));
      }
    }
  }
  EvalReport report = build_eval_report(benchmark, toolset, retrievals, selections,
                                        config.recall_ks);
  if (!config.silhouette_clusters.empty()) {
    Providers providers = make_providers(config);
    const EmbeddingMatrix matrix = embed_toolset(toolset, *providers.embedding);
    for (int clusters : config.silhouette_clusters) {
      if (clusters < 2 || static_cast<std::size_t>(clusters) > matrix.rows()) {
        continue;
      }
      const auto assignments = kmeans(matrix, clusters, config.seed);
      report.silhouette_by_clusters[clusters] = silhouette(matrix, assignments);
    }
  }
  std::filesystem::create_directories(config.output_dir);
  write_file(config.output_dir + "/eval_report.json", eval_report_to_json(report));
  write_file(config.output_dir + "/eval_metrics.tsv", eval_report_tsv(report));
  write_manifest(config, "eval",
                 {config.toolset_path, config.benchmark_path, retrieval_path, selections_path},
                 {"eval_metrics.tsv", "eval_report.json"});
  std::cout << eval_report_table(report);
  return 0;
}

int cmd_audit(const RunConfig& config) {
  const std::string plan_path =
      config.plan_path.empty() ? config.output_dir + "/merge_plan.json" : config.plan_path;
  const MergePlan plan = load_merge_plan(plan_path);
  if (plan.audit_log.empty() && plan.clusters.empty()) {
    std::cout << "audit: empty plan, nothing to report\n";
    return 0;
  }
  std::size_t splits = 0;
  for (std::size_t i = 0; i < plan.audit_log.size(); ++i) {
    const AuditRecord& record = plan.audit_log[i];
    std::cout << "cluster " << (i + 1) << ": [";
    for (std::size_t j = 0; j < record.members_before.size(); ++j) {
      if (j > 0) {
        std::cout << ", ";
      }
      std::cout << record.members_before[j];
    }
    std::cout << "] -> " << record.verdict;
    if (record.verdict == "MERGE_BAD") {
      ++splits;
      std::cout << " split [";
      for (std::size_t j = 0; j < record.sub_clusters.size(); ++j) {
        if (j > 0) {
          std::cout << ", ";
        }
        std::cout << "[";
        for (std::size_t m = 0; m < record.sub_clusters[j].size(); ++m) {
          if (m > 0) {
            std::cout << ", ";
          }
          std::cout << record.sub_clusters[j][m];
        }
        std::cout << "]";
      }
      std::cout << "]";
    }
    if (!record.reason.empty()) {
      std::cout << " (" << record.reason << ")";
    }
    std::cout << "\n";
  }
  std::cout << "audit: " << plan.audit_log.size() << " clusters audited, " << splits
            << " splits\n";
  return 0;
}

int cmd_ablate(const RunConfig& config) {
  const Toolset toolset = load_toolset(config.toolset_path);
  const Benchmark benchmark = load_benchmark(config.benchmark_path, toolset);
  Providers providers = make_providers(config);
  PipelineDeps deps;
  deps.provider = providers.embedding.get();
  deps.classifier = providers.classifier.get();
  deps.validator = providers.validator.get();
  deps.doc_merger = providers.doc_merger.get();
  deps.reranker = providers.reranker.get();
  deps.agent = providers.agent.get();
  PipelineOptions base;
  base.merger = config.merger;
  base.retriever = config.retriever;

  const std::vector<AblationSetting> grid = {
      {true, true, true},
      {true, false, false},
      {false, true, true},
      {false, false, false},
  };
  const auto rows = run_ablation(toolset, benchmark, grid, deps, base);
  std::filesystem::create_directories(config.output_dir);
  write_file(config.output_dir + "/ablation.csv", ablation_csv(rows));
  write_manifest(config, "ablate", {config.toolset_path, config.benchmark_path},
                 {"ablation.csv"});
  std::cout << ablation_table(rows, dataset_label(config.toolset_path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toolfuse: toolset deduplication and hybrid tool retrieval"};
  app.require_subcommand(1);

  RunConfig config;
  std::string config_path;
  bool mock_providers = false;
  bool no_rerank = false;
  bool no_autocorrect = false;
  bool no_merge = false;

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>> overrides;
  auto tracked = [&](CLI::Option* option, auto member) {
    overrides.emplace_back(option, [member](RunConfig& target, const RunConfig& cli_values) {
      target.*member = cli_values.*member;
    });
    return option;
  };
  auto tracked_nested = [&](CLI::Option* option, auto copy) {
    overrides.emplace_back(option, copy);
    return option;
  };

  app.add_option("--config", config_path, "JSON config file");
  tracked(app.add_option("--toolset", config.toolset_path, "toolset JSON file"),
          &RunConfig::toolset_path);
  tracked(app.add_option("--benchmark", config.benchmark_path, "benchmark JSONL file"),
          &RunConfig::benchmark_path);
  tracked(app.add_option("--output-dir", config.output_dir, "output directory"),
          &RunConfig::output_dir);
  tracked(app.add_option("--retrieval", config.retrieval_path,
                         "retrieval JSONL (select/eval input)"),
          &RunConfig::retrieval_path);
  tracked(app.add_option("--selections", config.selections_path, "selections JSONL (eval input)"),
          &RunConfig::selections_path);
  tracked(app.add_option("--plan", config.plan_path, "merge plan JSON (audit input)"),
          &RunConfig::plan_path);
  tracked(app.add_option("--seed", config.seed, "RNG seed for diagnostics"), &RunConfig::seed);
  tracked(app.add_option("--silhouette-clusters", config.silhouette_clusters,
                         "cluster counts for silhouette diagnostics"),
          &RunConfig::silhouette_clusters);
  tracked_nested(app.add_option("--alpha", config.retriever.alpha,
                                "hybrid weight (1 = dense only)"),
                 [](RunConfig& t, const RunConfig& c) { t.retriever.alpha = c.retriever.alpha; });
  tracked_nested(app.add_option("--top-k", config.retriever.top_k, "tools returned per query"),
                 [](RunConfig& t, const RunConfig& c) { t.retriever.top_k = c.retriever.top_k; });
  tracked_nested(
      app.add_option("--rerank-pool", config.retriever.rerank_pool, "rerank pool size M"),
      [](RunConfig& t, const RunConfig& c) { t.retriever.rerank_pool = c.retriever.rerank_pool; });
  tracked_nested(
      app.add_option("--threshold", config.merger.cosine_threshold, "merge cosine threshold"),
      [](RunConfig& t, const RunConfig& c) {
        t.merger.cosine_threshold = c.merger.cosine_threshold;
      });
  tracked_nested(app.add_option("--candidate-k", config.merger.candidate_k, "neighbors per tool"),
                 [](RunConfig& t, const RunConfig& c) {
                   t.merger.candidate_k = c.merger.candidate_k;
                 });
  app.add_flag("--mock-providers", mock_providers, "force deterministic mock providers");
  app.add_flag("--no-rerank", no_rerank, "disable the reranker");
  app.add_flag("--no-autocorrect", no_autocorrect, "disable merge auto-correction");
  app.add_flag("--no-merge", no_merge, "write an identity merge plan");
  app.add_flag("--doc-fallback", config.doc_fallback,
               "fall back to the representative doc when synthesis fails");

  auto* merge = app.add_subcommand("merge", "deduplicate the toolset and relabel the benchmark");
  auto* retrieve = app.add_subcommand("retrieve", "retrieve top-k tools per query");
  auto* select = app.add_subcommand("select", "agent tool selection over retrieved candidates");
  auto* eval = app.add_subcommand("eval", "compute CSR/Recall and context accounting");
  auto* audit = app.add_subcommand("audit", "print auto-correction verdicts from a merge plan");
  auto* ablate = app.add_subcommand("ablate", "run the reranker/merger/autocorrect grid");
  for (CLI::App* sub : {merge, retrieve, select, eval, audit, ablate}) {
    sub->fallthrough();  // global flags may follow the subcommand
  }

  // Flags win over config-file values: file values only replace fields still
  // at their built-in defaults after parsing.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (!config_path.empty()) {
    RunConfig merged;
    try {
      apply_config_file(merged, config_path);
    } catch (const InputError& ex) {
      std::cerr << "error: " << ex.what() << "\n";
      return 1;
    }
    // Explicitly passed flags beat file values.
    for (const auto& [option, copy] : overrides) {
      if (option->count() > 0) {
        copy(merged, config);
      }
    }
    merged.doc_fallback = config.doc_fallback || merged.doc_fallback;
    config = merged;
  }
  if (mock_providers) {
    config.providers.mode = "mock";
  }
  if (no_rerank) {
    config.retriever.rerank_enabled = false;
  }
  if (no_autocorrect) {
    config.merger.autocorrect_enabled = false;
  }
  if (no_merge) {
    config.merge_enabled = false;
  }

  try {
    if (merge->parsed()) {
      return cmd_merge(config);
    }
    if (retrieve->parsed()) {
      return cmd_retrieve(config);
    }
    if (select->parsed()) {
      return cmd_select(config);
    }
    if (eval->parsed()) {
      return cmd_eval(config);
    }
    if (audit->parsed()) {
      return cmd_audit(config);
    }
    if (ablate->parsed()) {
      return cmd_ablate(config);
    }
  } catch (const IntegrityError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  } catch (const ProviderError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const InputError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
