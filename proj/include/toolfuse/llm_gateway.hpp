#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "toolfuse/core.hpp"
#include "toolfuse/merger.hpp"
#include "toolfuse/retriever.hpp"

namespace toolfuse {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 4000;
  double top_p = 1.0;
};

// The five prompt templates driving the pipeline, named by role:
// pairwise overlap classifier, merge audit, documentation merger, agent tool
// selection, and documentation quality grading.
enum class TemplateId {
  Classifier,
  MergeAudit,
  DocMerger,
  AgentSelect,
  DocQuality,
};

// Slot names a template expects; rendering fails on any missing slot and
// never leaves a {slot} placeholder behind.
const std::vector<std::string>& template_slots(TemplateId id);
const std::string& template_text(TemplateId id);
std::string render(TemplateId id, const std::map<std::string, std::string>& slots);
TemplateId template_from_name(const std::string& name);
std::string template_name(TemplateId id);

// Classifier replies are two lines: candidate name (or "None"), then the
// rationale.
struct ClassifierReply {
  bool equivalent = false;
  std::string rationale;
};
ClassifierReply parse_classifier_reply(const std::string& text, const std::string& candidate_name);

// Strict JSON verdict parse (code fences stripped first): MERGE_OK, or
// MERGE_BAD with disjoint sub-clusters drawn from member_ids.
Verdict parse_verdict(const std::string& text, const std::set<std::string>& member_ids);
std::string verdict_to_json(const Verdict& verdict);

// Two-line reply of the documentation quality grader: score 1-5, then a
// one-sentence justification.
struct QualityReply {
  int score = 0;
  std::string justification;
};
QualityReply parse_quality_reply(const std::string& text);

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct ChatClientConfig {
  std::string base_url;
  std::string api_key;     // empty -> no Authorization header
  std::string cache_dir;   // empty -> caching disabled
  int max_retries = 3;
  int timeout_seconds = 120;
};

// OpenAI-compatible POST {base}/chat/completions with retry/backoff on
// 429/5xx and an on-disk request-hash cache (one JSON file per request).
class HttpChatModel : public ChatModel {
 public:
  explicit HttpChatModel(ChatClientConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  ChatClientConfig config_;
};

// Deterministic offline stand-in. Recognizes which template produced the
// prompt and answers by rule: the classifier and audit replies follow the
// synonym-table name rule, the doc merger concatenates, the selection agent
// echoes the candidate scoring highest under the mock reranker.
class MockChatModel : public ChatModel {
 public:
  explicit MockChatModel(SynonymTable table = SynonymTable::builtin(), std::size_t mock_dim = 256)
      : table_(std::move(table)), mock_dim_(mock_dim) {}
  std::string complete(const ChatRequest& request) override;

 private:
  std::string answer_classifier(const std::string& prompt) const;
  std::string answer_merge_audit(const std::string& prompt) const;
  std::string answer_doc_merger(const std::string& prompt) const;
  std::string answer_agent_select(const std::string& prompt) const;
  std::string answer_doc_quality(const std::string& prompt) const;

  SynonymTable table_;
  std::size_t mock_dim_;
};

// ---- adapters onto the merger interfaces ----

class LlmPairClassifier : public PairClassifier {
 public:
  LlmPairClassifier(ChatModel& model, std::string model_name)
      : model_(model), model_name_(std::move(model_name)) {}
  Result classify(const ToolSpec& target, const ToolSpec& candidate) override;

 private:
  ChatModel& model_;
  std::string model_name_;
};

class LlmClusterValidator : public ClusterValidator {
 public:
  LlmClusterValidator(ChatModel& model, std::string model_name)
      : model_(model), model_name_(std::move(model_name)) {}
  Verdict validate(const std::vector<ToolSpec>& members) override;

 private:
  ChatModel& model_;
  std::string model_name_;
};

class LlmDocMerger : public DocMerger {
 public:
  LlmDocMerger(ChatModel& model, std::string model_name, bool fallback_to_original = false)
      : model_(model), model_name_(std::move(model_name)), fallback_(fallback_to_original) {}
  ToolSpec merge(const ToolSpec& representative, const std::vector<ToolSpec>& members) override;

 private:
  ChatModel& model_;
  std::string model_name_;
  bool fallback_;
};

// Renders the agent-selection prompt per step and returns the bare name (or
// "None") from the reply.
class LlmSelectionAgent : public SelectionAgent {
 public:
  LlmSelectionAgent(ChatModel& model, std::string model_name)
      : model_(model), model_name_(std::move(model_name)) {}
  std::string select(const std::string& query, const std::string& step,
                     const std::vector<ToolSpec>& candidates) override;

 private:
  ChatModel& model_;
  std::string model_name_;
};

// "ID : signature --- doc" block, one line per member, as the audit prompt
// expects.
std::string format_group_block(const std::vector<ToolSpec>& members);
// "name : signature --- doc" line used for the merger's keep/prune blocks.
std::string format_tool_block(const ToolSpec& tool);

}  // namespace toolfuse
