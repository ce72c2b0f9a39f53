#include "toolfuse/llm_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "toolfuse/embedding.hpp"
#include "toolfuse/text.hpp"

namespace toolfuse {

using json = nlohmann::json;

namespace {

const std::string kClassifierTemplate = R"PROMPT(You are an expert in software tool design and resolving function overlap issues.

Goal: Determine whether a single candidate function is semantically similar to a given target function — not necessarily equivalent — and should be considered for potential merging or consolidation if a high degree of similarity is detected.

Background: Overlapping function definitions can confuse both developers and LLM-based systems when multiple similar tools compete for the same user intent. Identifying function pairs that are highly similar in behavior, purpose, and parameter usage can improve clarity, reduce redundancy, and simplify tool invocation.

Definition of Similarity:
Two functions are considered similar if:
- They perform the same high-level task or fulfill the same user intent, even if their internal implementations differ.
- Their inputs and outputs are comparable or can be aligned with minimal transformation (e.g., parameters are conceptually equivalent or combinable).
- They could be merged into a unified function with optional parameters or internal branching, without loss of functionality.

Examples of similarity:
- translateToFrench(text) and translateToGerman(text) -> same operation (translation), different fixed parameter => merge into translate(text, language)
- getUserDetails() and fetchUserInfo() -> same intent, different naming
- addCrop(crop) and addCropToFarm(crop, farmId) -> same core action, one more specific => merge with optional parameter

Not similar if:
- They serve different user intents (validateInput vs sanitizeInput)
- They act on incompatible types or domains (generatePDF() vs sendEmail())
- They overlap in name but not function (searchUser() vs deleteUser())

Input
- Target function: {target_tool_docstring}
- Candidate function: {candidate_tool_docstring}

Instructions:
- Compare the target and candidate functions carefully.
- If they are similar based on the criteria above, return:
  - The name of the candidate function (recommended for potential merge)
  - A short explanation using chain-of-thought reasoning
- If they are not similar, return:
  - None
  - A brief explanation of why they are not similar enough to merge

Output Format:
- Line 1: Candidate function name or None. Return only the name — no parameters or signature.
- Line 2: Explanation of your reasoning
)PROMPT";

const std::string kMergeAuditTemplate = R"PROMPT(You are verifying whether the following Python functions can be merged into ONE API.

Similarity rubric (must satisfy 1 AND 2):
- 1. Same high-level user intent or task.
- 2. Inputs/outputs can be aligned by adding OPTIONAL parameters or renaming arguments (no functionality lost).

Non-merge only if INTENT clearly differs.

Output (JSON only)
{
  "merge": "MERGE_OK",
  "reason": "<optional <25 words>"
}
OR
{
  "merge": "MERGE_BAD",
  "clusters": [
    ["idA", "idB"],
    ["idC"]
  ],
  "reason": "<  <25 words >"
}

List of candidate functions (ID : signature --- doc):

{GROUP_BLOCK}
)PROMPT";

const std::string kDocMergerTemplate = R"PROMPT(You are an expert Python API architect:
Task:
Given multiple semantically similar function definitions, merge them into ONE canonical function named {keep_name}.

Similarity rubric (all must hold to merge):
1. Same user intent/task.
2. Inputs & outputs can be aligned via optional parameters.
3. No functionality is lost after merge.

Instructions:
- Keep {keep_name}’s parameter order & defaults first.
- Add only unique parameters from the other functions; make them optional.
- Combine docstrings: start with 1–2 concise sentences of purpose, then list arguments (name, type, default, description).
- Do NOT output implementation code or markdown fences.
- Output only the final signature and full docstring.

{keep_block} {prune_block}
)PROMPT";

const std::string kAgentSelectTemplate = R"PROMPT(You are a tool selection agent.

Your task is to determine the most appropriate tool function (if any) to use for a specific step in a multi-step plan derived from a user request.

You are given:
- The original user query to provide context
- A single step from the plan (typically a short sentence)
- A list of available tools, including their names, descriptions, argument schemas, and expected results

Your job is to return the name of the single most appropriate function(from the list below) that can execute this step.

Instructions:
- Only output the function name exactly as written in the list below, or `None` if no tool is applicable.
- Do not add parentheses, arguments, or explanations.
- Do not make assumptions beyond what is provided in the tool descriptions and step text.

Original User Query:
{question}

Plan Step:
{input}

Candidate Tools:
{tools}

Output:
)PROMPT";

const std::string kDocQualityTemplate = R"PROMPT(You are an expert evaluator assessing the quality of tool documentation.
Given a tool’s name, function signature, and docstring, decide how clear and helpful the documentation is for someone who needs to call the tool correctly.

Judge the documentation on three evidence pillars:

- [P] Parameters
  - Do parameter names and counts match the signature?
  - Are required parameters described accurately?
  - Are optional parameters or default values acknowledged?
- [I] Inputs & Constraints
  - Are input types, roles, and typical values clear?
  - Are important constraints, ranges, or usage conditions provided?
- [B] Behavior & Purpose
  - Is it clear—at least at a high level—what the tool does when invoked?
  - Does the description indicate what the caller can expect in return (or is it self-evident)?

Scoring rubric (1–5):

Score 5 – Excellent
Parameters (P): All required and optional parameters are fully documented; naming matches the signature; defaults are stated when non-trivial.
Inputs & Constraints (I): Types plus examples or constraints are provided for almost every field.
Behavior & Purpose (B): Clear, precise description of functionality and return/output.
Overall Quality: Ready for production use.

Score 4 – Good
Parameters (P): Required parameters are fully documented; most optional parameters are mentioned, with only minor detail gaps.
Inputs & Constraints (I): Types are present, but a few examples or constraints are missing.
Behavior & Purpose (B): Behavior is described clearly, but return/output is only briefly mentioned or assumed obvious.
Overall Quality: Very usable; small refinements desirable.

Score 3 – Fair
Parameters (P): Required parameters are documented and correct, but several optional parameters are missing or vague.
Inputs & Constraints (I): Basic types or roles are stated, but little constraint information is given.
Behavior & Purpose (B): Behavior is conveyed in one or two somewhat vague sentences but is still understandable.
Overall Quality: Usable with modest guesswork.

Score 2 – Poor
Parameters (P): Some required parameters are undocumented or mismatched with the signature.
Inputs & Constraints (I): Types are unclear or absent; no constraint details are given.
Behavior & Purpose (B): Behavior is barely described, and purpose is hard to infer.
Overall Quality: High risk of misuse.

Score 1 – Very Poor
Parameters (P): Few or no parameters are documented, or documentation is misleading.
Inputs & Constraints (I): Input expectations are absent or incorrect.
Behavior & Purpose (B): The tool’s purpose is not conveyed.
Overall Quality: Documentation offers virtually no guidance.

Respond with exactly two lines:
1. Score (integer 1–5)
2. One-sentence justification

Now, evaluate the following tool:

Tool name: {tool_name}
Tool signature: {tool_signature}
Tool description: {tool_description}
)PROMPT";

struct TemplateEntry {
  std::string name;
  const std::string* text;
  std::vector<std::string> slots;
};

const std::map<TemplateId, TemplateEntry>& template_table() {
  static const std::map<TemplateId, TemplateEntry> table = {
      {TemplateId::Classifier,
       {"classifier", &kClassifierTemplate, {"target_tool_docstring", "candidate_tool_docstring"}}},
      {TemplateId::MergeAudit, {"merge_audit", &kMergeAuditTemplate, {"GROUP_BLOCK"}}},
      {TemplateId::DocMerger,
       {"doc_merger", &kDocMergerTemplate, {"keep_name", "keep_block", "prune_block"}}},
      {TemplateId::AgentSelect,
       {"agent_select", &kAgentSelectTemplate, {"question", "input", "tools"}}},
      {TemplateId::DocQuality,
       {"doc_quality", &kDocQualityTemplate, {"tool_name", "tool_signature", "tool_description"}}},
  };
  return table;
}

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  std::size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string strip_code_fences(const std::string& text) {
  std::string out = trim(text);
  if (out.rfind("```", 0) == 0) {
    std::size_t first_newline = out.find('\n');
    out = first_newline == std::string::npos ? "" : out.substr(first_newline + 1);
    std::size_t closing = out.rfind("```");
    if (closing != std::string::npos) {
      out = out.substr(0, closing);
    }
    out = trim(out);
  }
  return out;
}

std::string first_line(const std::string& text) {
  std::size_t pos = text.find('\n');
  return pos == std::string::npos ? text : text.substr(0, pos);
}

std::string rest_lines(const std::string& text) {
  std::size_t pos = text.find('\n');
  return pos == std::string::npos ? "" : text.substr(pos + 1);
}

std::string flatten(const std::string& text) {
  std::string out = text;
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

// Substring between two unique markers; end marker empty means "to the end".
std::string slice_between(const std::string& text, const std::string& begin_marker,
                          const std::string& end_marker, const char* what) {
  std::size_t begin = text.find(begin_marker);
  if (begin == std::string::npos) {
    throw InputError(std::string("mock chat: cannot find ") + what);
  }
  begin += begin_marker.size();
  std::size_t end = end_marker.empty() ? text.size() : text.find(end_marker, begin);
  if (end == std::string::npos) {
    throw InputError(std::string("mock chat: cannot find end of ") + what);
  }
  return text.substr(begin, end - begin);
}

}  // namespace

const std::vector<std::string>& template_slots(TemplateId id) {
  return template_table().at(id).slots;
}

const std::string& template_text(TemplateId id) {
  return *template_table().at(id).text;
}

std::string template_name(TemplateId id) {
  return template_table().at(id).name;
}

TemplateId template_from_name(const std::string& name) {
  for (const auto& [id, entry] : template_table()) {
    if (entry.name == name) {
      return id;
    }
  }
  throw UnknownTemplate("unknown template: " + name);
}

std::string render(TemplateId id, const std::map<std::string, std::string>& slots) {
  const TemplateEntry& entry = template_table().at(id);
  std::string out = *entry.text;
  for (const std::string& slot : entry.slots) {
    auto it = slots.find(slot);
    if (it == slots.end()) {
      throw MissingSlot("template " + entry.name + ": missing slot {" + slot + "}");
    }
    const std::string marker = "{" + slot + "}";
    std::size_t pos = 0;
    while ((pos = out.find(marker, pos)) != std::string::npos) {
      out.replace(pos, marker.size(), it->second);
      pos += it->second.size();
    }
  }
  for (const std::string& slot : entry.slots) {
    if (out.find("{" + slot + "}") != std::string::npos) {
      throw MissingSlot("template " + entry.name + ": residual placeholder {" + slot + "}");
    }
  }
  return out;
}

ClassifierReply parse_classifier_reply(const std::string& text,
                                       const std::string& candidate_name) {
  const std::string body = trim(text);
  const std::string head = trim(first_line(body));
  ClassifierReply reply;
  reply.rationale = trim(rest_lines(body));
  if (head == candidate_name) {
    reply.equivalent = true;
    return reply;
  }
  if (head == "None") {
    reply.equivalent = false;
    return reply;
  }
  throw UnparseableReply("classifier reply line 1 is neither \"" + candidate_name +
                         "\" nor \"None\": " + text);
}

Verdict parse_verdict(const std::string& text, const std::set<std::string>& member_ids) {
  json doc;
  try {
    doc = json::parse(strip_code_fences(text));
  } catch (const json::exception& ex) {
    throw BadJson(std::string("verdict is not valid JSON: ") + ex.what() + "; raw: " + text);
  }
  if (!doc.is_object() || !doc.contains("merge") || !doc["merge"].is_string()) {
    throw BadJson("verdict lacks a \"merge\" string: " + text);
  }
  const std::string kind = doc["merge"].get<std::string>();
  Verdict verdict;
  verdict.reason = doc.value("reason", "");
  if (kind == "MERGE_OK") {
    verdict.kind = Verdict::Kind::MergeOk;
    return verdict;
  }
  if (kind != "MERGE_BAD") {
    throw BadJson("verdict has unknown \"merge\" value: " + kind);
  }
  verdict.kind = Verdict::Kind::MergeBad;
  if (!doc.contains("clusters") || !doc["clusters"].is_array() || doc["clusters"].empty()) {
    throw BadJson("MERGE_BAD verdict lacks a non-empty \"clusters\" array");
  }
  std::set<std::string> seen;
  for (const json& sub : doc["clusters"]) {
    if (!sub.is_array()) {
      throw BadJson("verdict sub-cluster is not an array");
    }
    std::vector<std::string> ids;
    for (const json& id : sub) {
      if (!id.is_string()) {
        throw BadJson("verdict sub-cluster id is not a string");
      }
      ids.push_back(id.get<std::string>());
      if (!member_ids.count(ids.back())) {
        throw ForeignId("verdict references id outside the cluster: " + ids.back());
      }
      if (!seen.insert(ids.back()).second) {
        throw OverlappingSubclusters("verdict places " + ids.back() + " in two sub-clusters");
      }
    }
    verdict.sub_clusters.push_back(std::move(ids));
  }
  return verdict;
}

std::string verdict_to_json(const Verdict& verdict) {
  json doc;
  if (verdict.kind == Verdict::Kind::MergeOk) {
    doc = json{{"merge", "MERGE_OK"}, {"reason", verdict.reason}};
  } else {
    doc = json{{"clusters", verdict.sub_clusters},
               {"merge", "MERGE_BAD"},
               {"reason", verdict.reason}};
  }
  return doc.dump();
}

QualityReply parse_quality_reply(const std::string& text) {
  const std::string body = trim(text);
  const std::string head = trim(first_line(body));
  QualityReply reply;
  try {
    reply.score = std::stoi(head);
  } catch (const std::exception&) {
    throw UnparseableReply("quality reply line 1 is not an integer: " + text);
  }
  if (reply.score < 1 || reply.score > 5) {
    throw UnparseableReply("quality score outside 1-5: " + head);
  }
  reply.justification = trim(rest_lines(body));
  return reply;
}

std::string format_group_block(const std::vector<ToolSpec>& members) {
  std::string block;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i > 0) {
      block += "\n";
    }
    block += members[i].id + " : " + flatten(members[i].signature) + " --- " +
             flatten(members[i].description);
  }
  return block;
}

std::string format_tool_block(const ToolSpec& tool) {
  return tool.name + " : " + flatten(tool.signature) + " --- " + flatten(tool.description);
}

// ---- HTTP chat model ----

HttpChatModel::HttpChatModel(ChatClientConfig config) : config_(std::move(config)) {
  if (!config_.cache_dir.empty()) {
    std::filesystem::create_directories(config_.cache_dir);
  }
}

namespace {

std::pair<std::string, std::string> split_base_url_chat(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    return {base_url, ""};
  }
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') {
    prefix.pop_back();
  }
  return {base_url.substr(0, path_start), prefix};
}

}  // namespace

namespace {

// Outcome of one HTTP attempt that may be retried.
struct RetryableFailure {
  enum class Kind { None, Timeout, Transport, HttpStatus };
  Kind kind = Kind::None;
  int status = 0;
  std::string detail;
};

}  // namespace

std::string HttpChatModel::complete(const ChatRequest& request) {
  json messages = json::array();
  for (const ChatMessage& message : request.messages) {
    messages.push_back(json{{"content", message.content}, {"role", message.role}});
  }
  const json body{
      {"max_tokens", request.max_tokens},
      {"messages", messages},
      {"model", request.model},
      {"temperature", request.temperature},
      {"top_p", request.top_p},
  };
  const std::string payload = body.dump();
  std::string cache_path;
  if (!config_.cache_dir.empty()) {
    cache_path = config_.cache_dir + "/" + stable_hash_hex(payload) + ".json";
    if (std::filesystem::exists(cache_path)) {
      return json::parse(read_file(cache_path)).at("reply").get<std::string>();
    }
  }

  auto [host, prefix] = split_base_url_chat(config_.base_url);
  RetryableFailure last;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    }
    httplib::Client client(host);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post(prefix + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      if (res.error() == httplib::Error::ConnectionTimeout ||
          res.error() == httplib::Error::Read) {
        last = {RetryableFailure::Kind::Timeout, 0, "timeout"};
      } else {
        last = {RetryableFailure::Kind::Transport, 0, httplib::to_string(res.error())};
      }
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last = {RetryableFailure::Kind::HttpStatus, res->status, res->body};
      continue;
    }
    if (res->status != 200) {
      throw ApiError(res->status, res->body);
    }
    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::exception& ex) {
      throw ProviderError(std::string("chat reply is not JSON: ") + ex.what());
    }
    std::string reply;
    try {
      reply = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& ex) {
      throw ProviderError(std::string("chat reply has unexpected shape: ") + ex.what());
    }
    if (!cache_path.empty()) {
      write_file_atomic(cache_path, json{{"reply", reply}, {"request", body}}.dump());
    }
    return reply;
  }
  switch (last.kind) {
    case RetryableFailure::Kind::Timeout:
      throw Timeout("chat request timed out after " + std::to_string(config_.max_retries) +
                    " retries");
    case RetryableFailure::Kind::HttpStatus:
      throw ApiError(last.status, last.detail);
    default:
      throw TransportError("chat request failed after " + std::to_string(config_.max_retries) +
                           " retries: " + last.detail);
  }
}

// ---- mock chat model ----

std::string MockChatModel::complete(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw InputError("mock chat: empty message list");
  }
  const std::string& prompt = request.messages.back().content;
  if (prompt.rfind("You are an expert in software tool design", 0) == 0) {
    return answer_classifier(prompt);
  }
  if (prompt.rfind("You are verifying whether", 0) == 0) {
    return answer_merge_audit(prompt);
  }
  if (prompt.rfind("You are an expert Python API architect", 0) == 0) {
    return answer_doc_merger(prompt);
  }
  if (prompt.rfind("You are a tool selection agent", 0) == 0) {
    return answer_agent_select(prompt);
  }
  if (prompt.rfind("You are an expert evaluator", 0) == 0) {
    return answer_doc_quality(prompt);
  }
  throw InputError("mock chat: prompt does not match any known template");
}

std::string MockChatModel::answer_classifier(const std::string& prompt) const {
  const std::string target = slice_between(prompt, "- Target function: ",
                                           "\n- Candidate function: ", "target block");
  const std::string candidate =
      slice_between(prompt, "- Candidate function: ", "\n\nInstructions:", "candidate block");
  const std::string target_name = trim(first_line(target));
  const std::string candidate_name = trim(first_line(candidate));
  if (table_.names_equivalent(target_name, candidate_name)) {
    return candidate_name + "\nBoth names normalize to the same tokens, so the intent matches.";
  }
  return "None\nThe function names normalize to different tokens.";
}

std::string MockChatModel::answer_merge_audit(const std::string& prompt) const {
  const std::string block = slice_between(
      prompt, "List of candidate functions (ID : signature --- doc):\n\n", "", "group block");
  struct Entry {
    std::string id;
    std::string name;
  };
  std::vector<Entry> entries;
  std::istringstream lines(trim(block));
  std::string line;
  while (std::getline(lines, line)) {
    if (trim(line).empty()) {
      continue;
    }
    std::size_t sep = line.find(" : ");
    if (sep == std::string::npos) {
      throw InputError("mock chat: malformed group block line: " + line);
    }
    Entry entry;
    entry.id = trim(line.substr(0, sep));
    std::string signature = line.substr(sep + 3);
    std::size_t paren = signature.find('(');
    entry.name = trim(signature.substr(0, paren));
    entries.push_back(std::move(entry));
  }
  std::vector<std::vector<std::string>> groups;
  std::vector<std::vector<std::string>> keys;
  for (const Entry& entry : entries) {
    auto key = table_.name_key(entry.name);
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      groups.push_back({entry.id});
    } else {
      groups[static_cast<std::size_t>(it - keys.begin())].push_back(entry.id);
    }
  }
  Verdict verdict;
  if (groups.size() <= 1) {
    verdict.kind = Verdict::Kind::MergeOk;
    verdict.reason = "All functions share one canonical name token multiset.";
  } else {
    verdict.kind = Verdict::Kind::MergeBad;
    verdict.sub_clusters = std::move(groups);
    verdict.reason = "Names split into distinct token groups.";
  }
  return verdict_to_json(verdict);
}

std::string MockChatModel::answer_doc_merger(const std::string& prompt) const {
  const std::string keep =
      slice_between(prompt, "Keep:\n", "\nPrune:", "keep block");
  const std::string prune = slice_between(prompt, "Prune:\n", "", "prune block");
  auto parse_line = [](const std::string& line) -> std::pair<std::string, std::string> {
    std::size_t name_sep = line.find(" : ");
    std::size_t doc_sep = line.find(" --- ");
    if (name_sep == std::string::npos || doc_sep == std::string::npos) {
      throw InputError("mock chat: malformed tool block line: " + line);
    }
    std::string signature = line.substr(name_sep + 3, doc_sep - name_sep - 3);
    std::string description = line.substr(doc_sep + 5);
    return {signature, description};
  };
  auto [keep_signature, keep_description] = parse_line(trim(first_line(trim(keep))));
  std::vector<std::string> descriptions{keep_description};
  std::istringstream lines(trim(prune));
  std::string line;
  while (std::getline(lines, line)) {
    if (trim(line).empty()) {
      continue;
    }
    auto [sig, description] = parse_line(line);
    (void)sig;
    if (std::find(descriptions.begin(), descriptions.end(), description) == descriptions.end()) {
      descriptions.push_back(description);
    }
  }
  std::string merged;
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    if (i > 0) {
      merged += " | ";
    }
    merged += descriptions[i];
  }
  return keep_signature + "\n" + merged;
}

std::string MockChatModel::answer_agent_select(const std::string& prompt) const {
  const std::string step =
      slice_between(prompt, "Plan Step:\n", "\n\nCandidate Tools:", "plan step");
  const std::string tools_json =
      slice_between(prompt, "Candidate Tools:\n", "\n\nOutput:", "candidate tools");
  json tools;
  try {
    tools = json::parse(tools_json);
  } catch (const json::exception& ex) {
    throw InputError(std::string("mock chat: candidate tools are not JSON: ") + ex.what());
  }
  if (!tools.is_array() || tools.empty()) {
    return "None";
  }
  const auto step_vec = mock_embed(step, mock_dim_);
  std::string best_name;
  double best_score = -2.0;
  for (const json& tool : tools) {
    ToolSpec spec;
    spec.name = tool.value("name", "");
    spec.signature = tool.value("signature", "");
    spec.description = tool.value("description", "");
    const auto tool_vec = mock_embed(doc_text(spec), mock_dim_);
    double dot = 0.0;
    for (std::size_t i = 0; i < tool_vec.size(); ++i) {
      dot += static_cast<double>(step_vec[i]) * static_cast<double>(tool_vec[i]);
    }
    if (dot > best_score) {
      best_score = dot;
      best_name = spec.name;
    }
  }
  return best_name.empty() ? "None" : best_name;
}

std::string MockChatModel::answer_doc_quality(const std::string& prompt) const {
  const std::string description =
      slice_between(prompt, "Tool description: ", "", "tool description");
  const std::size_t tokens = tokenize(description).size();
  int score = 1;
  if (tokens >= 12) {
    score = 5;
  } else if (tokens >= 8) {
    score = 4;
  } else if (tokens >= 4) {
    score = 3;
  } else if (tokens >= 1) {
    score = 2;
  }
  return std::to_string(score) + "\nScore derived from the amount of descriptive detail.";
}

// ---- adapters ----

namespace {

ChatRequest single_user_request(const std::string& model, std::string prompt) {
  ChatRequest request;
  request.model = model;
  request.messages.push_back(ChatMessage{"user", std::move(prompt)});
  return request;
}

}  // namespace

PairClassifier::Result LlmPairClassifier::classify(const ToolSpec& target,
                                                   const ToolSpec& candidate) {
  const std::string prompt = render(TemplateId::Classifier,
                                    {{"target_tool_docstring", doc_text(target)},
                                     {"candidate_tool_docstring", doc_text(candidate)}});
  std::string reply;
  try {
    reply = model_.complete(single_user_request(model_name_, prompt));
  } catch (const ProviderError& ex) {
    throw ClassifierError(std::string("pair classification failed: ") + ex.what());
  }
  ClassifierReply parsed = parse_classifier_reply(reply, candidate.name);
  return {parsed.equivalent, parsed.rationale};
}

Verdict LlmClusterValidator::validate(const std::vector<ToolSpec>& members) {
  const std::string prompt =
      render(TemplateId::MergeAudit, {{"GROUP_BLOCK", format_group_block(members)}});
  std::string reply;
  try {
    reply = model_.complete(single_user_request(model_name_, prompt));
  } catch (const ProviderError& ex) {
    throw ValidatorError(std::string("cluster validation failed: ") + ex.what());
  }
  std::set<std::string> ids;
  for (const ToolSpec& member : members) {
    ids.insert(member.id);
  }
  return parse_verdict(reply, ids);
}

std::string LlmSelectionAgent::select(const std::string& query, const std::string& step,
                                      const std::vector<ToolSpec>& candidates) {
  json tools = json::array();
  for (const ToolSpec& candidate : candidates) {
    tools.push_back(json{
        {"description", candidate.description},
        {"name", candidate.name},
        {"signature", candidate.signature},
    });
  }
  const std::string prompt = render(
      TemplateId::AgentSelect, {{"question", query}, {"input", step}, {"tools", tools.dump(2)}});
  std::string reply;
  try {
    reply = model_.complete(single_user_request(model_name_, prompt));
  } catch (const ProviderError& ex) {
    throw AgentError(std::string("tool selection failed: ") + ex.what());
  }
  std::string name = trim(first_line(trim(reply)));
  // Models occasionally wrap the bare name in backticks.
  while (name.size() >= 2 && name.front() == '`' && name.back() == '`') {
    name = trim(name.substr(1, name.size() - 2));
  }
  return name.empty() ? "None" : name;
}

ToolSpec LlmDocMerger::merge(const ToolSpec& representative,
                             const std::vector<ToolSpec>& members) {
  std::string prune_block;
  for (const ToolSpec& member : members) {
    if (member.id == representative.id) {
      continue;
    }
    if (!prune_block.empty()) {
      prune_block += "\n";
    }
    prune_block += format_tool_block(member);
  }
  const std::string prompt = render(TemplateId::DocMerger,
                                    {{"keep_name", representative.name},
                                     {"keep_block", "Keep:\n" + format_tool_block(representative)},
                                     {"prune_block", "\nPrune:\n" + prune_block}});
  std::string reply;
  try {
    reply = strip_code_fences(model_.complete(single_user_request(model_name_, prompt)));
  } catch (const ProviderError& ex) {
    if (fallback_) {
      return representative;
    }
    throw MergerLLMError(std::string("doc synthesis failed: ") + ex.what());
  }
  if (trim(reply).empty()) {
    if (fallback_) {
      return representative;
    }
    throw EmptySynthesis("doc merger returned blank output for " + representative.id);
  }
  ToolSpec merged = representative;
  merged.signature = trim(first_line(trim(reply)));
  merged.description = trim(rest_lines(trim(reply)));
  return merged;
}

}  // namespace toolfuse
