#pragma once

#include <stdexcept>
#include <string>

namespace toolfuse {

// Base error. The three categories below map onto the CLI exit codes:
// InputError -> 1, ProviderError -> 2, IntegrityError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

// ---- core ----

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class DuplicateToolId : public InputError {
 public:
  explicit DuplicateToolId(const std::string& id)
      : InputError("duplicate tool id: " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class EmptyName : public InputError {
 public:
  using InputError::InputError;
};

class DuplicateQueryId : public ParseError {
 public:
  using ParseError::ParseError;
};

class UnknownGoldTool : public InputError {
 public:
  UnknownGoldTool(const std::string& query_id, const std::string& tool_id)
      : InputError("query " + query_id + " references unknown gold tool: " + tool_id),
        query_id_(query_id),
        tool_id_(tool_id) {}
  const std::string& query_id() const { return query_id_; }
  const std::string& tool_id() const { return tool_id_; }

 private:
  std::string query_id_;
  std::string tool_id_;
};

class EmptyGold : public InputError {
 public:
  using InputError::InputError;
};

// ---- embedding ----

class ZeroVector : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class IndexOutOfRange : public InputError {
 public:
  using InputError::InputError;
};

class KTooLarge : public InputError {
 public:
  using InputError::InputError;
};

// ---- merger ----

class ClassifierError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class ValidatorError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class MergerLLMError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class EmptySynthesis : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class IntegrityViolation : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

class PlanMismatch : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

// ---- retriever ----

class UnknownTool : public InputError {
 public:
  using InputError::InputError;
};

class KeyMismatch : public InputError {
 public:
  using InputError::InputError;
};

class AgentError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// ---- evalkit ----

class MissingSelection : public InputError {
 public:
  using InputError::InputError;
};

class SingleCluster : public InputError {
 public:
  using InputError::InputError;
};

class SchemaMismatch : public InputError {
 public:
  using InputError::InputError;
};

// ---- llm gateway ----

class MissingSlot : public InputError {
 public:
  using InputError::InputError;
};

class UnknownTemplate : public InputError {
 public:
  using InputError::InputError;
};

class UnparseableReply : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class BadJson : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class ForeignId : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class OverlappingSubclusters : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class Timeout : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class ApiError : public ProviderError {
 public:
  ApiError(int status, const std::string& body)
      : ProviderError("api error, status " + std::to_string(status) + ": " + body),
        status_(status),
        body_(body) {}
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

}  // namespace toolfuse
