#pragma once

#include <stdexcept>
#include <string>

namespace fidelity {

// Base class for every error this library raises on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- configuration / corpus ---
struct MissingSection : Error {
  explicit MissingSection(const std::string& section)
      : Error("missing required section [" + section + "]"), section(section) {}
  std::string section;
};

struct MissingRequiredKey : Error {
  MissingRequiredKey(const std::string& section, const std::string& key)
      : Error("missing required key '" + key + "' in section [" + section + "]"),
        section(section), key(key) {}
  std::string section;
  std::string key;
};

struct MalformedValue : Error {
  MalformedValue(const std::string& key, const std::string& value, const std::string& why)
      : Error("malformed value for '" + key + "': \"" + value + "\" (" + why + ")"),
        key(key), value(value) {}
  std::string key;
  std::string value;
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// --- parsing ---
struct EmptyFunction : Error {
  EmptyFunction() : Error("function text is empty") {}
};

// --- distortion database ---
struct MalformedRecord : Error {
  MalformedRecord(int line_no, const std::string& text)
      : Error("line " + std::to_string(line_no) +
              " is not of the form `<code> // I<k>`: \"" + text + "\""),
        line_no(line_no), text(text) {}
  int line_no;
  std::string text;
};

struct EmptyDatabase : Error {
  EmptyDatabase() : Error("distortion database contains no records") {}
};

struct EmbedderFailure : Error {
  EmbedderFailure(int record_id, const std::string& why)
      : Error("embedding failed for record " + std::to_string(record_id) + ": " + why),
        record_id(record_id) {}
  int record_id;
};

// --- chunking ---
struct InvalidParams : Error {
  explicit InvalidParams(const std::string& msg) : Error(msg) {}
};

struct CoverageGap : Error {
  explicit CoverageGap(int line)
      : Error("line " + std::to_string(line) + " is covered by no chunk"), line(line) {}
  int line;
};

// --- prompting ---
struct EmptyDependencyMap : Error {
  EmptyDependencyMap() : Error("dependency map is empty; nothing to render") {}
};

struct NothingToCorrect : Error {
  NothingToCorrect() : Error("function carries no distortion labels") {}
};

struct TemplateError : Error {
  explicit TemplateError(const std::string& msg) : Error(msg) {}
};

// --- LLM gateway ---
struct ProviderError : Error {
  ProviderError(int status, const std::string& body_excerpt)
      : Error("provider error, status " + std::to_string(status) + ": " + body_excerpt),
        status(status), body_excerpt(body_excerpt) {}
  int status;                 // 0 = transport-level failure
  std::string body_excerpt;
};

struct Timeout : Error {
  explicit Timeout(const std::string& msg) : Error(msg) {}
};

struct UnmatchedPrompt : Error {
  explicit UnmatchedPrompt(const std::string& excerpt)
      : Error("no mock rule matches prompt: " + excerpt) {}
};

// --- model output parsing ---
struct OutputParseError : Error {
  explicit OutputParseError(const std::string& msg) : Error(msg) {}
};

struct LineCountMismatch : OutputParseError {
  LineCountMismatch(int expected, int got, int function_index = -1)
      : OutputParseError("line count mismatch: expected " + std::to_string(expected) +
                         ", got " + std::to_string(got) +
                         (function_index >= 0
                              ? " (function " + std::to_string(function_index) + ")"
                              : "")),
        expected(expected), got(got), function_index(function_index) {}
  int expected;
  int got;
  int function_index;  // -1 when not file-level
};

struct UnknownLabel : OutputParseError {
  explicit UnknownLabel(const std::string& text)
      : OutputParseError("unknown distortion label: \"" + text + "\""), text(text) {}
  std::string text;
};

// --- evaluation ---
struct FunctionCountMismatch : Error {
  FunctionCountMismatch(std::size_t model, std::size_t truth)
      : Error("function count mismatch: model has " + std::to_string(model) +
              ", ground truth has " + std::to_string(truth)),
        model(model), truth(truth) {}
  std::size_t model;
  std::size_t truth;
};

struct EmptyEvaluation : Error {
  EmptyEvaluation() : Error("no aligned lines to evaluate") {}
};

struct DenominatorZero : Error {
  DenominatorZero() : Error("every flagged line is I4; fix-rate denominator is zero") {}
};

}  // namespace fidelity
