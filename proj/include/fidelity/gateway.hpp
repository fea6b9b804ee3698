#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace fidelity {

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;

  long total() const { return prompt_tokens + completion_tokens; }
  TokenUsage& operator+=(const TokenUsage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
};

struct LlmRequest {
  std::string prompt_text;
  std::string model_id;
  double temperature = 0.0;
  int max_attempts = 3;
  std::string tag;  // "redundancy" / "detection" / "correction" (reporting)
};

struct LlmResponse {
  std::string text;
  TokenUsage usage;
  double latency_seconds = 0.0;
};

struct ProviderReply {
  std::string text;
  TokenUsage usage;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  // Throws ProviderError / Timeout on failure.
  virtual ProviderReply chat(const LlmRequest& request) = 0;
};

// OpenAI-compatible chat-completions endpoint. Refuses to run when
// FIDELITY_FORBID_NETWORK is set (test guard).
class HttpChatProvider final : public ChatProvider {
 public:
  HttpChatProvider(std::string api_base, std::string api_key,
                   int timeout_seconds = 120);
  ProviderReply chat(const LlmRequest& request) override;

 private:
  std::string api_base_;
  std::string api_key_;
  int timeout_seconds_;
};

// Deterministic offline provider. Rules are checked in order; the first
// whose substring matches the prompt fires. With oracle fallback enabled,
// unmatched prompts are answered from ground-truth markers embedded in the
// prompt's code block (/*gt:I1,I4*/ for labels, /*gtr:v1,v2*/ for redundant
// variables); otherwise UnmatchedPrompt is thrown.
class MockProvider final : public ChatProvider {
 public:
  struct Rule {
    std::string contains;       // substring predicate on the prompt
    std::string response;       // canned reply (when fail_status == 0)
    int fail_status = 0;        // nonzero: throw ProviderError(status)
  };

  static std::shared_ptr<MockProvider> oracle();
  static std::shared_ptr<MockProvider> from_script_file(const std::string& path);
  MockProvider(std::vector<Rule> rules, bool oracle_fallback);

  ProviderReply chat(const LlmRequest& request) override;

  // The detection/correction answer the oracle would give for this prompt.
  static std::string oracle_answer(const std::string& prompt);

 private:
  std::vector<Rule> rules_;
  bool oracle_fallback_;
};

struct GatewayOptions {
  int max_concurrency = 4;
  int default_max_attempts = 3;
  int backoff_base_ms = 1000;  // doubled per retry
};

struct GatewayTotals {
  TokenUsage usage;
  long calls = 0;
  double latency_seconds = 0.0;
};

// Retrying, concurrency-capped front end over a provider. Shareable across
// threads.
class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<ChatProvider> provider,
                      GatewayOptions options = {});

  // Retries transient failures (5xx, 429, transport, timeout) with
  // exponential backoff; never re-sends after a non-transient 4xx.
  LlmResponse complete(const LlmRequest& request);

  GatewayTotals totals() const;
  long calls_tagged(const std::string& tag) const;

 private:
  void acquire_slot();
  void release_slot();

  std::shared_ptr<ChatProvider> provider_;
  GatewayOptions options_;

  mutable std::mutex mutex_;
  std::condition_variable slot_available_;
  GatewayTotals totals_;
  std::map<std::string, long> calls_by_tag_;
  int in_flight_ = 0;
};

bool is_transient_status(int status);

}  // namespace fidelity
