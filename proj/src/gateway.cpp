#include "fidelity/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <thread>

#include "fidelity/corpus.hpp"
#include "fidelity/distortion.hpp"
#include "fidelity/errors.hpp"
#include "fidelity/http_util.hpp"
#include "fidelity/prompt.hpp"

#include <json.hpp>

namespace fidelity {

namespace {

// The mock synthesizes usage figures so report totals stay meaningful
// offline: roughly four characters per token.
TokenUsage synthetic_usage(const std::string& prompt, const std::string& reply) {
  return {static_cast<long>(prompt.size() + 3) / 4,
          static_cast<long>(reply.size() + 3) / 4};
}

std::vector<std::string> text_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    lines.push_back(nl == std::string::npos ? text.substr(start)
                                            : text.substr(start, nl - start));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return lines;
}

// /*gt:I1,I4*/ -> labels for the line carrying the marker.
std::set<DistortionType> gt_labels(const std::string& line) {
  std::set<DistortionType> labels;
  std::size_t at = line.find("/*gt:");
  if (at == std::string::npos) return labels;
  std::size_t end = line.find("*/", at);
  if (end == std::string::npos) return labels;
  std::string body = line.substr(at + 5, end - at - 5);
  std::size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && (body[i] == ',' || body[i] == ' ')) ++i;
    std::size_t j = i;
    while (j < body.size() && body[j] != ',' && body[j] != ' ') ++j;
    if (j > i)
      if (auto t = parse_label_token(body.substr(i, j - i))) labels.insert(*t);
    i = j;
  }
  return labels;
}

}  // namespace

HttpChatProvider::HttpChatProvider(std::string api_base, std::string api_key,
                                   int timeout_seconds)
    : api_base_(std::move(api_base)), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {}

ProviderReply HttpChatProvider::chat(const LlmRequest& request) {
  nlohmann::json payload = {
      {"model", request.model_id},
      {"temperature", request.temperature},
      {"messages",
       nlohmann::json::array({{{"role", "user"}, {"content", request.prompt_text}}})},
  };
  std::string body =
      http_post_json(api_base_, "/chat/completions", api_key_, payload.dump(),
                     timeout_seconds_);

  nlohmann::json reply = nlohmann::json::parse(body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
    throw ProviderError(0, "unexpected completion shape: " + body.substr(0, 200));

  ProviderReply out;
  out.text = reply["choices"][0]["message"]["content"].get<std::string>();
  if (reply.contains("usage")) {
    out.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
    out.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
  }
  return out;
}

std::shared_ptr<MockProvider> MockProvider::oracle() {
  return std::make_shared<MockProvider>(std::vector<Rule>{}, true);
}

std::shared_ptr<MockProvider> MockProvider::from_script_file(const std::string& path) {
  nlohmann::json doc = nlohmann::json::parse(read_text_file(path));
  std::vector<Rule> rules;
  bool fallback = false;
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    fallback = doc.value("fallback", std::string()) == "oracle";
    if (!doc.contains("rules"))
      throw Error("mock script object needs a \"rules\" array");
    list = &doc["rules"];
  }
  for (const auto& item : *list) {
    Rule rule;
    rule.contains = item.value("contains", std::string());
    rule.response = item.value("response", std::string());
    rule.fail_status = item.value("fail_status", 0);
    rules.push_back(std::move(rule));
  }
  return std::make_shared<MockProvider>(std::move(rules), fallback);
}

MockProvider::MockProvider(std::vector<Rule> rules, bool oracle_fallback)
    : rules_(std::move(rules)), oracle_fallback_(oracle_fallback) {}

std::string MockProvider::oracle_answer(const std::string& prompt) {
  const std::string code = extract_fenced_block(prompt, "Decompiled code:");

  // Template 1: the dependency listing carries /*gtr:...*/ markers naming
  // the redundant variables.
  if (prompt.find("Variable dependencies:") != std::string::npos) {
    std::set<std::string> names;
    std::size_t at = 0;
    while ((at = prompt.find("/*gtr:", at)) != std::string::npos) {
      std::size_t end = prompt.find("*/", at);
      if (end == std::string::npos) break;
      std::string body = prompt.substr(at + 6, end - at - 6);
      std::size_t i = 0;
      while (i < body.size()) {
        while (i < body.size() && (body[i] == ',' || body[i] == ' ')) ++i;
        std::size_t j = i;
        while (j < body.size() && body[j] != ',' && body[j] != ' ') ++j;
        if (j > i) names.insert(body.substr(i, j - i));
        i = j;
      }
      at = end + 2;
    }
    if (names.empty()) return "none";
    std::string out;
    for (const std::string& n : names) {
      if (!out.empty()) out += ", ";
      out += n;
    }
    return out;
  }

  if (code.empty()) throw UnmatchedPrompt(prompt.substr(0, 120));

  // Template 3: labeled code in, corrected code out.
  if (prompt.find("Correction rules:") != std::string::npos) {
    std::string out;
    bool first = true;
    for (const std::string& line : text_lines(code)) {
      TrailingLabels parsed = split_trailing_labels(line);
      if (parsed.labels.count(DistortionType::I4)) continue;  // deleted
      std::string emitted = parsed.labels.empty() ? line : parsed.stripped + " //fixed";
      if (!first) out += '\n';
      out += emitted;
      first = false;
    }
    return out;
  }

  // Template 2: echo the code, appending the ground-truth labels.
  std::string out;
  bool first = true;
  for (const std::string& line : text_lines(code)) {
    std::set<DistortionType> labels = gt_labels(line);
    if (!first) out += '\n';
    out += append_labels(line, labels);
    first = false;
  }
  return out;
}

ProviderReply MockProvider::chat(const LlmRequest& request) {
  for (const Rule& rule : rules_) {
    if (request.prompt_text.find(rule.contains) == std::string::npos) continue;
    if (rule.fail_status != 0)
      throw ProviderError(rule.fail_status, "scripted failure");
    return {rule.response, synthetic_usage(request.prompt_text, rule.response)};
  }
  if (oracle_fallback_) {
    std::string reply = oracle_answer(request.prompt_text);
    return {reply, synthetic_usage(request.prompt_text, reply)};
  }
  throw UnmatchedPrompt(request.prompt_text.substr(0, 120));
}

bool is_transient_status(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

LlmGateway::LlmGateway(std::shared_ptr<ChatProvider> provider, GatewayOptions options)
    : provider_(std::move(provider)), options_(options) {}

void LlmGateway::acquire_slot() {
  std::unique_lock<std::mutex> lock(mutex_);
  slot_available_.wait(lock, [&] { return in_flight_ < options_.max_concurrency; });
  ++in_flight_;
}

void LlmGateway::release_slot() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    --in_flight_;
  }
  slot_available_.notify_one();
}

LlmResponse LlmGateway::complete(const LlmRequest& request) {
  if (request.prompt_text.empty()) throw Error("refusing to send an empty prompt");

  const int attempts =
      request.max_attempts > 0 ? request.max_attempts : options_.default_max_attempts;

  acquire_slot();
  struct SlotGuard {
    LlmGateway* g;
    ~SlotGuard() { g->release_slot(); }
  } guard{this};

  auto started = std::chrono::steady_clock::now();
  ProviderReply reply;
  for (int attempt = 1;; ++attempt) {
    try {
      reply = provider_->chat(request);
      break;
    } catch (const Timeout&) {
      if (attempt >= attempts) throw;
    } catch (const ProviderError& e) {
      if (!is_transient_status(e.status) || attempt >= attempts) throw;
    }
    std::this_thread::sleep_for(
        std::chrono::milliseconds(options_.backoff_base_ms << (attempt - 1)));
  }
  double latency =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  LlmResponse response{reply.text, reply.usage, latency};
  {
    std::lock_guard<std::mutex> lock(mutex_);
    totals_.usage += response.usage;
    totals_.latency_seconds += latency;
    ++totals_.calls;
    if (!request.tag.empty()) ++calls_by_tag_[request.tag];
  }
  return response;
}

GatewayTotals LlmGateway::totals() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return totals_;
}

long LlmGateway::calls_tagged(const std::string& tag) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = calls_by_tag_.find(tag);
  return it == calls_by_tag_.end() ? 0 : it->second;
}

}  // namespace fidelity
