#include <doctest.h>

#include <memory>

#include "fidelity/errors.hpp"
#include "fidelity/gateway.hpp"

using namespace fidelity;

namespace {

GatewayOptions fast_options() {
  GatewayOptions options;
  options.backoff_base_ms = 0;  // keep retry tests instant
  return options;
}

LlmRequest request(const std::string& prompt, int attempts = 3, const char* tag = "") {
  return {prompt, "test-model", 0.0, attempts, tag};
}

}  // namespace

TEST_CASE("mock rules fire on prompt content, deterministically") {
  auto mock = std::make_shared<MockProvider>(
      std::vector<MockProvider::Rule>{{"MARKER", "canned reply", 0}}, false);
  LlmGateway gateway(mock, fast_options());

  LlmResponse a = gateway.complete(request("text with MARKER inside"));
  LlmResponse b = gateway.complete(request("text with MARKER inside"));
  CHECK(a.text == "canned reply");
  CHECK(a.text == b.text);
  CHECK(a.usage.prompt_tokens == b.usage.prompt_tokens);

  CHECK_THROWS_AS(gateway.complete(request("no rule for this")), UnmatchedPrompt);
}

TEST_CASE("failing provider with max_attempts 1 surfaces the error") {
  auto mock = std::make_shared<MockProvider>(
      std::vector<MockProvider::Rule>{{"", "", 500}}, false);
  LlmGateway gateway(mock, fast_options());
  CHECK_THROWS_AS(gateway.complete(request("anything", 1)), ProviderError);
}

TEST_CASE("transient failures retry; 4xx never does") {
  // provider fails twice with 500, then succeeds
  struct Flaky final : ChatProvider {
    int calls = 0;
    ProviderReply chat(const LlmRequest&) override {
      if (++calls <= 2) throw ProviderError(500, "upstream hiccup");
      return {"ok", {1, 1}};
    }
  };
  auto flaky = std::make_shared<Flaky>();
  LlmGateway gateway(flaky, fast_options());
  CHECK(gateway.complete(request("p", 3)).text == "ok");
  CHECK(flaky->calls == 3);

  struct Rejecting final : ChatProvider {
    int calls = 0;
    ProviderReply chat(const LlmRequest&) override {
      ++calls;
      throw ProviderError(401, "bad key");
    }
  };
  auto rejecting = std::make_shared<Rejecting>();
  LlmGateway no_retry(rejecting, fast_options());
  CHECK_THROWS_AS(no_retry.complete(request("p", 3)), ProviderError);
  CHECK(rejecting->calls == 1);
}

TEST_CASE("usage accumulates across calls") {
  auto mock = std::make_shared<MockProvider>(
      std::vector<MockProvider::Rule>{{"", "12345678", 0}}, false);
  LlmGateway gateway(mock, fast_options());

  TokenUsage expected;
  for (int i = 0; i < 5; ++i) {
    LlmResponse r = gateway.complete(request("prompt number " + std::to_string(i), 3,
                                             i % 2 == 0 ? "detection" : "redundancy"));
    expected += r.usage;
  }
  GatewayTotals totals = gateway.totals();
  CHECK(totals.calls == 5);
  CHECK(totals.usage.prompt_tokens == expected.prompt_tokens);
  CHECK(totals.usage.completion_tokens == expected.completion_tokens);
  CHECK(gateway.calls_tagged("detection") == 3);
  CHECK(gateway.calls_tagged("redundancy") == 2);
  CHECK(gateway.calls_tagged("correction") == 0);
}

TEST_CASE("oracle behavior reads ground-truth markers out of the code block") {
  std::string prompt =
      "Decompiled code:\n```\nv1 = v2; /*gt:I4*/\nreturn v1;\n```\n\ninstructions";
  std::string answer = MockProvider::oracle_answer(prompt);
  CHECK(answer == "v1 = v2; /*gt:I4*/ // I4\nreturn v1;");

  std::string t1 =
      "Variable dependencies:\nv1:\n  v1 = v2; /*gtr:v2*/\n\ninstructions";
  CHECK(MockProvider::oracle_answer(t1) == "v2");

  std::string t1_none = "Variable dependencies:\nv1:\n  v1 = 3;\n";
  CHECK(MockProvider::oracle_answer(t1_none) == "none");
}

TEST_CASE("oracle correction removes I4 lines and marks the rest fixed") {
  std::string prompt =
      "Correction rules: ...\n\nDecompiled code:\n```\n"
      "a = 1; // I3\nb = 2; // I4\nreturn a;\n```\n";
  CHECK(MockProvider::oracle_answer(prompt) == "a = 1; //fixed\nreturn a;");
}

TEST_CASE("scripted transcripts are reproducible") {
  auto mock = std::make_shared<MockProvider>(
      std::vector<MockProvider::Rule>{
          {"first", "reply one", 0}, {"second", "reply two", 0}},
      false);
  LlmGateway g1(mock, fast_options());
  LlmGateway g2(mock, fast_options());
  std::string t1, t2;
  for (const char* p : {"the first prompt", "the second prompt", "first again"}) {
    t1 += g1.complete(request(p)).text + "|";
    t2 += g2.complete(request(p)).text + "|";
  }
  CHECK(t1 == t2);
  CHECK(t1 == "reply one|reply two|reply one|");
}

TEST_CASE("empty prompts are refused") {
  LlmGateway gateway(MockProvider::oracle(), fast_options());
  CHECK_THROWS_AS(gateway.complete(request("")), Error);
}
