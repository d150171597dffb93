#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "suskit/llm_client.hpp"
#include "suskit/util.hpp"

using namespace suskit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTokenVar = "SUSKIT_TEST_LLM_TOKEN";

LlmConfig mock_config(const fs::path& responses) {
  LlmConfig config;
  config.mock = true;
  config.mock_responses = responses;
  return config;
}

fs::path write_mock_file(const std::string& name, const json& canned) {
  auto path = fs::temp_directory_path() / name;
  write_text_file(path, canned.dump());
  return path;
}

// Tiny in-process completion server so the HTTP path runs without any network.
struct JudgeServer {
  httplib::Server server;
  std::thread runner;
  int port = 0;
  std::atomic<int> hits{0};

  explicit JudgeServer(const std::function<void(const httplib::Request&, httplib::Response&)>& fn) {
    server.Post("/v1/chat/completions", [this, fn](const httplib::Request& req,
                                                   httplib::Response& res) {
      ++hits;
      fn(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    runner = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~JudgeServer() {
    server.stop();
    runner.join();
  }

  LlmConfig config() const {
    LlmConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    c.model = "test-model";
    c.token_env = kTokenVar;
    c.timeout_seconds = 5.0;
    return c;
  }
};

void reply_with(httplib::Response& res, const std::string& content) {
  const json body = {{"choices", {{{"message", {{"content", content}}}}}}};
  res.set_content(body.dump(), "application/json");
}

}  // namespace

TEST_CASE("score parsing prefers the digit following the word score") {
  CHECK(parse_llm_score("Score: 4 - the word wok looks misspelled") == 4);
  CHECK(parse_llm_score("the SCORE is 2 here") == 2);
  CHECK(parse_llm_score("3 looks right, score 5 overall") == 5);
  CHECK(parse_llm_score("I would give this a 2.") == 2);

  // Digits embedded in longer numbers never count.
  CHECK(parse_llm_score("score: 42, but really it deserves a 3") == 3);
  CHECK(parse_llm_score("item 12345 is fine") == std::nullopt);

  // Only 1-5 qualify.
  CHECK(parse_llm_score("score: 9") == std::nullopt);
  CHECK(parse_llm_score("score: 0 out of nothing") == std::nullopt);

  // When nothing follows "score", the whole string is scanned.
  CHECK(parse_llm_score("4 is my score") == 4);

  CHECK(parse_llm_score("") == std::nullopt);
  CHECK(parse_llm_score("no digits at all") == std::nullopt);
}

TEST_CASE("config validation covers both modes") {
  LlmConfig live;
  live.token_env = kTokenVar;
  CHECK_NOTHROW(live.validate());

  LlmConfig bad = live;
  bad.endpoint = "";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = live;
  bad.model = "";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = live;
  bad.token_env = "";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = live;
  bad.timeout_seconds = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = live;
  bad.max_retries = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  LlmConfig mock;
  mock.mock = true;
  CHECK_THROWS_WITH_AS(mock.validate(), doctest::Contains("canned-response"),
                       std::invalid_argument);
  mock.mock_responses = "whatever.json";
  mock.endpoint = "";  // irrelevant in mock mode
  CHECK_NOTHROW(mock.validate());
}

TEST_CASE("mock scoring looks responses up by text digest") {
  const std::string text = "a perfectly ordinary sentence";
  const json canned = {
      {digest_hex(text), "Score: 4. The phrasing is slightly off."},
      {digest_hex("another one"), "this earns a 1 from me"},
  };
  auto path = write_mock_file("suskit_llm_mock_basic.json", canned);
  const LlmConfig config = mock_config(path);

  const LlmJudgement judged = score_text(text, config);
  CHECK(judged.score == 4);
  CHECK(judged.raw == "Score: 4. The phrasing is slightly off.");
  CHECK(judged.rationale == judged.raw);

  CHECK(score_text("another one", config).score == 1);

  CHECK_THROWS_WITH_AS(score_text("never canned", config),
                       doctest::Contains("no canned response"), std::runtime_error);

  fs::remove(path);
}

TEST_CASE("a canned response without a usable digit is an error") {
  const std::string text = "whatever";
  auto path = write_mock_file("suskit_llm_mock_nodigit.json",
                              {{digest_hex(text), "utterly unscorable"}});
  CHECK_THROWS_WITH_AS(score_text(text, mock_config(path)),
                       doctest::Contains("no score in 1-5"), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("batch slots stay aligned with the inputs and the failure list") {
  const std::vector<std::string> texts = {"first", "second", "third", "fourth"};
  const json canned = {
      {digest_hex(texts[0]), "score 2: fine"},
      // texts[1] is missing on purpose
      {digest_hex(texts[2]), "score none"},  // parses to nothing
      {digest_hex(texts[3]), "Score: 5"},
  };
  auto path = write_mock_file("suskit_llm_mock_batch.json", canned);

  const LlmBatchResult result = batch_score(texts, mock_config(path));
  REQUIRE(result.judgements.size() == texts.size());
  REQUIRE(result.failures.size() == 2);

  CHECK(result.judgements[0].has_value());
  CHECK(result.judgements[0]->score == 2);
  CHECK_FALSE(result.judgements[1].has_value());
  CHECK_FALSE(result.judgements[2].has_value());
  CHECK(result.judgements[3].has_value());
  CHECK(result.judgements[3]->score == 5);

  CHECK(result.failures[0].index == 1);
  CHECK(result.failures[0].text == "second");
  CHECK(result.failures[0].message.find("no canned response") != std::string::npos);
  CHECK(result.failures[1].index == 2);
  CHECK(result.failures[1].message.find("no score in 1-5") != std::string::npos);

  // Every empty slot is listed as a failure, and nothing else is.
  for (std::size_t i = 0; i < result.judgements.size(); ++i) {
    const bool listed = std::any_of(result.failures.begin(), result.failures.end(),
                                    [&](const LlmFailure& f) { return f.index == i; });
    CHECK(result.judgements[i].has_value() == !listed);
  }
  fs::remove(path);
}

TEST_CASE("a missing token variable is reported by name") {
  unsetenv("SUSKIT_SURELY_UNSET_TOKEN");
  LlmConfig config;
  config.endpoint = "http://127.0.0.1:9/v1/chat/completions";
  config.token_env = "SUSKIT_SURELY_UNSET_TOKEN";
  CHECK_THROWS_WITH_AS(score_text("x", config), doctest::Contains("SUSKIT_SURELY_UNSET_TOKEN"),
                       std::runtime_error);
}

TEST_CASE("an endpoint without a scheme is rejected") {
  setenv(kTokenVar, "not-a-real-token", 1);
  LlmConfig config;
  config.endpoint = "api.example.test/v1/chat/completions";
  config.token_env = kTokenVar;
  CHECK_THROWS_WITH_AS(score_text("x", config), doctest::Contains("scheme"),
                       std::invalid_argument);
}

TEST_CASE("the live path sends the judge prompt and reads the reply") {
  setenv(kTokenVar, "token-for-tests", 1);
  json seen_body;
  std::string seen_auth;
  JudgeServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = json::parse(req.body);
    seen_auth = req.get_header_value("Authorization");
    reply_with(res, "Score: 3, hard to tell.");
  });

  const LlmJudgement judged = score_text("the cat sat quietly", server.config());
  CHECK(judged.score == 3);
  CHECK(judged.raw == "Score: 3, hard to tell.");

  CHECK(seen_auth == "Bearer token-for-tests");
  CHECK(seen_body.at("model") == "test-model");
  CHECK(seen_body.at("temperature") == 0);
  REQUIRE(seen_body.at("messages").size() == 2);
  CHECK(seen_body["messages"][0]["role"] == "system");
  CHECK(seen_body["messages"][0]["content"] == kJudgePrompt);
  CHECK(seen_body["messages"][1]["role"] == "user");
  CHECK(seen_body["messages"][1]["content"] == "the cat sat quietly");
}

TEST_CASE("server errors are retried and then succeed") {
  setenv(kTokenVar, "token-for-tests", 1);
  std::atomic<int> calls{0};
  JudgeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    reply_with(res, "score 2");
  });

  LlmConfig config = server.config();
  config.max_retries = 2;
  CHECK(score_text("retry me", config).score == 2);
  CHECK(calls == 3);
}

TEST_CASE("persistent server errors exhaust the retry budget") {
  setenv(kTokenVar, "token-for-tests", 1);
  JudgeServer server([&](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("down", "text/plain");
  });

  LlmConfig config = server.config();
  config.max_retries = 1;
  CHECK_THROWS_WITH_AS(score_text("x", config), doctest::Contains("after 2 attempts"),
                       std::runtime_error);
  CHECK(server.hits == 2);
}

TEST_CASE("client errors and malformed replies fail without retrying") {
  setenv(kTokenVar, "token-for-tests", 1);
  {
    JudgeServer server([&](const httplib::Request&, httplib::Response& res) {
      res.status = 404;
      res.set_content("nope", "text/plain");
    });
    LlmConfig config = server.config();
    config.max_retries = 3;
    CHECK_THROWS_WITH_AS(score_text("x", config), doctest::Contains("status 404"),
                         std::runtime_error);
    CHECK(server.hits == 1);
  }
  {
    JudgeServer server([&](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"unexpected\":true}", "application/json");
    });
    CHECK_THROWS_WITH_AS(score_text("x", server.config()),
                         doctest::Contains("malformed llm response"), std::runtime_error);
  }
}

TEST_CASE("batch failures on the live path carry the transport error") {
  setenv(kTokenVar, "token-for-tests", 1);
  LlmConfig config;
  // Nothing listens here; every request fails at the socket.
  config.endpoint = "http://127.0.0.1:9/v1/chat/completions";
  config.token_env = kTokenVar;
  config.timeout_seconds = 2.0;
  config.max_retries = 0;

  const LlmBatchResult result = batch_score({"a", "b"}, config);
  REQUIRE(result.judgements.size() == 2);
  CHECK_FALSE(result.judgements[0].has_value());
  CHECK_FALSE(result.judgements[1].has_value());
  REQUIRE(result.failures.size() == 2);
  CHECK(result.failures[0].message.find("after 1 attempts") != std::string::npos);
}
