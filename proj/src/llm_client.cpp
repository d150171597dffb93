#include "suskit/llm_client.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "suskit/util.hpp"

namespace suskit {

const std::string kJudgePrompt =
    "You are a highly intelligent AI trained to detect if a sentence might have been altered "
    "by a computer algorithm. In the sentence, one or more words or characters might be "
    "altered by a computer algorithm to change another algorithm's prediction on it. However, "
    "sometimes character-level errors can be human errors as well. So when judging a sentence "
    "you need to see if the sentence raises any suspicion looking at whether the words go with "
    "each other. On a scale of 1-5, where, 1 is \"no computer alterations\", 2 is \"possibly "
    "no computer alteration\", 3 is \"uncertain whether altered or not\", 4 is \"possibly "
    "altered\" and 5 is \"certainly computer-altered\", you will generate a score for the "
    "suspiciousness of a sentence. For example, \"it may . . . wok as a jaunt down memory "
    "lane for teens and young adults\" has a score of 4 as there is a character attack on the "
    "word \"work\" and the letter \"r\" is deleted, but also can be a human error. Another "
    "example is \"a cliched and surface cautionary tale about the hard-partying lives of "
    "teenagers .\" having a score of 5 as the word \"shallow\" is replaced by another "
    "synonymous word \"surface\" and \"surface cautionary\" doesn't make any sense in this "
    "context. Another example is \"This is a great day to be alive.\" having a score of 1 as "
    "the characters and words are in place in a meaningful order. Produce a numeric score of "
    "suspiciousness and reasoning in one line for a given sentence.";

void LlmConfig::validate() const {
  if (mock) {
    if (mock_responses.empty())
      throw std::invalid_argument("mock mode needs a canned-response file");
    return;
  }
  if (endpoint.empty()) throw std::invalid_argument("llm endpoint must not be empty");
  if (model.empty()) throw std::invalid_argument("llm model name must not be empty");
  if (token_env.empty()) throw std::invalid_argument("llm token env-var name must not be empty");
  if (!(timeout_seconds > 0)) throw std::invalid_argument("llm timeout must be positive");
  if (max_retries < 0) throw std::invalid_argument("llm max retries must be >= 0");
}

namespace {

bool is_standalone_digit(const std::string& s, std::size_t i) {
  if (s[i] < '1' || s[i] > '5') return false;
  if (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) return false;
  if (i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) return false;
  return true;
}

std::optional<int> first_standalone_digit(const std::string& s, std::size_t from) {
  for (std::size_t i = from; i < s.size(); ++i)
    if (is_standalone_digit(s, i)) return s[i] - '0';
  return std::nullopt;
}

}  // namespace

std::optional<int> parse_llm_score(const std::string& response) {
  const std::string folded = lower_ascii(response);
  const std::size_t at = folded.find("score");
  if (at != std::string::npos) {
    if (auto hit = first_standalone_digit(response, at + 5)) return hit;
  }
  return first_standalone_digit(response, 0);
}

namespace {

std::string bearer_token(const LlmConfig& config) {
  const char* value = std::getenv(config.token_env.c_str());
  if (value == nullptr || *value == '\0')
    throw std::runtime_error("environment variable " + config.token_env + " is not set");
  return value;
}

// Splits "https://host[:port]/path" into the client base and the request path.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos)
    throw std::invalid_argument("llm endpoint must include a scheme: " + endpoint);
  const std::size_t path = endpoint.find('/', scheme + 3);
  if (path == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path), endpoint.substr(path)};
}

std::string live_completion(const std::string& text, const LlmConfig& config) {
  const auto [base, path] = split_endpoint(config.endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(std::chrono::duration<double>(config.timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(config.timeout_seconds));

  nlohmann::json body = {
      {"model", config.model},
      {"temperature", 0},
      {"messages",
       {{{"role", "system"}, {"content", kJudgePrompt}}, {{"role", "user"}, {"content", text}}}},
  };
  const httplib::Headers headers = {{"Authorization", "Bearer " + bearer_token(config)}};

  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error: status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("llm request failed with status " + std::to_string(res->status) +
                               ": " + res->body);
    try {
      const nlohmann::json reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("malformed llm response: ") + e.what() +
                               "; body: " + res->body);
    }
  }
  throw std::runtime_error("llm request failed after " + std::to_string(config.max_retries + 1) +
                           " attempts; last " + last_error);
}

std::string mock_completion(const std::string& text, const LlmConfig& config) {
  const nlohmann::json canned = nlohmann::json::parse(read_text_file(config.mock_responses));
  const std::string key = digest_hex(text);
  const auto it = canned.find(key);
  if (it == canned.end())
    throw std::runtime_error("no canned response for text digest " + key);
  return it->get<std::string>();
}

LlmJudgement judge_from_response(const std::string& response) {
  LlmJudgement judgement;
  judgement.raw = response;
  const auto score = parse_llm_score(response);
  if (!score)
    throw std::runtime_error("no score in 1-5 found in response: " + response);
  judgement.score = *score;
  judgement.rationale = std::string(trim(response));
  return judgement;
}

}  // namespace

LlmJudgement score_text(const std::string& text, const LlmConfig& config) {
  config.validate();
  const std::string response =
      config.mock ? mock_completion(text, config) : live_completion(text, config);
  return judge_from_response(response);
}

LlmBatchResult batch_score(const std::vector<std::string>& texts, const LlmConfig& config,
                           int rate_limit_per_minute) {
  config.validate();
  LlmBatchResult result;
  result.judgements.resize(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (!config.mock && rate_limit_per_minute > 0 && i > 0) {
      const auto pause = std::chrono::duration<double>(60.0 / rate_limit_per_minute);
      std::this_thread::sleep_for(pause);
    }
    try {
      result.judgements[i] = score_text(texts[i], config);
    } catch (const std::exception& e) {
      result.failures.push_back({i, texts[i], e.what()});
    }
  }
  return result;
}

}  // namespace suskit
