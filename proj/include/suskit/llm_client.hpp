#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace suskit {

struct LlmConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4";
  // Name of the environment variable holding the bearer token; never the token itself.
  std::string token_env = "SUSKIT_LLM_TOKEN";
  double timeout_seconds = 30.0;
  int max_retries = 2;
  bool mock = false;
  std::filesystem::path mock_responses;  // JSON map: text digest -> canned response string

  void validate() const;
};

struct LlmJudgement {
  int score = 0;  // 1..5
  std::string rationale;
  std::string raw;
};

struct LlmFailure {
  std::size_t index = 0;
  std::string text;
  std::string message;
};

struct LlmBatchResult {
  // Input order; a slot is empty exactly when the same index appears in failures.
  std::vector<std::optional<LlmJudgement>> judgements;
  std::vector<LlmFailure> failures;
};

// System prompt sent with every scoring request, worked examples included.
extern const std::string kJudgePrompt;

// First standalone digit 1-5 after a case-insensitive "score"; falls back to the
// first standalone digit 1-5 anywhere. Standalone = not part of a longer number.
std::optional<int> parse_llm_score(const std::string& response);

LlmJudgement score_text(const std::string& text, const LlmConfig& config);

LlmBatchResult batch_score(const std::vector<std::string>& texts, const LlmConfig& config,
                           int rate_limit_per_minute = 0);

}  // namespace suskit
