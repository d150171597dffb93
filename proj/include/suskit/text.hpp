#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace suskit {

// A word with the byte span it occupies in the source string. `text` is
// lowercased and edge-punctuation-stripped; the span covers the stripped core
// so a replacement can be spliced back without touching surrounding context.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<Token> tokenize(std::string_view text);
std::vector<std::string> token_texts(std::string_view text);

// Replace the words at the given token positions inside the original string.
std::string apply_word_replacements(std::string_view original, const std::vector<Token>& tokens,
                                    const std::vector<std::pair<std::size_t, std::string>>& replacements);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace suskit
