#include "suskit/text.hpp"

#include <cctype>

#include "suskit/util.hpp"

namespace suskit {

namespace {

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_strip_punct(unsigned char c) {
  return std::ispunct(c) != 0;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    // Whitespace: ASCII plus UTF-8 no-break space (0xC2 0xA0).
    if (is_space_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    if (i + 1 < n && static_cast<unsigned char>(text[i]) == 0xC2 &&
        static_cast<unsigned char>(text[i + 1]) == 0xA0) {
      i += 2;
      continue;
    }
    std::size_t begin = i;
    while (i < n && !is_space_byte(static_cast<unsigned char>(text[i])) &&
           !(i + 1 < n && static_cast<unsigned char>(text[i]) == 0xC2 &&
             static_cast<unsigned char>(text[i + 1]) == 0xA0)) {
      ++i;
    }
    std::size_t end = i;
    // Strip punctuation only at the edges; internal apostrophes/hyphens survive.
    while (begin < end && is_strip_punct(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && is_strip_punct(static_cast<unsigned char>(text[end - 1]))) --end;
    if (begin == end) continue;
    Token tok;
    tok.begin = begin;
    tok.end = end;
    tok.text = lower_ascii(text.substr(begin, end - begin));
    out.push_back(std::move(tok));
  }
  return out;
}

std::vector<std::string> token_texts(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(std::move(t.text));
  return out;
}

std::string apply_word_replacements(std::string_view original, const std::vector<Token>& tokens,
                                    const std::vector<std::pair<std::size_t, std::string>>& replacements) {
  // Splice right-to-left so earlier spans stay valid.
  std::string result(original);
  std::vector<std::pair<std::size_t, std::string>> sorted = replacements;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [pos, word] : sorted) {
    const Token& tok = tokens.at(pos);
    result.replace(tok.begin, tok.end - tok.begin, word);
  }
  return result;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace suskit
