#include <doctest.h>

#include <string>
#include <vector>

#include "suskit/text.hpp"

using namespace suskit;

TEST_CASE("tokenize lowercases and strips edge punctuation") {
  auto toks = tokenize("Hello, world!");
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].text == "hello");
  CHECK(toks[0].begin == 0);
  CHECK(toks[0].end == 5);
  CHECK(toks[1].text == "world");
  CHECK(toks[1].begin == 7);
  CHECK(toks[1].end == 12);
}

TEST_CASE("tokenize keeps internal apostrophes and hyphens") {
  auto toks = token_texts("Don't over-think \"this\".");
  REQUIRE(toks.size() == 3);
  CHECK(toks[0] == "don't");
  CHECK(toks[1] == "over-think");
  CHECK(toks[2] == "this");
}

TEST_CASE("tokenize handles empty and all-punctuation input") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("  \t ").empty());
  CHECK(tokenize("... !! --").empty());
}

TEST_CASE("token spans always cover the reported text") {
  const std::string s = "  A man, a plan -- a canal: Panama!  ";
  for (const auto& t : tokenize(s)) {
    std::string core = s.substr(t.begin, t.end - t.begin);
    for (char& c : core) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    CHECK(core == t.text);
  }
}

TEST_CASE("token_texts equals the text fields of tokenize") {
  const std::string s = "The Quick\tbrown FOX.";
  auto toks = tokenize(s);
  auto texts = token_texts(s);
  REQUIRE(toks.size() == texts.size());
  for (std::size_t i = 0; i < toks.size(); ++i) CHECK(toks[i].text == texts[i]);
}

TEST_CASE("replacements splice into the original, context intact") {
  const std::string s = "Hello, world!";
  auto toks = tokenize(s);
  CHECK(apply_word_replacements(s, toks, {{0, "goodbye"}}) == "goodbye, world!");
  CHECK(apply_word_replacements(s, toks, {{1, "there"}}) == "Hello, there!");
  CHECK(apply_word_replacements(s, toks, {{0, "hi"}, {1, "you"}}) == "hi, you!");
}

TEST_CASE("replacing a word with itself reproduces the lowercased core only") {
  const std::string s = "one two three";
  auto toks = tokenize(s);
  CHECK(apply_word_replacements(s, toks, {{1, "two"}}) == s);
  CHECK(apply_word_replacements(s, toks, {}) == s);
}

TEST_CASE("replacements of different lengths keep other spans correct") {
  const std::string s = "a bb ccc dddd";
  auto toks = tokenize(s);
  // Replacing two positions at once must behave as if spliced right-to-left.
  CHECK(apply_word_replacements(s, toks, {{0, "xxxxx"}, {3, "y"}}) == "xxxxx bb ccc y");
  CHECK(apply_word_replacements(s, toks, {{1, "q"}, {2, "rr"}}) == "a q rr dddd");
}

TEST_CASE("join_tokens single-spaces its input") {
  CHECK(join_tokens({}) == "");
  CHECK(join_tokens({"one"}) == "one");
  CHECK(join_tokens({"one", "two"}) == "one two");
}
