#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "suskit/linalg.hpp"

namespace suskit {

// ---------------------------------------------------------------------------
// Word embeddings: a vocabulary plus one dense row per word.

struct EmbeddingTable {
  std::vector<std::string> words;
  std::unordered_map<std::string, int> index;
  MatrixXd vectors;  // one row per word

  int dim() const { return static_cast<int>(vectors.cols()); }
  std::optional<int> lookup(const std::string& word) const;
  void add(const std::string& word, const VectorXd& vec);

  // Plain-text format: "word v1 v2 ... vd" per line.
  static EmbeddingTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct Neighbor {
  std::string word;
  double cosine = 0.0;
};

// Ranked by descending cosine, then ascending word. The query itself is
// excluded by surface form only; distinct words with identical vectors stay.
std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, const std::string& word,
                                        int k, double min_cos);

// ---------------------------------------------------------------------------
// Inverse document frequency. idf = ln((N+1)/(df+1)) + 1, always > 0.

struct IdfTable {
  std::unordered_map<std::string, double> values;
  double default_idf = 1.0;  // applied to unseen words (df = 0)
  std::int64_t n_documents = 0;

  double operator()(const std::string& word) const;
  static IdfTable from_documents(const std::vector<std::vector<std::string>>& docs);
  static IdfTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct SentenceVector {
  VectorXd vec;
  bool all_oov = false;
};

// Idf-weighted mean of the in-vocabulary token vectors.
SentenceVector sentence_vector(const std::vector<std::string>& tokens, const EmbeddingTable& emb,
                               const IdfTable& idf);

// ---------------------------------------------------------------------------
// Add-alpha smoothed n-gram model over a closed vocabulary.

struct NgramModel {
  int order = 2;
  double alpha = 0.1;
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int> vocab_index;
  // context key -> (word -> count); context of the unigram model is "".
  std::unordered_map<std::string, std::unordered_map<std::string, std::int64_t>> counts;
  std::unordered_map<std::string, std::int64_t> context_totals;

  static NgramModel fit(const std::vector<std::vector<std::string>>& corpus, int order,
                        double alpha = 0.1);
  // log P(word | context); context is the n-1 preceding tokens.
  double log_prob(const std::vector<std::string>& context, const std::string& word) const;

  static NgramModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// Sum of smoothed n-gram log-probabilities over every window that covers
// `position`, with `candidate` substituted there. Windows never cross the
// sentence edges; a sentence shorter than the model order scores 0.
double context_score(const std::vector<std::string>& tokens, std::size_t position,
                     const std::string& candidate, const NgramModel& model);

// ---------------------------------------------------------------------------
// Coarse part-of-speech lexicon with suffix-rule fallback.

enum PosTag : std::uint8_t {
  POS_NOUN = 1u << 0,
  POS_VERB = 1u << 1,
  POS_ADJ = 1u << 2,
  POS_ADV = 1u << 3,
  POS_OTHER = 1u << 4,
};

struct PosLexicon {
  std::unordered_map<std::string, std::uint8_t> entries;

  // Lexicon lookup first, then suffix rules, then OTHER. Never empty.
  std::uint8_t tags(const std::string& word) const;

  // TSV format: word <TAB> comma-separated tags (noun,verb,adj,adv,other).
  static PosLexicon load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

std::uint8_t pos_tags_from_suffix(const std::string& word);
bool pos_compatible(const std::string& a, const std::string& b, const PosLexicon& lex);

std::string pos_tags_to_string(std::uint8_t tags);
std::uint8_t pos_tags_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Keyboard adjacency for typo-style character substitutions.

struct KeyboardLayout {
  std::unordered_map<char, std::string> adjacent;

  const std::string& neighbors(char c) const;
  static KeyboardLayout qwerty();
};

}  // namespace suskit
