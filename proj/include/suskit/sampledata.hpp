#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "suskit/corpus.hpp"
#include "suskit/resources.hpp"
#include "suskit/victim.hpp"

namespace suskit {

// Deterministic sample datasets: Likert annotation files whose aggregate
// statistics match the published tables, a binary-vote detection file, and a
// small synthetic sentiment world that the attack strategies can actually
// break. Everything is reproducible byte for byte.

struct LikertSample {
  std::vector<SentenceRecord> records;
  std::vector<AnnotationRecord> annotations;
};

// 603 sentence sets x 5 sources; a common subset carries 3 annotations per
// item (315 items), the rest one each.
LikertSample make_main_condition();

// 15 sets x 5 sources, every item triple-annotated.
LikertSample make_nonmturk_condition();

// 118 sets x 5 sources: 16 common sets (3 annotations) + 102 singles.
LikertSample make_prevalence_condition();

// 200 texts with 10 binary computer-vs-human votes each: 100 clean sentences
// with low vote counts, 100 synonym-swapped ones with spread votes.
std::vector<MorrisItem> make_morris_items(std::uint64_t seed = 11);

// Synthetic sentiment classification world: sentences built around synonym
// clusters of polarity-bearing adjectives. Each cluster has a frequent, a
// mid-frequency and a rare member; the rare one never occurs in the corpus,
// which leaves the trained classifier blind to it and keeps the cluster's
// embedding neighborhood intact - exactly the gap word-substitution searches
// need. Roughly two thirds of the sentences also carry one opposite-polarity
// word for the search to expose.
struct ToyWorld {
  std::vector<LabeledText> corpus;
  EmbeddingTable embeddings;
  PosLexicon pos_lexicon;
  NgramModel ngram;
};

ToyWorld make_toy_world(std::uint64_t seed = 11);

struct SampleDataPaths {
  std::filesystem::path annotations_main;
  std::filesystem::path annotations_prevalence;
  std::filesystem::path annotations_nonmturk;
  std::filesystem::path morris;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path pos_lexicon;
  std::filesystem::path ngram;
  std::filesystem::path idf;
  std::filesystem::path llm_mock;
  std::filesystem::path trials;
};

// Writes every sample file into `dir` (created if missing) and returns the
// paths. The same (dir, seed) always produces identical bytes.
SampleDataPaths write_sample_data(const std::filesystem::path& dir, std::uint64_t seed = 11);

}  // namespace suskit
