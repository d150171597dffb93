#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "suskit/resources.hpp"
#include "suskit/victim.hpp"

namespace suskit {

// Numeric description of one text: edit rate against its original, sentence
// embedding, nearest-neighbor/influence block, local-intrinsic-dimensionality
// block (one estimate per victim representation layer plus their mean),
// grammaticality block, and an optional external 1-5 score. Block presence
// flags travel with the values so downstream imputation can tell a true zero
// from an absent block.
struct SuspicionFeatureVector {
  double perturbation_rate = 0.0;
  VectorXd embedding;
  std::array<double, 5> nnif{};  // if_score, useful_rank, harmful_rank, useful_dist, harmful_dist
  std::vector<double> lid;       // per-layer estimates, mean last
  double oov_rate = 0.0;
  double anomaly_score = 0.0;
  double llm_score = 0.0;

  struct Mask {
    bool perturbation = true;
    bool embedding = true;
    bool nnif = true;
    bool lid = true;
    bool grammar = true;
    bool llm = false;
  } mask;

  std::vector<double> to_row() const;  // width = 1 + d + 5 + (layers+1) + 2 + 1
};

inline constexpr int kLidLayers = 2;  // tf-idf vector and decision margin

std::size_t feature_width(int embedding_dim);
std::vector<std::string> feature_column_names(int embedding_dim);

// Token-level minimal-edit-script difference count over the original's token
// count, clamped to [0,1].
double perturbation_rate(const std::string& original, const std::string& perturbed);

struct LidEstimate {
  double value = 0.0;
  bool defined = false;
};

// Maximum-likelihood local intrinsic dimensionality from the k nearest
// positive distances: -(1/k * sum ln(r_i / r_k))^-1.
LidEstimate lid_estimate(const std::vector<double>& distances, int k);

struct GrammarScores {
  double oov_rate = 0.0;
  double anomaly_score = 0.0;
  bool defined = true;
};

struct FeatureResources {
  const EmbeddingTable* embeddings = nullptr;
  const IdfTable* idf = nullptr;
  const PosLexicon* pos_lexicon = nullptr;
  const NgramModel* ngram = nullptr;
  double anomaly_floor = -8.0;
  int lid_k = 20;
};

// oov_rate: tokens found in neither the lexicon nor the embedding vocabulary.
// anomaly_score: token bigrams whose model log-probability is below the floor.
GrammarScores grammar_scores(const std::string& text, const FeatureResources& res);

// Picks the floor as the given percentile of bigram log-probabilities over a
// reference corpus.
double calibrate_anomaly_floor(const std::vector<std::string>& reference_texts,
                               const NgramModel& model, double percentile = 0.05);

using LlmScoreFn = std::function<std::optional<double>(const std::string&)>;

SuspicionFeatureVector extract(const std::string& text, const std::optional<std::string>& original,
                               const VictimModel& model, const FeatureResources& res,
                               const LlmScoreFn& llm = {});

struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> column_names;
  MatrixXd values;                                   // one feature row per id
  std::vector<std::array<bool, 6>> masks;            // block presence per row
};

void export_features_csv(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable load_features_csv(const std::filesystem::path& path);

FeatureTable to_feature_table(const std::vector<std::string>& ids,
                              const std::vector<SuspicionFeatureVector>& rows);

}  // namespace suskit
