#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "suskit/linalg.hpp"
#include "suskit/resources.hpp"

namespace suskit {

struct LabeledText {
  std::string item_id;
  std::string text;
  int label = 0;  // 0 or 1
};

// TSV columns: item_id  text  label   (label is 0/1 or negative/positive)
std::vector<LabeledText> load_labeled_corpus(const std::filesystem::path& path);
void save_labeled_corpus(const std::filesystem::path& path, const std::vector<LabeledText>& rows);

struct VictimTrainOptions {
  double tolerance = 1e-6;  // stop when the gradient L2 norm falls below this
  int max_epochs = 500;
};

// Fixed featurization: tf * idf over a closed vocabulary.
struct VictimFeaturizer {
  std::vector<std::string> vocabulary;
  std::unordered_map<std::string, int> vocab_index;
  IdfTable idf;

  static VictimFeaturizer from_corpus(const std::vector<LabeledText>& corpus);
  static VictimFeaturizer from_texts(const std::vector<std::string>& texts);
  VectorXd featurize(const std::string& text) const;
};

struct Prediction {
  int label = 0;
  double probability = 0.0;            // of the predicted label
  double positive_probability = 0.0;   // sigmoid(margin)
  double margin = 0.0;                 // pre-sigmoid w.x + b
};

struct DknnStats {
  double if_score = 0.0;          // mean magnitude of the top-m influences
  int useful_rank = 0;            // 1-based position in the global distance order
  int harmful_rank = 0;
  double useful_distance = 0.0;
  double harmful_distance = 0.0;
};

// Binary logistic regression over tf-idf features, trained by full-batch
// gradient descent with fixed step 0.5/L. The L2 penalty covers the weights
// only, so with lambda large the predictions fall back to the class prior
// through the bias.
class VictimModel {
 public:
  // The featurizer is built from the corpus unless a frozen one is supplied
  // (useful when several models must share one feature space).
  static VictimModel train(const std::vector<LabeledText>& corpus, double lambda,
                           std::uint64_t seed, const VictimTrainOptions& options = {},
                           std::optional<VictimFeaturizer> featurizer = std::nullopt);

  Prediction predict(const std::string& text) const;
  double accuracy(const std::vector<LabeledText>& corpus) const;

  // Closed-form influence of one training point on the loss at `text`:
  //   -grad_test' H^{-1} grad_train
  // with H the Hessian of the trained objective over the weights and the
  // test gradient taken at the model's own predicted label. A training point
  // with an all-zero feature vector has no influence.
  double influence_score(const std::string& text, std::size_t train_index) const;
  std::vector<double> influence_scores(const std::string& text) const;

  // Nearest useful (same predicted label) and harmful (opposite label)
  // training neighbours in tf-idf space, plus the influence aggregate.
  // k bounds nothing here beyond validation: ranks come from the global
  // ordering; a k above the smaller class population is clamped with a
  // warning. top_m controls the influence aggregation.
  DknnStats dknn_stats(const std::string& text, int k = 20, int top_m = 10) const;

  const VictimFeaturizer& featurizer() const { return featurizer_; }
  const MatrixXd& train_matrix() const { return train_x_; }
  const std::vector<int>& train_labels() const { return train_y_; }
  const VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }
  double lambda() const { return lambda_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& train_digest() const { return train_digest_; }

  // JSON persistence carries the featurizer, weights and a digest of the
  // training matrix, not the matrix itself; attach_training_data() restores
  // influence/neighbour support and checks the digest.
  void save(const std::filesystem::path& path) const;
  static VictimModel load(const std::filesystem::path& path);
  void attach_training_data(const std::vector<LabeledText>& corpus);
  bool has_training_data() const { return train_x_.rows() > 0; }

 private:
  VictimFeaturizer featurizer_;
  VectorXd weights_;
  double bias_ = 0.0;
  double lambda_ = 0.0;
  std::uint64_t seed_ = 0;
  MatrixXd train_x_;
  std::vector<int> train_y_;
  std::string train_digest_;

  // Hessian factorization and per-point gradients, built once alongside the
  // training matrix and shared by copies. Immutable after construction.
  struct InfluenceCache;
  std::shared_ptr<const InfluenceCache> influence_cache_;
  void build_influence_cache();

  static std::string matrix_digest(const MatrixXd& x, const std::vector<int>& y);
};

}  // namespace suskit
