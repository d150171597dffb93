#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "suskit/features.hpp"
#include "suskit/metrics.hpp"
#include "suskit/victim.hpp"

namespace suskit {

enum class RegressorFamily { linear, huber, random_forest, gradient_boosting };

std::string to_string(RegressorFamily f);
RegressorFamily regressor_family_from_string(const std::string& s);

struct NumericHyperparams {
  int trees = 200;
  int depth = 0;  // 0 picks the family default: 8 for forests, 3 for boosting
  double learning_rate = 0.05;
  double huber_delta = 1.0;
  double bootstrap_fraction = 1.0;
};

struct ScoreBounds {
  double lo = 1.0;
  double hi = 5.0;
};

struct ScorePrediction {
  double score = 0.0;  // clamped to bounds
  double raw = 0.0;    // pre-clamp value
};

// Maps each feature column through the empirical CDF of its training values
// and then the standard normal quantile function.
struct QuantileTransform {
  bool enabled = false;
  std::vector<std::vector<double>> landmarks;  // sorted training values per column

  static QuantileTransform fit(const MatrixXd& x);
  VectorXd transform_row(const VectorXd& row) const;
  MatrixXd transform(const MatrixXd& x) const;
};

struct DecisionTreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct DecisionTree {
  std::vector<DecisionTreeNode> nodes;
  double predict_row(const VectorXd& row) const;
};

class NumericRegressor {
 public:
  NumericRegressor() = default;

  // Training rows are first brought into a canonical order (lexicographic by
  // feature vector, then target), so row permutations cannot change the fit.
  static NumericRegressor fit(const MatrixXd& x, const VectorXd& y, RegressorFamily family,
                              const NumericHyperparams& hp = {}, std::uint64_t seed = 0,
                              const ScoreBounds& bounds = {});

  double predict_row(const VectorXd& features) const;  // raw value
  VectorXd predict(const MatrixXd& x) const;
  ScorePrediction predict_score(const VectorXd& features) const;

  RegressorFamily family() const { return family_; }
  int feature_width() const { return width_; }
  const ScoreBounds& bounds() const { return bounds_; }
  // Intercept followed by one weight per feature; tree families have none.
  VectorXd coefficients() const;

  void save(const std::filesystem::path& path) const;
  static NumericRegressor load(const std::filesystem::path& path);
  std::string to_json_string() const;
  static NumericRegressor from_json_string(const std::string& s);

 private:
  RegressorFamily family_ = RegressorFamily::linear;
  NumericHyperparams hp_;
  std::uint64_t seed_ = 0;
  ScoreBounds bounds_;
  int width_ = 0;
  VectorXd linear_coef_;             // [intercept, weights...] for linear/huber
  std::vector<DecisionTree> trees_;  // forest members or boosting stages
  double base_value_ = 0.0;          // boosting initial constant
};

// Ridge regression over a tf-idf bag of words; the intercept is unpenalized,
// so infinite regularization degrades to predicting the target mean.
class TextRegressor {
 public:
  TextRegressor() = default;

  static TextRegressor fit(const std::vector<std::string>& texts, const VectorXd& targets,
                           double lambda, const ScoreBounds& bounds = {});

  double predict_row(const std::string& text) const;  // raw value
  ScorePrediction predict_score(const std::string& text) const;
  const ScoreBounds& bounds() const { return bounds_; }

  void save(const std::filesystem::path& path) const;
  static TextRegressor load(const std::filesystem::path& path);
  std::string to_json_string() const;
  static TextRegressor from_json_string(const std::string& s);

 private:
  VictimFeaturizer featurizer_;
  VectorXd weights_;
  double bias_ = 0.0;
  double lambda_ = 0.0;
  ScoreBounds bounds_;
};

// Column spans of the six feature blocks for a given total width.
std::array<std::pair<std::size_t, std::size_t>, 6> feature_block_ranges(std::size_t width);

// Replaces the columns of absent blocks with training means of the rows that
// had the block; a block never seen in training falls back to the midpoint of
// the score bounds (external-score block) or zero (all others).
struct FeatureImputer {
  VectorXd column_means;

  static FeatureImputer fit(const FeatureTable& table, const ScoreBounds& bounds = {});
  VectorXd apply(const VectorXd& row, const std::array<bool, 6>& mask) const;
  MatrixXd apply_all(const FeatureTable& table) const;
};

struct EnsembleOptions {
  double text_lambda = 1.0;
  RegressorFamily family = RegressorFamily::gradient_boosting;
  NumericHyperparams hp;
  bool quantile_normalize = true;
  ScoreBounds bounds;
};

// Mean of a text-leg and a numeric-leg prediction, clamped to the bounds.
class EnsembleRegressor {
 public:
  EnsembleRegressor() = default;

  static EnsembleRegressor fit(const std::vector<std::string>& texts, const FeatureTable& features,
                               const VectorXd& targets, const EnsembleOptions& options = {},
                               std::uint64_t seed = 0);

  ScorePrediction predict(const std::string& text, const VectorXd& features,
                          const std::array<bool, 6>& mask) const;

  const TextRegressor& text_leg() const { return text_; }
  const NumericRegressor& numeric_leg() const { return numeric_; }
  const FeatureImputer& imputer() const { return imputer_; }
  const QuantileTransform& quantile() const { return quantile_; }
  const ScoreBounds& bounds() const { return bounds_; }

  void save(const std::filesystem::path& path) const;
  static EnsembleRegressor load(const std::filesystem::path& path);

 private:
  TextRegressor text_;
  NumericRegressor numeric_;
  FeatureImputer imputer_;
  QuantileTransform quantile_;
  ScoreBounds bounds_;
};

// Mean of one fitted regressor per family over the same data.
class VotingRegressor {
 public:
  VotingRegressor() = default;

  static VotingRegressor fit(const MatrixXd& x, const VectorXd& y,
                             const std::vector<RegressorFamily>& families,
                             const NumericHyperparams& hp = {}, std::uint64_t seed = 0,
                             const ScoreBounds& bounds = {});

  double predict_row(const VectorXd& features) const;
  ScorePrediction predict_score(const VectorXd& features) const;
  const std::vector<NumericRegressor>& members() const { return members_; }

  void save(const std::filesystem::path& path) const;
  static VotingRegressor load(const std::filesystem::path& path);

 private:
  std::vector<NumericRegressor> members_;
  ScoreBounds bounds_;
};

struct RegressionItem {
  std::string item_id;
  std::string text;
  VectorXd features;
  std::array<bool, 6> mask{true, true, true, true, true, false};
  double target = 0.0;
  std::string subset;  // grouping key for breakdowns; empty = ungrouped
};

struct EvalReport {
  CorrelationReport overall;
  std::vector<std::pair<std::string, CorrelationReport>> subsets;
};

EvalReport evaluate_ensemble(const EnsembleRegressor& model,
                             const std::vector<RegressionItem>& items);

struct SubsetGrid {
  std::vector<std::string> train_keys;
  std::vector<std::string> test_keys;
  MatrixXd pearson;
  std::vector<std::vector<bool>> defined;
};

// Fits one model per training subset (plus "all") and reports the Pearson
// correlation on every test subset. Training subsets under 10 rows leave
// their whole grid row undefined.
SubsetGrid subset_train_eval(const std::vector<RegressionItem>& train,
                             const std::vector<RegressionItem>& test,
                             const EnsembleOptions& options = {}, std::uint64_t seed = 0);

void export_eval_csv(const std::filesystem::path& path, const EvalReport& report);
void export_grid_csv(const std::filesystem::path& path, const SubsetGrid& grid);

}  // namespace suskit
