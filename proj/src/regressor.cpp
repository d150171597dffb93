#include "suskit/regressor.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "suskit/util.hpp"

namespace suskit {

using nlohmann::json;

std::string to_string(RegressorFamily f) {
  switch (f) {
    case RegressorFamily::linear: return "linear";
    case RegressorFamily::huber: return "huber";
    case RegressorFamily::random_forest: return "random_forest";
    case RegressorFamily::gradient_boosting: return "gradient_boosting";
  }
  throw std::logic_error("unknown regressor family");
}

RegressorFamily regressor_family_from_string(const std::string& s) {
  if (s == "linear") return RegressorFamily::linear;
  if (s == "huber") return RegressorFamily::huber;
  if (s == "random_forest" || s == "forest") return RegressorFamily::random_forest;
  if (s == "gradient_boosting" || s == "boosting") return RegressorFamily::gradient_boosting;
  throw std::invalid_argument("unknown regressor family: " + s);
}

namespace {

void check_targets(const VectorXd& y, const ScoreBounds& bounds) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!(y[i] >= bounds.lo - 1e-9 && y[i] <= bounds.hi + 1e-9))
      throw std::invalid_argument("target " + std::to_string(y[i]) + " is outside [" +
                                  std::to_string(bounds.lo) + "," + std::to_string(bounds.hi) + "]");
}

double clamp_to(const ScoreBounds& b, double v) { return std::clamp(v, b.lo, b.hi); }

// Lexicographic by feature row, then target: makes every fit independent of
// the order training rows arrive in.
std::vector<int> canonical_order(const MatrixXd& x, const VectorXd& y) {
  std::vector<int> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
    }
    return y[a] < y[b];
  });
  return idx;
}

VectorXd solve_least_squares(const MatrixXd& design, const VectorXd& y, bool* fell_back) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() == design.cols()) {
    if (fell_back) *fell_back = false;
    return qr.solve(y);
  }
  if (fell_back) *fell_back = true;
  MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += 1e-8;
  return gram.ldlt().solve(design.transpose() * y);
}

VectorXd fit_linear_coef(const MatrixXd& x, const VectorXd& y) {
  MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  bool fell_back = false;
  VectorXd coef = solve_least_squares(design, y, &fell_back);
  if (fell_back) warn("linear fit: singular design matrix; ridge fallback applied");
  return coef;
}

VectorXd fit_huber_coef(const MatrixXd& x, const VectorXd& y, double delta, double tolerance) {
  MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  VectorXd coef = solve_least_squares(design, y, nullptr);
  for (int iter = 0; iter < 1000; ++iter) {
    const VectorXd residuals = y - design * coef;
    VectorXd w(residuals.size());
    for (Eigen::Index i = 0; i < residuals.size(); ++i) {
      const double r = std::abs(residuals[i]);
      w[i] = r <= delta ? 1.0 : delta / r;
    }
    MatrixXd a = design.transpose() * w.asDiagonal() * design;
    a.diagonal().array() += 1e-10;
    const VectorXd next = a.ldlt().solve(design.transpose() * (w.asDiagonal() * y));
    const double change = (next - coef).cwiseAbs().maxCoeff();
    coef = next;
    if (change < tolerance) break;
  }
  return coef;
}

struct TreeContext {
  const MatrixXd& x;
  const VectorXd& y;
  int max_depth = 8;
  int features_per_node = 0;  // 0 = consider every feature
  std::mt19937_64* rng = nullptr;
};

std::vector<int> sample_features(int p, int m, std::mt19937_64& rng) {
  std::vector<int> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < m; ++i) {
    const int j = static_cast<int>(
        std::uniform_int_distribution<std::size_t>(static_cast<std::size_t>(i),
                                                   all.size() - 1)(rng));
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(m));
  std::sort(all.begin(), all.end());
  return all;
}

int build_tree_node(std::vector<DecisionTreeNode>& nodes, const TreeContext& ctx,
                    const std::vector<int>& idx, int depth) {
  const int node_id = static_cast<int>(nodes.size());
  nodes.emplace_back();

  const double n = static_cast<double>(idx.size());
  double sum = 0.0, sq = 0.0;
  for (int i : idx) {
    sum += ctx.y[i];
    sq += ctx.y[i] * ctx.y[i];
  }
  nodes[static_cast<std::size_t>(node_id)].value = sum / n;
  const double total_ss = sq - sum * sum / n;
  if (depth >= ctx.max_depth || idx.size() < 2 || total_ss <= 1e-12) return node_id;

  const int p = static_cast<int>(ctx.x.cols());
  std::vector<int> features;
  if (ctx.features_per_node > 0 && ctx.features_per_node < p)
    features = sample_features(p, ctx.features_per_node, *ctx.rng);
  else {
    features.resize(static_cast<std::size_t>(p));
    std::iota(features.begin(), features.end(), 0);
  }

  double best_gain = 1e-12;
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<std::pair<double, double>> pairs(idx.size());
  for (int f : features) {
    for (std::size_t i = 0; i < idx.size(); ++i)
      pairs[i] = {ctx.x(idx[i], f), ctx.y[idx[i]]};
    std::sort(pairs.begin(), pairs.end());
    double left_sum = 0.0;
    for (std::size_t k = 1; k < pairs.size(); ++k) {
      left_sum += pairs[k - 1].second;
      if (pairs[k - 1].first == pairs[k].first) continue;
      const double n1 = static_cast<double>(k);
      const double n2 = n - n1;
      const double right_sum = sum - left_sum;
      const double gain =
          left_sum * left_sum / n1 + right_sum * right_sum / n2 - sum * sum / n;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
        best_threshold = 0.5 * (pairs[k - 1].first + pairs[k].first);
      }
    }
  }
  if (best_feature < 0) return node_id;

  std::vector<int> left, right;
  for (int i : idx)
    (ctx.x(i, best_feature) <= best_threshold ? left : right).push_back(i);
  if (left.empty() || right.empty()) return node_id;

  const int left_id = build_tree_node(nodes, ctx, left, depth + 1);
  const int right_id = build_tree_node(nodes, ctx, right, depth + 1);
  auto& node = nodes[static_cast<std::size_t>(node_id)];
  node.feature = best_feature;
  node.threshold = best_threshold;
  node.left = left_id;
  node.right = right_id;
  return node_id;
}

DecisionTree fit_tree(const TreeContext& ctx, const std::vector<int>& idx) {
  DecisionTree tree;
  build_tree_node(tree.nodes, ctx, idx, 0);
  return tree;
}

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vector_from_json(const json& arr) {
  VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

json trees_to_json(const std::vector<DecisionTree>& trees) {
  json arr = json::array();
  for (const auto& tree : trees) {
    json nodes = json::array();
    for (const auto& nd : tree.nodes)
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
    arr.push_back(std::move(nodes));
  }
  return arr;
}

std::vector<DecisionTree> trees_from_json(const json& arr) {
  std::vector<DecisionTree> trees;
  for (const auto& jt : arr) {
    DecisionTree tree;
    for (const auto& jn : jt) {
      DecisionTreeNode nd;
      nd.feature = jn.at(0).get<int>();
      nd.threshold = jn.at(1).get<double>();
      nd.left = jn.at(2).get<int>();
      nd.right = jn.at(3).get<int>();
      nd.value = jn.at(4).get<double>();
      tree.nodes.push_back(nd);
    }
    trees.push_back(std::move(tree));
  }
  return trees;
}

json featurizer_to_json(const VictimFeaturizer& f) {
  json j;
  j["vocabulary"] = f.vocabulary;
  j["idf_n_documents"] = f.idf.n_documents;
  j["idf_default"] = f.idf.default_idf;
  json values = json::object();
  for (const auto& [w, v] : f.idf.values) values[w] = v;
  j["idf_values"] = std::move(values);
  return j;
}

VictimFeaturizer featurizer_from_json(const json& j) {
  VictimFeaturizer f;
  f.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < f.vocabulary.size(); ++i)
    f.vocab_index[f.vocabulary[i]] = static_cast<int>(i);
  f.idf.n_documents = j.at("idf_n_documents").get<std::int64_t>();
  f.idf.default_idf = j.at("idf_default").get<double>();
  for (auto& [w, v] : j.at("idf_values").items()) f.idf.values[w] = v.get<double>();
  return f;
}

json bounds_to_json(const ScoreBounds& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }

ScoreBounds bounds_from_json(const json& j) {
  return {j.at("lo").get<double>(), j.at("hi").get<double>()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Quantile-to-normal transform

QuantileTransform QuantileTransform::fit(const MatrixXd& x) {
  QuantileTransform qt;
  qt.enabled = true;
  qt.landmarks.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto& col = qt.landmarks[static_cast<std::size_t>(c)];
    col.resize(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) col[static_cast<std::size_t>(r)] = x(r, c);
    std::sort(col.begin(), col.end());
  }
  return qt;
}

VectorXd QuantileTransform::transform_row(const VectorXd& row) const {
  if (!enabled) return row;
  if (static_cast<std::size_t>(row.size()) != landmarks.size())
    throw std::invalid_argument("quantile transform: feature width mismatch");
  VectorXd out(row.size());
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    const auto& col = landmarks[static_cast<std::size_t>(c)];
    const double n = static_cast<double>(col.size());
    const auto lo = std::lower_bound(col.begin(), col.end(), row[c]) - col.begin();
    const auto hi = std::upper_bound(col.begin(), col.end(), row[c]) - col.begin();
    double p = (static_cast<double>(lo) + static_cast<double>(hi)) / (2.0 * n);
    p = std::clamp(p, 0.5 / n, 1.0 - 0.5 / n);
    out[c] = norm_quantile(p);
  }
  return out;
}

MatrixXd QuantileTransform::transform(const MatrixXd& x) const {
  if (!enabled) return x;
  MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out.row(r) = transform_row(x.row(r).transpose()).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Decision tree

double DecisionTree::predict_row(const VectorXd& row) const {
  if (nodes.empty()) throw std::logic_error("empty decision tree");
  int at = 0;
  for (;;) {
    const auto& nd = nodes[static_cast<std::size_t>(at)];
    if (nd.feature < 0) return nd.value;
    at = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
}

// ---------------------------------------------------------------------------
// Numeric regressor

NumericRegressor NumericRegressor::fit(const MatrixXd& x, const VectorXd& y,
                                       RegressorFamily family, const NumericHyperparams& hp,
                                       std::uint64_t seed, const ScoreBounds& bounds) {
  if (x.rows() != y.size()) throw std::invalid_argument("fit: rows and targets differ in length");
  if (x.rows() < 10) throw std::invalid_argument("fit: needs at least 10 rows");
  if (hp.trees < 1) throw std::invalid_argument("fit: trees must be >= 1");
  if (hp.learning_rate < 0.0) throw std::invalid_argument("fit: negative learning rate");
  if (hp.huber_delta <= 0.0) throw std::invalid_argument("fit: huber delta must be positive");
  if (!(hp.bootstrap_fraction > 0.0 && hp.bootstrap_fraction <= 1.0))
    throw std::invalid_argument("fit: bootstrap fraction must be in (0,1]");
  check_targets(y, bounds);

  NumericRegressor model;
  model.family_ = family;
  model.hp_ = hp;
  model.seed_ = seed;
  model.bounds_ = bounds;
  model.width_ = static_cast<int>(x.cols());

  const auto order = canonical_order(x, y);
  MatrixXd xs(x.rows(), x.cols());
  VectorXd ys(y.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    xs.row(static_cast<Eigen::Index>(i)) = x.row(order[i]);
    ys[static_cast<Eigen::Index>(i)] = y[order[i]];
  }
  const int n = static_cast<int>(xs.rows());
  const int p = static_cast<int>(xs.cols());

  switch (family) {
    case RegressorFamily::linear:
      model.linear_coef_ = fit_linear_coef(xs, ys);
      break;
    case RegressorFamily::huber:
      model.linear_coef_ = fit_huber_coef(xs, ys, hp.huber_delta, 1e-8);
      break;
    case RegressorFamily::random_forest: {
      const int depth = hp.depth > 0 ? hp.depth : 8;
      const int per_node = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(p))));
      const int draws = std::max(1, static_cast<int>(std::lround(hp.bootstrap_fraction * n)));
      model.trees_.reserve(static_cast<std::size_t>(hp.trees));
      for (int t = 0; t < hp.trees; ++t) {
        std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(t + 1)));
        std::vector<int> idx(static_cast<std::size_t>(draws));
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (auto& i : idx) i = pick(rng);
        TreeContext ctx{xs, ys, depth, per_node, &rng};
        model.trees_.push_back(fit_tree(ctx, idx));
      }
      break;
    }
    case RegressorFamily::gradient_boosting: {
      const int depth = hp.depth > 0 ? hp.depth : 3;
      model.base_value_ = ys.mean();
      VectorXd current = VectorXd::Constant(n, model.base_value_);
      std::vector<int> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), 0);
      model.trees_.reserve(static_cast<std::size_t>(hp.trees));
      for (int t = 0; t < hp.trees; ++t) {
        const VectorXd residuals = ys - current;
        TreeContext ctx{xs, residuals, depth, 0, nullptr};
        DecisionTree tree = fit_tree(ctx, idx);
        for (int i = 0; i < n; ++i)
          current[i] += hp.learning_rate * tree.predict_row(xs.row(i).transpose());
        model.trees_.push_back(std::move(tree));
      }
      break;
    }
  }
  return model;
}

double NumericRegressor::predict_row(const VectorXd& features) const {
  if (static_cast<int>(features.size()) != width_)
    throw std::invalid_argument("predict: expected " + std::to_string(width_) + " features, got " +
                                std::to_string(features.size()));
  switch (family_) {
    case RegressorFamily::linear:
    case RegressorFamily::huber: {
      double v = linear_coef_[0];
      for (int i = 0; i < width_; ++i) v += linear_coef_[i + 1] * features[i];
      return v;
    }
    case RegressorFamily::random_forest: {
      double sum = 0.0;
      for (const auto& tree : trees_) sum += tree.predict_row(features);
      return sum / static_cast<double>(trees_.size());
    }
    case RegressorFamily::gradient_boosting: {
      double v = base_value_;
      for (const auto& tree : trees_) v += hp_.learning_rate * tree.predict_row(features);
      return v;
    }
  }
  throw std::logic_error("unknown regressor family");
}

VectorXd NumericRegressor::predict(const MatrixXd& x) const {
  VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict_row(x.row(i).transpose());
  return out;
}

ScorePrediction NumericRegressor::predict_score(const VectorXd& features) const {
  const double raw = predict_row(features);
  return {clamp_to(bounds_, raw), raw};
}

VectorXd NumericRegressor::coefficients() const {
  if (family_ != RegressorFamily::linear && family_ != RegressorFamily::huber)
    throw std::logic_error("coefficients are only defined for linear-family regressors");
  return linear_coef_;
}

std::string NumericRegressor::to_json_string() const {
  json j;
  j["type"] = "numeric-regressor";
  j["family"] = to_string(family_);
  j["hyperparams"] = {{"trees", hp_.trees},
                      {"depth", hp_.depth},
                      {"learning_rate", hp_.learning_rate},
                      {"huber_delta", hp_.huber_delta},
                      {"bootstrap_fraction", hp_.bootstrap_fraction}};
  j["seed"] = seed_;
  j["bounds"] = bounds_to_json(bounds_);
  j["width"] = width_;
  j["linear_coef"] = vector_to_json(linear_coef_);
  j["base_value"] = base_value_;
  j["trees"] = trees_to_json(trees_);
  return j.dump();
}

NumericRegressor NumericRegressor::from_json_string(const std::string& s) {
  const json j = json::parse(s);
  if (j.at("type").get<std::string>() != "numeric-regressor")
    throw std::runtime_error("not a serialized numeric regressor");
  NumericRegressor model;
  model.family_ = regressor_family_from_string(j.at("family").get<std::string>());
  const json& hp = j.at("hyperparams");
  model.hp_.trees = hp.at("trees").get<int>();
  model.hp_.depth = hp.at("depth").get<int>();
  model.hp_.learning_rate = hp.at("learning_rate").get<double>();
  model.hp_.huber_delta = hp.at("huber_delta").get<double>();
  model.hp_.bootstrap_fraction = hp.at("bootstrap_fraction").get<double>();
  model.seed_ = j.at("seed").get<std::uint64_t>();
  model.bounds_ = bounds_from_json(j.at("bounds"));
  model.width_ = j.at("width").get<int>();
  model.linear_coef_ = vector_from_json(j.at("linear_coef"));
  model.base_value_ = j.at("base_value").get<double>();
  model.trees_ = trees_from_json(j.at("trees"));
  return model;
}

void NumericRegressor::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json_string() + "\n");
}

NumericRegressor NumericRegressor::load(const std::filesystem::path& path) {
  return from_json_string(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Text regressor

TextRegressor TextRegressor::fit(const std::vector<std::string>& texts, const VectorXd& targets,
                                 double lambda, const ScoreBounds& bounds) {
  if (static_cast<Eigen::Index>(texts.size()) != targets.size())
    throw std::invalid_argument("fit_text: texts and targets differ in length");
  if (texts.size() < 10) throw std::invalid_argument("fit_text: needs at least 10 rows");
  if (lambda < 0.0) throw std::invalid_argument("fit_text: negative lambda");
  check_targets(targets, bounds);

  TextRegressor model;
  model.featurizer_ = VictimFeaturizer::from_texts(texts);
  model.lambda_ = lambda;
  model.bounds_ = bounds;

  const int n = static_cast<int>(texts.size());
  const int p = static_cast<int>(model.featurizer_.vocabulary.size());
  MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) x.row(i) = model.featurizer_.featurize(texts[i]).transpose();

  // Normal equations with an unpenalized intercept.
  MatrixXd a(p + 1, p + 1);
  a(0, 0) = static_cast<double>(n);
  a.block(0, 1, 1, p) = x.colwise().sum();
  a.block(1, 0, p, 1) = x.colwise().sum().transpose();
  a.block(1, 1, p, p) = x.transpose() * x;
  a.block(1, 1, p, p).diagonal().array() += std::max(lambda, 1e-12);
  VectorXd rhs(p + 1);
  rhs[0] = targets.sum();
  rhs.tail(p) = x.transpose() * targets;
  const VectorXd coef = a.ldlt().solve(rhs);
  model.bias_ = coef[0];
  model.weights_ = coef.tail(p);
  return model;
}

double TextRegressor::predict_row(const std::string& text) const {
  return weights_.dot(featurizer_.featurize(text)) + bias_;
}

ScorePrediction TextRegressor::predict_score(const std::string& text) const {
  const double raw = predict_row(text);
  return {clamp_to(bounds_, raw), raw};
}

std::string TextRegressor::to_json_string() const {
  json j;
  j["type"] = "text-regressor";
  j["featurizer"] = featurizer_to_json(featurizer_);
  j["weights"] = vector_to_json(weights_);
  j["bias"] = bias_;
  j["lambda"] = lambda_;
  j["bounds"] = bounds_to_json(bounds_);
  return j.dump();
}

TextRegressor TextRegressor::from_json_string(const std::string& s) {
  const json j = json::parse(s);
  if (j.at("type").get<std::string>() != "text-regressor")
    throw std::runtime_error("not a serialized text regressor");
  TextRegressor model;
  model.featurizer_ = featurizer_from_json(j.at("featurizer"));
  model.weights_ = vector_from_json(j.at("weights"));
  model.bias_ = j.at("bias").get<double>();
  model.lambda_ = j.at("lambda").get<double>();
  model.bounds_ = bounds_from_json(j.at("bounds"));
  return model;
}

void TextRegressor::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json_string() + "\n");
}

TextRegressor TextRegressor::load(const std::filesystem::path& path) {
  return from_json_string(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Block imputation

std::array<std::pair<std::size_t, std::size_t>, 6> feature_block_ranges(std::size_t width) {
  if (width < 13) throw std::invalid_argument("feature width too small for the block layout");
  const std::size_t d = width - 12;
  return {{{0, 1},
           {1, 1 + d},
           {1 + d, 6 + d},
           {6 + d, 9 + d},
           {9 + d, 11 + d},
           {11 + d, 12 + d}}};
}

FeatureImputer FeatureImputer::fit(const FeatureTable& table, const ScoreBounds& bounds) {
  const std::size_t width = static_cast<std::size_t>(table.values.cols());
  const auto ranges = feature_block_ranges(width);
  FeatureImputer imp;
  imp.column_means = VectorXd::Zero(static_cast<Eigen::Index>(width));
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    std::size_t present = 0;
    for (const auto& mask : table.masks)
      if (mask[b]) ++present;
    for (std::size_t c = ranges[b].first; c < ranges[b].second; ++c) {
      if (present == 0) {
        imp.column_means[static_cast<Eigen::Index>(c)] =
            b == 5 ? 0.5 * (bounds.lo + bounds.hi) : 0.0;
        continue;
      }
      double sum = 0.0;
      for (std::size_t r = 0; r < table.masks.size(); ++r)
        if (table.masks[r][b]) sum += table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      imp.column_means[static_cast<Eigen::Index>(c)] = sum / static_cast<double>(present);
    }
  }
  return imp;
}

VectorXd FeatureImputer::apply(const VectorXd& row, const std::array<bool, 6>& mask) const {
  if (row.size() != column_means.size())
    throw std::invalid_argument("imputer: feature width mismatch");
  const auto ranges = feature_block_ranges(static_cast<std::size_t>(row.size()));
  VectorXd out = row;
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    if (mask[b]) continue;
    for (std::size_t c = ranges[b].first; c < ranges[b].second; ++c)
      out[static_cast<Eigen::Index>(c)] = column_means[static_cast<Eigen::Index>(c)];
  }
  return out;
}

MatrixXd FeatureImputer::apply_all(const FeatureTable& table) const {
  MatrixXd out(table.values.rows(), table.values.cols());
  for (Eigen::Index r = 0; r < table.values.rows(); ++r)
    out.row(r) = apply(table.values.row(r).transpose(), table.masks[static_cast<std::size_t>(r)])
                     .transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Text+Num ensemble

EnsembleRegressor EnsembleRegressor::fit(const std::vector<std::string>& texts,
                                         const FeatureTable& features, const VectorXd& targets,
                                         const EnsembleOptions& options, std::uint64_t seed) {
  if (texts.size() != features.ids.size() ||
      static_cast<Eigen::Index>(texts.size()) != targets.size())
    throw std::invalid_argument("ensemble fit: inputs differ in length");

  EnsembleRegressor model;
  model.bounds_ = options.bounds;
  model.imputer_ = FeatureImputer::fit(features, options.bounds);
  MatrixXd x = model.imputer_.apply_all(features);
  if (options.quantile_normalize) {
    model.quantile_ = QuantileTransform::fit(x);
    x = model.quantile_.transform(x);
  }
  model.numeric_ = NumericRegressor::fit(x, targets, options.family, options.hp, seed,
                                         options.bounds);
  model.text_ = TextRegressor::fit(texts, targets, options.text_lambda, options.bounds);
  return model;
}

ScorePrediction EnsembleRegressor::predict(const std::string& text, const VectorXd& features,
                                           const std::array<bool, 6>& mask) const {
  VectorXd row = imputer_.apply(features, mask);
  if (quantile_.enabled) row = quantile_.transform_row(row);
  const double raw = 0.5 * (text_.predict_row(text) + numeric_.predict_row(row));
  return {clamp_to(bounds_, raw), raw};
}

void EnsembleRegressor::save(const std::filesystem::path& path) const {
  json j;
  j["type"] = "ensemble-regressor";
  j["text"] = json::parse(text_.to_json_string());
  j["numeric"] = json::parse(numeric_.to_json_string());
  j["imputer_means"] = vector_to_json(imputer_.column_means);
  json quantile;
  quantile["enabled"] = quantile_.enabled;
  quantile["landmarks"] = quantile_.landmarks;
  j["quantile"] = std::move(quantile);
  j["bounds"] = bounds_to_json(bounds_);
  write_text_file(path, j.dump() + "\n");
}

EnsembleRegressor EnsembleRegressor::load(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  if (j.at("type").get<std::string>() != "ensemble-regressor")
    throw std::runtime_error("not an ensemble regressor file: " + path.string());
  EnsembleRegressor model;
  model.text_ = TextRegressor::from_json_string(j.at("text").dump());
  model.numeric_ = NumericRegressor::from_json_string(j.at("numeric").dump());
  model.imputer_.column_means = vector_from_json(j.at("imputer_means"));
  model.quantile_.enabled = j.at("quantile").at("enabled").get<bool>();
  model.quantile_.landmarks =
      j.at("quantile").at("landmarks").get<std::vector<std::vector<double>>>();
  model.bounds_ = bounds_from_json(j.at("bounds"));
  return model;
}

// ---------------------------------------------------------------------------
// Voting

VotingRegressor VotingRegressor::fit(const MatrixXd& x, const VectorXd& y,
                                     const std::vector<RegressorFamily>& families,
                                     const NumericHyperparams& hp, std::uint64_t seed,
                                     const ScoreBounds& bounds) {
  if (families.empty()) throw std::invalid_argument("voting: no families given");
  VotingRegressor model;
  model.bounds_ = bounds;
  for (RegressorFamily f : families)
    model.members_.push_back(NumericRegressor::fit(x, y, f, hp, seed, bounds));
  return model;
}

double VotingRegressor::predict_row(const VectorXd& features) const {
  if (members_.empty()) throw std::logic_error("voting: unfitted");
  double sum = 0.0;
  for (const auto& m : members_) sum += m.predict_row(features);
  return sum / static_cast<double>(members_.size());
}

ScorePrediction VotingRegressor::predict_score(const VectorXd& features) const {
  const double raw = predict_row(features);
  return {clamp_to(bounds_, raw), raw};
}

void VotingRegressor::save(const std::filesystem::path& path) const {
  json j;
  j["type"] = "voting-regressor";
  j["bounds"] = bounds_to_json(bounds_);
  json members = json::array();
  for (const auto& m : members_) members.push_back(json::parse(m.to_json_string()));
  j["members"] = std::move(members);
  write_text_file(path, j.dump() + "\n");
}

VotingRegressor VotingRegressor::load(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  if (j.at("type").get<std::string>() != "voting-regressor")
    throw std::runtime_error("not a voting regressor file: " + path.string());
  VotingRegressor model;
  model.bounds_ = bounds_from_json(j.at("bounds"));
  for (const auto& numeric : j.at("members"))
    model.members_.push_back(NumericRegressor::from_json_string(numeric.dump()));
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate_ensemble(const EnsembleRegressor& model,
                             const std::vector<RegressionItem>& items) {
  if (items.size() < 3) throw std::invalid_argument("evaluate: needs at least 3 items");
  std::vector<double> preds, targets;
  preds.reserve(items.size());
  targets.reserve(items.size());
  for (const auto& it : items) {
    preds.push_back(model.predict(it.text, it.features, it.mask).score);
    targets.push_back(it.target);
  }
  EvalReport report;
  report.overall = correlations(preds, targets);

  std::vector<std::string> keys;
  for (const auto& it : items)
    if (!it.subset.empty() && std::find(keys.begin(), keys.end(), it.subset) == keys.end())
      keys.push_back(it.subset);
  for (const auto& key : keys) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].subset != key) continue;
      p.push_back(preds[i]);
      t.push_back(targets[i]);
    }
    if (p.size() < 2) {
      warn("evaluate: subset '" + key + "' has fewer than 2 items; skipped");
      continue;
    }
    report.subsets.emplace_back(key, correlations(p, t));
  }
  return report;
}

namespace {

std::vector<RegressionItem> filter_items(const std::vector<RegressionItem>& items,
                                         const std::string& key) {
  if (key == "all") return items;
  std::vector<RegressionItem> out;
  for (const auto& it : items)
    if (it.subset == key) out.push_back(it);
  return out;
}

EnsembleRegressor fit_on_items(const std::vector<RegressionItem>& items,
                               const EnsembleOptions& options, std::uint64_t seed) {
  std::vector<std::string> texts;
  FeatureTable table;
  VectorXd targets(static_cast<Eigen::Index>(items.size()));
  table.values.resize(static_cast<Eigen::Index>(items.size()), items.front().features.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    texts.push_back(items[i].text);
    table.ids.push_back(items[i].item_id);
    table.values.row(static_cast<Eigen::Index>(i)) = items[i].features.transpose();
    table.masks.push_back(items[i].mask);
    targets[static_cast<Eigen::Index>(i)] = items[i].target;
  }
  return EnsembleRegressor::fit(texts, table, targets, options, seed);
}

}  // namespace

SubsetGrid subset_train_eval(const std::vector<RegressionItem>& train,
                             const std::vector<RegressionItem>& test,
                             const EnsembleOptions& options, std::uint64_t seed) {
  if (train.empty() || test.empty())
    throw std::invalid_argument("subset_train_eval: empty train or test set");
  SubsetGrid grid;
  grid.train_keys.push_back("all");
  for (const auto& it : train)
    if (!it.subset.empty() &&
        std::find(grid.train_keys.begin(), grid.train_keys.end(), it.subset) ==
            grid.train_keys.end())
      grid.train_keys.push_back(it.subset);
  grid.test_keys.push_back("all");
  for (const auto& it : test)
    if (!it.subset.empty() &&
        std::find(grid.test_keys.begin(), grid.test_keys.end(), it.subset) == grid.test_keys.end())
      grid.test_keys.push_back(it.subset);

  grid.pearson = MatrixXd::Zero(static_cast<Eigen::Index>(grid.train_keys.size()),
                                static_cast<Eigen::Index>(grid.test_keys.size()));
  grid.defined.assign(grid.train_keys.size(),
                      std::vector<bool>(grid.test_keys.size(), false));

  for (std::size_t r = 0; r < grid.train_keys.size(); ++r) {
    const auto subset = filter_items(train, grid.train_keys[r]);
    if (subset.size() < 10) {
      warn("subset_train_eval: train subset '" + grid.train_keys[r] + "' has fewer than 10 rows");
      continue;
    }
    const EnsembleRegressor model = fit_on_items(subset, options, seed);
    for (std::size_t c = 0; c < grid.test_keys.size(); ++c) {
      const auto test_subset = filter_items(test, grid.test_keys[c]);
      if (test_subset.size() < 3) continue;
      std::vector<double> p, t;
      for (const auto& it : test_subset) {
        p.push_back(model.predict(it.text, it.features, it.mask).score);
        t.push_back(it.target);
      }
      const CorrelationReport rep = correlations(p, t);
      if (!rep.pearson_defined) continue;
      grid.pearson(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rep.pearson;
      grid.defined[r][c] = true;
    }
  }
  return grid;
}

namespace {

std::string three_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void export_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ostringstream out;
  out << "subset,pearson,spearman,rmse,n\n";
  auto row = [&](const std::string& name, const CorrelationReport& r) {
    out << csv_escape(name) << ',' << (r.pearson_defined ? three_decimals(r.pearson) : "") << ','
        << (r.spearman_defined ? three_decimals(r.spearman) : "") << ',' << three_decimals(r.rmse)
        << ',' << r.n << '\n';
  };
  row("overall", report.overall);
  for (const auto& [name, r] : report.subsets) row(name, r);
  write_text_file(path, out.str());
}

void export_grid_csv(const std::filesystem::path& path, const SubsetGrid& grid) {
  std::ostringstream out;
  out << "train_subset";
  for (const auto& k : grid.test_keys) out << ',' << csv_escape(k);
  out << '\n';
  for (std::size_t r = 0; r < grid.train_keys.size(); ++r) {
    out << csv_escape(grid.train_keys[r]);
    for (std::size_t c = 0; c < grid.test_keys.size(); ++c) {
      out << ',';
      if (grid.defined[r][c])
        out << three_decimals(grid.pearson(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace suskit
