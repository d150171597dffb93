#include "suskit/victim.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "suskit/text.hpp"
#include "suskit/util.hpp"

namespace suskit {

using nlohmann::json;

std::vector<LabeledText> load_labeled_corpus(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t row = 0;
  std::vector<LabeledText> out;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 3)
      throw std::runtime_error("labeled corpus row " + std::to_string(row) +
                               ": expected 3 columns");
    LabeledText r;
    r.item_id = std::string(trim(cols[0]));
    r.text = std::string(trim(cols[1]));
    std::string label = lower_ascii(trim(cols[2]));
    if (label == "0" || label == "negative") r.label = 0;
    else if (label == "1" || label == "positive") r.label = 1;
    else
      throw std::runtime_error("labeled corpus row " + std::to_string(row) + ": bad label '" +
                               label + "'");
    if (r.item_id.empty() || r.text.empty())
      throw std::runtime_error("labeled corpus row " + std::to_string(row) + ": empty field");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw std::runtime_error("labeled corpus is empty: " + path.string());
  return out;
}

void save_labeled_corpus(const std::filesystem::path& path,
                         const std::vector<LabeledText>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) out << r.item_id << '\t' << r.text << '\t' << r.label << '\n';
  write_text_file(path, out.str());
}

VictimFeaturizer VictimFeaturizer::from_texts(const std::vector<std::string>& texts) {
  VictimFeaturizer f;
  std::vector<std::vector<std::string>> docs;
  docs.reserve(texts.size());
  for (const auto& t : texts) {
    docs.push_back(token_texts(t));
    for (const auto& w : docs.back()) {
      if (!f.vocab_index.count(w)) {
        f.vocab_index[w] = static_cast<int>(f.vocabulary.size());
        f.vocabulary.push_back(w);
      }
    }
  }
  f.idf = IdfTable::from_documents(docs);
  return f;
}

VictimFeaturizer VictimFeaturizer::from_corpus(const std::vector<LabeledText>& corpus) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& r : corpus) texts.push_back(r.text);
  return from_texts(texts);
}

VectorXd VictimFeaturizer::featurize(const std::string& text) const {
  VectorXd x = VectorXd::Zero(static_cast<int>(vocabulary.size()));
  for (const auto& w : token_texts(text)) {
    auto it = vocab_index.find(w);
    if (it == vocab_index.end()) continue;
    x[it->second] += idf(w);
  }
  return x;
}

struct VictimModel::InfluenceCache {
  Eigen::LLT<MatrixXd> hessian_llt;
  MatrixXd gradients;            // p x n, column i = (sigma_i - y_i) * x_i
  MatrixXd solved_gradients;     // H^{-1} * gradients
  VectorXd margins;              // training margins, for the second layer
};

std::string VictimModel::matrix_digest(const MatrixXd& x, const std::vector<int>& y) {
  std::ostringstream ss;
  ss.precision(17);
  ss << x.rows() << 'x' << x.cols() << ';';
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) ss << x(i, j) << ',';
  for (int v : y) ss << v << ',';
  return digest_hex(ss.str());
}

VictimModel VictimModel::train(const std::vector<LabeledText>& corpus, double lambda,
                               std::uint64_t seed, const VictimTrainOptions& options,
                               std::optional<VictimFeaturizer> featurizer) {
  if (corpus.size() < 2) throw std::invalid_argument("VictimModel::train: corpus too small");
  if (lambda < 0.0) throw std::invalid_argument("VictimModel::train: negative lambda");
  bool has_pos = false, has_neg = false;
  for (const auto& r : corpus) {
    if (r.label == 1) has_pos = true;
    else if (r.label == 0) has_neg = true;
    else throw std::invalid_argument("VictimModel::train: labels must be 0 or 1");
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("VictimModel::train: corpus holds a single class");

  VictimModel model;
  model.featurizer_ = featurizer ? std::move(*featurizer) : VictimFeaturizer::from_corpus(corpus);
  model.lambda_ = lambda;
  model.seed_ = seed;

  const int n = static_cast<int>(corpus.size());
  const int p = static_cast<int>(model.featurizer_.vocabulary.size());
  MatrixXd x(n, p);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    x.row(i) = model.featurizer_.featurize(corpus[i].text).transpose();
    y[i] = corpus[i].label;
  }

  // Fixed step 0.5/L with the Frobenius bound on the logistic-loss curvature.
  const double lipschitz = lambda + x.squaredNorm() / (4.0 * n);
  const double step = 0.5 / std::max(lipschitz, 1e-12);

  VectorXd w = VectorXd::Zero(p);
  double b = 0.0;
  VectorXd yv(n);
  for (int i = 0; i < n; ++i) yv[i] = y[i];
  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    VectorXd margins = x * w;
    margins.array() += b;
    VectorXd sig = margins.unaryExpr([](double z) { return sigmoid(z); });
    VectorXd err = sig - yv;
    VectorXd grad_w = x.transpose() * err / n + lambda * w;
    double grad_b = err.sum() / n;
    const double grad_norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
    if (grad_norm < options.tolerance) break;
    w -= step * grad_w;
    b -= step * grad_b;
  }

  model.weights_ = std::move(w);
  model.bias_ = b;
  model.train_x_ = std::move(x);
  model.train_y_ = std::move(y);
  model.train_digest_ = matrix_digest(model.train_x_, model.train_y_);
  model.build_influence_cache();
  return model;
}

Prediction VictimModel::predict(const std::string& text) const {
  Prediction pred;
  pred.margin = weights_.dot(featurizer_.featurize(text)) + bias_;
  pred.positive_probability = sigmoid(pred.margin);
  pred.label = pred.positive_probability >= 0.5 ? 1 : 0;
  pred.probability = pred.label == 1 ? pred.positive_probability : 1.0 - pred.positive_probability;
  return pred;
}

double VictimModel::accuracy(const std::vector<LabeledText>& corpus) const {
  if (corpus.empty()) throw std::invalid_argument("accuracy: empty corpus");
  int correct = 0;
  for (const auto& r : corpus)
    if (predict(r.text).label == r.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

void VictimModel::build_influence_cache() {
  if (train_x_.rows() == 0) {
    influence_cache_.reset();
    return;
  }
  auto cache = std::make_shared<InfluenceCache>();
  const int n = static_cast<int>(train_x_.rows());
  const int p = static_cast<int>(train_x_.cols());
  cache->margins = train_x_ * weights_;
  cache->margins.array() += bias_;
  MatrixXd hessian = MatrixXd::Zero(p, p);
  cache->gradients.resize(p, n);
  for (int i = 0; i < n; ++i) {
    const double s = sigmoid(cache->margins[i]);
    hessian.noalias() += (s * (1.0 - s)) * train_x_.row(i).transpose() * train_x_.row(i);
    cache->gradients.col(i) = (s - train_y_[i]) * train_x_.row(i).transpose();
  }
  hessian /= static_cast<double>(n);
  hessian.diagonal().array() += std::max(lambda_, 1e-10);
  cache->hessian_llt.compute(hessian);
  if (cache->hessian_llt.info() != Eigen::Success)
    throw std::runtime_error("influence cache: Hessian is not positive definite");
  cache->solved_gradients = cache->hessian_llt.solve(cache->gradients);
  influence_cache_ = std::move(cache);
}

std::vector<double> VictimModel::influence_scores(const std::string& text) const {
  if (!influence_cache_)
    throw std::logic_error("influence: no training data attached to this model");
  const InfluenceCache& cache = *influence_cache_;
  const VectorXd x = featurizer_.featurize(text);
  const Prediction pred = predict(text);
  const VectorXd grad_test = (pred.positive_probability - pred.label) * x;
  VectorXd scores = -(cache.solved_gradients.transpose() * grad_test);
  return std::vector<double>(scores.data(), scores.data() + scores.size());
}

double VictimModel::influence_score(const std::string& text, std::size_t train_index) const {
  if (!influence_cache_)
    throw std::logic_error("influence: no training data attached to this model");
  if (train_index >= static_cast<std::size_t>(train_x_.rows()))
    throw std::invalid_argument("influence: train index out of range");
  const InfluenceCache& cache = *influence_cache_;
  const VectorXd x = featurizer_.featurize(text);
  const Prediction pred = predict(text);
  const VectorXd grad_test = (pred.positive_probability - pred.label) * x;
  return -grad_test.dot(cache.solved_gradients.col(static_cast<Eigen::Index>(train_index)));
}

DknnStats VictimModel::dknn_stats(const std::string& text, int k, int top_m) const {
  if (!influence_cache_)
    throw std::logic_error("dknn_stats: no training data attached to this model");
  if (k < 1) throw std::invalid_argument("dknn_stats: k must be >= 1");
  if (top_m < 1) throw std::invalid_argument("dknn_stats: top_m must be >= 1");
  const int n = static_cast<int>(train_x_.rows());
  int n_pos = 0;
  for (int label : train_y_) n_pos += label;
  const int smaller_class = std::min(n_pos, n - n_pos);
  if (k > smaller_class) {
    warn("dknn_stats: k=" + std::to_string(k) + " exceeds the smaller class population (" +
         std::to_string(smaller_class) + "); clamped");
    k = std::max(1, smaller_class);
  }

  const VectorXd x = featurizer_.featurize(text);
  const Prediction pred = predict(text);
  std::vector<std::pair<double, int>> by_distance(n);
  for (int i = 0; i < n; ++i)
    by_distance[i] = {(train_x_.row(i).transpose() - x).norm(), i};
  std::sort(by_distance.begin(), by_distance.end());

  DknnStats stats;
  bool found_useful = false, found_harmful = false;
  for (int rank = 0; rank < n && !(found_useful && found_harmful); ++rank) {
    const auto& [dist, idx] = by_distance[rank];
    if (!found_useful && train_y_[idx] == pred.label) {
      stats.useful_rank = rank + 1;
      stats.useful_distance = dist;
      found_useful = true;
    }
    if (!found_harmful && train_y_[idx] != pred.label) {
      stats.harmful_rank = rank + 1;
      stats.harmful_distance = dist;
      found_harmful = true;
    }
  }

  std::vector<double> influences = influence_scores(text);
  std::vector<double> magnitudes(influences.size());
  for (std::size_t i = 0; i < influences.size(); ++i) magnitudes[i] = std::abs(influences[i]);
  std::sort(magnitudes.rbegin(), magnitudes.rend());
  const std::size_t m = std::min<std::size_t>(top_m, magnitudes.size());
  stats.if_score =
      std::accumulate(magnitudes.begin(), magnitudes.begin() + m, 0.0) / static_cast<double>(m);
  return stats;
}

void VictimModel::save(const std::filesystem::path& path) const {
  json j;
  j["type"] = "victim-logistic";
  j["vocabulary"] = featurizer_.vocabulary;
  json idf;
  idf["n_documents"] = featurizer_.idf.n_documents;
  idf["default_idf"] = featurizer_.idf.default_idf;
  json values = json::object();
  for (const auto& [w, v] : featurizer_.idf.values) values[w] = v;
  idf["values"] = std::move(values);
  j["idf"] = std::move(idf);
  std::vector<double> w(weights_.data(), weights_.data() + weights_.size());
  j["weights"] = w;
  j["bias"] = bias_;
  j["lambda"] = lambda_;
  j["seed"] = seed_;
  j["train_digest"] = train_digest_;
  write_text_file(path, j.dump(2) + "\n");
}

VictimModel VictimModel::load(const std::filesystem::path& path) {
  json j = json::parse(read_text_file(path));
  if (j.at("type").get<std::string>() != "victim-logistic")
    throw std::runtime_error("not a victim model file: " + path.string());
  VictimModel model;
  model.featurizer_.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < model.featurizer_.vocabulary.size(); ++i)
    model.featurizer_.vocab_index[model.featurizer_.vocabulary[i]] = static_cast<int>(i);
  const json& idf = j.at("idf");
  model.featurizer_.idf.n_documents = idf.at("n_documents").get<std::int64_t>();
  model.featurizer_.idf.default_idf = idf.at("default_idf").get<double>();
  for (auto& [w, v] : idf.at("values").items()) model.featurizer_.idf.values[w] = v.get<double>();
  auto w = j.at("weights").get<std::vector<double>>();
  model.weights_ = Eigen::Map<VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  model.bias_ = j.at("bias").get<double>();
  model.lambda_ = j.at("lambda").get<double>();
  model.seed_ = j.at("seed").get<std::uint64_t>();
  model.train_digest_ = j.at("train_digest").get<std::string>();
  return model;
}

void VictimModel::attach_training_data(const std::vector<LabeledText>& corpus) {
  const int n = static_cast<int>(corpus.size());
  MatrixXd x(n, static_cast<int>(featurizer_.vocabulary.size()));
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    x.row(i) = featurizer_.featurize(corpus[i].text).transpose();
    y[i] = corpus[i].label;
  }
  const std::string digest = matrix_digest(x, y);
  if (digest != train_digest_)
    throw std::runtime_error("attach_training_data: corpus digest " + digest +
                             " does not match the model's training digest " + train_digest_);
  train_x_ = std::move(x);
  train_y_ = std::move(y);
  build_influence_cache();
}

}  // namespace suskit
