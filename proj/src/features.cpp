#include "suskit/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "suskit/metrics.hpp"
#include "suskit/text.hpp"
#include "suskit/util.hpp"

namespace suskit {

std::size_t feature_width(int embedding_dim) {
  return 1 + static_cast<std::size_t>(embedding_dim) + 5 + (kLidLayers + 1) + 2 + 1;
}

std::vector<std::string> feature_column_names(int embedding_dim) {
  std::vector<std::string> names;
  names.reserve(feature_width(embedding_dim));
  names.emplace_back("perturbation_rate");
  for (int i = 0; i < embedding_dim; ++i) names.push_back("emb_" + std::to_string(i));
  names.emplace_back("if_score");
  names.emplace_back("useful_rank");
  names.emplace_back("harmful_rank");
  names.emplace_back("useful_distance");
  names.emplace_back("harmful_distance");
  for (int l = 1; l <= kLidLayers; ++l) names.push_back("lid_layer_" + std::to_string(l));
  names.emplace_back("lid_mean");
  names.emplace_back("oov_rate");
  names.emplace_back("anomaly_score");
  names.emplace_back("llm_score");
  return names;
}

std::vector<double> SuspicionFeatureVector::to_row() const {
  std::vector<double> row;
  row.reserve(feature_width(static_cast<int>(embedding.size())));
  row.push_back(perturbation_rate);
  for (Eigen::Index i = 0; i < embedding.size(); ++i) row.push_back(embedding[i]);
  for (double v : nnif) row.push_back(v);
  for (double v : lid) row.push_back(v);
  row.push_back(oov_rate);
  row.push_back(anomaly_score);
  row.push_back(llm_score);
  return row;
}

double perturbation_rate(const std::string& original, const std::string& perturbed) {
  const auto a = token_texts(original);
  const auto b = token_texts(perturbed);
  if (a.empty() || b.empty())
    throw std::invalid_argument("perturbation_rate: both texts must tokenize nonempty");
  const double rate = static_cast<double>(levenshtein_tokens(a, b)) / static_cast<double>(a.size());
  return std::clamp(rate, 0.0, 1.0);
}

LidEstimate lid_estimate(const std::vector<double>& distances, int k) {
  LidEstimate est;
  if (k < 2) return est;
  std::vector<double> positive;
  positive.reserve(distances.size());
  for (double d : distances)
    if (d > 0.0) positive.push_back(d);
  if (static_cast<int>(positive.size()) < k) return est;
  std::partial_sort(positive.begin(), positive.begin() + k, positive.end());
  const double r_k = positive[static_cast<std::size_t>(k) - 1];
  if (!(r_k > 0.0)) return est;
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += std::log(positive[static_cast<std::size_t>(i)] / r_k);
  if (!(sum < 0.0)) return est;  // all k distances equal: the estimator diverges
  est.value = -static_cast<double>(k) / sum;
  est.defined = true;
  return est;
}

GrammarScores grammar_scores(const std::string& text, const FeatureResources& res) {
  if (!res.embeddings || !res.pos_lexicon || !res.ngram)
    throw std::logic_error("grammar_scores needs embeddings, a lexicon, and an n-gram model");
  GrammarScores out;
  const auto words = token_texts(text);
  if (words.empty()) {
    out.defined = false;
    return out;
  }
  std::size_t oov = 0;
  for (const auto& w : words)
    if (!res.pos_lexicon->entries.count(w) && !res.embeddings->lookup(w)) ++oov;
  out.oov_rate = static_cast<double>(oov) / static_cast<double>(words.size());
  if (words.size() >= 2) {
    std::size_t anomalous = 0;
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
      if (res.ngram->log_prob({words[i]}, words[i + 1]) < res.anomaly_floor) ++anomalous;
    out.anomaly_score = static_cast<double>(anomalous) / static_cast<double>(words.size() - 1);
  }
  return out;
}

double calibrate_anomaly_floor(const std::vector<std::string>& reference_texts,
                               const NgramModel& model, double percentile) {
  if (!(percentile > 0.0 && percentile < 1.0))
    throw std::invalid_argument("calibrate_anomaly_floor: percentile must be in (0,1)");
  std::vector<double> scores;
  for (const auto& text : reference_texts) {
    const auto words = token_texts(text);
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
      scores.push_back(model.log_prob({words[i]}, words[i + 1]));
  }
  if (scores.empty())
    throw std::invalid_argument("calibrate_anomaly_floor: reference corpus has no bigrams");
  std::sort(scores.begin(), scores.end());
  const std::size_t idx = std::min(
      scores.size() - 1, static_cast<std::size_t>(percentile * static_cast<double>(scores.size())));
  return scores[idx];
}

SuspicionFeatureVector extract(const std::string& text, const std::optional<std::string>& original,
                               const VictimModel& model, const FeatureResources& res,
                               const LlmScoreFn& llm) {
  if (!res.embeddings || !res.idf)
    throw std::logic_error("extract needs embeddings and an idf table");
  SuspicionFeatureVector fv;
  fv.embedding = VectorXd::Zero(res.embeddings->dim());
  fv.lid.assign(kLidLayers + 1, 0.0);

  if (original) {
    try {
      fv.perturbation_rate = perturbation_rate(*original, text);
    } catch (const std::exception& e) {
      warn(std::string("perturbation block absent: ") + e.what());
      fv.mask.perturbation = false;
    }
  }

  const auto words = token_texts(text);
  const SentenceVector sv = sentence_vector(words, *res.embeddings, *res.idf);
  if (sv.all_oov) {
    fv.mask.embedding = false;
  } else {
    fv.embedding = sv.vec;
  }

  try {
    const DknnStats stats = model.dknn_stats(text);
    fv.nnif = {stats.if_score, static_cast<double>(stats.useful_rank),
               static_cast<double>(stats.harmful_rank), stats.useful_distance,
               stats.harmful_distance};
  } catch (const std::exception& e) {
    warn(std::string("nnif block absent: ") + e.what());
    fv.mask.nnif = false;
  }

  try {
    if (!model.has_training_data())
      throw std::logic_error("no training data attached to the victim");
    const MatrixXd& train_x = model.train_matrix();
    const VectorXd point = model.featurizer().featurize(text);
    const double margin = model.predict(text).margin;
    const int n = static_cast<int>(train_x.rows());
    std::vector<double> layer1(n), layer2(n);
    for (int i = 0; i < n; ++i) {
      layer1[static_cast<std::size_t>(i)] = (train_x.row(i).transpose() - point).norm();
      const double train_margin = train_x.row(i).dot(model.weights()) + model.bias();
      layer2[static_cast<std::size_t>(i)] = std::abs(train_margin - margin);
    }
    const LidEstimate l1 = lid_estimate(layer1, res.lid_k);
    const LidEstimate l2 = lid_estimate(layer2, res.lid_k);
    if (!l1.defined || !l2.defined) throw std::runtime_error("degenerate neighbor distances");
    fv.lid = {l1.value, l2.value, 0.5 * (l1.value + l2.value)};
  } catch (const std::exception& e) {
    warn(std::string("lid block absent: ") + e.what());
    fv.lid.assign(kLidLayers + 1, 0.0);
    fv.mask.lid = false;
  }

  try {
    const GrammarScores g = grammar_scores(text, res);
    if (!g.defined) throw std::runtime_error("empty text");
    fv.oov_rate = g.oov_rate;
    fv.anomaly_score = g.anomaly_score;
  } catch (const std::exception& e) {
    warn(std::string("grammar block absent: ") + e.what());
    fv.mask.grammar = false;
  }

  if (llm) {
    const auto score = llm(text);
    if (score) {
      fv.llm_score = *score;
      fv.mask.llm = true;
    }
  }
  return fv;
}

namespace {

const std::array<std::string, 6> kMaskColumns = {"mask_perturbation", "mask_embedding",
                                                 "mask_nnif",         "mask_lid",
                                                 "mask_grammar",      "mask_llm"};

}  // namespace

FeatureTable to_feature_table(const std::vector<std::string>& ids,
                              const std::vector<SuspicionFeatureVector>& rows) {
  if (ids.size() != rows.size())
    throw std::invalid_argument("to_feature_table: ids and rows differ in length");
  FeatureTable table;
  table.ids = ids;
  if (rows.empty()) return table;
  const int d = static_cast<int>(rows.front().embedding.size());
  table.column_names = feature_column_names(d);
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(feature_width(d)));
  table.masks.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = rows[r].to_row();
    if (row.size() != feature_width(d))
      throw std::invalid_argument("to_feature_table: inconsistent feature width");
    for (std::size_t c = 0; c < row.size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    const auto& m = rows[r].mask;
    table.masks[r] = {m.perturbation, m.embedding, m.nnif, m.lid, m.grammar, m.llm};
  }
  return table;
}

void export_features_csv(const std::filesystem::path& path, const FeatureTable& table) {
  std::ostringstream out;
  out << "item_id";
  for (const auto& c : table.column_names) out << ',' << c;
  for (const auto& c : kMaskColumns) out << ',' << c;
  out << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    out << csv_escape(table.ids[r]);
    for (Eigen::Index c = 0; c < table.values.cols(); ++c)
      out << ',' << table.values(static_cast<Eigen::Index>(r), c);
    for (bool m : table.masks[r]) out << ',' << (m ? 1 : 0);
    out << '\n';
  }
  write_text_file(path, out.str());
}

FeatureTable load_features_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("feature csv is empty: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line, ',');
  if (header.size() < 1 + kMaskColumns.size() || header[0] != "item_id")
    throw std::runtime_error("feature csv header is malformed: " + path.string());
  const std::size_t n_features = header.size() - 1 - kMaskColumns.size();

  FeatureTable table;
  for (std::size_t i = 0; i < n_features; ++i)
    table.column_names.emplace_back(header[1 + i]);

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, ',');
    if (cols.size() != header.size())
      throw std::runtime_error("feature csv row " + std::to_string(row_no) +
                               ": wrong column count");
    table.ids.emplace_back(cols[0]);
    std::vector<double> vals(n_features);
    for (std::size_t i = 0; i < n_features; ++i) vals[i] = std::stod(std::string(cols[1 + i]));
    rows.push_back(std::move(vals));
    std::array<bool, 6> mask{};
    for (std::size_t i = 0; i < kMaskColumns.size(); ++i)
      mask[i] = trim(cols[1 + n_features + i]) == "1";
    table.masks.push_back(mask);
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(n_features));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < n_features; ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

}  // namespace suskit
