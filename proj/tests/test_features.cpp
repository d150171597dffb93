#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "suskit/features.hpp"
#include "suskit/metrics.hpp"
#include "suskit/sampledata.hpp"
#include "suskit/text.hpp"
#include "suskit/victim.hpp"

using namespace suskit;
namespace fs = std::filesystem;

TEST_CASE("perturbation rate is the clamped token edit distance over the original length") {
  CHECK(perturbation_rate("the cat sat down", "the cat sat down") == 0.0);
  CHECK(perturbation_rate("the cat sat down", "the dog sat down") ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(perturbation_rate("the cat sat down", "a dog ran up") ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Insertions can push the raw rate over 1; it clamps.
  CHECK(perturbation_rate("one", "totally different and much longer") == 1.0);
  // Case and punctuation vanish in tokenization.
  CHECK(perturbation_rate("The cat, sat.", "the cat sat") == 0.0);
  CHECK_THROWS_AS(static_cast<void>(perturbation_rate("", "x")), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(perturbation_rate("x", "...")), std::invalid_argument);
}

TEST_CASE("lid estimates follow the maximum-likelihood formula") {
  // Hand-computed: distances {1, 2, 4, 8}, k = 4.
  // sum ln(r_i / r_4) = ln(1/8) + ln(2/8) + ln(4/8) + 0 = -(3+2+1) ln 2.
  const std::vector<double> dist = {8.0, 1.0, 4.0, 2.0};
  LidEstimate est = lid_estimate(dist, 4);
  REQUIRE(est.defined);
  CHECK(est.value == doctest::Approx(4.0 / (6.0 * std::log(2.0))).epsilon(1e-12));

  // Zeros are ignored; only positive distances count toward k.
  LidEstimate with_zeros = lid_estimate({0.0, 8.0, 0.0, 1.0, 4.0, 2.0}, 4);
  REQUIRE(with_zeros.defined);
  CHECK(with_zeros.value == doctest::Approx(est.value).epsilon(1e-12));

  CHECK_FALSE(lid_estimate(dist, 1).defined);
  CHECK_FALSE(lid_estimate({1.0, 2.0}, 3).defined);
  CHECK_FALSE(lid_estimate({}, 2).defined);
  // All-equal distances make the estimator diverge; flagged undefined.
  CHECK_FALSE(lid_estimate({3.0, 3.0, 3.0, 3.0}, 4).defined);
}

TEST_CASE("lid recovers the dimension of uniformly sampled distances") {
  // If r ~ U(0,1)^(1/d), the MLE around a point at the origin estimates d.
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (double d : {1.0, 4.0}) {
    std::vector<double> estimates;
    for (int rep = 0; rep < 40; ++rep) {
      std::vector<double> distances(400);
      for (auto& r : distances) r = std::pow(unif(rng), 1.0 / d);
      LidEstimate est = lid_estimate(distances, 20);
      REQUIRE(est.defined);
      estimates.push_back(est.value);
    }
    const double mean =
        std::accumulate(estimates.begin(), estimates.end(), 0.0) / estimates.size();
    INFO("dimension ", d);
    CHECK(mean == doctest::Approx(d).epsilon(0.25));
  }
}

namespace {

struct GrammarFixture {
  EmbeddingTable embeddings;
  PosLexicon lexicon;
  NgramModel ngram;
  IdfTable idf;

  GrammarFixture() {
    auto vec = [](double a, double b) {
      VectorXd v(2);
      v << a, b;
      return v;
    };
    embeddings.add("alpha", vec(1.0, 0.0));
    embeddings.add("beta", vec(0.8, 0.6));
    embeddings.add("gamma", vec(0.0, 1.0));
    lexicon.entries["alpha"] = lexicon.tags("alpha");  // seed via suffix default
    lexicon.entries["delta"] = 1;                      // lexicon-only word
    std::vector<std::vector<std::string>> docs = {
        {"alpha", "beta", "gamma"}, {"alpha", "beta", "beta"}, {"gamma", "alpha", "beta"}};
    ngram = NgramModel::fit(docs, 2, 0.1);
    idf = IdfTable::from_documents(docs);
  }
};

}  // namespace

TEST_CASE("grammar scores count oov words and low-probability bigrams") {
  GrammarFixture fx;
  FeatureResources res;
  res.embeddings = &fx.embeddings;
  res.pos_lexicon = &fx.lexicon;
  res.ngram = &fx.ngram;
  res.idf = &fx.idf;

  // "zzz" is in neither table; "delta" is lexicon-only; "alpha" both.
  res.anomaly_floor = -1e9;  // nothing is anomalous at this floor
  GrammarScores g = grammar_scores("alpha delta zzz qqq", res);
  CHECK(g.defined);
  CHECK(g.oov_rate == doctest::Approx(2.0 / 4.0).epsilon(1e-12));
  CHECK(g.anomaly_score == 0.0);

  // Oracle over bigram log-probabilities at a floor between observed values.
  const std::string text = "alpha beta gamma zzz";
  const auto words = token_texts(text);
  std::vector<double> lp;
  for (std::size_t i = 0; i + 1 < words.size(); ++i)
    lp.push_back(fx.ngram.log_prob({words[i]}, words[i + 1]));
  std::vector<double> sorted_lp = lp;
  std::sort(sorted_lp.begin(), sorted_lp.end());
  res.anomaly_floor = (sorted_lp[0] + sorted_lp[1]) / 2.0;
  int below = 0;
  for (double v : lp)
    if (v < res.anomaly_floor) ++below;
  GrammarScores h = grammar_scores(text, res);
  CHECK(h.anomaly_score ==
        doctest::Approx(static_cast<double>(below) / (words.size() - 1)).epsilon(1e-12));

  // Single-word texts have no bigrams; empty texts are undefined.
  GrammarScores single = grammar_scores("alpha", res);
  CHECK(single.defined);
  CHECK(single.anomaly_score == 0.0);
  CHECK_FALSE(grammar_scores("...", res).defined);

  FeatureResources missing = res;
  missing.ngram = nullptr;
  CHECK_THROWS_AS(static_cast<void>(grammar_scores("alpha beta", missing)), std::logic_error);
}

TEST_CASE("anomaly floor calibration picks the requested percentile") {
  GrammarFixture fx;
  const std::vector<std::string> ref = {"alpha beta gamma", "alpha beta beta",
                                        "gamma alpha beta"};
  // Oracle: collect every adjacent-bigram log-prob, sort ascending, index
  // min(size-1, floor(p * size)).
  std::vector<double> scores;
  for (const auto& t : ref) {
    const auto words = token_texts(t);
    for (std::size_t i = 0; i + 1 < words.size(); ++i)
      scores.push_back(fx.ngram.log_prob({words[i]}, words[i + 1]));
  }
  std::sort(scores.begin(), scores.end());
  for (double p : {0.05, 0.3, 0.5, 0.99}) {
    const std::size_t idx =
        std::min(scores.size() - 1, static_cast<std::size_t>(p * scores.size()));
    INFO("percentile ", p);
    CHECK(calibrate_anomaly_floor(ref, fx.ngram, p) ==
          doctest::Approx(scores[idx]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(static_cast<void>(calibrate_anomaly_floor(ref, fx.ngram, 0.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(calibrate_anomaly_floor(ref, fx.ngram, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(calibrate_anomaly_floor({"single"}, fx.ngram, 0.5)),
                  std::invalid_argument);
}

TEST_CASE("feature layout is one row of named columns per text") {
  CHECK(feature_width(20) == 1 + 20 + 5 + 3 + 2 + 1);
  auto names = feature_column_names(3);
  REQUIRE(names.size() == feature_width(3));
  CHECK(names.front() == "perturbation_rate");
  CHECK(names[1] == "emb_0");
  CHECK(names[4] == "if_score");
  CHECK(names.back() == "llm_score");
  // lid block: one estimate per layer plus the mean.
  CHECK(std::count_if(names.begin(), names.end(), [](const std::string& n) {
          return n.rfind("lid_", 0) == 0;
        }) == kLidLayers + 1);
}

namespace {

struct ExtractFixture {
  ToyWorld world;
  VictimModel model;
  IdfTable idf;
  FeatureResources res;

  ExtractFixture() : world(make_toy_world(11)), model(VictimModel::train(world.corpus, 0.01, 11)) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& r : world.corpus) docs.push_back(token_texts(r.text));
    idf = IdfTable::from_documents(docs);
    res.embeddings = &world.embeddings;
    res.idf = &idf;
    res.pos_lexicon = &world.pos_lexicon;
    res.ngram = &world.ngram;
    res.anomaly_floor = -12.0;
    res.lid_k = 20;
  }
};

}  // namespace

TEST_CASE("extraction fills every block and flags the absent ones") {
  ExtractFixture fx;
  const std::string text = fx.world.corpus[3].text;
  const std::string original = fx.world.corpus[7].text;

  SuspicionFeatureVector fv = extract(text, original, fx.model, fx.res);
  CHECK(fv.mask.perturbation);
  CHECK(fv.mask.embedding);
  CHECK(fv.mask.nnif);
  CHECK(fv.mask.lid);
  CHECK(fv.mask.grammar);
  CHECK_FALSE(fv.mask.llm);
  CHECK(fv.perturbation_rate == doctest::Approx(perturbation_rate(original, text)));
  CHECK(fv.embedding.size() == fx.world.embeddings.dim());
  REQUIRE(fv.lid.size() == kLidLayers + 1);
  CHECK(fv.lid[2] == doctest::Approx(0.5 * (fv.lid[0] + fv.lid[1])).epsilon(1e-12));
  const DknnStats stats = fx.model.dknn_stats(text);
  CHECK(fv.nnif[0] == doctest::Approx(stats.if_score).epsilon(1e-12));
  CHECK(fv.nnif[1] == stats.useful_rank);
  CHECK(fv.nnif[2] == stats.harmful_rank);
  const auto row = fv.to_row();
  CHECK(row.size() == feature_width(fx.world.embeddings.dim()));

  // Without an original the rate is zero but the block still counts.
  SuspicionFeatureVector no_orig = extract(text, std::nullopt, fx.model, fx.res);
  CHECK(no_orig.mask.perturbation);
  CHECK(no_orig.perturbation_rate == 0.0);

  // All-out-of-vocabulary text loses the embedding block.
  SuspicionFeatureVector oov = extract("qqq zzz xxx", std::nullopt, fx.model, fx.res);
  CHECK_FALSE(oov.mask.embedding);
  CHECK(oov.embedding.norm() == 0.0);

  // An llm callback lights up the llm block; a refusing one does not.
  SuspicionFeatureVector with_llm =
      extract(text, std::nullopt, fx.model, fx.res, [](const std::string&) { return 4.0; });
  CHECK(with_llm.mask.llm);
  CHECK(with_llm.llm_score == 4.0);
  SuspicionFeatureVector refused = extract(
      text, std::nullopt, fx.model, fx.res, [](const std::string&) { return std::nullopt; });
  CHECK_FALSE(refused.mask.llm);

  // A detached model loses the nnif and lid blocks but nothing else.
  auto path = fs::temp_directory_path() / "suskit_detached_model.json";
  fx.model.save(path);
  VictimModel detached = VictimModel::load(path);
  SuspicionFeatureVector bare = extract(text, std::nullopt, detached, fx.res);
  CHECK_FALSE(bare.mask.nnif);
  CHECK_FALSE(bare.mask.lid);
  CHECK(bare.mask.embedding);
  CHECK(bare.mask.grammar);

  FeatureResources no_emb = fx.res;
  no_emb.embeddings = nullptr;
  CHECK_THROWS_AS(static_cast<void>(extract(text, std::nullopt, fx.model, no_emb)),
                  std::logic_error);
}

TEST_CASE("feature tables survive the csv round trip bit for bit") {
  ExtractFixture fx;
  std::vector<std::string> ids;
  std::vector<SuspicionFeatureVector> rows;
  for (int i = 0; i < 6; ++i) {
    const auto& rec = fx.world.corpus[static_cast<std::size_t>(i * 11)];
    ids.push_back(rec.item_id);
    std::optional<std::string> orig;
    if (i % 2 == 0) orig = fx.world.corpus[static_cast<std::size_t>(i * 11 + 1)].text;
    rows.push_back(extract(rec.text, orig, fx.model, fx.res,
                           i % 3 == 0 ? LlmScoreFn([](const std::string&) { return 2.0; })
                                      : LlmScoreFn{}));
  }
  FeatureTable table = to_feature_table(ids, rows);
  REQUIRE(table.ids == ids);
  REQUIRE(table.values.rows() == 6);
  CHECK(table.column_names == feature_column_names(fx.world.embeddings.dim()));

  auto path = fs::temp_directory_path() / "suskit_features.csv";
  export_features_csv(path, table);
  FeatureTable loaded = load_features_csv(path);
  CHECK(loaded.ids == table.ids);
  CHECK(loaded.column_names == table.column_names);
  REQUIRE(loaded.values.rows() == table.values.rows());
  REQUIRE(loaded.values.cols() == table.values.cols());
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c)
      CHECK(loaded.values(r, c) == doctest::Approx(table.values(r, c)).epsilon(1e-12));
    CHECK(loaded.masks[static_cast<std::size_t>(r)] == table.masks[static_cast<std::size_t>(r)]);
  }

  CHECK_THROWS_AS(static_cast<void>(to_feature_table({"a", "b"}, {rows[0]})),
                  std::invalid_argument);
}
