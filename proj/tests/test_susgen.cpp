#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "suskit/attacks.hpp"
#include "suskit/features.hpp"
#include "suskit/metrics.hpp"
#include "suskit/regressor.hpp"
#include "suskit/sampledata.hpp"
#include "suskit/susgen.hpp"
#include "suskit/text.hpp"
#include "suskit/util.hpp"

using namespace suskit;
namespace fs = std::filesystem;

namespace {

// Shared world: toy corpus, victim, attack/feature resources, and a small
// ensemble fitted on a mix of clean and lightly edited sentences.
struct ConstraintWorld {
  ToyWorld toy;
  VictimModel model;
  IdfTable idf;
  KeyboardLayout keyboard;
  FeatureResources feature_res;
  EnsembleRegressor ensemble;

  ConstraintWorld()
      : toy(make_toy_world(11)),
        model(VictimModel::train(toy.corpus, 0.01, 11)),
        keyboard(KeyboardLayout::qwerty()) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& r : toy.corpus) docs.push_back(token_texts(r.text));
    idf = IdfTable::from_documents(docs);
    feature_res.embeddings = &toy.embeddings;
    feature_res.idf = &idf;
    feature_res.pos_lexicon = &toy.pos_lexicon;
    feature_res.ngram = &toy.ngram;
    feature_res.anomaly_floor = -12.0;
    feature_res.lid_k = 20;

    std::vector<std::string> ids;
    std::vector<std::string> texts;
    std::vector<SuspicionFeatureVector> rows;
    std::vector<double> targets;
    for (std::size_t i = 0; i < 40; ++i) {
      const std::string& clean = toy.corpus[i].text;
      std::string text = clean;
      std::optional<std::string> original;
      if (i % 2 == 1) {
        // Rotate the first two tokens so half the rows carry a nonzero
        // edit-rate feature.
        auto tokens = token_texts(clean);
        REQUIRE(tokens.size() >= 2);
        std::swap(tokens[0], tokens[1]);
        text = tokens[0];
        for (std::size_t t = 1; t < tokens.size(); ++t) text += " " + tokens[t];
        original = clean;
      }
      ids.push_back("fx-" + std::to_string(i));
      texts.push_back(text);
      rows.push_back(extract(text, original, model, feature_res));
      targets.push_back(2.0 + 2.5 * static_cast<double>((i * 37) % 100) / 100.0);
    }
    FeatureTable table = to_feature_table(ids, rows);
    VectorXd y(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t i = 0; i < targets.size(); ++i) y[static_cast<Eigen::Index>(i)] = targets[i];
    EnsembleOptions opt;
    opt.family = RegressorFamily::gradient_boosting;
    opt.hp.trees = 40;
    ensemble = EnsembleRegressor::fit(texts, table, y, opt, 4);
  }

  AttackResources attack_res() const {
    return {&toy.embeddings, &toy.pos_lexicon, &idf, &toy.ngram, &keyboard};
  }

  SuspicionConstraint constraint(double tau, double margin) const {
    SuspicionConstraint c;
    c.regressor = &ensemble;
    c.victim = &model;
    c.features = &feature_res;
    c.tau = tau;
    c.margin = margin;
    return c;
  }
};

const ConstraintWorld& constraint_world() {
  static ConstraintWorld world;
  return world;
}

// First corpus record the victim classifies correctly.
const LabeledText& first_correct_record(const ConstraintWorld& w, std::size_t skip = 0) {
  for (const auto& r : w.toy.corpus) {
    if (w.model.predict(r.text).label != r.label) continue;
    if (skip == 0) return r;
    --skip;
  }
  throw std::logic_error("no correctly classified record");
}

AttackConfig fast_config() {
  AttackConfig cfg;
  cfg.method = AttackMethod::textfooler;
  cfg.seed = 11;
  cfg.query_budget = 2000;
  return cfg;
}

bool same_outcome(const AttackOutcome& a, const AttackOutcome& b) {
  if (a.perturbed_text != b.perturbed_text) return false;
  if (a.success != b.success) return false;
  if (a.queries_used != b.queries_used) return false;
  if (a.perturbation_rate != b.perturbation_rate) return false;
  if (a.trace.size() != b.trace.size()) return false;
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    if (a.trace[i].position != b.trace[i].position) return false;
    if (a.trace[i].before != b.trace[i].before) return false;
    if (a.trace[i].after != b.trace[i].after) return false;
    if (a.trace[i].kind != b.trace[i].kind) return false;
  }
  return true;
}

ConstrainedOutcome stub_outcome(const std::string& id, bool success, double predicted,
                                double original) {
  ConstrainedOutcome o;
  o.attack.original_id = id;
  o.attack.perturbed_text = "perturbed " + id;
  o.attack.success = success;
  o.predicted_score = predicted;
  o.original_score = original;
  return o;
}

}  // namespace

TEST_CASE("constraint validation rejects missing pieces and bad thresholds") {
  const ConstraintWorld& w = constraint_world();

  SuspicionConstraint c = w.constraint(2.5, 0.2);
  CHECK_NOTHROW(c.validate());

  SuspicionConstraint no_reg = c;
  no_reg.regressor = nullptr;
  CHECK_THROWS_AS(no_reg.validate(), std::logic_error);
  SuspicionConstraint no_victim = c;
  no_victim.victim = nullptr;
  CHECK_THROWS_AS(no_victim.validate(), std::logic_error);
  SuspicionConstraint no_features = c;
  no_features.features = nullptr;
  CHECK_THROWS_AS(no_features.validate(), std::logic_error);

  SuspicionConstraint low_tau = c;
  low_tau.tau = w.ensemble.bounds().lo;  // tau must sit strictly above the floor
  CHECK_THROWS_AS(low_tau.validate(), std::invalid_argument);
  SuspicionConstraint high_tau = c;
  high_tau.tau = w.ensemble.bounds().hi + 0.5;
  CHECK_THROWS_AS(high_tau.validate(), std::invalid_argument);
  SuspicionConstraint top_tau = c;
  top_tau.tau = w.ensemble.bounds().hi;  // the ceiling itself is allowed
  CHECK_NOTHROW(top_tau.validate());

  SuspicionConstraint bad_margin = c;
  bad_margin.margin = -0.1;
  CHECK_THROWS_AS(bad_margin.validate(), std::invalid_argument);
}

TEST_CASE("rejection reasons have stable names") {
  CHECK(to_string(RejectionReason::above_tau) == "above_tau");
  CHECK(to_string(RejectionReason::below_margin) == "below_margin");
  CHECK(to_string(RejectionReason::attack_failed) == "attack_failed");
}

TEST_CASE("constraint_score is the ensemble prediction on extracted features") {
  const ConstraintWorld& w = constraint_world();
  const SuspicionConstraint c = w.constraint(2.5, 0.2);

  const std::string& text = w.toy.corpus[12].text;
  const std::string& original = w.toy.corpus[30].text;
  for (const auto& orig : {std::optional<std::string>{}, std::optional<std::string>{original}}) {
    const SuspicionFeatureVector fv = extract(text, orig, w.model, w.feature_res);
    const auto row = fv.to_row();
    VectorXd features(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i)
      features[static_cast<Eigen::Index>(i)] = row[i];
    const std::array<bool, 6> mask = {fv.mask.perturbation, fv.mask.embedding, fv.mask.nnif,
                                      fv.mask.lid,          fv.mask.grammar,   fv.mask.llm};
    const double want = w.ensemble.predict(text, features, mask).score;
    CHECK(constraint_score(text, orig, c) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("constraint_check matches the threshold arithmetic on every branch") {
  const ConstraintWorld& w = constraint_world();
  const std::string& candidate = w.toy.corpus[5].text;
  const std::string& original = w.toy.corpus[9].text;

  const SuspicionConstraint probe = w.constraint(w.ensemble.bounds().hi, 0.0);
  const double cand_score = constraint_score(candidate, original, probe);
  const double orig_score = constraint_score(original, std::nullopt, probe);
  REQUIRE(cand_score > w.ensemble.bounds().lo + 0.01);

  const double lo = w.ensemble.bounds().lo;
  const std::vector<double> taus = {0.5 * (lo + cand_score), cand_score, w.ensemble.bounds().hi};
  const std::vector<double> margins = {0.0, std::fabs(orig_score - cand_score) + 0.1, 2.0};
  bool saw_accept = false, saw_above = false;
  for (double tau : taus) {
    for (double margin : margins) {
      const SuspicionConstraint c = w.constraint(tau, margin);
      const ConstraintVerdict got = constraint_check(candidate, original, c);
      ConstraintVerdict want = ConstraintVerdict::accept;
      if (cand_score > tau)
        want = ConstraintVerdict::above_tau;
      else if (cand_score < orig_score - margin)
        want = ConstraintVerdict::below_margin;
      INFO("tau ", tau, " margin ", margin);
      CHECK(got == want);
      saw_accept = saw_accept || want == ConstraintVerdict::accept;
      saw_above = saw_above || want == ConstraintVerdict::above_tau;
    }
  }
  CHECK(saw_accept);
  CHECK(saw_above);
}

TEST_CASE("a ceiling-high constraint leaves the search untouched") {
  const ConstraintWorld& w = constraint_world();
  const LabeledText& record = first_correct_record(w);
  const AttackConfig cfg = fast_config();
  const AttackResources res = w.attack_res();
  const SuspicionConstraint vacuous = w.constraint(w.ensemble.bounds().hi, 1e9);

  const AttackOutcome plain = attack_single(w.model, record.text, record.label, cfg, res);
  for (ConstraintMode mode : {ConstraintMode::final_only, ConstraintMode::per_edit}) {
    const ConstrainedOutcome out =
        constrained_attack(w.model, record.text, record.label, cfg, res, vacuous, mode);
    INFO("mode ", mode == ConstraintMode::per_edit ? "per_edit" : "final_only");
    CHECK(same_outcome(out.attack, plain));
    if (out.attack.success) {
      CHECK(out.accepted);
      CHECK_FALSE(out.rejection_reason.has_value());
    }
  }
}

TEST_CASE("accepted outcomes always satisfy both constraint inequalities") {
  const ConstraintWorld& w = constraint_world();
  const AttackConfig cfg = fast_config();
  const AttackResources res = w.attack_res();
  const SuspicionConstraint c = w.constraint(3.2, 0.4);

  int accepted = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const LabeledText& record = first_correct_record(w, i);
    for (ConstraintMode mode : {ConstraintMode::per_edit, ConstraintMode::final_only}) {
      const ConstrainedOutcome out =
          constrained_attack(w.model, record.text, record.label, cfg, res, c, mode);
      CHECK(out.original_score ==
            doctest::Approx(constraint_score(record.text, std::nullopt, c)).epsilon(1e-12));
      if (out.accepted) {
        ++accepted;
        CHECK(out.attack.success);
        CHECK(out.predicted_score <= c.tau + 1e-12);
        CHECK(out.predicted_score >= out.original_score - c.margin - 1e-12);
        CHECK_FALSE(out.rejection_reason.has_value());
      } else {
        REQUIRE(out.rejection_reason.has_value());
        switch (*out.rejection_reason) {
          case RejectionReason::attack_failed:
            CHECK_FALSE(out.attack.success);
            break;
          case RejectionReason::above_tau:
            CHECK(out.predicted_score > c.tau);
            break;
          case RejectionReason::below_margin:
            CHECK(out.predicted_score < out.original_score - c.margin);
            break;
        }
      }
    }
  }
  CHECK(accepted > 0);
}

TEST_CASE("a tau below the finished text's score forces an above_tau rejection") {
  const ConstraintWorld& w = constraint_world();
  const LabeledText& record = first_correct_record(w);
  const AttackConfig cfg = fast_config();
  const AttackResources res = w.attack_res();

  const AttackOutcome plain = attack_single(w.model, record.text, record.label, cfg, res);
  REQUIRE(plain.success);
  const SuspicionConstraint probe = w.constraint(w.ensemble.bounds().hi, 0.0);
  const double final_score = constraint_score(plain.perturbed_text, record.text, probe);
  REQUIRE(final_score > w.ensemble.bounds().lo + 0.01);

  const double tau = 0.5 * (w.ensemble.bounds().lo + final_score);
  const ConstrainedOutcome out = constrained_attack(w.model, record.text, record.label, cfg, res,
                                                    w.constraint(tau, 1e9),
                                                    ConstraintMode::final_only);
  CHECK(same_outcome(out.attack, plain));
  CHECK_FALSE(out.accepted);
  REQUIRE(out.rejection_reason.has_value());
  CHECK(*out.rejection_reason == RejectionReason::above_tau);
  CHECK(out.predicted_score == doctest::Approx(final_score).epsilon(1e-12));
}

TEST_CASE("an exhausted query budget surfaces as attack_failed") {
  const ConstraintWorld& w = constraint_world();
  const LabeledText& record = first_correct_record(w);
  AttackConfig cfg = fast_config();
  cfg.query_budget = 1;

  const ConstrainedOutcome out =
      constrained_attack(w.model, record.text, record.label, cfg, w.attack_res(),
                         w.constraint(w.ensemble.bounds().hi, 1e9), ConstraintMode::per_edit);
  CHECK_FALSE(out.attack.success);
  CHECK_FALSE(out.accepted);
  REQUIRE(out.rejection_reason.has_value());
  CHECK(*out.rejection_reason == RejectionReason::attack_failed);
}

TEST_CASE("run_constrained is worker-count independent and sums its tallies") {
  const ConstraintWorld& w = constraint_world();
  const std::vector<LabeledText> records(w.toy.corpus.begin(), w.toy.corpus.begin() + 16);
  const AttackConfig cfg = fast_config();
  const AttackResources res = w.attack_res();
  const SuspicionConstraint c = w.constraint(3.2, 0.4);

  const ConstrainedRun serial = run_constrained(w.model, records, cfg, res, c,
                                                ConstraintMode::per_edit, 1);
  const ConstrainedRun parallel = run_constrained(w.model, records, cfg, res, c,
                                                  ConstraintMode::per_edit, 4);

  REQUIRE(serial.outcomes.size() == parallel.outcomes.size());
  for (std::size_t i = 0; i < serial.outcomes.size(); ++i) {
    INFO("outcome ", i);
    CHECK(serial.outcomes[i].attack.original_id == parallel.outcomes[i].attack.original_id);
    CHECK(same_outcome(serial.outcomes[i].attack, parallel.outcomes[i].attack));
    CHECK(serial.outcomes[i].accepted == parallel.outcomes[i].accepted);
    CHECK(serial.outcomes[i].predicted_score ==
          doctest::Approx(parallel.outcomes[i].predicted_score).epsilon(1e-12));
  }
  CHECK(serial.accepted == parallel.accepted);

  // Tally arithmetic against a direct recount.
  const AttackSummary& s = serial.attack_summary;
  CHECK(s.attempts + s.skipped == records.size());
  CHECK(s.attempts == serial.outcomes.size());
  std::size_t successes = 0, accepted = 0;
  double query_sum = 0.0, rate_sum = 0.0;
  for (const auto& o : serial.outcomes) {
    query_sum += static_cast<double>(o.attack.queries_used);
    if (o.attack.success) {
      ++successes;
      rate_sum += o.attack.perturbation_rate;
    }
    if (o.accepted) ++accepted;
  }
  CHECK(s.successes == successes);
  CHECK(serial.accepted == accepted);
  if (s.attempts > 0) {
    CHECK(s.mean_queries ==
          doctest::Approx(query_sum / static_cast<double>(s.attempts)).epsilon(1e-12));
    CHECK(s.success_rate ==
          doctest::Approx(static_cast<double>(successes) / static_cast<double>(s.attempts))
              .epsilon(1e-12));
  }
  if (successes > 0)
    CHECK(s.mean_perturbation_rate ==
          doctest::Approx(rate_sum / static_cast<double>(successes)).epsilon(1e-12));
}

TEST_CASE("a vacuous constrained run reproduces the plain attack run") {
  const ConstraintWorld& w = constraint_world();
  const std::vector<LabeledText> records(w.toy.corpus.begin(), w.toy.corpus.begin() + 12);
  const AttackConfig cfg = fast_config();
  const AttackResources res = w.attack_res();

  const AttackRun plain = run_attack(w.model, records, cfg, res, 2);
  const ConstrainedRun constrained =
      run_constrained(w.model, records, cfg, res, w.constraint(w.ensemble.bounds().hi, 1e9),
                      ConstraintMode::final_only, 2);

  REQUIRE(plain.outcomes.size() == constrained.outcomes.size());
  for (std::size_t i = 0; i < plain.outcomes.size(); ++i) {
    INFO("outcome ", i);
    CHECK(plain.outcomes[i].original_id == constrained.outcomes[i].attack.original_id);
    CHECK(same_outcome(plain.outcomes[i], constrained.outcomes[i].attack));
  }
  CHECK(plain.summary.attempts == constrained.attack_summary.attempts);
  CHECK(plain.summary.skipped == constrained.attack_summary.skipped);
  CHECK(plain.summary.successes == constrained.attack_summary.successes);
}

TEST_CASE("study selection keeps exactly the pairs that improved under the rules") {
  std::vector<LabeledText> records = {
      {"a", "text a", 1}, {"b", "text b", 0}, {"c", "text c", 1},
      {"d", "text d", 0}, {"e", "text e", 1}, {"f", "text f", 0},
  };

  // Baselines: a..e are successful attacks; f failed and never counts.
  std::vector<ConstrainedOutcome> baseline = {
      stub_outcome("a", true, 4.0, 2.0),   // reduced by c-side, kept
      stub_outcome("b", true, 3.6, 2.0),   // constrained went below the margin rule
      stub_outcome("c", true, 3.0, 2.0),   // at tau, not above it
      stub_outcome("d", true, 4.5, 2.0),   // constrained attack failed
      stub_outcome("e", true, 3.8, 2.0),   // constrained score did not go down
      stub_outcome("f", false, 4.9, 2.0),  // baseline attack failed
  };
  std::vector<ConstrainedOutcome> constrained = {
      stub_outcome("a", true, 2.8, 2.0),
      stub_outcome("b", true, 1.2, 2.0),
      stub_outcome("c", true, 2.1, 2.0),
      stub_outcome("d", false, 1.0, 2.0),
      stub_outcome("e", true, 3.9, 2.0),
      stub_outcome("f", true, 2.2, 2.0),
  };

  const double tau = 3.0, margin = 0.5;
  const StudySelection sel = select_study_items(baseline, constrained, records, tau, margin);

  // a, b, d, e clear the tau bar; c (exactly tau) and f (failed) do not.
  CHECK(sel.baseline_above_tau == 4);
  REQUIRE(sel.pairs.size() == 1);
  CHECK(sel.reduced == 1);
  const StudyPair& pair = sel.pairs[0];
  CHECK(pair.original_id == "a");
  CHECK(pair.original_text == "text a");
  CHECK(pair.baseline_text == "perturbed a");
  CHECK(pair.constrained_text == "perturbed a");
  CHECK(pair.baseline_score == doctest::Approx(4.0));
  CHECK(pair.constrained_score == doctest::Approx(2.8));
  CHECK(pair.original_score == doctest::Approx(2.0));
  CHECK(sel.reduced_fraction == doctest::Approx(0.25));
  CHECK(sel.reduction_mean == doctest::Approx(1.2));
  CHECK(sel.reduction_stddev == doctest::Approx(0.0));  // single pair

  // A kept pair whose id has no record is an error.
  std::vector<LabeledText> missing(records.begin() + 1, records.end());
  CHECK_THROWS_AS(select_study_items(baseline, constrained, missing, tau, margin),
                  std::invalid_argument);
}

TEST_CASE("study reduction statistics use the sample standard deviation") {
  std::vector<LabeledText> records = {{"a", "ta", 1}, {"b", "tb", 0}, {"c", "tc", 1}};
  std::vector<ConstrainedOutcome> baseline = {
      stub_outcome("a", true, 4.0, 2.0),
      stub_outcome("b", true, 4.4, 2.0),
      stub_outcome("c", true, 3.9, 2.0),
  };
  std::vector<ConstrainedOutcome> constrained = {
      stub_outcome("a", true, 3.0, 2.0),  // reduction 1.0
      stub_outcome("b", true, 2.0, 2.0),  // reduction 2.4
      stub_outcome("c", true, 3.4, 2.0),  // reduction 0.5
  };

  const StudySelection sel = select_study_items(baseline, constrained, records, 3.0, 1.5);
  REQUIRE(sel.pairs.size() == 3);
  const std::vector<double> reductions = {1.0, 2.4, 0.5};
  double mean = 0.0;
  for (double r : reductions) mean += r;
  mean /= 3.0;
  double sq = 0.0;
  for (double r : reductions) sq += (r - mean) * (r - mean);
  CHECK(sel.reduction_mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(sel.reduction_stddev == doctest::Approx(std::sqrt(sq / 2.0)).epsilon(1e-12));
  CHECK(sel.reduced_fraction == doctest::Approx(1.0));
}

TEST_CASE("preference_eval counts wins, discards ties, and runs the sign test") {
  std::vector<PreferenceTrial> trials;
  for (int i = 0; i < 18; ++i) trials.push_back({"p" + std::to_string(i), 3, 1});
  for (int i = 18; i < 23; ++i) trials.push_back({"p" + std::to_string(i), 1, 4});
  trials.push_back({"tie-1", 2, 2});
  trials.push_back({"tie-2", 0, 0});

  const PreferenceResult result = preference_eval(trials);
  CHECK(result.wins_a == 18);
  CHECK(result.wins_b == 5);
  CHECK(result.discarded == 2);
  CHECK(result.p_two_sided == doctest::Approx(binomial_two_sided(18, 23, 0.5)).epsilon(1e-12));
  CHECK(result.p_two_sided > 0.0101);
  CHECK(result.p_two_sided < 0.0111);

  CHECK_THROWS_AS(preference_eval({{"bad", -1, 2}}), std::invalid_argument);

  // All ties: nothing to test, p degenerates to 1.
  const PreferenceResult empty = preference_eval({{"t", 1, 1}});
  CHECK(empty.wins_a == 0);
  CHECK(empty.wins_b == 0);
  CHECK(empty.discarded == 1);
  CHECK(empty.p_two_sided == doctest::Approx(1.0));
}

TEST_CASE("trial files round-trip and reject malformed rows") {
  auto path = fs::temp_directory_path() / "suskit_trials.csv";
  const std::vector<PreferenceTrial> trials = {{"pair-1", 3, 1}, {"pair-2", 0, 4}, {"pair-3", 2, 2}};
  save_trials_csv(path, trials);

  const std::string raw = read_text_file(path);
  CHECK(raw.rfind("pair_id,votes_a,votes_b\n", 0) == 0);

  const auto loaded = load_trials_csv(path);
  REQUIRE(loaded.size() == trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    CHECK(loaded[i].pair_id == trials[i].pair_id);
    CHECK(loaded[i].votes_a == trials[i].votes_a);
    CHECK(loaded[i].votes_b == trials[i].votes_b);
  }

  write_text_file(path, "pair_id,votes_a,votes_b\nonly-two,3\n");
  CHECK_THROWS_WITH_AS(load_trials_csv(path), doctest::Contains("expected 3 columns"),
                       std::runtime_error);
  write_text_file(path, "pair_id,votes_a,votes_b\np,one,2\n");
  CHECK_THROWS_WITH_AS(load_trials_csv(path), doctest::Contains("bad vote count"),
                       std::runtime_error);
  write_text_file(path, "");
  CHECK_THROWS_AS(load_trials_csv(path), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("study pairs export with a header and three-decimal scores") {
  StudySelection sel;
  StudyPair pair;
  pair.original_id = "it-1";
  pair.original_text = "plain text";
  pair.baseline_text = "loud, edited text";  // the comma forces quoting
  pair.constrained_text = "quiet edited text";
  pair.baseline_score = 4.25;
  pair.constrained_score = 2.5;
  pair.original_score = 2.0;
  sel.pairs.push_back(pair);

  auto path = fs::temp_directory_path() / "suskit_study.csv";
  export_study_csv(path, sel);
  const std::string raw = read_text_file(path);
  CHECK(raw.rfind("pair_id,original,baseline_text,constrained_text,baseline_score,"
                  "constrained_score,original_score\n",
                  0) == 0);
  CHECK(raw.find("it-1") != std::string::npos);
  CHECK(raw.find("\"loud, edited text\"") != std::string::npos);
  CHECK(raw.find("4.250") != std::string::npos);
  CHECK(raw.find("2.500") != std::string::npos);
  CHECK(raw.find("2.000") != std::string::npos);
  fs::remove(path);
}

TEST_CASE("constrained outcomes round-trip through their line format") {
  ConstrainedOutcome kept = stub_outcome("it-9", true, 2.4, 2.0);
  kept.accepted = true;
  kept.attack.queries_used = 77;
  kept.attack.perturbation_rate = 0.125;
  kept.attack.trace.push_back({3, EditKind::word_substitute, "good", "fine"});
  ConstrainedOutcome rejected = stub_outcome("it-10", true, 4.4, 2.0);
  rejected.rejection_reason = RejectionReason::above_tau;
  ConstrainedOutcome failed = stub_outcome("it-11", false, 1.5, 1.8);
  failed.rejection_reason = RejectionReason::attack_failed;

  auto path = fs::temp_directory_path() / "suskit_constrained.jsonl";
  save_constrained(path, {kept, rejected, failed});
  const auto loaded = load_constrained(path);
  REQUIRE(loaded.size() == 3);

  CHECK(loaded[0].attack.original_id == "it-9");
  CHECK(loaded[0].attack.perturbed_text == kept.attack.perturbed_text);
  CHECK(loaded[0].attack.success);
  CHECK(loaded[0].attack.queries_used == 77);
  CHECK(loaded[0].attack.perturbation_rate == doctest::Approx(0.125));
  REQUIRE(loaded[0].attack.trace.size() == 1);
  CHECK(loaded[0].attack.trace[0].position == 3);
  CHECK(loaded[0].attack.trace[0].kind == EditKind::word_substitute);
  CHECK(loaded[0].attack.trace[0].before == "good");
  CHECK(loaded[0].attack.trace[0].after == "fine");
  CHECK(loaded[0].accepted);
  CHECK_FALSE(loaded[0].rejection_reason.has_value());
  CHECK(loaded[0].predicted_score == doctest::Approx(2.4));
  CHECK(loaded[0].original_score == doctest::Approx(2.0));

  REQUIRE(loaded[1].rejection_reason.has_value());
  CHECK(*loaded[1].rejection_reason == RejectionReason::above_tau);
  REQUIRE(loaded[2].rejection_reason.has_value());
  CHECK(*loaded[2].rejection_reason == RejectionReason::attack_failed);
  CHECK_FALSE(loaded[2].attack.success);

  write_text_file(path, "{not json\n");
  CHECK_THROWS_WITH_AS(load_constrained(path), doctest::Contains("line 1"), std::runtime_error);
  fs::remove(path);
}
