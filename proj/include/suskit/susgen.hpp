#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "suskit/attacks.hpp"
#include "suskit/features.hpp"
#include "suskit/regressor.hpp"

namespace suskit {

// Generation-time filter: a candidate is acceptable when its predicted
// suspicion stays at or below tau and does not undercut the original text's
// predicted suspicion by more than the margin.
struct SuspicionConstraint {
  const EnsembleRegressor* regressor = nullptr;
  const VictimModel* victim = nullptr;
  const FeatureResources* features = nullptr;
  double tau = 2.5;
  double margin = 0.2;

  void validate() const;
};

enum class ConstraintVerdict { accept, above_tau, below_margin };

// Predicted suspicion of a text; `original` feeds the edit-rate feature.
double constraint_score(const std::string& text, const std::optional<std::string>& original,
                        const SuspicionConstraint& constraint);

ConstraintVerdict constraint_check(const std::string& candidate, const std::string& original,
                                   const SuspicionConstraint& constraint);

enum class ConstraintMode {
  per_edit,    // every commit the search makes must pass the constraint
  final_only,  // only the finished text is checked
};

enum class RejectionReason { above_tau, below_margin, attack_failed };

std::string to_string(RejectionReason r);

struct ConstrainedOutcome {
  AttackOutcome attack;
  double predicted_score = 0.0;
  double original_score = 0.0;
  bool accepted = false;
  std::optional<RejectionReason> rejection_reason;
};

ConstrainedOutcome constrained_attack(const VictimModel& model, const std::string& text,
                                      int gold_label, const AttackConfig& cfg,
                                      const AttackResources& res,
                                      const SuspicionConstraint& constraint,
                                      ConstraintMode mode = ConstraintMode::per_edit);

struct ConstrainedRun {
  std::vector<ConstrainedOutcome> outcomes;  // input order, attempted records only
  AttackSummary attack_summary;
  std::size_t accepted = 0;
};

ConstrainedRun run_constrained(const VictimModel& model, const std::vector<LabeledText>& records,
                               const AttackConfig& cfg, const AttackResources& res,
                               const SuspicionConstraint& constraint,
                               ConstraintMode mode = ConstraintMode::per_edit, int workers = 1);

struct StudyPair {
  std::string original_id;
  std::string original_text;
  std::string baseline_text;
  std::string constrained_text;
  double baseline_score = 0.0;
  double constrained_score = 0.0;
  double original_score = 0.0;
};

struct StudySelection {
  std::vector<StudyPair> pairs;
  std::size_t baseline_above_tau = 0;
  std::size_t reduced = 0;  // pairs surviving every filter
  double reduced_fraction = 0.0;
  double reduction_mean = 0.0;
  double reduction_stddev = 0.0;  // sample standard deviation
};

// Pairs a baseline run with a constrained run by original id and keeps the
// items where the baseline looked suspicious (score > tau), the constrained
// attack succeeded, the score went down, and the margin rule holds.
StudySelection select_study_items(const std::vector<ConstrainedOutcome>& baseline,
                                  const std::vector<ConstrainedOutcome>& constrained,
                                  const std::vector<LabeledText>& records, double tau,
                                  double margin);

struct PreferenceTrial {
  std::string pair_id;
  int votes_a = 0;
  int votes_b = 0;
};

struct PreferenceResult {
  int wins_a = 0;
  int wins_b = 0;
  int discarded = 0;  // tied trials
  double p_two_sided = 1.0;
};

PreferenceResult preference_eval(const std::vector<PreferenceTrial>& trials);

void export_study_csv(const std::filesystem::path& path, const StudySelection& selection);
std::vector<PreferenceTrial> load_trials_csv(const std::filesystem::path& path);
void save_trials_csv(const std::filesystem::path& path, const std::vector<PreferenceTrial>& trials);

// JSONL, one constrained outcome per line.
void save_constrained(const std::filesystem::path& path,
                      const std::vector<ConstrainedOutcome>& outcomes);
std::vector<ConstrainedOutcome> load_constrained(const std::filesystem::path& path);

}  // namespace suskit
