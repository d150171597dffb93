#include "suskit/susgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "suskit/metrics.hpp"
#include "suskit/util.hpp"

namespace suskit {

void SuspicionConstraint::validate() const {
  if (!regressor || !victim || !features)
    throw std::logic_error("suspicion constraint needs a regressor, a victim, and feature resources");
  const ScoreBounds& b = regressor->bounds();
  if (!(tau > b.lo && tau <= b.hi))
    throw std::invalid_argument("tau must be inside the score bounds");
  if (!(margin >= 0.0)) throw std::invalid_argument("margin must be >= 0");
}

std::string to_string(RejectionReason r) {
  switch (r) {
    case RejectionReason::above_tau: return "above_tau";
    case RejectionReason::below_margin: return "below_margin";
    case RejectionReason::attack_failed: return "attack_failed";
  }
  throw std::logic_error("unknown rejection reason");
}

double constraint_score(const std::string& text, const std::optional<std::string>& original,
                        const SuspicionConstraint& constraint) {
  constraint.validate();
  const SuspicionFeatureVector fv = extract(text, original, *constraint.victim,
                                            *constraint.features);
  const auto row = fv.to_row();
  VectorXd features(static_cast<Eigen::Index>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) features[static_cast<Eigen::Index>(i)] = row[i];
  const auto& m = fv.mask;
  return constraint.regressor
      ->predict(text, features, {m.perturbation, m.embedding, m.nnif, m.lid, m.grammar, m.llm})
      .score;
}

ConstraintVerdict constraint_check(const std::string& candidate, const std::string& original,
                                   const SuspicionConstraint& constraint) {
  const double candidate_score = constraint_score(candidate, original, constraint);
  const double original_score = constraint_score(original, std::nullopt, constraint);
  if (candidate_score > constraint.tau) return ConstraintVerdict::above_tau;
  if (candidate_score < original_score - constraint.margin) return ConstraintVerdict::below_margin;
  return ConstraintVerdict::accept;
}

ConstrainedOutcome constrained_attack(const VictimModel& model, const std::string& text,
                                      int gold_label, const AttackConfig& cfg,
                                      const AttackResources& res,
                                      const SuspicionConstraint& constraint,
                                      ConstraintMode mode) {
  constraint.validate();
  ConstrainedOutcome out;
  out.original_score = constraint_score(text, std::nullopt, constraint);

  SearchHooks hooks;
  if (mode == ConstraintMode::per_edit) {
    hooks.accept_commit = [&](const std::string& candidate) {
      const double s = constraint_score(candidate, text, constraint);
      return s <= constraint.tau && s >= out.original_score - constraint.margin;
    };
  }
  out.attack = attack_single(model, text, gold_label, cfg, res, hooks);

  out.predicted_score = constraint_score(out.attack.perturbed_text,
                                         out.attack.perturbed_text == text
                                             ? std::optional<std::string>{}
                                             : std::optional<std::string>{text},
                                         constraint);
  if (!out.attack.success) {
    out.rejection_reason = RejectionReason::attack_failed;
    return out;
  }
  if (out.predicted_score > constraint.tau) {
    out.rejection_reason = RejectionReason::above_tau;
    return out;
  }
  if (out.predicted_score < out.original_score - constraint.margin) {
    out.rejection_reason = RejectionReason::below_margin;
    return out;
  }
  out.accepted = true;
  return out;
}

ConstrainedRun run_constrained(const VictimModel& model, const std::vector<LabeledText>& records,
                               const AttackConfig& cfg, const AttackResources& res,
                               const SuspicionConstraint& constraint, ConstraintMode mode,
                               int workers) {
  cfg.validate();
  constraint.validate();
  const std::size_t n = records.size();
  std::vector<std::optional<ConstrainedOutcome>> slots(n);
  std::vector<char> skipped(n, 0);

  std::atomic<std::size_t> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n) return;
      try {
        if (model.predict(records[i].text).label != records[i].label) {
          skipped[i] = 1;
          continue;
        }
        AttackConfig local = cfg;
        local.seed = cfg.seed + i;
        ConstrainedOutcome out =
            constrained_attack(model, records[i].text, records[i].label, local, res, constraint, mode);
        out.attack.original_id = records[i].item_id;
        slots[i] = std::move(out);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int thread_count =
      std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (thread_count == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ConstrainedRun run;
  double query_sum = 0.0, rate_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (skipped[i]) {
      ++run.attack_summary.skipped;
      continue;
    }
    if (!slots[i]) continue;
    ++run.attack_summary.attempts;
    query_sum += static_cast<double>(slots[i]->attack.queries_used);
    if (slots[i]->attack.success) {
      ++run.attack_summary.successes;
      rate_sum += slots[i]->attack.perturbation_rate;
    }
    if (slots[i]->accepted) ++run.accepted;
    run.outcomes.push_back(std::move(*slots[i]));
  }
  if (run.attack_summary.attempts > 0) {
    run.attack_summary.success_rate = static_cast<double>(run.attack_summary.successes) /
                                      static_cast<double>(run.attack_summary.attempts);
    run.attack_summary.mean_queries = query_sum / static_cast<double>(run.attack_summary.attempts);
  }
  if (run.attack_summary.successes > 0)
    run.attack_summary.mean_perturbation_rate =
        rate_sum / static_cast<double>(run.attack_summary.successes);
  return run;
}

StudySelection select_study_items(const std::vector<ConstrainedOutcome>& baseline,
                                  const std::vector<ConstrainedOutcome>& constrained,
                                  const std::vector<LabeledText>& records, double tau,
                                  double margin) {
  std::unordered_map<std::string, const ConstrainedOutcome*> by_id;
  for (const auto& c : constrained) by_id[c.attack.original_id] = &c;
  std::unordered_map<std::string, const std::string*> texts;
  for (const auto& r : records) texts[r.item_id] = &r.text;

  StudySelection sel;
  std::vector<double> reductions;
  for (const auto& b : baseline) {
    if (!b.attack.success) continue;
    if (!(b.predicted_score > tau)) continue;
    ++sel.baseline_above_tau;
    const auto it = by_id.find(b.attack.original_id);
    if (it == by_id.end() || !it->second->attack.success) continue;
    const ConstrainedOutcome& c = *it->second;
    const double reduction = b.predicted_score - c.predicted_score;
    if (!(reduction > 0.0)) continue;
    if (c.predicted_score < c.original_score - margin) continue;
    const auto text_it = texts.find(b.attack.original_id);
    if (text_it == texts.end())
      throw std::invalid_argument("select_study_items: no record for id " + b.attack.original_id);
    StudyPair pair;
    pair.original_id = b.attack.original_id;
    pair.original_text = *text_it->second;
    pair.baseline_text = b.attack.perturbed_text;
    pair.constrained_text = c.attack.perturbed_text;
    pair.baseline_score = b.predicted_score;
    pair.constrained_score = c.predicted_score;
    pair.original_score = c.original_score;
    sel.pairs.push_back(std::move(pair));
    reductions.push_back(reduction);
  }
  sel.reduced = sel.pairs.size();
  if (sel.baseline_above_tau > 0)
    sel.reduced_fraction =
        static_cast<double>(sel.reduced) / static_cast<double>(sel.baseline_above_tau);
  if (!reductions.empty()) {
    double sum = 0.0;
    for (double r : reductions) sum += r;
    sel.reduction_mean = sum / static_cast<double>(reductions.size());
    if (reductions.size() > 1) {
      double sq = 0.0;
      for (double r : reductions) sq += (r - sel.reduction_mean) * (r - sel.reduction_mean);
      sel.reduction_stddev = std::sqrt(sq / static_cast<double>(reductions.size() - 1));
    }
  }
  return sel;
}

PreferenceResult preference_eval(const std::vector<PreferenceTrial>& trials) {
  PreferenceResult result;
  for (const auto& t : trials) {
    if (t.votes_a < 0 || t.votes_b < 0)
      throw std::invalid_argument("preference_eval: negative vote count in trial " + t.pair_id);
    if (t.votes_a == t.votes_b) {
      warn("preference_eval: trial " + t.pair_id + " is tied; discarded");
      ++result.discarded;
      continue;
    }
    if (t.votes_a > t.votes_b)
      ++result.wins_a;
    else
      ++result.wins_b;
  }
  result.p_two_sided = binomial_two_sided(result.wins_a, result.wins_a + result.wins_b, 0.5);
  return result;
}

void export_study_csv(const std::filesystem::path& path, const StudySelection& selection) {
  std::ostringstream out;
  out << "pair_id,original,baseline_text,constrained_text,baseline_score,constrained_score,"
         "original_score\n";
  char buf[32];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };
  for (const auto& p : selection.pairs) {
    out << csv_escape(p.original_id) << ',' << csv_escape(p.original_text) << ','
        << csv_escape(p.baseline_text) << ',' << csv_escape(p.constrained_text) << ','
        << fmt(p.baseline_score) << ',' << fmt(p.constrained_score) << ','
        << fmt(p.original_score) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  // The trial file carries no quoted fields; plain splitting is enough.
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

std::vector<PreferenceTrial> load_trials_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trial file is empty: " + path.string());
  std::vector<PreferenceTrial> trials;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != 3)
      throw std::runtime_error("trial file row " + std::to_string(row) + ": expected 3 columns");
    PreferenceTrial t;
    t.pair_id = std::string(trim(cols[0]));
    try {
      t.votes_a = std::stoi(std::string(trim(cols[1])));
      t.votes_b = std::stoi(std::string(trim(cols[2])));
    } catch (const std::exception&) {
      throw std::runtime_error("trial file row " + std::to_string(row) + ": bad vote count");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void save_trials_csv(const std::filesystem::path& path,
                     const std::vector<PreferenceTrial>& trials) {
  std::ostringstream out;
  out << "pair_id,votes_a,votes_b\n";
  for (const auto& t : trials)
    out << csv_escape(t.pair_id) << ',' << t.votes_a << ',' << t.votes_b << '\n';
  write_text_file(path, out.str());
}

void save_constrained(const std::filesystem::path& path,
                      const std::vector<ConstrainedOutcome>& outcomes) {
  std::ostringstream out;
  for (const auto& o : outcomes) {
    nlohmann::json j;
    j["original_id"] = o.attack.original_id;
    j["perturbed_text"] = o.attack.perturbed_text;
    j["success"] = o.attack.success;
    j["queries_used"] = o.attack.queries_used;
    j["perturbation_rate"] = o.attack.perturbation_rate;
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& e : o.attack.trace)
      trace.push_back({{"position", e.position},
                       {"kind", to_string(e.kind)},
                       {"before", e.before},
                       {"after", e.after}});
    j["trace"] = std::move(trace);
    j["predicted_score"] = o.predicted_score;
    j["original_score"] = o.original_score;
    j["accepted"] = o.accepted;
    if (o.rejection_reason) j["rejection_reason"] = to_string(*o.rejection_reason);
    out << j.dump() << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<ConstrainedOutcome> load_constrained(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<ConstrainedOutcome> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("constrained outcome line " + std::to_string(row) + ": " + e.what());
    }
    ConstrainedOutcome o;
    o.attack.original_id = j.at("original_id").get<std::string>();
    o.attack.perturbed_text = j.at("perturbed_text").get<std::string>();
    o.attack.success = j.at("success").get<bool>();
    o.attack.queries_used = j.at("queries_used").get<std::int64_t>();
    o.attack.perturbation_rate = j.at("perturbation_rate").get<double>();
    for (const auto& e : j.at("trace")) {
      Edit edit;
      edit.position = e.at("position").get<std::size_t>();
      edit.kind = edit_kind_from_string(e.at("kind").get<std::string>());
      edit.before = e.at("before").get<std::string>();
      edit.after = e.at("after").get<std::string>();
      o.attack.trace.push_back(std::move(edit));
    }
    o.predicted_score = j.at("predicted_score").get<double>();
    o.original_score = j.at("original_score").get<double>();
    o.accepted = j.at("accepted").get<bool>();
    if (j.contains("rejection_reason")) {
      const std::string reason = j.at("rejection_reason").get<std::string>();
      if (reason == "above_tau")
        o.rejection_reason = RejectionReason::above_tau;
      else if (reason == "below_margin")
        o.rejection_reason = RejectionReason::below_margin;
      else if (reason == "attack_failed")
        o.rejection_reason = RejectionReason::attack_failed;
      else
        throw std::runtime_error("constrained outcome line " + std::to_string(row) +
                                 ": unknown rejection reason " + reason);
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace suskit
