#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "suskit/resources.hpp"
#include "suskit/victim.hpp"

namespace suskit {

enum class AttackMethod { pruthi, alzantot, textfooler, bae_standin };

std::string to_string(AttackMethod m);
AttackMethod attack_method_from_string(const std::string& s);

struct AttackConfig {
  AttackMethod method = AttackMethod::textfooler;
  double max_perturb_fraction = 0.5;
  double min_word_cos = 0.5;
  double min_sentence_cos = 0.84;
  int k_candidates = 50;
  int population = 60;
  int generations = 20;
  std::uint64_t seed = 0;
  std::int64_t query_budget = 5000;
  // Optional floor on the number of substituted words (population search only).
  std::optional<double> min_perturb_fraction;
  // Optional language-model plausibility floor on substitution candidates.
  std::optional<double> min_context_log_prob;

  void validate() const;
};

enum class EditKind { char_swap, char_delete, char_insert, char_keyboard, word_substitute };

std::string to_string(EditKind k);
EditKind edit_kind_from_string(const std::string& s);

struct Edit {
  std::size_t position = 0;  // token index in the original text
  EditKind kind = EditKind::word_substitute;
  std::string before;
  std::string after;
};

using EditTrace = std::vector<Edit>;

struct AttackOutcome {
  std::string original_id;
  std::string perturbed_text;
  bool success = false;
  std::int64_t queries_used = 0;
  double perturbation_rate = 0.0;
  EditTrace trace;
};

struct AttackResources {
  const EmbeddingTable* embeddings = nullptr;
  const PosLexicon* pos_lexicon = nullptr;
  const IdfTable* idf = nullptr;
  const NgramModel* ngram = nullptr;
  const KeyboardLayout* keyboard = nullptr;
};

struct SearchHooks {
  // Veto filter applied to every candidate text the search would commit;
  // returning false sends the search to the next-best candidate.
  std::function<bool(const std::string& candidate_text)> accept_commit;
};

// Positions sorted by descending drop in the predicted-class probability when
// the word at that position is deleted; ties break toward the lower position.
std::vector<std::size_t> word_importance(const VictimModel& model, const std::string& text);

// Every single-character corruption of `word`: adjacent transpositions,
// deletions, insertions of a-z, and substitutions by keyboard-adjacent keys.
// Sorted, deduplicated, the original excluded.
std::vector<std::string> char_candidates(const std::string& word, const KeyboardLayout& layout);

// Embedding neighbors of the word at `position`, filtered by part-of-speech
// compatibility, word cosine, and whole-sentence cosine after substitution.
std::vector<std::string> word_candidates(const std::string& text, std::size_t position,
                                         const AttackConfig& cfg, const AttackResources& res);

AttackOutcome greedy_search(const VictimModel& model, const std::string& text, int gold_label,
                            const AttackConfig& cfg, const AttackResources& res,
                            const SearchHooks& hooks = {});

AttackOutcome genetic_search(const VictimModel& model, const std::string& text, int gold_label,
                             const AttackConfig& cfg, const AttackResources& res,
                             const SearchHooks& hooks = {});

AttackOutcome char_search(const VictimModel& model, const std::string& text, int gold_label,
                          const AttackConfig& cfg, const AttackResources& res,
                          const SearchHooks& hooks = {});

// Dispatches on cfg.method.
AttackOutcome attack_single(const VictimModel& model, const std::string& text, int gold_label,
                            const AttackConfig& cfg, const AttackResources& res,
                            const SearchHooks& hooks = {});

struct AttackSummary {
  std::size_t attempts = 0;
  std::size_t successes = 0;
  std::size_t skipped = 0;  // records the victim already misclassifies
  double success_rate = 0.0;
  double mean_queries = 0.0;            // over attempted records
  double mean_perturbation_rate = 0.0;  // over successful outcomes
};

struct AttackRun {
  std::vector<AttackOutcome> outcomes;  // input order, attempted records only
  AttackSummary summary;
};

// Per-record seeds derive from cfg.seed plus the record index, so results are
// identical for any worker count.
AttackRun run_attack(const VictimModel& model, const std::vector<LabeledText>& records,
                     const AttackConfig& cfg, const AttackResources& res, int workers = 1,
                     const SearchHooks& hooks = {});

// Re-applies a trace to the original text, reproducing the perturbed text
// byte for byte.
std::string replay_trace(const std::string& original, const EditTrace& trace);

void save_outcomes(const std::filesystem::path& path, const std::vector<AttackOutcome>& outcomes);
std::vector<AttackOutcome> load_outcomes(const std::filesystem::path& path);

}  // namespace suskit
