#include "suskit/attacks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "suskit/text.hpp"
#include "suskit/util.hpp"

namespace suskit {

using nlohmann::json;

std::string to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::pruthi: return "pruthi";
    case AttackMethod::alzantot: return "alzantot";
    case AttackMethod::textfooler: return "textfooler";
    case AttackMethod::bae_standin: return "bae_standin";
  }
  throw std::logic_error("unknown attack method");
}

AttackMethod attack_method_from_string(const std::string& s) {
  if (s == "pruthi") return AttackMethod::pruthi;
  if (s == "alzantot") return AttackMethod::alzantot;
  if (s == "textfooler") return AttackMethod::textfooler;
  if (s == "bae_standin" || s == "bae") return AttackMethod::bae_standin;
  throw std::invalid_argument("unknown attack method: " + s);
}

std::string to_string(EditKind k) {
  switch (k) {
    case EditKind::char_swap: return "char_swap";
    case EditKind::char_delete: return "char_delete";
    case EditKind::char_insert: return "char_insert";
    case EditKind::char_keyboard: return "char_keyboard";
    case EditKind::word_substitute: return "word_substitute";
  }
  throw std::logic_error("unknown edit kind");
}

EditKind edit_kind_from_string(const std::string& s) {
  if (s == "char_swap") return EditKind::char_swap;
  if (s == "char_delete") return EditKind::char_delete;
  if (s == "char_insert") return EditKind::char_insert;
  if (s == "char_keyboard") return EditKind::char_keyboard;
  if (s == "word_substitute") return EditKind::word_substitute;
  throw std::invalid_argument("unknown edit kind: " + s);
}

void AttackConfig::validate() const {
  if (!(max_perturb_fraction > 0.0 && max_perturb_fraction <= 1.0))
    throw std::invalid_argument("max_perturb_fraction must be in (0,1]");
  if (min_word_cos < -1.0 || min_word_cos > 1.0)
    throw std::invalid_argument("min_word_cos must be in [-1,1]");
  if (min_sentence_cos < -1.0 || min_sentence_cos > 1.0)
    throw std::invalid_argument("min_sentence_cos must be in [-1,1]");
  if (k_candidates < 1) throw std::invalid_argument("k_candidates must be >= 1");
  if (population < 2) throw std::invalid_argument("population must be >= 2");
  if (generations < 0) throw std::invalid_argument("generations must be >= 0");
  if (query_budget < 1) throw std::invalid_argument("query_budget must be >= 1");
  if (min_perturb_fraction &&
      !(*min_perturb_fraction > 0.0 && *min_perturb_fraction <= max_perturb_fraction))
    throw std::invalid_argument("min_perturb_fraction must be in (0, max_perturb_fraction]");
}

namespace {

struct QueryCounter {
  const VictimModel& model;
  std::int64_t budget;
  std::int64_t used = 0;

  std::optional<Prediction> predict(const std::string& text) {
    if (used >= budget) return std::nullopt;
    ++used;
    return model.predict(text);
  }
};

std::string text_without_token(std::string_view original, const Token& token) {
  std::string out(original.substr(0, token.begin));
  out.append(original.substr(token.end));
  return out;
}

// Positions ordered by how much deleting the word lowers the probability of
// `base_label`. Returns nullopt when the query budget runs out mid-ranking.
std::optional<std::vector<std::size_t>> ranked_positions(QueryCounter& counter,
                                                         std::string_view original,
                                                         const std::vector<Token>& tokens,
                                                         int base_label, double base_prob) {
  std::vector<std::pair<double, std::size_t>> drops(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto pred = counter.predict(text_without_token(original, tokens[i]));
    if (!pred) return std::nullopt;
    const double p = base_label == 1 ? pred->positive_probability : 1.0 - pred->positive_probability;
    drops[i] = {base_prob - p, i};
  }
  std::sort(drops.begin(), drops.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> order(drops.size());
  for (std::size_t i = 0; i < drops.size(); ++i) order[i] = drops[i].second;
  return order;
}

std::size_t max_edits_allowed(double fraction, std::size_t total) {
  const double cap = fraction * static_cast<double>(total) + 1e-12;
  return static_cast<std::size_t>(std::floor(cap));
}

std::vector<std::string> filtered_neighbors(const std::vector<std::string>& words,
                                            std::size_t position, const AttackConfig& cfg,
                                            const AttackResources& res) {
  if (!res.embeddings) throw std::logic_error("word candidates need an embedding table");
  if (!res.pos_lexicon) throw std::logic_error("word candidates need a part-of-speech lexicon");
  if (!res.idf) throw std::logic_error("word candidates need an idf table");
  if (cfg.min_context_log_prob && !res.ngram)
    throw std::logic_error("the context log-probability floor needs an n-gram model");

  const std::string& target = words[position];
  auto neighbors = nearest_neighbors(*res.embeddings, target, cfg.k_candidates, cfg.min_word_cos);
  if (neighbors.empty()) return {};

  const SentenceVector base = sentence_vector(words, *res.embeddings, *res.idf);
  std::vector<std::string> out;
  std::vector<std::string> modified = words;
  for (const auto& nb : neighbors) {
    if (!pos_compatible(target, nb.word, *res.pos_lexicon)) continue;
    modified[position] = nb.word;
    const SentenceVector cand = sentence_vector(modified, *res.embeddings, *res.idf);
    if (base.all_oov || cand.all_oov) continue;
    if (cosine(base.vec, cand.vec) < cfg.min_sentence_cos) continue;
    if (cfg.min_context_log_prob &&
        context_score(words, position, nb.word, *res.ngram) < *cfg.min_context_log_prob)
      continue;
    out.push_back(nb.word);
  }
  return out;
}

struct Candidate {
  std::string word;
  EditKind kind = EditKind::word_substitute;
};

// Candidate provider per position; empty result means the position is skipped.
using CandidateFn = std::function<std::vector<Candidate>(std::size_t position)>;

AttackOutcome greedy_skeleton(const VictimModel& model, const std::string& text, int gold_label,
                              const AttackConfig& cfg, const CandidateFn& candidates_at,
                              const SearchHooks& hooks) {
  cfg.validate();
  QueryCounter counter{model, cfg.query_budget};
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw std::invalid_argument("attack target has no tokens");

  AttackOutcome outcome;
  outcome.perturbed_text = text;

  const auto base = counter.predict(text);
  if (!base) {
    outcome.queries_used = counter.used;
    return outcome;
  }
  if (base->label != gold_label)
    throw std::invalid_argument("attack precondition violated: the victim already misclassifies this text");

  const int orig_label = base->label;
  double current_prob = base->probability;  // probability of the original class
  const std::size_t cap = max_edits_allowed(cfg.max_perturb_fraction, tokens.size());
  std::vector<std::pair<std::size_t, std::string>> committed;

  auto finish = [&](bool success) {
    outcome.success = success;
    outcome.queries_used = counter.used;
    outcome.perturbation_rate =
        static_cast<double>(committed.size()) / static_cast<double>(tokens.size());
    outcome.perturbed_text = committed.empty()
                                 ? text
                                 : apply_word_replacements(text, tokens, committed);
    return outcome;
  };

  if (cap == 0) return finish(false);

  const auto order = ranked_positions(counter, text, tokens, orig_label, current_prob);
  if (!order) return finish(false);

  for (std::size_t position : *order) {
    if (committed.size() >= cap) break;
    const auto cands = candidates_at(position);
    if (cands.empty()) continue;

    struct Scored {
      double prob;
      std::string word;
      EditKind kind;
      std::string full_text;
    };
    std::vector<Scored> scored;
    bool exhausted = false;
    for (const auto& cand : cands) {
      auto trial = committed;
      trial.emplace_back(position, cand.word);
      std::string trial_text = apply_word_replacements(text, tokens, trial);
      const auto pred = counter.predict(trial_text);
      if (!pred) {
        exhausted = true;
        break;
      }
      const double p =
          orig_label == 1 ? pred->positive_probability : 1.0 - pred->positive_probability;
      scored.push_back({p, cand.word, cand.kind, std::move(trial_text)});
    }

    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
      if (a.prob != b.prob) return a.prob < b.prob;
      return a.word < b.word;
    });

    for (const auto& s : scored) {
      if (s.prob >= current_prob) break;  // no remaining candidate improves
      if (hooks.accept_commit && !hooks.accept_commit(s.full_text)) continue;
      committed.emplace_back(position, s.word);
      outcome.trace.push_back({position, s.kind, tokens[position].text, s.word});
      current_prob = s.prob;
      break;
    }

    if (current_prob < 0.5) return finish(true);
    if (exhausted) return finish(false);
  }
  return finish(false);
}

}  // namespace

std::vector<std::size_t> word_importance(const VictimModel& model, const std::string& text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw std::invalid_argument("word_importance: no tokens");
  QueryCounter counter{model, std::numeric_limits<std::int64_t>::max()};
  const auto base = counter.predict(text);
  const auto order = ranked_positions(counter, text, tokens, base->label, base->probability);
  return *order;
}

std::vector<std::string> char_candidates(const std::string& word, const KeyboardLayout& layout) {
  std::set<std::string> out;
  const std::size_t n = word.size();
  if (n >= 2) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      std::string w = word;
      std::swap(w[i], w[i + 1]);
      out.insert(std::move(w));
    }
    for (std::size_t i = 0; i < n; ++i) out.insert(word.substr(0, i) + word.substr(i + 1));
  }
  for (std::size_t i = 0; i <= n; ++i)
    for (char c = 'a'; c <= 'z'; ++c) out.insert(word.substr(0, i) + c + word.substr(i));
  for (std::size_t i = 0; i < n; ++i)
    for (char c : layout.neighbors(word[i])) {
      std::string w = word;
      w[i] = c;
      out.insert(std::move(w));
    }
  out.erase(word);
  return std::vector<std::string>(out.begin(), out.end());
}

std::vector<std::string> word_candidates(const std::string& text, std::size_t position,
                                         const AttackConfig& cfg, const AttackResources& res) {
  const auto words = token_texts(text);
  if (position >= words.size()) throw std::invalid_argument("word_candidates: position out of bounds");
  return filtered_neighbors(words, position, cfg, res);
}

AttackOutcome greedy_search(const VictimModel& model, const std::string& text, int gold_label,
                            const AttackConfig& cfg, const AttackResources& res,
                            const SearchHooks& hooks) {
  const auto words = token_texts(text);
  const bool rank_by_context = cfg.method == AttackMethod::bae_standin;
  if (rank_by_context && !res.ngram)
    throw std::logic_error("context-ranked search needs an n-gram model");

  CandidateFn provider = [&](std::size_t position) {
    auto filtered = filtered_neighbors(words, position, cfg, res);
    if (rank_by_context) {
      std::vector<std::pair<double, std::string>> ranked;
      ranked.reserve(filtered.size());
      for (auto& w : filtered)
        ranked.emplace_back(context_score(words, position, w, *res.ngram), std::move(w));
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      filtered.clear();
      for (auto& [score, w] : ranked) filtered.push_back(std::move(w));
    }
    std::vector<Candidate> out;
    out.reserve(filtered.size());
    for (auto& w : filtered) out.push_back({std::move(w), EditKind::word_substitute});
    return out;
  };
  return greedy_skeleton(model, text, gold_label, cfg, provider, hooks);
}

AttackOutcome char_search(const VictimModel& model, const std::string& text, int gold_label,
                          const AttackConfig& cfg, const AttackResources& res,
                          const SearchHooks& hooks) {
  if (!res.keyboard) throw std::logic_error("character search needs a keyboard layout");
  const auto words = token_texts(text);

  CandidateFn provider = [&](std::size_t position) {
    const std::string& word = words[position];
    // Tag each variant with the first edit kind that can produce it, in the
    // order: swap, delete, insert, keyboard substitution.
    std::vector<std::pair<std::string, EditKind>> tagged;
    const std::size_t n = word.size();
    if (n >= 2) {
      for (std::size_t i = 0; i + 1 < n; ++i) {
        std::string w = word;
        std::swap(w[i], w[i + 1]);
        tagged.emplace_back(std::move(w), EditKind::char_swap);
      }
      for (std::size_t i = 0; i < n; ++i)
        tagged.emplace_back(word.substr(0, i) + word.substr(i + 1), EditKind::char_delete);
    }
    for (std::size_t i = 0; i <= n; ++i)
      for (char c = 'a'; c <= 'z'; ++c)
        tagged.emplace_back(word.substr(0, i) + c + word.substr(i), EditKind::char_insert);
    for (std::size_t i = 0; i < n; ++i)
      for (char c : res.keyboard->neighbors(word[i])) {
        std::string w = word;
        w[i] = c;
        tagged.emplace_back(std::move(w), EditKind::char_keyboard);
      }

    std::map<std::string, EditKind> by_word;
    for (auto& [w, kind] : tagged)
      if (w != word) by_word.emplace(std::move(w), kind);
    std::vector<Candidate> out;
    out.reserve(by_word.size());
    for (auto& [w, kind] : by_word) out.push_back({w, kind});
    return out;
  };
  return greedy_skeleton(model, text, gold_label, cfg, provider, hooks);
}

AttackOutcome genetic_search(const VictimModel& model, const std::string& text, int gold_label,
                             const AttackConfig& cfg, const AttackResources& res,
                             const SearchHooks& hooks) {
  cfg.validate();
  QueryCounter counter{model, cfg.query_budget};
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw std::invalid_argument("attack target has no tokens");
  const auto original_words = token_texts(text);

  AttackOutcome outcome;
  outcome.perturbed_text = text;

  const auto base = counter.predict(text);
  if (!base) {
    outcome.queries_used = counter.used;
    return outcome;
  }
  if (base->label != gold_label)
    throw std::invalid_argument("attack precondition violated: the victim already misclassifies this text");
  const int orig_label = base->label;

  using Genome = std::vector<std::string>;
  auto changed_positions = [&](const Genome& g) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] != original_words[i]) out.push_back(i);
    return out;
  };
  auto genome_text = [&](const Genome& g) {
    std::vector<std::pair<std::size_t, std::string>> reps;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] != original_words[i]) reps.emplace_back(i, g[i]);
    return reps.empty() ? text : apply_word_replacements(text, tokens, reps);
  };
  auto finish = [&](const Genome& g, bool success) {
    const auto changed = changed_positions(g);
    outcome.success = success;
    outcome.queries_used = counter.used;
    outcome.perturbation_rate =
        static_cast<double>(changed.size()) / static_cast<double>(tokens.size());
    outcome.perturbed_text = genome_text(g);
    outcome.trace.clear();
    for (std::size_t pos : changed)
      outcome.trace.push_back({pos, EditKind::word_substitute, original_words[pos], g[pos]});
    return outcome;
  };

  const std::size_t cap = max_edits_allowed(cfg.max_perturb_fraction, tokens.size());
  std::size_t floor_edits = 0;
  if (cfg.min_perturb_fraction) {
    const double f = *cfg.min_perturb_fraction * static_cast<double>(tokens.size()) - 1e-12;
    floor_edits = std::min(cap, static_cast<std::size_t>(std::max(0.0, std::ceil(f))));
  }

  std::vector<std::vector<std::string>> candidates(tokens.size());
  std::vector<std::size_t> valid_positions;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    candidates[i] = filtered_neighbors(original_words, i, cfg, res);
    if (!candidates[i].empty()) valid_positions.push_back(i);
  }
  if (valid_positions.empty() || cap == 0) return finish(original_words, false);

  std::mt19937_64 rng(cfg.seed);
  auto pick_index = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };

  auto mutate = [&](Genome& g) {
    const auto changed = changed_positions(g);
    std::vector<std::size_t> pool;
    if (changed.size() < cap) {
      pool = valid_positions;
    } else {
      for (std::size_t p : changed)
        if (!candidates[p].empty()) pool.push_back(p);
    }
    if (pool.empty()) return;
    const std::size_t pos = pool[pick_index(pool.size())];
    g[pos] = candidates[pos][pick_index(candidates[pos].size())];
  };

  auto repair = [&](Genome& g) {
    auto changed = changed_positions(g);
    while (changed.size() > cap) {
      const std::size_t at = pick_index(changed.size());
      g[changed[at]] = original_words[changed[at]];
      changed.erase(changed.begin() + static_cast<std::ptrdiff_t>(at));
    }
    while (changed.size() < floor_edits) {
      std::vector<std::size_t> pool;
      for (std::size_t p : valid_positions)
        if (g[p] == original_words[p]) pool.push_back(p);
      if (pool.empty()) break;
      const std::size_t pos = pool[pick_index(pool.size())];
      g[pos] = candidates[pos][pick_index(candidates[pos].size())];
      changed.push_back(pos);
    }
  };

  struct Member {
    Genome genome;
    double fitness = 0.0;  // probability of the flipped class
  };
  struct EvalResult {
    Member member;
    bool flipped = false;
  };

  std::optional<Member> best_overall;
  auto evaluate = [&](Genome g) -> std::optional<EvalResult> {
    const std::string t = genome_text(g);
    const auto pred = counter.predict(t);
    if (!pred) return std::nullopt;  // budget exhausted
    const double fitness =
        orig_label == 1 ? 1.0 - pred->positive_probability : pred->positive_probability;
    const bool flipped =
        pred->label != orig_label && (!hooks.accept_commit || hooks.accept_commit(t));
    if (!best_overall || fitness > best_overall->fitness) best_overall = Member{g, fitness};
    return EvalResult{Member{std::move(g), fitness}, flipped};
  };

  std::vector<Member> population;
  population.reserve(static_cast<std::size_t>(cfg.population));
  for (int i = 0; i < cfg.population; ++i) {
    Genome g = original_words;
    const std::size_t initial_edits = std::max<std::size_t>(1, floor_edits);
    for (std::size_t e = 0; e < initial_edits; ++e) mutate(g);
    auto result = evaluate(std::move(g));
    if (!result) return finish(best_overall ? best_overall->genome : original_words, false);
    if (result->flipped) return finish(result->member.genome, true);
    population.push_back(std::move(result->member));
  }

  auto by_fitness_desc = [](const Member& a, const Member& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.genome < b.genome;
  };

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::sort(population.begin(), population.end(), by_fitness_desc);
    std::vector<double> cumulative(population.size());
    double total = 0.0;
    for (std::size_t i = 0; i < population.size(); ++i) {
      total += std::max(population[i].fitness, 1e-12);
      cumulative[i] = total;
    }
    auto select_parent = [&]() -> const Member& {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      const std::size_t idx =
          std::min(population.size() - 1,
                   static_cast<std::size_t>(std::distance(cumulative.begin(), it)));
      return population[idx];
    };

    std::vector<Member> next;
    next.reserve(population.size());
    next.push_back(population.front());  // elite carries its fitness over
    while (next.size() < population.size()) {
      const Member& pa = select_parent();
      const Member& pb = select_parent();
      Genome child(original_words.size());
      for (std::size_t i = 0; i < child.size(); ++i)
        child[i] = pick_index(2) == 0 ? pa.genome[i] : pb.genome[i];
      repair(child);
      mutate(child);
      repair(child);
      auto result = evaluate(std::move(child));
      if (!result) return finish(best_overall ? best_overall->genome : original_words, false);
      if (result->flipped) return finish(result->member.genome, true);
      next.push_back(std::move(result->member));
    }
    population = std::move(next);
  }

  std::sort(population.begin(), population.end(), by_fitness_desc);
  return finish(population.front().genome, false);
}

AttackOutcome attack_single(const VictimModel& model, const std::string& text, int gold_label,
                            const AttackConfig& cfg, const AttackResources& res,
                            const SearchHooks& hooks) {
  switch (cfg.method) {
    case AttackMethod::pruthi: return char_search(model, text, gold_label, cfg, res, hooks);
    case AttackMethod::alzantot: return genetic_search(model, text, gold_label, cfg, res, hooks);
    case AttackMethod::textfooler:
    case AttackMethod::bae_standin:
      return greedy_search(model, text, gold_label, cfg, res, hooks);
  }
  throw std::logic_error("unknown attack method");
}

AttackRun run_attack(const VictimModel& model, const std::vector<LabeledText>& records,
                     const AttackConfig& cfg, const AttackResources& res, int workers,
                     const SearchHooks& hooks) {
  cfg.validate();
  const std::size_t n = records.size();
  std::vector<std::optional<AttackOutcome>> slots(n);
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
        AttackOutcome out = attack_single(model, records[i].text, records[i].label, local, res, hooks);
        out.original_id = records[i].item_id;
        slots[i] = std::move(out);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int thread_count = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (thread_count == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  AttackRun run;
  double query_sum = 0.0, rate_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (skipped[i]) {
      ++run.summary.skipped;
      continue;
    }
    if (!slots[i]) continue;
    ++run.summary.attempts;
    query_sum += static_cast<double>(slots[i]->queries_used);
    if (slots[i]->success) {
      ++run.summary.successes;
      rate_sum += slots[i]->perturbation_rate;
    }
    run.outcomes.push_back(std::move(*slots[i]));
  }
  if (run.summary.attempts > 0) {
    run.summary.success_rate =
        static_cast<double>(run.summary.successes) / static_cast<double>(run.summary.attempts);
    run.summary.mean_queries = query_sum / static_cast<double>(run.summary.attempts);
  }
  if (run.summary.successes > 0)
    run.summary.mean_perturbation_rate = rate_sum / static_cast<double>(run.summary.successes);
  return run;
}

std::string replay_trace(const std::string& original, const EditTrace& trace) {
  const auto tokens = tokenize(original);
  std::map<std::size_t, std::string> final_word;
  for (const auto& edit : trace) {
    if (edit.position >= tokens.size())
      throw std::invalid_argument("replay_trace: edit position out of bounds");
    final_word[edit.position] = edit.after;
  }
  if (final_word.empty()) return original;
  std::vector<std::pair<std::size_t, std::string>> reps(final_word.begin(), final_word.end());
  return apply_word_replacements(original, tokens, reps);
}

void save_outcomes(const std::filesystem::path& path, const std::vector<AttackOutcome>& outcomes) {
  std::ostringstream out;
  for (const auto& o : outcomes) {
    json j;
    j["original_id"] = o.original_id;
    j["perturbed_text"] = o.perturbed_text;
    j["success"] = o.success;
    j["queries_used"] = o.queries_used;
    j["perturbation_rate"] = o.perturbation_rate;
    json trace = json::array();
    for (const auto& e : o.trace)
      trace.push_back({{"position", e.position},
                       {"kind", to_string(e.kind)},
                       {"before", e.before},
                       {"after", e.after}});
    j["trace"] = std::move(trace);
    out << j.dump() << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<AttackOutcome> load_outcomes(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<AttackOutcome> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("outcome line " + std::to_string(row) + ": " + e.what());
    }
    AttackOutcome o;
    o.original_id = j.at("original_id").get<std::string>();
    o.perturbed_text = j.at("perturbed_text").get<std::string>();
    o.success = j.at("success").get<bool>();
    o.queries_used = j.at("queries_used").get<std::int64_t>();
    o.perturbation_rate = j.at("perturbation_rate").get<double>();
    for (const auto& e : j.at("trace")) {
      Edit edit;
      edit.position = e.at("position").get<std::size_t>();
      edit.kind = edit_kind_from_string(e.at("kind").get<std::string>());
      edit.before = e.at("before").get<std::string>();
      edit.after = e.at("after").get<std::string>();
      o.trace.push_back(std::move(edit));
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace suskit
