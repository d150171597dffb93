#include "suskit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "suskit/text.hpp"
#include "suskit/util.hpp"

namespace suskit {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& tokens,
                                                     int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

int clipped_matches(const std::map<std::vector<std::string>, int>& ref,
                    const std::map<std::vector<std::string>, int>& cand) {
  int matches = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(c, it->second);
  }
  return matches;
}

}  // namespace

double bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate,
            int max_n) {
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");
  if (candidate.empty()) {
    warn("bleu: empty candidate scores 0");
    return 0.0;
  }
  if (reference.empty()) throw std::invalid_argument("bleu: empty reference");
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    auto ref = ngram_counts(reference, n);
    auto cand = ngram_counts(candidate, n);
    double num = clipped_matches(ref, cand);
    double den = 0.0;
    for (const auto& [_, c] : cand) den += c;
    if (n == 1) {
      if (num == 0.0) return 0.0;  // no shared unigrams: no credit at all
    } else if (den == 0.0 || num == 0.0) {
      num += 1.0;
      den += 1.0;
    }
    log_sum += std::log(num / den);
  }
  double score = std::exp(log_sum / max_n);
  const double ref_len = static_cast<double>(reference.size());
  const double cand_len = static_cast<double>(candidate.size());
  if (cand_len < ref_len) score *= std::exp(1.0 - ref_len / cand_len);
  return score;
}

namespace {

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<int>> dp(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1
                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
  return dp[a.size()][b.size()];
}

double f1(double matches, double n_ref, double n_cand) {
  if (n_ref == 0.0 || n_cand == 0.0) return 0.0;
  const double recall = matches / n_ref;
  const double precision = matches / n_cand;
  if (recall + precision == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double rouge(const std::vector<std::string>& reference, const std::vector<std::string>& candidate,
             int n) {
  if (n < 0) throw std::invalid_argument("rouge: n must be >= 0");
  if (n == 0) {
    return f1(lcs_length(reference, candidate), static_cast<double>(reference.size()),
              static_cast<double>(candidate.size()));
  }
  auto ref = ngram_counts(reference, n);
  auto cand = ngram_counts(candidate, n);
  double n_ref = 0.0, n_cand = 0.0;
  for (const auto& [_, c] : ref) n_ref += c;
  for (const auto& [_, c] : cand) n_cand += c;
  return f1(clipped_matches(ref, cand), n_ref, n_cand);
}

// ---------------------------------------------------------------------------
// METEOR-lite

namespace {

std::string light_stem(const std::string& word) {
  static const char* suffixes[] = {"ing", "est", "ed", "es", "ly", "er", "s"};
  for (const char* suf : suffixes) {
    const std::size_t len = std::string_view(suf).size();
    if (word.size() > len + 2 && word.compare(word.size() - len, len, suf) == 0)
      return word.substr(0, word.size() - len);
  }
  return word;
}

struct AlignmentResult {
  int matches = 0;
  int chunks = 0;
};

// Find the maximum number of matchable (candidate, reference) pairs and,
// among maximum alignments, the fewest chunks. `can_match[i][j]` says whether
// candidate token i may align to reference token j. Exact search with a node
// budget; inputs here are sentence-sized.
class Aligner {
 public:
  explicit Aligner(const std::vector<std::vector<bool>>& can_match)
      : can_(can_match),
        n_cand_(can_match.size()),
        n_ref_(can_match.empty() ? 0 : can_match[0].size()) {}

  AlignmentResult run() {
    best_matches_ = kuhn_max_matching();
    if (best_matches_ == 0) return {0, 0};
    used_.assign(n_ref_, false);
    best_chunks_ = std::numeric_limits<int>::max();
    dfs(0, 0, 0, -2);
    return {best_matches_, best_chunks_};
  }

 private:
  int kuhn_max_matching() {
    std::vector<int> match_ref(n_ref_, -1);
    int total = 0;
    for (std::size_t i = 0; i < n_cand_; ++i) {
      std::vector<bool> visited(n_ref_, false);
      if (augment(i, visited, match_ref)) ++total;
    }
    return total;
  }

  bool augment(std::size_t i, std::vector<bool>& visited, std::vector<int>& match_ref) {
    for (std::size_t j = 0; j < n_ref_; ++j) {
      if (!can_[i][j] || visited[j]) continue;
      visited[j] = true;
      if (match_ref[j] < 0 ||
          augment(static_cast<std::size_t>(match_ref[j]), visited, match_ref)) {
        match_ref[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  }

  // Walk candidate positions in order; a new chunk starts whenever the pair
  // (i, j) does not directly extend the previous matched pair.
  void dfs(std::size_t i, int matched, int chunks, int prev_ref) {
    if (chunks >= best_chunks_) return;
    if (++nodes_ > kNodeBudget) return;
    if (i == n_cand_) {
      if (matched == best_matches_ && chunks < best_chunks_) best_chunks_ = chunks;
      return;
    }
    // Even matching every remaining token cannot reach the maximum: prune.
    if (matched + static_cast<int>(n_cand_ - i) < best_matches_) return;
    const bool extended_first = prev_ref >= -1 && prev_ref + 1 < static_cast<int>(n_ref_);
    // Prefer the continuation of the current run so good alignments are found
    // early and prune the rest of the search.
    if (extended_first && can_[i][prev_ref + 1] && !used_[prev_ref + 1]) {
      used_[prev_ref + 1] = true;
      dfs(i + 1, matched + 1, chunks, prev_ref + 1);
      used_[prev_ref + 1] = false;
    }
    for (std::size_t j = 0; j < n_ref_; ++j) {
      if (!can_[i][j] || used_[j]) continue;
      if (extended_first && static_cast<int>(j) == prev_ref + 1) continue;
      used_[j] = true;
      dfs(i + 1, matched + 1, chunks + 1, static_cast<int>(j));
      used_[j] = false;
    }
    dfs(i + 1, matched, chunks, -2);  // leave token i unmatched
  }

  static constexpr long kNodeBudget = 2000000;
  const std::vector<std::vector<bool>>& can_;
  std::size_t n_cand_;
  std::size_t n_ref_;
  std::vector<bool> used_;
  int best_matches_ = 0;
  int best_chunks_ = 0;
  long nodes_ = 0;
};

}  // namespace

double meteor_lite(const std::vector<std::string>& reference,
                   const std::vector<std::string>& candidate, const MeteorOptions& options) {
  if (reference.empty() || candidate.empty()) return 0.0;
  std::vector<std::vector<bool>> can(candidate.size(),
                                     std::vector<bool>(reference.size(), false));
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (candidate[i] == reference[j]) {
        can[i][j] = true;
        continue;
      }
      if (light_stem(candidate[i]) == light_stem(reference[j])) {
        can[i][j] = true;
        continue;
      }
      if (options.embeddings) {
        auto a = options.embeddings->lookup(candidate[i]);
        auto b = options.embeddings->lookup(reference[j]);
        if (a && b &&
            cosine(options.embeddings->vectors.row(*a).transpose(),
                   options.embeddings->vectors.row(*b).transpose()) >= options.min_synonym_cos)
          can[i][j] = true;
      }
    }
  }
  Aligner aligner(can);
  AlignmentResult aligned = aligner.run();
  if (aligned.matches == 0) return 0.0;
  const double m = aligned.matches;
  const double precision = m / static_cast<double>(candidate.size());
  const double recall = m / static_cast<double>(reference.size());
  const double f_mean =
      precision * recall / (options.alpha * precision + (1.0 - options.alpha) * recall);
  const double penalty =
      options.gamma * std::pow(static_cast<double>(aligned.chunks) / m, options.beta);
  return f_mean * (1.0 - penalty);
}

// ---------------------------------------------------------------------------

namespace {

template <typename Seq>
int levenshtein_impl(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

int levenshtein(std::string_view a, std::string_view b) { return levenshtein_impl(a, b); }

int levenshtein_tokens(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return levenshtein_impl(a, b);
}

CorrelationReport correlations(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("correlations: length mismatch");
  if (a.empty()) throw std::invalid_argument("correlations: empty input");
  CorrelationReport rep;
  rep.n = static_cast<int>(a.size());
  const double n = static_cast<double>(a.size());
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  rep.rmse = std::sqrt(se / n);

  auto pearson = [&](const std::vector<double>& x, const std::vector<double>& y,
                     bool& defined) -> double {
    const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mean_x) * (y[i] - mean_y);
      sxx += (x[i] - mean_x) * (x[i] - mean_x);
      syy += (y[i] - mean_y) * (y[i] - mean_y);
    }
    if (sxx == 0.0 || syy == 0.0) {
      defined = false;
      return 0.0;
    }
    defined = true;
    return sxy / std::sqrt(sxx * syy);
  };
  rep.pearson = pearson(a, b, rep.pearson_defined);

  auto ranks = [](const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> r(x.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  rep.spearman = pearson(ranks(a), ranks(b), rep.spearman_defined);
  return rep;
}

double binomial_two_sided(int successes, int trials, double p0) {
  if (trials < 0) throw std::invalid_argument("binomial_two_sided: negative trials");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("binomial_two_sided: successes out of range");
  if (!(p0 > 0.0 && p0 < 1.0))
    throw std::invalid_argument("binomial_two_sided: p0 must be in (0,1)");
  if (trials == 0) return 1.0;
  auto log_pmf = [&](int k) {
    return std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) +
           k * std::log(p0) + (trials - k) * std::log(1.0 - p0);
  };
  const double observed = log_pmf(successes);
  const double tol = 1e-9;
  double p = 0.0;
  for (int k = 0; k <= trials; ++k) {
    if (log_pmf(k) <= observed + tol) p += std::exp(log_pmf(k));
  }
  return std::min(1.0, p);
}

std::vector<MetricSummary> metric_suspicion_correlation(const std::vector<MetricPair>& pairs,
                                                        const std::vector<double>& scores,
                                                        const MeteorOptions& meteor_options) {
  if (pairs.size() != scores.size())
    throw std::invalid_argument("metric_suspicion_correlation: pairs/scores length mismatch");
  if (pairs.empty()) throw std::invalid_argument("metric_suspicion_correlation: no pairs");

  struct Column {
    std::string name;
    std::function<double(const MetricPair&)> eval;
  };
  const std::vector<Column> columns = {
      {"bleu",
       [&](const MetricPair& p) { return bleu(token_texts(p.original), token_texts(p.candidate)); }},
      {"rouge1",
       [&](const MetricPair& p) { return rouge(token_texts(p.original), token_texts(p.candidate), 1); }},
      {"rouge2",
       [&](const MetricPair& p) { return rouge(token_texts(p.original), token_texts(p.candidate), 2); }},
      {"rouge3",
       [&](const MetricPair& p) { return rouge(token_texts(p.original), token_texts(p.candidate), 3); }},
      {"rougeL",
       [&](const MetricPair& p) { return rouge(token_texts(p.original), token_texts(p.candidate), 0); }},
      {"meteor",
       [&](const MetricPair& p) {
         return meteor_lite(token_texts(p.original), token_texts(p.candidate), meteor_options);
       }},
      {"levenshtein",
       [&](const MetricPair& p) {
         return static_cast<double>(levenshtein(p.original, p.candidate));
       }},
  };

  std::vector<MetricSummary> out;
  for (const auto& col : columns) {
    MetricSummary row;
    row.metric = col.name;
    std::vector<double> values;
    values.reserve(pairs.size());
    std::map<Source, std::pair<double, int>> per_source;
    for (const auto& p : pairs) {
      const double v = col.eval(p);
      values.push_back(v);
      auto& acc = per_source[p.source];
      acc.first += v;
      ++acc.second;
    }
    row.mean_overall =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    for (const auto& [src, acc] : per_source)
      row.mean_per_source[src] = acc.first / static_cast<double>(acc.second);
    auto rep = correlations(values, scores);
    row.pearson_vs_scores = rep.pearson;
    row.pearson_defined = rep.pearson_defined;
    if (!rep.pearson_defined)
      warn("metric " + col.name + " is constant over the pairs; correlation undefined");
    out.push_back(std::move(row));
  }
  return out;
}

void export_metric_csv(const std::filesystem::path& path,
                       const std::vector<MetricSummary>& rows) {
  std::vector<Source> sources;
  for (const auto& row : rows)
    for (const auto& [src, _] : row.mean_per_source)
      if (std::find(sources.begin(), sources.end(), src) == sources.end()) sources.push_back(src);
  std::sort(sources.begin(), sources.end());
  std::ostringstream out;
  out << "metric";
  for (auto src : sources) out << ',' << to_string(src);
  out << ",overall,pearson_vs_suspicion\n";
  out.precision(6);
  for (const auto& row : rows) {
    out << row.metric;
    for (auto src : sources) {
      auto it = row.mean_per_source.find(src);
      out << ',';
      if (it != row.mean_per_source.end()) out << it->second;
    }
    out << ',' << row.mean_overall << ',';
    if (row.pearson_defined) out << row.pearson_vs_scores;
    else out << "undefined";
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace suskit
