#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "suskit/corpus.hpp"
#include "suskit/resources.hpp"

namespace suskit {

// Sentence BLEU with brevity penalty exp(1 - ref/cand) when the candidate is
// shorter. Unigram precision is raw; higher orders with no n-grams or no
// matches take add-1 smoothing on both counts. Empty candidate scores 0.
double bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate,
            int max_n = 4);

// ROUGE-N F1 over clipped n-gram counts; n = 0 selects ROUGE-L (LCS-based F1).
double rouge(const std::vector<std::string>& reference, const std::vector<std::string>& candidate,
             int n);

struct MeteorOptions {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
  double min_synonym_cos = 0.7;
  const EmbeddingTable* embeddings = nullptr;  // optional synonym stage
};

// Unigram alignment in three stages (exact, suffix stem, embedding synonym),
// maximizing matches then minimizing chunks; score = F_mean * (1 - penalty).
double meteor_lite(const std::vector<std::string>& reference,
                   const std::vector<std::string>& candidate, const MeteorOptions& options = {});

int levenshtein(std::string_view a, std::string_view b);
int levenshtein_tokens(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct CorrelationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  double rmse = 0.0;
  bool pearson_defined = false;   // false when either side has zero variance
  bool spearman_defined = false;
  int n = 0;
};

CorrelationReport correlations(const std::vector<double>& a, const std::vector<double>& b);

// Exact two-sided binomial test: the sum of P(k) over every k whose point
// probability does not exceed P(successes).
double binomial_two_sided(int successes, int trials, double p0 = 0.5);

struct MetricPair {
  std::string original;
  std::string candidate;
  Source source = Source::original;
};

struct MetricSummary {
  std::string metric;
  std::map<Source, double> mean_per_source;
  double mean_overall = 0.0;
  double pearson_vs_scores = 0.0;
  bool pearson_defined = false;
};

// One row per overlap metric: per-method means plus the Pearson correlation
// between the metric and the supplied suspicion scores (aligned with pairs).
std::vector<MetricSummary> metric_suspicion_correlation(const std::vector<MetricPair>& pairs,
                                                        const std::vector<double>& scores,
                                                        const MeteorOptions& meteor_options = {});

void export_metric_csv(const std::filesystem::path& path,
                       const std::vector<MetricSummary>& rows);

}  // namespace suskit
