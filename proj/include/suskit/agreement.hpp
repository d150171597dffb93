#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "suskit/corpus.hpp"

namespace suskit {

// Per-item disagreement: delta_i = sum_c |median - label_c| / C, with the
// lower median on even C. On a 5-point scale with 3 annotators the numerator
// C*delta_i is an integer in 0..4.
double item_disagreement(const std::vector<int>& labels);

struct DisagreementReport {
  std::string group;
  double delta = 0.0;                  // mean of delta_i
  std::vector<int> numerator_freq;     // count of items per integer C*delta_i
  int n_items = 0;
  int n_annotators = 0;                // labels per item (uniform within a group)
};

// `label_sets` holds one label list per item; every list needs >= 2 labels
// and all lists must be the same size.
DisagreementReport average_disagreement(const std::vector<std::vector<int>>& label_sets,
                                        const std::string& group = "overall");

struct HistogramRow {
  std::vector<std::int64_t> counts;  // index 0 -> score 1, ... index 4 -> score 5
  double mean = 0.0;
  std::int64_t total = 0;
};

// Rows: total, original, adversarial, then one per attack method present.
// Scores must be whole numbers (median/single consolidation guarantees that).
struct LikertHistogram {
  HistogramRow total;
  HistogramRow original;
  HistogramRow adversarial;
  std::map<Source, HistogramRow> per_source;
};

LikertHistogram histogram_and_means(const std::vector<ScoredItem>& scored,
                                    const std::vector<SentenceRecord>& records);

enum class BinarizationRule {
  symmetry,      // human = {1,2}, computer = {4,5}, 3 excluded
  one_vs_other,  // human = {1},  computer = {2,3,4,5}
};

struct BinarySplit {
  std::int64_t human = 0;
  std::int64_t computer = 0;
  std::int64_t excluded = 0;
  double human_fraction = 0.0;     // of all items, excluded included
  double computer_fraction = 0.0;
};

BinarySplit binarize(const std::vector<ScoredItem>& scored, BinarizationRule rule);

// CSV exports; means and deltas are printed to two decimals, counts raw.
void export_histogram_csv(const std::filesystem::path& path, const LikertHistogram& hist);
void export_disagreement_csv(const std::filesystem::path& path,
                             const std::vector<DisagreementReport>& reports);
void export_binarize_csv(const std::filesystem::path& path,
                         const std::map<std::string, std::pair<BinarySplit, BinarySplit>>& rows);

// Convenience: group multi-annotated items by source and report each group
// plus the overall pool. Items with one annotation are ignored.
std::vector<DisagreementReport> disagreement_by_source(
    const std::vector<AnnotationRecord>& annotations, const std::vector<SentenceRecord>& records);

}  // namespace suskit
