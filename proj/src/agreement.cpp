#include "suskit/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "suskit/util.hpp"

namespace suskit {

double item_disagreement(const std::vector<int>& labels) {
  if (labels.size() < 2)
    throw std::invalid_argument("item_disagreement: need at least 2 labels");
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  const int median = sorted[(sorted.size() - 1) / 2];
  int numerator = 0;
  for (int l : sorted) numerator += std::abs(median - l);
  return static_cast<double>(numerator) / static_cast<double>(sorted.size());
}

DisagreementReport average_disagreement(const std::vector<std::vector<int>>& label_sets,
                                        const std::string& group) {
  if (label_sets.empty())
    throw std::invalid_argument("average_disagreement: no items in group " + group);
  DisagreementReport report;
  report.group = group;
  report.n_items = static_cast<int>(label_sets.size());
  report.n_annotators = static_cast<int>(label_sets.front().size());
  double sum = 0.0;
  for (const auto& labels : label_sets) {
    if (static_cast<int>(labels.size()) != report.n_annotators)
      throw std::invalid_argument("average_disagreement: ragged label counts in group " + group);
    double d = item_disagreement(labels);
    sum += d;
    const int numerator = static_cast<int>(std::lround(d * report.n_annotators));
    if (numerator >= static_cast<int>(report.numerator_freq.size()))
      report.numerator_freq.resize(numerator + 1, 0);
    ++report.numerator_freq[numerator];
  }
  report.delta = sum / static_cast<double>(report.n_items);
  return report;
}

namespace {

void accumulate(HistogramRow& row, int score) {
  if (row.counts.empty()) row.counts.assign(5, 0);
  ++row.counts[score - 1];
  ++row.total;
}

void finish(HistogramRow& row) {
  if (row.counts.empty()) row.counts.assign(5, 0);
  if (row.total == 0) return;
  double weighted = 0.0;
  for (int s = 1; s <= 5; ++s) weighted += s * static_cast<double>(row.counts[s - 1]);
  row.mean = weighted / static_cast<double>(row.total);
}

int whole_score(const ScoredItem& item) {
  const double r = std::round(item.score);
  if (std::abs(item.score - r) > 1e-9 || r < 1.0 || r > 5.0)
    throw std::invalid_argument("histogram_and_means: item " + item.item_id +
                                " has non-Likert score " + std::to_string(item.score));
  return static_cast<int>(r);
}

}  // namespace

LikertHistogram histogram_and_means(const std::vector<ScoredItem>& scored,
                                    const std::vector<SentenceRecord>& records) {
  std::unordered_map<std::string, Source> source_of;
  for (const auto& r : records) source_of[r.item_id] = r.source;
  LikertHistogram hist;
  for (const auto& item : scored) {
    auto it = source_of.find(item.item_id);
    if (it == source_of.end())
      throw std::invalid_argument("histogram_and_means: no record for item " + item.item_id);
    const int score = whole_score(item);
    accumulate(hist.total, score);
    if (it->second == Source::original) accumulate(hist.original, score);
    else accumulate(hist.adversarial, score);
    accumulate(hist.per_source[it->second], score);
  }
  finish(hist.total);
  finish(hist.original);
  finish(hist.adversarial);
  for (auto& [_, row] : hist.per_source) finish(row);
  return hist;
}

BinarySplit binarize(const std::vector<ScoredItem>& scored, BinarizationRule rule) {
  BinarySplit out;
  for (const auto& item : scored) {
    const int s = whole_score(item);
    switch (rule) {
      case BinarizationRule::symmetry:
        if (s <= 2) ++out.human;
        else if (s >= 4) ++out.computer;
        else ++out.excluded;
        break;
      case BinarizationRule::one_vs_other:
        if (s == 1) ++out.human;
        else ++out.computer;
        break;
    }
  }
  const double n = static_cast<double>(scored.size());
  if (n > 0) {
    out.human_fraction = static_cast<double>(out.human) / n;
    out.computer_fraction = static_cast<double>(out.computer) / n;
  }
  return out;
}

std::vector<DisagreementReport> disagreement_by_source(
    const std::vector<AnnotationRecord>& annotations,
    const std::vector<SentenceRecord>& records) {
  std::unordered_map<std::string, Source> source_of;
  for (const auto& r : records) source_of[r.item_id] = r.source;
  std::unordered_map<std::string, std::vector<int>> labels;
  std::vector<std::string> order;
  for (const auto& a : annotations) {
    auto& v = labels[a.item_id];
    if (v.empty()) order.push_back(a.item_id);
    v.push_back(a.label);
  }
  std::vector<std::vector<int>> overall;
  std::map<Source, std::vector<std::vector<int>>> grouped;
  for (const auto& id : order) {
    const auto& v = labels[id];
    if (v.size() < 2) continue;
    auto it = source_of.find(id);
    if (it == source_of.end())
      throw std::invalid_argument("disagreement_by_source: no record for item " + id);
    overall.push_back(v);
    grouped[it->second].push_back(v);
  }
  std::vector<DisagreementReport> reports;
  if (overall.empty()) return reports;
  reports.push_back(average_disagreement(overall, "overall"));
  for (const auto& [src, sets] : grouped)
    reports.push_back(average_disagreement(sets, to_string(src)));
  return reports;
}

namespace {

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void histogram_row(std::ostringstream& out, const std::string& name, const HistogramRow& row) {
  out << name;
  for (int s = 0; s < 5; ++s) out << ',' << row.counts[s];
  out << ',' << two_decimals(row.mean) << ',' << row.total << '\n';
}

}  // namespace

void export_histogram_csv(const std::filesystem::path& path, const LikertHistogram& hist) {
  std::ostringstream out;
  out << "group,s1,s2,s3,s4,s5,mean,total\n";
  histogram_row(out, "total", hist.total);
  histogram_row(out, "original", hist.original);
  histogram_row(out, "adversarial", hist.adversarial);
  for (const auto& [src, row] : hist.per_source) {
    if (src == Source::original) continue;
    histogram_row(out, to_string(src), row);
  }
  write_text_file(path, out.str());
}

void export_disagreement_csv(const std::filesystem::path& path,
                             const std::vector<DisagreementReport>& reports) {
  std::size_t max_numerator = 0;
  for (const auto& r : reports) max_numerator = std::max(max_numerator, r.numerator_freq.size());
  std::ostringstream out;
  out << "group,delta,n_items";
  for (std::size_t i = 0; i < max_numerator; ++i) out << ",c" << i;
  out << '\n';
  for (const auto& r : reports) {
    out << csv_escape(r.group) << ',' << two_decimals(r.delta) << ',' << r.n_items;
    for (std::size_t i = 0; i < max_numerator; ++i)
      out << ',' << (i < r.numerator_freq.size() ? r.numerator_freq[i] : 0);
    out << '\n';
  }
  write_text_file(path, out.str());
}

void export_binarize_csv(const std::filesystem::path& path,
                         const std::map<std::string, std::pair<BinarySplit, BinarySplit>>& rows) {
  std::ostringstream out;
  out << "group,symmetry_human,symmetry_computer,one_vs_other_human,one_vs_other_computer\n";
  for (const auto& [group, splits] : rows) {
    out << csv_escape(group) << ',' << two_decimals(splits.first.human_fraction) << ','
        << two_decimals(splits.first.computer_fraction) << ','
        << two_decimals(splits.second.human_fraction) << ','
        << two_decimals(splits.second.computer_fraction) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace suskit
