#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace suskit {

enum class Source { original, pruthi, alzantot, textfooler, bae };
enum class Condition { main, prevalence_informed, non_mturk };
enum class Aggregation { single, median, mean };

std::string to_string(Source s);
std::string to_string(Condition c);
std::string to_string(Aggregation a);
std::optional<Source> source_from_string(const std::string& s);
std::optional<Condition> condition_from_string(const std::string& s);

// One distinct sentence shown to annotators. Adversarial sentences carry the
// id of the sentence they were derived from; originals carry none.
struct SentenceRecord {
  std::string item_id;
  std::string text;
  Source source = Source::original;
  std::optional<std::string> original_id;
};

struct AnnotationRecord {
  std::string item_id;
  int label = 0;  // 1..5
  std::string annotator_id;
  Condition condition = Condition::main;
};

struct ScoredItem {
  std::string item_id;
  double score = 0.0;
  int n_annotations = 0;
  Aggregation aggregation = Aggregation::single;
};

// Detector-style dataset: per sentence, how many of `votes_total` annotators
// called it computer-altered. score = votes_computer / votes_total.
struct MorrisItem {
  std::string item_id;
  std::string text;
  Source source = Source::original;
  int votes_computer = 0;
  int votes_total = 0;

  double score() const { return static_cast<double>(votes_computer) / votes_total; }
};

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
};

struct LoadReport {
  std::map<Source, std::int64_t> annotations_per_source;
  std::int64_t total_annotations = 0;
  std::int64_t distinct_items = 0;
  std::int64_t rejected_rows = 0;
};

struct AnnotationData {
  std::vector<SentenceRecord> records;  // in order of first appearance
  std::vector<AnnotationRecord> annotations;
  LoadReport report;
};

// TSV columns:
//   item_id  text  source  original_id  label  annotator_id  condition
// original_id is "-" for originals. Rows whose label parses but falls outside
// 1..5 are dropped (counted in the report); any other malformation fails the
// whole file with its row number. Only rows matching `condition` are kept.
AnnotationData load_annotations(const std::filesystem::path& path, Condition condition);
void save_annotations(const std::filesystem::path& path, const std::vector<SentenceRecord>& records,
                      const std::vector<AnnotationRecord>& annotations);

// TSV columns: item_id  text  source  votes_computer  votes_total
std::vector<MorrisItem> load_morris(const std::filesystem::path& path);
void save_morris(const std::filesystem::path& path, const std::vector<MorrisItem>& items);

// Collapse annotations per item. For `median` an even label count takes the
// lower median. Items with a single annotation are marked Aggregation::single
// whatever mode was requested; `single` mode itself rejects multi-annotated
// items.
std::vector<ScoredItem> consolidate(const std::vector<AnnotationRecord>& annotations,
                                    Aggregation aggregation);

// Seeded shuffle, then train = floor(train_fraction * N) and dev = the rest.
// Test ids, when they exist, are held outside and passed through untouched.
DatasetSplit make_split(const std::vector<std::string>& ids, double train_fraction,
                        double dev_fraction, std::uint64_t seed,
                        std::vector<std::string> test_ids = {});

DatasetSplit load_split(const std::filesystem::path& path);
void save_split(const std::filesystem::path& path, const DatasetSplit& split);

// Group records by the original sentence they descend from; the original
// itself is part of its group. Unknown original ids fail loudly.
std::map<std::string, std::map<Source, SentenceRecord>> pair_variants(
    const std::vector<SentenceRecord>& records);

}  // namespace suskit
