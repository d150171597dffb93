#include "suskit/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "suskit/util.hpp"

namespace suskit {

using nlohmann::json;

std::string to_string(Source s) {
  switch (s) {
    case Source::original: return "original";
    case Source::pruthi: return "pruthi";
    case Source::alzantot: return "alzantot";
    case Source::textfooler: return "textfooler";
    case Source::bae: return "bae";
  }
  return "?";
}

std::string to_string(Condition c) {
  switch (c) {
    case Condition::main: return "main";
    case Condition::prevalence_informed: return "prevalence_informed";
    case Condition::non_mturk: return "non_mturk";
  }
  return "?";
}

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::single: return "single";
    case Aggregation::median: return "median";
    case Aggregation::mean: return "mean";
  }
  return "?";
}

std::optional<Source> source_from_string(const std::string& s) {
  if (s == "original") return Source::original;
  if (s == "pruthi") return Source::pruthi;
  if (s == "alzantot") return Source::alzantot;
  if (s == "textfooler") return Source::textfooler;
  if (s == "bae") return Source::bae;
  return std::nullopt;
}

std::optional<Condition> condition_from_string(const std::string& s) {
  if (s == "main") return Condition::main;
  if (s == "prevalence_informed") return Condition::prevalence_informed;
  if (s == "non_mturk") return Condition::non_mturk;
  return std::nullopt;
}

namespace {

[[noreturn]] void bad_row(std::size_t row, const std::string& why) {
  throw std::runtime_error("annotation file row " + std::to_string(row) + ": " + why);
}

std::string normalize_text(std::string_view raw) {
  // Collapse runs of whitespace; the canonical text form is single-spaced.
  std::string out;
  bool in_space = false;
  for (char c : raw) {
    bool sp = c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
    if (sp) {
      in_space = !out.empty();
      continue;
    }
    if (in_space) out += ' ';
    in_space = false;
    out += c;
  }
  return out;
}

}  // namespace

AnnotationData load_annotations(const std::filesystem::path& path, Condition condition) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t row = 0;
  AnnotationData data;
  std::unordered_map<std::string, std::size_t> record_index;
  std::unordered_set<std::string> annotation_keys;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 7) bad_row(row, "expected 7 tab-separated columns, got " +
                                           std::to_string(cols.size()));
    const std::string item_id = std::string(trim(cols[0]));
    const std::string text = normalize_text(cols[1]);
    const std::string source_str = std::string(trim(cols[2]));
    const std::string orig_str = std::string(trim(cols[3]));
    const std::string label_str = std::string(trim(cols[4]));
    const std::string annotator = std::string(trim(cols[5]));
    const std::string cond_str = std::string(trim(cols[6]));

    if (item_id.empty()) bad_row(row, "empty item_id");
    if (text.empty()) bad_row(row, "empty text");
    if (annotator.empty()) bad_row(row, "empty annotator_id");
    auto source = source_from_string(source_str);
    if (!source) bad_row(row, "unknown source '" + source_str + "'");
    auto cond = condition_from_string(cond_str);
    if (!cond) bad_row(row, "unknown condition '" + cond_str + "'");

    std::optional<std::string> original_id;
    if (orig_str != "-" && !orig_str.empty()) original_id = orig_str;
    if (*source == Source::original && original_id)
      bad_row(row, "original row carries an original_id");
    if (*source != Source::original && !original_id)
      bad_row(row, "adversarial row lacks an original_id");

    int label = 0;
    auto [p, ec] = std::from_chars(label_str.data(), label_str.data() + label_str.size(), label);
    if (ec != std::errc() || p != label_str.data() + label_str.size())
      bad_row(row, "label is not an integer: '" + label_str + "'");

    if (*cond != condition) continue;

    if (label < 1 || label > 5) {
      // Out-of-scale label: drop the row, keep the file.
      ++data.report.rejected_rows;
      continue;
    }

    std::string key = item_id + '\x1f' + annotator + '\x1f' + cond_str;
    if (!annotation_keys.insert(key).second)
      bad_row(row, "duplicate (item_id, annotator_id, condition)");

    auto it = record_index.find(item_id);
    if (it == record_index.end()) {
      record_index[item_id] = data.records.size();
      data.records.push_back({item_id, text, *source, original_id});
    } else {
      const SentenceRecord& prev = data.records[it->second];
      if (prev.text != text || prev.source != *source || prev.original_id != original_id)
        bad_row(row, "item '" + item_id + "' disagrees with an earlier row");
    }
    data.annotations.push_back({item_id, label, annotator, *cond});
    ++data.report.annotations_per_source[*source];
    ++data.report.total_annotations;
  }
  if (data.annotations.empty())
    throw std::runtime_error("annotation file has no records for condition " +
                             to_string(condition) + ": " + path.string());
  data.report.distinct_items = static_cast<std::int64_t>(data.records.size());
  return data;
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<SentenceRecord>& records,
                      const std::vector<AnnotationRecord>& annotations) {
  std::unordered_map<std::string, const SentenceRecord*> by_id;
  for (const auto& r : records) by_id[r.item_id] = &r;
  std::ostringstream out;
  for (const auto& a : annotations) {
    auto it = by_id.find(a.item_id);
    if (it == by_id.end())
      throw std::invalid_argument("save_annotations: annotation for unknown item " + a.item_id);
    const SentenceRecord& r = *it->second;
    out << r.item_id << '\t' << r.text << '\t' << to_string(r.source) << '\t'
        << (r.original_id ? *r.original_id : "-") << '\t' << a.label << '\t' << a.annotator_id
        << '\t' << to_string(a.condition) << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<MorrisItem> load_morris(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t row = 0;
  std::vector<MorrisItem> items;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 5)
      throw std::runtime_error("detector file row " + std::to_string(row) +
                               ": expected 5 columns");
    MorrisItem item;
    item.item_id = std::string(trim(cols[0]));
    item.text = normalize_text(cols[1]);
    auto source = source_from_string(std::string(trim(cols[2])));
    if (!source)
      throw std::runtime_error("detector file row " + std::to_string(row) + ": unknown source");
    item.source = *source;
    try {
      item.votes_computer = std::stoi(std::string(trim(cols[3])));
      item.votes_total = std::stoi(std::string(trim(cols[4])));
    } catch (const std::exception&) {
      throw std::runtime_error("detector file row " + std::to_string(row) + ": bad vote counts");
    }
    if (item.votes_total <= 0 || item.votes_computer < 0 ||
        item.votes_computer > item.votes_total)
      throw std::runtime_error("detector file row " + std::to_string(row) +
                               ": votes out of range");
    if (item.item_id.empty() || item.text.empty())
      throw std::runtime_error("detector file row " + std::to_string(row) + ": empty field");
    if (!seen.insert(item.item_id).second)
      throw std::runtime_error("detector file row " + std::to_string(row) +
                               ": duplicate item_id");
    items.push_back(std::move(item));
  }
  if (items.empty()) throw std::runtime_error("detector file has no records: " + path.string());
  return items;
}

void save_morris(const std::filesystem::path& path, const std::vector<MorrisItem>& items) {
  std::ostringstream out;
  for (const auto& m : items)
    out << m.item_id << '\t' << m.text << '\t' << to_string(m.source) << '\t' << m.votes_computer
        << '\t' << m.votes_total << '\n';
  write_text_file(path, out.str());
}

std::vector<ScoredItem> consolidate(const std::vector<AnnotationRecord>& annotations,
                                    Aggregation aggregation) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<int>> labels;
  for (const auto& a : annotations) {
    auto& v = labels[a.item_id];
    if (v.empty()) order.push_back(a.item_id);
    v.push_back(a.label);
  }
  std::vector<ScoredItem> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto v = labels[id];
    ScoredItem item;
    item.item_id = id;
    item.n_annotations = static_cast<int>(v.size());
    if (v.size() == 1) {
      item.score = v[0];
      item.aggregation = Aggregation::single;
      out.push_back(item);
      continue;
    }
    switch (aggregation) {
      case Aggregation::single:
        throw std::invalid_argument("consolidate: item " + id + " has " +
                                    std::to_string(v.size()) +
                                    " annotations but single aggregation was requested");
      case Aggregation::median: {
        std::sort(v.begin(), v.end());
        // Lower median on even counts.
        item.score = v[(v.size() - 1) / 2];
        item.aggregation = Aggregation::median;
        break;
      }
      case Aggregation::mean: {
        item.score = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        item.aggregation = Aggregation::mean;
        break;
      }
    }
    out.push_back(item);
  }
  return out;
}

DatasetSplit make_split(const std::vector<std::string>& ids, double train_fraction,
                        double dev_fraction, std::uint64_t seed,
                        std::vector<std::string> test_ids) {
  if (ids.size() < 3) throw std::invalid_argument("make_split: need at least 3 ids");
  if (train_fraction <= 0.0 || dev_fraction < 0.0 || train_fraction + dev_fraction > 1.0 + 1e-12)
    throw std::invalid_argument("make_split: fractions must be positive and sum to at most 1");
  {
    std::unordered_set<std::string> uniq(ids.begin(), ids.end());
    if (uniq.size() != ids.size()) throw std::invalid_argument("make_split: duplicate ids");
    for (const auto& t : test_ids)
      if (uniq.count(t)) throw std::invalid_argument("make_split: test id also in pool: " + t);
  }
  DatasetSplit split;
  split.seed = seed;
  std::vector<std::string> shuffled = ids;
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(shuffled.size())));
  split.train.assign(shuffled.begin(), shuffled.begin() + n_train);
  split.dev.assign(shuffled.begin() + n_train, shuffled.end());
  split.test = std::move(test_ids);
  return split;
}

DatasetSplit load_split(const std::filesystem::path& path) {
  json j = json::parse(read_text_file(path));
  DatasetSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train = j.at("train").get<std::vector<std::string>>();
  s.dev = j.at("dev").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

void save_split(const std::filesystem::path& path, const DatasetSplit& split) {
  json j;
  j["seed"] = split.seed;
  j["train"] = split.train;
  j["dev"] = split.dev;
  j["test"] = split.test;
  write_text_file(path, j.dump(2) + "\n");
}

std::map<std::string, std::map<Source, SentenceRecord>> pair_variants(
    const std::vector<SentenceRecord>& records) {
  std::unordered_set<std::string> ids;
  for (const auto& r : records) ids.insert(r.item_id);
  std::vector<std::string> dangling;
  std::map<std::string, std::map<Source, SentenceRecord>> groups;
  for (const auto& r : records) {
    const std::string& key = r.original_id ? *r.original_id : r.item_id;
    if (r.original_id && !ids.count(*r.original_id)) {
      dangling.push_back(r.item_id + "->" + *r.original_id);
      continue;
    }
    auto [it, inserted] = groups[key].emplace(r.source, r);
    if (!inserted)
      throw std::runtime_error("pair_variants: duplicate source " + to_string(r.source) +
                               " in group " + key);
  }
  if (!dangling.empty()) {
    std::string msg = "pair_variants: unresolved original ids:";
    for (const auto& d : dangling) msg += ' ' + d;
    throw std::runtime_error(msg);
  }
  return groups;
}

}  // namespace suskit
