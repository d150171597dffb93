#include "suskit/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "suskit/agreement.hpp"
#include "suskit/attacks.hpp"
#include "suskit/corpus.hpp"
#include "suskit/features.hpp"
#include "suskit/llm_client.hpp"
#include "suskit/metrics.hpp"
#include "suskit/regressor.hpp"
#include "suskit/resources.hpp"
#include "suskit/sampledata.hpp"
#include "suskit/susgen.hpp"
#include "suskit/util.hpp"
#include "suskit/victim.hpp"

namespace suskit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Provenance record dropped next to every subcommand's outputs. The timestamp
// lives here and nowhere else, so the data files stay byte-reproducible.
struct Manifest {
  std::string command;
  std::string options;  // resolved flag values, INI style
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::object();

  void add_input(const fs::path& p) { inputs[p.string()] = digest_hex(read_text_file(p)); }
  void add_output(const fs::path& p) { outputs[p.filename().string()] = digest_hex(read_text_file(p)); }

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["options"] = options;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["timestamp"] = utc_now();
    write_text_file(dir / "manifest.json", j.dump(2) + "\n");
  }
};

fs::path prep_out_dir(const std::string& out) {
  if (out.empty()) throw std::invalid_argument("--out is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

Condition parse_condition(const std::string& s) {
  auto c = condition_from_string(s);
  if (!c) throw std::invalid_argument("unknown condition: " + s);
  return *c;
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& body) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int k = std::min<int>(workers, static_cast<int>(n));
  pool.reserve(k);
  for (int t = 0; t < k; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// shared flag bundles

struct ResourcePaths {
  std::string embeddings;
  std::string pos_lexicon;
  std::string idf;
  std::string ngram;
};

void add_resource_flags(CLI::App* sub, ResourcePaths& r) {
  sub->add_option("--embeddings", r.embeddings, "word embedding table (TSV)")
      ->check(CLI::ExistingFile);
  sub->add_option("--pos-lexicon", r.pos_lexicon, "part-of-speech lexicon (TSV)")
      ->check(CLI::ExistingFile);
  sub->add_option("--idf", r.idf, "inverse document frequency table (TSV)")
      ->check(CLI::ExistingFile);
  sub->add_option("--ngram", r.ngram, "token bigram language model")->check(CLI::ExistingFile);
}

struct LoadedResources {
  std::optional<EmbeddingTable> embeddings;
  std::optional<PosLexicon> pos_lexicon;
  std::optional<IdfTable> idf;
  std::optional<NgramModel> ngram;
  KeyboardLayout keyboard = KeyboardLayout::qwerty();
};

LoadedResources load_resources(const ResourcePaths& p, Manifest& m) {
  LoadedResources out;
  if (!p.embeddings.empty()) {
    out.embeddings = EmbeddingTable::load(p.embeddings);
    m.add_input(p.embeddings);
  }
  if (!p.pos_lexicon.empty()) {
    out.pos_lexicon = PosLexicon::load(p.pos_lexicon);
    m.add_input(p.pos_lexicon);
  }
  if (!p.idf.empty()) {
    out.idf = IdfTable::load(p.idf);
    m.add_input(p.idf);
  }
  if (!p.ngram.empty()) {
    out.ngram = NgramModel::load(p.ngram);
    m.add_input(p.ngram);
  }
  return out;
}

AttackResources attack_view(const LoadedResources& r) {
  AttackResources v;
  v.embeddings = r.embeddings ? &*r.embeddings : nullptr;
  v.pos_lexicon = r.pos_lexicon ? &*r.pos_lexicon : nullptr;
  v.idf = r.idf ? &*r.idf : nullptr;
  v.ngram = r.ngram ? &*r.ngram : nullptr;
  v.keyboard = &r.keyboard;
  return v;
}

FeatureResources feature_view(const LoadedResources& r, double anomaly_floor, int lid_k) {
  FeatureResources v;
  v.embeddings = r.embeddings ? &*r.embeddings : nullptr;
  v.idf = r.idf ? &*r.idf : nullptr;
  v.pos_lexicon = r.pos_lexicon ? &*r.pos_lexicon : nullptr;
  v.ngram = r.ngram ? &*r.ngram : nullptr;
  v.anomaly_floor = anomaly_floor;
  v.lid_k = lid_k;
  return v;
}

struct AttackFlags {
  std::string method = "textfooler";
  AttackConfig cfg;
};

void add_attack_flags(CLI::App* sub, AttackFlags& a) {
  sub->add_option("--method", a.method, "attack strategy")
      ->check(CLI::IsMember({"pruthi", "alzantot", "textfooler", "bae"}));
  sub->add_option("--budget", a.cfg.query_budget, "victim query budget per record");
  sub->add_option("--max-perturb-fraction", a.cfg.max_perturb_fraction);
  sub->add_option("--min-word-cos", a.cfg.min_word_cos);
  sub->add_option("--min-sentence-cos", a.cfg.min_sentence_cos);
  sub->add_option("--k-candidates", a.cfg.k_candidates);
  sub->add_option("--population", a.cfg.population);
  sub->add_option("--generations", a.cfg.generations);
  sub->add_option("--min-perturb-fraction", a.cfg.min_perturb_fraction,
                  "floor on the substituted-word fraction (population search)");
  sub->add_option("--min-context-log-prob", a.cfg.min_context_log_prob,
                  "language-model floor for substitution candidates");
}

AttackConfig resolve_attack_config(const AttackFlags& a, std::uint64_t seed) {
  AttackConfig cfg = a.cfg;
  cfg.method = attack_method_from_string(a.method);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

json summary_json(const AttackSummary& s) {
  json j;
  j["attempts"] = s.attempts;
  j["successes"] = s.successes;
  j["skipped"] = s.skipped;
  j["success_rate"] = s.success_rate;
  j["mean_queries"] = s.mean_queries;
  j["mean_perturbation_rate"] = s.mean_perturbation_rate;
  return j;
}

LlmScoreFn mock_llm_fn(const std::string& mock_path) {
  if (mock_path.empty()) return {};
  auto cfg = std::make_shared<LlmConfig>();
  cfg->mock = true;
  cfg->mock_responses = mock_path;
  cfg->validate();
  return [cfg](const std::string& text) -> std::optional<double> {
    try {
      return static_cast<double>(score_text(text, *cfg).score);
    } catch (const std::exception& e) {
      warn(std::string("llm scoring failed: ") + e.what());
      return std::nullopt;
    }
  };
}

// ---------------------------------------------------------------------------
// make-sample-data

struct SampleOpts {
  std::string out;
  std::uint64_t seed = 11;
};

int run_make_sample_data(const SampleOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  SampleDataPaths paths = write_sample_data(dir, o.seed);
  Manifest m;
  m.command = "make-sample-data";
  m.options = ini;
  m.seed = o.seed;
  for (const fs::path* p :
       {&paths.annotations_main, &paths.annotations_prevalence, &paths.annotations_nonmturk,
        &paths.morris, &paths.corpus, &paths.embeddings, &paths.pos_lexicon, &paths.ngram,
        &paths.idf, &paths.llm_mock, &paths.trials}) {
    m.add_output(*p);
  }
  m.write(dir);
  std::cout << "sample data written to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOpts {
  std::string annotations;
  std::string condition = "main";
  std::string morris;
  std::string out;
};

int run_ingest(const IngestOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "ingest";
  m.options = ini;
  json report;

  AnnotationData data = load_annotations(o.annotations, parse_condition(o.condition));
  m.add_input(o.annotations);
  save_annotations(dir / "canonical.tsv", data.records, data.annotations);
  m.add_output(dir / "canonical.tsv");
  json per = json::object();
  for (const auto& [src, n] : data.report.annotations_per_source) per[to_string(src)] = n;
  report["annotations"] = {{"condition", o.condition},
                           {"per_source", per},
                           {"total_annotations", data.report.total_annotations},
                           {"distinct_items", data.report.distinct_items},
                           {"rejected_rows", data.report.rejected_rows}};

  if (!o.morris.empty()) {
    std::vector<MorrisItem> items = load_morris(o.morris);
    m.add_input(o.morris);
    save_morris(dir / "canonical_morris.tsv", items);
    m.add_output(dir / "canonical_morris.tsv");
    double mean = 0.0;
    for (const auto& it : items) mean += it.score();
    if (!items.empty()) mean /= static_cast<double>(items.size());
    report["morris"] = {{"items", items.size()}, {"mean_score", mean}};
  }

  write_text_file(dir / "report.json", report.dump(2) + "\n");
  m.add_output(dir / "report.json");
  m.write(dir);
  std::cout << "ingested " << data.report.total_annotations << " annotations over "
            << data.report.distinct_items << " items (" << data.report.rejected_rows
            << " rows rejected)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-victim

struct TrainVictimOpts {
  std::string corpus;
  std::string out;
  double lambda = 0.01;
  double holdout = 0.0;
  std::uint64_t seed = 11;
};

int run_train_victim(const TrainVictimOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "train-victim";
  m.options = ini;
  m.seed = o.seed;

  std::vector<LabeledText> rows = load_labeled_corpus(o.corpus);
  m.add_input(o.corpus);

  std::vector<LabeledText> train_rows;
  std::vector<LabeledText> held_rows;
  if (o.holdout > 0.0) {
    if (o.holdout >= 1.0) throw std::invalid_argument("--holdout must be below 1");
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (const auto& r : rows) ids.push_back(r.item_id);
    DatasetSplit split = make_split(ids, 1.0 - o.holdout, o.holdout, o.seed);
    std::unordered_set<std::string> held(split.dev.begin(), split.dev.end());
    for (const auto& r : rows) (held.count(r.item_id) ? held_rows : train_rows).push_back(r);
  } else {
    train_rows = rows;
  }

  VictimModel model = VictimModel::train(train_rows, o.lambda, o.seed);
  model.save(dir / "victim.json");
  m.add_output(dir / "victim.json");
  if (!held_rows.empty()) {
    // Downstream commands re-attach training rows by digest, so the exact
    // subset this model saw has to be available somewhere.
    save_labeled_corpus(dir / "train_corpus.tsv", train_rows);
    m.add_output(dir / "train_corpus.tsv");
  }

  json report;
  report["lambda"] = o.lambda;
  report["n_train"] = train_rows.size();
  report["train_accuracy"] = model.accuracy(train_rows);
  if (!held_rows.empty()) {
    report["n_holdout"] = held_rows.size();
    report["holdout_accuracy"] = model.accuracy(held_rows);
  }
  write_text_file(dir / "report.json", report.dump(2) + "\n");
  m.add_output(dir / "report.json");
  m.write(dir);

  std::cout << "victim trained on " << train_rows.size() << " rows, train accuracy "
            << report["train_accuracy"].get<double>();
  if (!held_rows.empty())
    std::cout << ", holdout accuracy " << report["holdout_accuracy"].get<double>();
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// attack

struct AttackOpts {
  std::string corpus;
  std::string victim;
  std::string out;
  ResourcePaths res;
  AttackFlags atk;
  int workers = 1;
  std::uint64_t seed = 11;
};

int run_attack_cmd(const AttackOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "attack";
  m.options = ini;
  m.seed = o.seed;

  VictimModel model = VictimModel::load(o.victim);
  m.add_input(o.victim);
  std::vector<LabeledText> records = load_labeled_corpus(o.corpus);
  m.add_input(o.corpus);
  LoadedResources lr = load_resources(o.res, m);
  AttackResources ares = attack_view(lr);
  AttackConfig cfg = resolve_attack_config(o.atk, o.seed);

  AttackRun run = run_attack(model, records, cfg, ares, o.workers);
  save_outcomes(dir / "outcomes.jsonl", run.outcomes);
  m.add_output(dir / "outcomes.jsonl");

  json summary = summary_json(run.summary);
  summary["method"] = o.atk.method;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  m.add_output(dir / "summary.json");
  m.write(dir);

  std::cout << o.atk.method << ": " << run.summary.successes << "/" << run.summary.attempts
            << " records flipped (" << run.summary.skipped << " skipped), mean queries "
            << run.summary.mean_queries << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// extract-features

struct ExtractOpts {
  std::string annotations;
  std::string condition = "main";
  std::string outcomes;
  std::string corpus;
  std::string victim;
  std::string train_corpus;
  ResourcePaths res;
  double anomaly_floor = -8.0;
  int lid_k = 20;
  std::string llm_mock;
  int workers = 1;
  std::string out;
};

struct ExtractJob {
  std::string id;
  std::string text;
  std::optional<std::string> original;
};

int run_extract_features(const ExtractOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "extract-features";
  m.options = ini;

  std::vector<ExtractJob> jobs;
  if (!o.annotations.empty()) {
    if (!o.outcomes.empty())
      throw std::invalid_argument("--annotations and --outcomes are mutually exclusive");
    AnnotationData data = load_annotations(o.annotations, parse_condition(o.condition));
    m.add_input(o.annotations);
    std::unordered_map<std::string, std::string> text_of;
    for (const auto& r : data.records) text_of[r.item_id] = r.text;
    for (const auto& r : data.records) {
      ExtractJob job;
      job.id = r.item_id;
      job.text = r.text;
      if (r.original_id) {
        auto it = text_of.find(*r.original_id);
        if (it == text_of.end())
          throw std::runtime_error("unknown original id: " + *r.original_id);
        job.original = it->second;
      }
      jobs.push_back(std::move(job));
    }
  } else if (!o.outcomes.empty()) {
    if (o.corpus.empty())
      throw std::invalid_argument("--outcomes needs --corpus for the original texts");
    std::vector<AttackOutcome> outcomes = load_outcomes(o.outcomes);
    m.add_input(o.outcomes);
    std::vector<LabeledText> rows = load_labeled_corpus(o.corpus);
    m.add_input(o.corpus);
    std::unordered_map<std::string, std::string> text_of;
    for (const auto& r : rows) text_of[r.item_id] = r.text;
    for (const auto& oc : outcomes) {
      auto it = text_of.find(oc.original_id);
      if (it == text_of.end())
        throw std::runtime_error("outcome references unknown record: " + oc.original_id);
      jobs.push_back({oc.original_id, oc.perturbed_text, it->second});
    }
  } else if (!o.corpus.empty()) {
    std::vector<LabeledText> rows = load_labeled_corpus(o.corpus);
    m.add_input(o.corpus);
    for (const auto& r : rows) jobs.push_back({r.item_id, r.text, std::nullopt});
  } else {
    throw std::invalid_argument("one of --annotations, --outcomes, --corpus is required");
  }

  VictimModel model = VictimModel::load(o.victim);
  m.add_input(o.victim);
  if (!o.train_corpus.empty()) {
    model.attach_training_data(load_labeled_corpus(o.train_corpus));
    m.add_input(o.train_corpus);
  }
  LoadedResources lr = load_resources(o.res, m);
  FeatureResources fres = feature_view(lr, o.anomaly_floor, o.lid_k);
  LlmScoreFn llm = mock_llm_fn(o.llm_mock);
  if (!o.llm_mock.empty()) m.add_input(o.llm_mock);

  std::vector<std::string> ids(jobs.size());
  std::vector<SuspicionFeatureVector> rows(jobs.size());
  parallel_for(jobs.size(), o.workers, [&](std::size_t i) {
    ids[i] = jobs[i].id;
    rows[i] = extract(jobs[i].text, jobs[i].original, model, fres, llm);
  });

  FeatureTable table = to_feature_table(ids, rows);
  export_features_csv(dir / "features.csv", table);
  m.add_output(dir / "features.csv");
  m.write(dir);

  std::cout << "extracted " << table.ids.size() << " feature rows ("
            << table.column_names.size() << " columns)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-regressor / evaluate-regressor

struct RegressorFlags {
  std::string family = "gradient_boosting";
  NumericHyperparams hp;
  double text_lambda = 1.0;
  bool no_quantile = false;
};

void add_regressor_flags(CLI::App* sub, RegressorFlags& r) {
  sub->add_option("--family", r.family, "numeric-leg regressor family")
      ->check(CLI::IsMember({"linear", "huber", "random_forest", "gradient_boosting"}));
  sub->add_option("--trees", r.hp.trees);
  sub->add_option("--depth", r.hp.depth);
  sub->add_option("--learning-rate", r.hp.learning_rate);
  sub->add_option("--huber-delta", r.hp.huber_delta);
  sub->add_option("--bootstrap-fraction", r.hp.bootstrap_fraction);
  sub->add_option("--text-lambda", r.text_lambda, "ridge strength for the text leg");
  sub->add_flag("--no-quantile", r.no_quantile, "skip quantile normalization");
}

EnsembleOptions resolve_regressor_options(const RegressorFlags& r) {
  EnsembleOptions opts;
  opts.family = regressor_family_from_string(r.family);
  opts.hp = r.hp;
  opts.text_lambda = r.text_lambda;
  opts.quantile_normalize = !r.no_quantile;
  return opts;
}

// Joins a feature table with texts and targets. Targets come from median-
// consolidated annotations or from a detector-vote file; --targets overrides
// scores per item id.
std::vector<RegressionItem> build_regression_items(const FeatureTable& feats,
                                                   const std::string& annotations,
                                                   const std::string& condition,
                                                   const std::string& morris,
                                                   const std::string& targets_csv, Manifest& m) {
  struct ItemInfo {
    std::string text;
    double target = 0.0;
    std::string subset;
  };
  std::unordered_map<std::string, ItemInfo> info;
  if (!annotations.empty()) {
    AnnotationData data = load_annotations(annotations, parse_condition(condition));
    m.add_input(annotations);
    std::unordered_map<std::string, const SentenceRecord*> rec;
    for (const auto& r : data.records) rec[r.item_id] = &r;
    for (const auto& s : consolidate(data.annotations, Aggregation::median)) {
      const SentenceRecord* r = rec.at(s.item_id);
      info[s.item_id] = {r->text, s.score, to_string(r->source)};
    }
  } else if (!morris.empty()) {
    for (const auto& it : load_morris(morris))
      info[it.item_id] = {it.text, it.score(), to_string(it.source)};
    m.add_input(morris);
  } else {
    throw std::invalid_argument("--annotations or --morris is required");
  }

  if (!targets_csv.empty()) {
    std::string body = read_text_file(targets_csv);
    m.add_input(targets_csv);
    std::istringstream in(body);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (first) {
        first = false;
        if (line.rfind("item_id,", 0) == 0) continue;
      }
      auto comma = line.find(',');
      if (comma == std::string::npos)
        throw std::runtime_error("targets file needs item_id,score rows");
      std::string id = line.substr(0, comma);
      double score = std::stod(line.substr(comma + 1));
      auto it = info.find(id);
      if (it != info.end()) it->second.target = score;
    }
  }

  std::vector<RegressionItem> items;
  items.reserve(feats.ids.size());
  for (std::size_t i = 0; i < feats.ids.size(); ++i) {
    auto it = info.find(feats.ids[i]);
    if (it == info.end())
      throw std::runtime_error("feature row has no score or text: " + feats.ids[i]);
    RegressionItem item;
    item.item_id = feats.ids[i];
    item.text = it->second.text;
    item.features = feats.values.row(static_cast<Eigen::Index>(i)).transpose();
    item.mask = feats.masks[i];
    item.target = it->second.target;
    item.subset = it->second.subset;
    items.push_back(std::move(item));
  }
  return items;
}

struct TrainRegressorOpts {
  std::string features;
  std::string annotations;
  std::string condition = "main";
  std::string morris;
  std::string targets;
  std::string out;
  RegressorFlags reg;
  std::uint64_t seed = 11;
};

int run_train_regressor(const TrainRegressorOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "train-regressor";
  m.options = ini;
  m.seed = o.seed;

  FeatureTable feats = load_features_csv(o.features);
  m.add_input(o.features);
  std::vector<RegressionItem> items =
      build_regression_items(feats, o.annotations, o.condition, o.morris, o.targets, m);

  std::vector<std::string> texts;
  VectorXd targets(items.size());
  texts.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    texts.push_back(items[i].text);
    targets[static_cast<Eigen::Index>(i)] = items[i].target;
  }

  EnsembleOptions opts = resolve_regressor_options(o.reg);
  EnsembleRegressor model = EnsembleRegressor::fit(texts, feats, targets, opts, o.seed);
  model.save(dir / "ensemble.json");
  m.add_output(dir / "ensemble.json");

  EvalReport rep = evaluate_ensemble(model, items);
  export_eval_csv(dir / "train_eval.csv", rep);
  m.add_output(dir / "train_eval.csv");
  m.write(dir);

  std::cout << "regressor trained on " << items.size() << " items, train pearson "
            << rep.overall.pearson << ", rmse " << rep.overall.rmse << "\n";
  return 0;
}

struct EvalRegressorOpts {
  std::string model;
  std::string features;
  std::string annotations;
  std::string condition = "main";
  std::string morris;
  std::string targets;
  std::string grid_features;
  std::string grid_annotations;
  std::string grid_condition = "main";
  std::string out;
  RegressorFlags reg;
  std::uint64_t seed = 11;
};

int run_evaluate_regressor(const EvalRegressorOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "evaluate-regressor";
  m.options = ini;
  m.seed = o.seed;

  EnsembleRegressor model = EnsembleRegressor::load(o.model);
  m.add_input(o.model);
  FeatureTable feats = load_features_csv(o.features);
  m.add_input(o.features);
  std::vector<RegressionItem> items =
      build_regression_items(feats, o.annotations, o.condition, o.morris, o.targets, m);

  EvalReport rep = evaluate_ensemble(model, items);
  export_eval_csv(dir / "eval.csv", rep);
  m.add_output(dir / "eval.csv");

  if (!o.grid_features.empty()) {
    FeatureTable train_feats = load_features_csv(o.grid_features);
    m.add_input(o.grid_features);
    std::vector<RegressionItem> train_items = build_regression_items(
        train_feats, o.grid_annotations, o.grid_condition, "", "", m);
    SubsetGrid grid =
        subset_train_eval(train_items, items, resolve_regressor_options(o.reg), o.seed);
    export_grid_csv(dir / "grid.csv", grid);
    m.add_output(dir / "grid.csv");
  }
  m.write(dir);

  std::cout << "evaluated " << items.size() << " items, pearson " << rep.overall.pearson
            << ", spearman " << rep.overall.spearman << ", rmse " << rep.overall.rmse << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// agreement

struct AgreementOpts {
  std::string annotations;
  std::string condition = "main";
  std::string out;
};

int run_agreement(const AgreementOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "agreement";
  m.options = ini;

  AnnotationData data = load_annotations(o.annotations, parse_condition(o.condition));
  m.add_input(o.annotations);

  std::vector<ScoredItem> scored = consolidate(data.annotations, Aggregation::median);
  LikertHistogram hist = histogram_and_means(scored, data.records);
  export_histogram_csv(dir / "histogram.csv", hist);
  m.add_output(dir / "histogram.csv");

  std::vector<DisagreementReport> reports =
      disagreement_by_source(data.annotations, data.records);
  export_disagreement_csv(dir / "disagreement.csv", reports);
  m.add_output(dir / "disagreement.csv");

  std::unordered_map<std::string, Source> source_of;
  for (const auto& r : data.records) source_of[r.item_id] = r.source;
  std::map<std::string, std::pair<BinarySplit, BinarySplit>> rows;
  rows["overall"] = {binarize(scored, BinarizationRule::symmetry),
                     binarize(scored, BinarizationRule::one_vs_other)};
  for (Source src : {Source::original, Source::pruthi, Source::alzantot, Source::textfooler,
                     Source::bae}) {
    std::vector<ScoredItem> subset;
    for (const auto& s : scored)
      if (source_of.at(s.item_id) == src) subset.push_back(s);
    if (subset.empty()) continue;
    rows[to_string(src)] = {binarize(subset, BinarizationRule::symmetry),
                            binarize(subset, BinarizationRule::one_vs_other)};
  }
  export_binarize_csv(dir / "binarize.csv", rows);
  m.add_output(dir / "binarize.csv");
  m.write(dir);

  double overall_delta = reports.empty() ? 0.0 : reports.front().delta;
  std::printf("%zu scored items, overall mean %.2f, disagreement %.2f over %d common items\n",
              scored.size(), hist.total.mean, overall_delta,
              reports.empty() ? 0 : reports.front().n_items);
  return 0;
}

// ---------------------------------------------------------------------------
// overlap-metrics

struct OverlapOpts {
  std::string annotations;
  std::string condition = "main";
  std::string embeddings;
  std::string out;
};

int run_overlap_metrics(const OverlapOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "overlap-metrics";
  m.options = ini;

  AnnotationData data = load_annotations(o.annotations, parse_condition(o.condition));
  m.add_input(o.annotations);
  std::unordered_map<std::string, double> score_of;
  for (const auto& s : consolidate(data.annotations, Aggregation::median))
    score_of[s.item_id] = s.score;

  std::optional<EmbeddingTable> emb;
  MeteorOptions mopts;
  if (!o.embeddings.empty()) {
    emb = EmbeddingTable::load(o.embeddings);
    m.add_input(o.embeddings);
    mopts.embeddings = &*emb;
  }

  std::vector<MetricPair> pairs;
  std::vector<double> scores;
  for (const auto& [orig_id, group] : pair_variants(data.records)) {
    auto orig = group.find(Source::original);
    if (orig == group.end()) continue;
    for (const auto& [src, rec] : group) {
      if (src == Source::original) continue;
      auto it = score_of.find(rec.item_id);
      if (it == score_of.end()) continue;
      pairs.push_back({orig->second.text, rec.text, src});
      scores.push_back(it->second);
    }
  }
  if (pairs.empty()) throw std::runtime_error("no original/adversarial pairs with scores");

  std::vector<MetricSummary> rows = metric_suspicion_correlation(pairs, scores, mopts);
  export_metric_csv(dir / "overlap.csv", rows);
  m.add_output(dir / "overlap.csv");
  m.write(dir);

  std::cout << rows.size() << " metrics over " << pairs.size() << " pairs\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sus-attack

struct SusAttackOpts {
  std::string corpus;
  std::string victim;
  std::string train_corpus;
  std::string regressor;
  std::string out;
  ResourcePaths res;
  AttackFlags atk;
  double anomaly_floor = -8.0;
  int lid_k = 20;
  double tau = 2.5;
  double margin = 0.2;
  std::string mode = "per_edit";
  int workers = 1;
  std::uint64_t seed = 11;
};

int run_sus_attack(const SusAttackOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "sus-attack";
  m.options = ini;
  m.seed = o.seed;

  VictimModel model = VictimModel::load(o.victim);
  m.add_input(o.victim);
  if (!o.train_corpus.empty()) {
    model.attach_training_data(load_labeled_corpus(o.train_corpus));
    m.add_input(o.train_corpus);
  }
  std::vector<LabeledText> records = load_labeled_corpus(o.corpus);
  m.add_input(o.corpus);
  LoadedResources lr = load_resources(o.res, m);
  AttackResources ares = attack_view(lr);
  FeatureResources fres = feature_view(lr, o.anomaly_floor, o.lid_k);
  EnsembleRegressor reg = EnsembleRegressor::load(o.regressor);
  m.add_input(o.regressor);

  SuspicionConstraint constraint;
  constraint.regressor = &reg;
  constraint.victim = &model;
  constraint.features = &fres;
  constraint.tau = o.tau;
  constraint.margin = o.margin;

  ConstraintMode mode;
  if (o.mode == "per_edit")
    mode = ConstraintMode::per_edit;
  else if (o.mode == "final_only")
    mode = ConstraintMode::final_only;
  else
    throw std::invalid_argument("unknown mode: " + o.mode);

  AttackConfig cfg = resolve_attack_config(o.atk, o.seed);
  ConstrainedRun run = run_constrained(model, records, cfg, ares, constraint, mode, o.workers);
  save_constrained(dir / "constrained.jsonl", run.outcomes);
  m.add_output(dir / "constrained.jsonl");

  json summary = summary_json(run.attack_summary);
  summary["method"] = o.atk.method;
  summary["mode"] = o.mode;
  summary["tau"] = o.tau;
  summary["margin"] = o.margin;
  summary["accepted"] = run.accepted;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  m.add_output(dir / "summary.json");
  m.write(dir);

  std::cout << run.accepted << "/" << run.attack_summary.attempts
            << " records flipped within the suspicion budget (" << run.attack_summary.successes
            << " flipped at all)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// select-study

struct SelectStudyOpts {
  std::string baseline;
  std::string constrained;
  std::string corpus;
  double tau = 2.5;
  double margin = 0.2;
  std::string out;
};

int run_select_study(const SelectStudyOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "select-study";
  m.options = ini;

  std::vector<ConstrainedOutcome> baseline = load_constrained(o.baseline);
  m.add_input(o.baseline);
  std::vector<ConstrainedOutcome> constrained = load_constrained(o.constrained);
  m.add_input(o.constrained);
  std::vector<LabeledText> records = load_labeled_corpus(o.corpus);
  m.add_input(o.corpus);

  StudySelection sel = select_study_items(baseline, constrained, records, o.tau, o.margin);
  export_study_csv(dir / "study_pairs.csv", sel);
  m.add_output(dir / "study_pairs.csv");

  json j;
  j["baseline_above_tau"] = sel.baseline_above_tau;
  j["reduced"] = sel.reduced;
  j["reduced_fraction"] = sel.reduced_fraction;
  j["reduction_mean"] = sel.reduction_mean;
  j["reduction_stddev"] = sel.reduction_stddev;
  write_text_file(dir / "selection.json", j.dump(2) + "\n");
  m.add_output(dir / "selection.json");
  m.write(dir);

  std::printf("%zu pairs kept of %zu suspicious baselines (mean reduction %.3f, sd %.3f)\n",
              sel.reduced, sel.baseline_above_tau, sel.reduction_mean, sel.reduction_stddev);
  return 0;
}

// ---------------------------------------------------------------------------
// preference-test

struct PreferenceOpts {
  std::string trials;
  std::string out;
};

int run_preference_test(const PreferenceOpts& o, const std::string& ini) {
  std::vector<PreferenceTrial> trials = load_trials_csv(o.trials);
  PreferenceResult r = preference_eval(trials);
  std::printf("wins_a = %d, wins_b = %d, discarded = %d, p = %.4f\n", r.wins_a, r.wins_b,
              r.discarded, r.p_two_sided);
  if (!o.out.empty()) {
    fs::path dir = prep_out_dir(o.out);
    Manifest m;
    m.command = "preference-test";
    m.options = ini;
    m.add_input(o.trials);
    json j;
    j["wins_a"] = r.wins_a;
    j["wins_b"] = r.wins_b;
    j["discarded"] = r.discarded;
    j["p_two_sided"] = r.p_two_sided;
    write_text_file(dir / "preference.json", j.dump(2) + "\n");
    m.add_output(dir / "preference.json");
    m.write(dir);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// llm-score

struct LlmScoreOpts {
  std::string corpus;
  std::string annotations;
  std::string condition = "main";
  std::string mock;
  std::string endpoint;
  std::string model = "gpt-4";
  std::string token_env = "SUSKIT_LLM_TOKEN";
  int timeout = 30;
  int retries = 2;
  int rate_limit = 0;
  std::string out;
};

int run_llm_score(const LlmScoreOpts& o, const std::string& ini) {
  fs::path dir = prep_out_dir(o.out);
  Manifest m;
  m.command = "llm-score";
  m.options = ini;

  std::vector<std::string> ids;
  std::vector<std::string> texts;
  if (!o.corpus.empty()) {
    for (const auto& r : load_labeled_corpus(o.corpus)) {
      ids.push_back(r.item_id);
      texts.push_back(r.text);
    }
    m.add_input(o.corpus);
  } else if (!o.annotations.empty()) {
    AnnotationData data = load_annotations(o.annotations, parse_condition(o.condition));
    m.add_input(o.annotations);
    for (const auto& r : data.records) {
      ids.push_back(r.item_id);
      texts.push_back(r.text);
    }
  } else {
    throw std::invalid_argument("--corpus or --annotations is required");
  }

  LlmConfig cfg;
  if (!o.mock.empty()) {
    cfg.mock = true;
    cfg.mock_responses = o.mock;
    m.add_input(o.mock);
  } else {
    if (!o.endpoint.empty()) cfg.endpoint = o.endpoint;
    cfg.model = o.model;
    cfg.token_env = o.token_env;
    cfg.timeout_seconds = o.timeout;
    cfg.max_retries = o.retries;
  }
  cfg.validate();

  LlmBatchResult res = batch_score(texts, cfg, o.rate_limit);

  std::string scores = "item_id,score,rationale\n";
  std::size_t scored = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!res.judgements[i]) continue;
    scores += csv_escape(ids[i]) + "," + std::to_string(res.judgements[i]->score) + "," +
              csv_escape(res.judgements[i]->rationale) + "\n";
    ++scored;
  }
  write_text_file(dir / "scores.csv", scores);
  m.add_output(dir / "scores.csv");

  std::string failures = "item_id,message\n";
  for (const auto& f : res.failures)
    failures += csv_escape(ids[f.index]) + "," + csv_escape(f.message) + "\n";
  write_text_file(dir / "failures.csv", failures);
  m.add_output(dir / "failures.csv");
  m.write(dir);

  std::cout << "scored " << scored << " of " << ids.size() << " texts ("
            << res.failures.size() << " failures)\n";
  if (scored == 0 && !res.failures.empty()) {
    std::cerr << "error: every request failed, first failure: " << res.failures.front().message
              << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"desk-scale toolkit for adversarial text and human suspicion"};
  app.name("suskit");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default(true);
  app.set_config("--config", "", "read flag defaults from an INI file");

  int rc = 0;

  SampleOpts sample;
  CLI::App* sub_sample = app.add_subcommand("make-sample-data", "write a self-contained demo dataset");
  sub_sample->add_option("--out", sample.out, "output directory")->required();
  sub_sample->add_option("--seed", sample.seed);
  sub_sample->callback(
      [&] { rc = run_make_sample_data(sample, sub_sample->config_to_str(true, false)); });

  IngestOpts ingest;
  CLI::App* sub_ingest = app.add_subcommand("ingest", "validate and canonicalize annotation files");
  sub_ingest->add_option("--annotations", ingest.annotations)->required()->check(CLI::ExistingFile);
  sub_ingest->add_option("--condition", ingest.condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  sub_ingest->add_option("--morris", ingest.morris, "detector-style vote file")
      ->check(CLI::ExistingFile);
  sub_ingest->add_option("--out", ingest.out)->required();
  sub_ingest->callback([&] { rc = run_ingest(ingest, sub_ingest->config_to_str(true, false)); });

  TrainVictimOpts tv;
  CLI::App* sub_tv = app.add_subcommand("train-victim", "fit the sentiment classifier under attack");
  sub_tv->add_option("--corpus", tv.corpus)->required()->check(CLI::ExistingFile);
  sub_tv->add_option("--lambda", tv.lambda, "L2 strength");
  sub_tv->add_option("--holdout", tv.holdout, "held-out fraction for accuracy reporting");
  sub_tv->add_option("--seed", tv.seed);
  sub_tv->add_option("--out", tv.out)->required();
  sub_tv->callback([&] { rc = run_train_victim(tv, sub_tv->config_to_str(true, false)); });

  AttackOpts atk;
  CLI::App* sub_atk = app.add_subcommand("attack", "run a word- or character-level attack");
  sub_atk->add_option("--corpus", atk.corpus)->required()->check(CLI::ExistingFile);
  sub_atk->add_option("--victim", atk.victim)->required()->check(CLI::ExistingFile);
  add_resource_flags(sub_atk, atk.res);
  add_attack_flags(sub_atk, atk.atk);
  sub_atk->add_option("--workers", atk.workers);
  sub_atk->add_option("--seed", atk.seed);
  sub_atk->add_option("--out", atk.out)->required();
  sub_atk->callback([&] { rc = run_attack_cmd(atk, sub_atk->config_to_str(true, false)); });

  ExtractOpts ext;
  CLI::App* sub_ext = app.add_subcommand("extract-features", "compute suspicion features per text");
  sub_ext->add_option("--annotations", ext.annotations)->check(CLI::ExistingFile);
  sub_ext->add_option("--condition", ext.condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  sub_ext->add_option("--outcomes", ext.outcomes, "attack outcomes (JSONL)")
      ->check(CLI::ExistingFile);
  sub_ext->add_option("--corpus", ext.corpus)->check(CLI::ExistingFile);
  sub_ext->add_option("--victim", ext.victim)->required()->check(CLI::ExistingFile);
  sub_ext->add_option("--train-corpus", ext.train_corpus,
                      "victim training rows (enables neighborhood features)")
      ->check(CLI::ExistingFile);
  add_resource_flags(sub_ext, ext.res);
  sub_ext->add_option("--anomaly-floor", ext.anomaly_floor);
  sub_ext->add_option("--lid-k", ext.lid_k);
  sub_ext->add_option("--llm-mock", ext.llm_mock, "canned judge responses (JSON)")
      ->check(CLI::ExistingFile);
  sub_ext->add_option("--workers", ext.workers);
  sub_ext->add_option("--out", ext.out)->required();
  sub_ext->callback(
      [&] { rc = run_extract_features(ext, sub_ext->config_to_str(true, false)); });

  TrainRegressorOpts tr;
  CLI::App* sub_tr = app.add_subcommand("train-regressor", "fit the suspicion score predictor");
  sub_tr->add_option("--features", tr.features)->required()->check(CLI::ExistingFile);
  sub_tr->add_option("--annotations", tr.annotations)->check(CLI::ExistingFile);
  sub_tr->add_option("--condition", tr.condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  sub_tr->add_option("--morris", tr.morris)->check(CLI::ExistingFile);
  sub_tr->add_option("--targets", tr.targets, "per-item score overrides (CSV)")
      ->check(CLI::ExistingFile);
  add_regressor_flags(sub_tr, tr.reg);
  sub_tr->add_option("--seed", tr.seed);
  sub_tr->add_option("--out", tr.out)->required();
  sub_tr->callback([&] { rc = run_train_regressor(tr, sub_tr->config_to_str(true, false)); });

  EvalRegressorOpts er;
  CLI::App* sub_er = app.add_subcommand("evaluate-regressor", "score a fitted predictor");
  sub_er->add_option("--model", er.model)->required()->check(CLI::ExistingFile);
  sub_er->add_option("--features", er.features)->required()->check(CLI::ExistingFile);
  sub_er->add_option("--annotations", er.annotations)->check(CLI::ExistingFile);
  sub_er->add_option("--condition", er.condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  sub_er->add_option("--morris", er.morris)->check(CLI::ExistingFile);
  sub_er->add_option("--targets", er.targets)->check(CLI::ExistingFile);
  sub_er->add_option("--grid-features", er.grid_features,
                     "training features for a cross-subset grid")
      ->check(CLI::ExistingFile);
  sub_er->add_option("--grid-annotations", er.grid_annotations)->check(CLI::ExistingFile);
  sub_er->add_option("--grid-condition", er.grid_condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  add_regressor_flags(sub_er, er.reg);
  sub_er->add_option("--seed", er.seed);
  sub_er->add_option("--out", er.out)->required();
  sub_er->callback(
      [&] { rc = run_evaluate_regressor(er, sub_er->config_to_str(true, false)); });

  AgreementOpts agr;
  CLI::App* sub_agr = app.add_subcommand("agreement", "histograms, disagreement, binarized splits");
  sub_agr->add_option("--annotations", agr.annotations)->required()->check(CLI::ExistingFile);
  sub_agr->add_option("--condition", agr.condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  sub_agr->add_option("--out", agr.out)->required();
  sub_agr->callback([&] { rc = run_agreement(agr, sub_agr->config_to_str(true, false)); });

  OverlapOpts ovl;
  CLI::App* sub_ovl = app.add_subcommand("overlap-metrics",
                                         "text-overlap metrics vs human suspicion");
  sub_ovl->add_option("--annotations", ovl.annotations)->required()->check(CLI::ExistingFile);
  sub_ovl->add_option("--condition", ovl.condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  sub_ovl->add_option("--embeddings", ovl.embeddings, "enables the synonym alignment stage")
      ->check(CLI::ExistingFile);
  sub_ovl->add_option("--out", ovl.out)->required();
  sub_ovl->callback([&] { rc = run_overlap_metrics(ovl, sub_ovl->config_to_str(true, false)); });

  SusAttackOpts sus;
  CLI::App* sub_sus = app.add_subcommand("sus-attack", "attack under a predicted-suspicion budget");
  sub_sus->add_option("--corpus", sus.corpus)->required()->check(CLI::ExistingFile);
  sub_sus->add_option("--victim", sus.victim)->required()->check(CLI::ExistingFile);
  sub_sus->add_option("--train-corpus", sus.train_corpus)->check(CLI::ExistingFile);
  sub_sus->add_option("--regressor", sus.regressor)->required()->check(CLI::ExistingFile);
  add_resource_flags(sub_sus, sus.res);
  add_attack_flags(sub_sus, sus.atk);
  sub_sus->add_option("--anomaly-floor", sus.anomaly_floor);
  sub_sus->add_option("--lid-k", sus.lid_k);
  sub_sus->add_option("--tau", sus.tau, "predicted-score ceiling");
  sub_sus->add_option("--margin", sus.margin, "allowed rise over the original's predicted score");
  sub_sus->add_option("--mode", sus.mode)->check(CLI::IsMember({"per_edit", "final_only"}));
  sub_sus->add_option("--workers", sus.workers);
  sub_sus->add_option("--seed", sus.seed);
  sub_sus->add_option("--out", sus.out)->required();
  sub_sus->callback([&] { rc = run_sus_attack(sus, sub_sus->config_to_str(true, false)); });

  SelectStudyOpts sel;
  CLI::App* sub_sel = app.add_subcommand("select-study", "pair baseline and constrained outcomes");
  sub_sel->add_option("--baseline", sel.baseline)->required()->check(CLI::ExistingFile);
  sub_sel->add_option("--constrained", sel.constrained)->required()->check(CLI::ExistingFile);
  sub_sel->add_option("--corpus", sel.corpus)->required()->check(CLI::ExistingFile);
  sub_sel->add_option("--tau", sel.tau);
  sub_sel->add_option("--margin", sel.margin);
  sub_sel->add_option("--out", sel.out)->required();
  sub_sel->callback([&] { rc = run_select_study(sel, sub_sel->config_to_str(true, false)); });

  PreferenceOpts pref;
  CLI::App* sub_pref = app.add_subcommand("preference-test", "paired preference sign test");
  sub_pref->add_option("--trials", pref.trials)->required()->check(CLI::ExistingFile);
  sub_pref->add_option("--out", pref.out, "optional output directory");
  sub_pref->callback(
      [&] { rc = run_preference_test(pref, sub_pref->config_to_str(true, false)); });

  LlmScoreOpts llm;
  CLI::App* sub_llm = app.add_subcommand("llm-score", "judge texts with a chat-model detector");
  sub_llm->add_option("--corpus", llm.corpus)->check(CLI::ExistingFile);
  sub_llm->add_option("--annotations", llm.annotations)->check(CLI::ExistingFile);
  sub_llm->add_option("--condition", llm.condition)
      ->check(CLI::IsMember({"main", "prevalence_informed", "non_mturk"}));
  sub_llm->add_option("--mock", llm.mock, "canned responses file; skips the network")
      ->check(CLI::ExistingFile);
  sub_llm->add_option("--endpoint", llm.endpoint);
  sub_llm->add_option("--model", llm.model);
  sub_llm->add_option("--token-env", llm.token_env,
                      "environment variable holding the API token");
  sub_llm->add_option("--timeout", llm.timeout);
  sub_llm->add_option("--retries", llm.retries);
  sub_llm->add_option("--rate-limit", llm.rate_limit, "requests per minute, 0 = unlimited");
  sub_llm->add_option("--out", llm.out)->required();
  sub_llm->callback([&] { rc = run_llm_score(llm, sub_llm->config_to_str(true, false)); });

  // Lets global flags (notably --config) appear after the subcommand name.
  for (CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; }))
    s->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

}  // namespace suskit
