#include "suskit/sampledata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "suskit/llm_client.hpp"
#include "suskit/susgen.hpp"
#include "suskit/text.hpp"
#include "suskit/util.hpp"

namespace suskit {

namespace {

// ---------------------------------------------------------------------------
// Toy vocabulary. Eight positive and eight negative synonym clusters, each
// (frequent, mid, rare). The rare member exists in the embedding table and
// the POS lexicon but never in generated corpus sentences.

constexpr int kClusters = 8;

const std::array<std::array<const char*, 3>, kClusters> kPositiveClusters = {{
    {"great", "terrific", "stupendous"},
    {"good", "fine", "commendable"},
    {"lovely", "charming", "winsome"},
    {"brilliant", "inspired", "dazzling"},
    {"enjoyable", "pleasant", "delightful"},
    {"moving", "touching", "stirring"},
    {"funny", "witty", "humorous"},
    {"smart", "clever", "astute"},
}};

const std::array<std::array<const char*, 3>, kClusters> kNegativeClusters = {{
    {"bad", "poor", "shoddy"},
    {"boring", "dull", "tedious"},
    {"awful", "dreadful", "abysmal"},
    {"messy", "sloppy", "slipshod"},
    {"weak", "feeble", "flimsy"},
    {"annoying", "irritating", "grating"},
    {"shallow", "hollow", "vacuous"},
    {"clumsy", "awkward", "ungainly"},
}};

const std::array<const char*, 16> kNouns = {
    "film",   "movie",  "story",  "plot",     "acting", "script",  "cast",    "scene",
    "pacing", "ending", "drama",  "comedy",   "humor",  "picture", "sequel",  "dialogue",
};

const std::array<const char*, 8> kVerbs = {
    "was", "felt", "seemed", "looked", "stayed", "remained", "turned", "proved",
};

const std::array<const char*, 8> kAdverbs = {
    "really", "quite", "rather", "mostly", "fairly", "almost", "truly", "simply",
};

const std::array<const char*, 8> kOtherWords = {
    "the", "a", "and", "but", "in", "at", "end", "times",
};

const std::vector<std::vector<std::string>> kTails = {
    {"overall"},
    {"throughout"},
    {"in", "the", "end"},
    {"at", "times"},
};

struct ClusterRef {
  int polarity = 0;  // 1 positive, 0 negative
  int cluster = 0;
  int member = 0;  // 0 frequent, 1 mid, 2 rare
};

const std::map<std::string, ClusterRef>& cluster_lookup() {
  static const std::map<std::string, ClusterRef> table = [] {
    std::map<std::string, ClusterRef> t;
    for (int c = 0; c < kClusters; ++c)
      for (int m = 0; m < 3; ++m) {
        t[kPositiveClusters[c][m]] = {1, c, m};
        t[kNegativeClusters[c][m]] = {0, c, m};
      }
    return t;
  }();
  return table;
}

const char* cluster_word(int polarity, int cluster, int member) {
  return polarity == 1 ? kPositiveClusters[cluster][member] : kNegativeClusters[cluster][member];
}

// ---------------------------------------------------------------------------
// Deterministic randomness built on the raw engine output only, so the bytes
// never depend on the standard library's distribution implementations.

double unit_real(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double gauss(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = unit_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

// ---------------------------------------------------------------------------
// Sentence generator.

struct Draft {
  std::vector<std::string> tokens;
  std::vector<std::size_t> strong;  // positions of the label-polarity words
  int label = 0;
};

class ToyTextGen {
 public:
  explicit ToyTextGen(std::uint64_t seed) : rng_(seed) {}

  Draft sentence() { return sentence(static_cast<int>(rng_() % 2)); }

  Draft sentence(int label) {
    Draft d;
    d.label = label;
    d.tokens = {"the", kNouns[pick(rng_, kNouns.size())], kVerbs[pick(rng_, kVerbs.size())]};
    const int n_strong = 2 + static_cast<int>(rng_() % 2);
    std::vector<int> used;
    for (int j = 0; j < n_strong; ++j) {
      if (rng_() % 2) d.tokens.push_back(kAdverbs[pick(rng_, kAdverbs.size())]);
      int cluster = static_cast<int>(rng_() % kClusters);
      for (int tries = 0; tries < kClusters; ++tries) {
        if (std::find(used.begin(), used.end(), cluster) == used.end()) break;
        cluster = (cluster + 1) % kClusters;
      }
      used.push_back(cluster);
      const int member = (rng_() % 10) < 6 ? 0 : 1;
      d.strong.push_back(d.tokens.size());
      d.tokens.push_back(cluster_word(label, cluster, member));
      if (j + 1 < n_strong) d.tokens.push_back("and");
    }
    if (unit_real(rng_) < 0.65) {
      d.tokens.push_back("but");
      if (rng_() % 2) d.tokens.push_back(kAdverbs[pick(rng_, kAdverbs.size())]);
      const int cluster = static_cast<int>(rng_() % kClusters);
      const int member = static_cast<int>(rng_() % 2);
      d.tokens.push_back(cluster_word(1 - label, cluster, member));
    }
    for (const auto& tail_token : kTails[pick(rng_, kTails.size())]) d.tokens.push_back(tail_token);
    return d;
  }

 private:
  std::mt19937_64 rng_;
};

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string swap_middle_chars(const std::string& word) {
  if (word.size() < 4) return word + word;  // still out of vocabulary
  std::string w = word;
  std::swap(w[1], w[2]);
  if (w == word) std::swap(w[w.size() - 3], w[w.size() - 2]);
  return w;
}

// A method-flavored one-word rewrite of the draft, used for the adversarial
// rows of the annotation files.
std::string variant_text(const Draft& d, Source source) {
  std::vector<std::string> tokens = d.tokens;
  const std::size_t pos = d.strong.front();
  const ClusterRef ref = cluster_lookup().at(tokens[pos]);
  switch (source) {
    case Source::pruthi:
      tokens[pos] = swap_middle_chars(tokens[pos]);
      break;
    case Source::textfooler:
      tokens[pos] = cluster_word(ref.polarity, ref.cluster, 2);
      break;
    case Source::alzantot:
      tokens[pos] = cluster_word(ref.polarity, ref.cluster, ref.member == 1 ? 0 : 1);
      break;
    case Source::bae:
      tokens[pos] = cluster_word(ref.polarity, (ref.cluster + 1) % kClusters, 0);
      break;
    case Source::original:
      break;
  }
  return join(tokens);
}

// ---------------------------------------------------------------------------
// Likert file construction. Per source: a common block of triple-annotated
// items whose (median, spread) pairs are planned exactly, then singles drawn
// from a planned label histogram.

struct SourcePlan {
  Source source;
  int common_n = 0;
  // For common item j: first = median, second = max-min spread of the triple.
  std::function<std::pair<int, int>(int)> common_plan;
  std::array<int, 5> singles_hist{};  // label 1..5 counts over the singles
};

std::array<int, 3> likert_triple(int median, int spread) {
  const int hi = std::min(5, median + spread);
  const int lo = hi - spread;
  return {lo, median, hi};
}

int value_at(const std::array<int, 5>& hist, int index) {
  for (int v = 0; v < 5; ++v) {
    if (index < hist[v]) return v;
    index -= hist[v];
  }
  throw std::logic_error("histogram index out of range");
}

constexpr std::array<int, 3> kMedianCycle = {2, 1, 4};

std::function<std::pair<int, int>(int)> cycled_spreads(std::array<int, 5> spread_freq) {
  return [spread_freq](int j) {
    return std::pair<int, int>(kMedianCycle[j % 3], value_at(spread_freq, j));
  };
}

std::function<std::pair<int, int>(int)> unanimous_labels(std::array<int, 5> label_hist) {
  return [label_hist](int j) { return std::pair<int, int>(value_at(label_hist, j) + 1, 0); };
}

std::string padded(int i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d", i + 1);
  return buf;
}

LikertSample build_likert(const std::string& prefix, Condition condition, int n_sets,
                          const std::vector<SourcePlan>& plans, std::uint64_t text_seed) {
  ToyTextGen gen(text_seed);
  std::vector<Draft> drafts;
  drafts.reserve(static_cast<std::size_t>(n_sets));
  for (int i = 0; i < n_sets; ++i) drafts.push_back(gen.sentence());

  LikertSample sample;
  for (const auto& plan : plans) {
    const std::string tag = to_string(plan.source);
    for (int i = 0; i < n_sets; ++i) {
      SentenceRecord rec;
      rec.item_id = prefix + "-" + tag + "-" + padded(i);
      rec.source = plan.source;
      rec.text = variant_text(drafts[static_cast<std::size_t>(i)], plan.source);
      if (plan.source != Source::original)
        rec.original_id = prefix + "-original-" + padded(i);
      sample.records.push_back(rec);

      if (i < plan.common_n) {
        const auto [median, spread] = plan.common_plan(i);
        const auto triple = likert_triple(median, spread);
        for (int a = 0; a < 3; ++a)
          sample.annotations.push_back(
              {rec.item_id, triple[static_cast<std::size_t>(a)], "ann-" + std::to_string(a + 1),
               condition});
      } else {
        const int label = value_at(plan.singles_hist, i - plan.common_n) + 1;
        sample.annotations.push_back({rec.item_id, label, "ann-1", condition});
      }
    }
  }
  return sample;
}

}  // namespace

LikertSample make_main_condition() {
  // Common-block spread frequencies and single-annotation label histograms,
  // chosen so that medians-plus-singles reproduce the published per-source
  // score tables and the common block reproduces the disagreement table.
  const std::vector<SourcePlan> plans = {
      {Source::original, 66, cycled_spreads({13, 26, 10, 15, 2}), {212, 205, 39, 61, 20}},
      {Source::pruthi, 63, cycled_spreads({7, 20, 12, 19, 5}), {126, 196, 58, 103, 57}},
      {Source::alzantot, 62, cycled_spreads({11, 24, 3, 17, 7}), {182, 204, 45, 71, 39}},
      {Source::textfooler, 62, cycled_spreads({6, 24, 9, 21, 2}), {189, 188, 56, 68, 40}},
      {Source::bae, 62, cycled_spreads({6, 10, 23, 16, 7}), {129, 163, 56, 115, 78}},
  };
  return build_likert("m", Condition::main, 603, plans, 7702);
}

LikertSample make_nonmturk_condition() {
  const std::vector<SourcePlan> plans = {
      {Source::original, 15, cycled_spreads({1, 4, 7, 2, 1}), {}},
      {Source::pruthi, 15, cycled_spreads({1, 4, 6, 3, 1}), {}},
      {Source::alzantot, 15, cycled_spreads({1, 4, 6, 4, 0}), {}},
      {Source::textfooler, 15, cycled_spreads({1, 4, 6, 3, 1}), {}},
      {Source::bae, 15, cycled_spreads({0, 4, 6, 4, 1}), {}},
  };
  return build_likert("x", Condition::non_mturk, 15, plans, 8309);
}

LikertSample make_prevalence_condition() {
  const std::vector<SourcePlan> plans = {
      {Source::original, 16, unanimous_labels({4, 5, 2, 3, 2}), {26, 45, 8, 20, 3}},
      {Source::pruthi, 16, unanimous_labels({2, 5, 3, 4, 2}), {17, 43, 12, 24, 6}},
      {Source::alzantot, 16, unanimous_labels({3, 5, 3, 4, 1}), {20, 48, 10, 21, 3}},
      {Source::textfooler, 16, unanimous_labels({3, 5, 2, 4, 2}), {21, 42, 13, 22, 4}},
      {Source::bae, 16, unanimous_labels({2, 5, 1, 5, 3}), {17, 43, 8, 29, 5}},
  };
  return build_likert("p", Condition::prevalence_informed, 118, plans, 9151);
}

std::vector<MorrisItem> make_morris_items(std::uint64_t seed) {
  ToyTextGen gen(seed ^ 0x6d6f7272u);
  std::mt19937_64 votes(seed ^ 0x766f7465u);
  std::vector<MorrisItem> items;
  items.reserve(200);
  for (int i = 0; i < 200; ++i) {
    MorrisItem item;
    item.item_id = "mo-" + padded(i);
    item.votes_total = 10;
    Draft d = gen.sentence();
    if (i < 100) {
      item.source = Source::original;
      item.text = join(d.tokens);
      item.votes_computer = static_cast<int>(votes() % 4);
    } else {
      item.source = Source::textfooler;
      item.text = variant_text(d, Source::textfooler);
      item.votes_computer = 2 + static_cast<int>(votes() % 8);
    }
    items.push_back(std::move(item));
  }
  return items;
}

namespace {

VectorXd random_unit(std::mt19937_64& rng, int dim) {
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
  const double norm = v.norm();
  if (norm < 1e-12) return random_unit(rng, dim);
  return v / norm;
}

}  // namespace

ToyWorld make_toy_world(std::uint64_t seed) {
  ToyWorld world;

  // Embeddings: 20 dimensions; the first 16 axes are the cluster centers
  // (positive clusters on axes 0..7, negative on 8..15). Cluster members sit
  // within a few degrees of their axis, so they find each other as nearest
  // neighbors; filler words keep their mass on the last four dimensions and
  // stay far from every cluster.
  const int dim = 20;
  std::mt19937_64 emb_rng(seed ^ 0x656d62ULL);
  auto add_member = [&](const std::string& word, int axis) {
    VectorXd v = VectorXd::Zero(dim);
    v[axis] = 1.0;
    v += 0.25 * random_unit(emb_rng, dim);
    world.embeddings.add(word, v / v.norm());
  };
  for (int c = 0; c < kClusters; ++c)
    for (int m = 0; m < 3; ++m) {
      add_member(kPositiveClusters[c][m], c);
      add_member(kNegativeClusters[c][m], kClusters + c);
    }
  auto add_filler = [&](const std::string& word) {
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = gauss(emb_rng);
    for (int i = 0; i < 16; ++i) v[i] *= 0.2;
    world.embeddings.add(word, v / v.norm());
  };
  for (const char* w : kNouns) add_filler(w);
  for (const char* w : kVerbs) add_filler(w);
  for (const char* w : kAdverbs) add_filler(w);
  for (const char* w : kOtherWords) add_filler(w);

  for (int c = 0; c < kClusters; ++c)
    for (int m = 0; m < 3; ++m) {
      world.pos_lexicon.entries[kPositiveClusters[c][m]] = POS_ADJ;
      world.pos_lexicon.entries[kNegativeClusters[c][m]] = POS_ADJ;
    }
  for (const char* w : kNouns) world.pos_lexicon.entries[w] = POS_NOUN;
  for (const char* w : kVerbs) world.pos_lexicon.entries[w] = POS_VERB;
  for (const char* w : kAdverbs) world.pos_lexicon.entries[w] = POS_ADV;
  for (const char* w : kOtherWords) world.pos_lexicon.entries[w] = POS_OTHER;
  world.pos_lexicon.entries["end"] = POS_NOUN;
  world.pos_lexicon.entries["times"] = POS_NOUN;

  ToyTextGen gen(seed);
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 500; ++i) {
    Draft d = gen.sentence();
    LabeledText row;
    row.item_id = "s-" + padded(i);
    row.text = join(d.tokens);
    row.label = d.label;
    world.corpus.push_back(std::move(row));
    docs.push_back(std::move(d.tokens));
  }
  world.ngram = NgramModel::fit(docs, 2, 0.1);
  return world;
}

SampleDataPaths write_sample_data(const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  SampleDataPaths paths;
  paths.annotations_main = dir / "likert_main.tsv";
  paths.annotations_prevalence = dir / "likert_prevalence.tsv";
  paths.annotations_nonmturk = dir / "likert_nonmturk.tsv";
  paths.morris = dir / "morris.tsv";
  paths.corpus = dir / "sentiment_corpus.tsv";
  paths.embeddings = dir / "embeddings.txt";
  paths.pos_lexicon = dir / "pos_lexicon.tsv";
  paths.ngram = dir / "ngram.json";
  paths.idf = dir / "idf.json";
  paths.llm_mock = dir / "llm_mock.json";
  paths.trials = dir / "trials_demo.csv";

  const LikertSample main_cond = make_main_condition();
  save_annotations(paths.annotations_main, main_cond.records, main_cond.annotations);
  const LikertSample prevalence = make_prevalence_condition();
  save_annotations(paths.annotations_prevalence, prevalence.records, prevalence.annotations);
  const LikertSample nonmturk = make_nonmturk_condition();
  save_annotations(paths.annotations_nonmturk, nonmturk.records, nonmturk.annotations);
  save_morris(paths.morris, make_morris_items(seed));

  const ToyWorld world = make_toy_world(seed);
  save_labeled_corpus(paths.corpus, world.corpus);
  world.embeddings.save(paths.embeddings);
  world.pos_lexicon.save(paths.pos_lexicon);
  world.ngram.save(paths.ngram);

  std::vector<std::vector<std::string>> docs;
  docs.reserve(world.corpus.size());
  for (const auto& row : world.corpus) docs.push_back(token_texts(row.text));
  IdfTable::from_documents(docs).save(paths.idf);

  // Canned judge responses covering every sample sentence, so the scoring
  // command runs offline end to end.
  nlohmann::json canned = nlohmann::json::object();
  auto can = [&canned](const std::string& text) {
    const int score = 1 + static_cast<int>(fnv1a64(text) % 5);
    canned[digest_hex(text)] =
        "Score: " + std::to_string(score) + ". Canned rationale for sample data.";
  };
  for (const auto& row : world.corpus) can(row.text);
  for (const LikertSample* sample : {&main_cond, &prevalence, &nonmturk})
    for (const auto& rec : sample->records) can(rec.text);
  for (const auto& item : make_morris_items(seed)) can(item.text);
  write_text_file(paths.llm_mock, canned.dump(2));

  std::vector<PreferenceTrial> trials;
  for (int i = 0; i < 23; ++i) {
    PreferenceTrial t;
    t.pair_id = "t-" + padded(i);
    t.votes_a = i < 18 ? 2 : 1;
    t.votes_b = i < 18 ? 1 : 2;
    trials.push_back(std::move(t));
  }
  save_trials_csv(paths.trials, trials);
  return paths;
}

}  // namespace suskit
