#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "suskit/agreement.hpp"
#include "suskit/cli.hpp"
#include "suskit/corpus.hpp"
#include "suskit/susgen.hpp"
#include "suskit/util.hpp"

using namespace suskit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("suskit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One shared sample dataset; generating it is the slowest CLI step.
const fs::path& sample_dir() {
  static fs::path dir = [] {
    fs::path d = fresh_dir("sample");
    REQUIRE(dispatch({"make-sample-data", "--out", d.string()}) == 0);
    return d;
  }();
  return dir;
}

const std::vector<std::string>& sample_files() {
  static std::vector<std::string> names = {
      "likert_main.tsv", "likert_prevalence.tsv", "likert_nonmturk.tsv", "morris.tsv",
      "sentiment_corpus.tsv", "embeddings.txt", "pos_lexicon.tsv", "ngram.json",
      "idf.json", "llm_mock.json", "trials_demo.csv"};
  return names;
}

}  // namespace

TEST_CASE("usage problems exit with 2 and help exits cleanly") {
  const fs::path out = fresh_dir("usage");
  CHECK(dispatch({}) == 2);                    // a subcommand is required
  CHECK(dispatch({"frobnicate"}) == 2);        // unknown subcommand
  CHECK(dispatch({"--help"}) == 0);
  CHECK(dispatch({"ingest", "--help"}) == 0);
  CHECK(dispatch({"ingest", "--out", out.string()}) == 2);  // missing --annotations
  CHECK(dispatch({"ingest", "--annotations", (out / "nowhere.tsv").string(), "--out",
                  out.string()}) == 2);  // input must exist
  const fs::path exists = out / "exists.tsv";
  write_text_file(exists, "placeholder\n");
  CHECK(dispatch({"ingest", "--annotations", exists.string(), "--condition", "bogus", "--out",
                  out.string()}) == 2);  // condition outside the allowed set
}

TEST_CASE("runtime failures exit with 1") {
  const fs::path out = fresh_dir("runtime");
  const fs::path broken = out / "broken.tsv";
  write_text_file(broken, "item_id\ttext\nonly\ttwo\n");
  CHECK(dispatch({"ingest", "--annotations", broken.string(), "--out", out.string()}) == 1);

  const fs::path bad_trials = out / "bad_trials.csv";
  write_text_file(bad_trials, "pair_id,votes_a,votes_b\np,one,2\n");
  CHECK(dispatch({"preference-test", "--trials", bad_trials.string()}) == 1);
}

TEST_CASE("sample data generation is reproducible and cataloged") {
  const fs::path& first = sample_dir();
  for (const auto& name : sample_files()) {
    INFO(name);
    CHECK(fs::exists(first / name));
  }

  const json manifest = json::parse(read_text_file(first / "manifest.json"));
  CHECK(manifest.at("command") == "make-sample-data");
  CHECK(manifest.at("seed") == 11);
  CHECK_FALSE(manifest.at("timestamp").get<std::string>().empty());
  REQUIRE(manifest.at("outputs").size() == sample_files().size());
  for (const auto& name : sample_files()) {
    INFO(name);
    REQUIRE(manifest.at("outputs").contains(name));
    CHECK(manifest.at("outputs").at(name) == digest_hex(read_text_file(first / name)));
  }

  // Same seed, fresh directory: every data file comes out byte-identical.
  const fs::path second = fresh_dir("sample_again");
  REQUIRE(dispatch({"make-sample-data", "--out", second.string(), "--seed", "11"}) == 0);
  for (const auto& name : sample_files()) {
    INFO(name);
    CHECK(read_text_file(first / name) == read_text_file(second / name));
  }
}

TEST_CASE("ingest reports exactly what the loader sees") {
  const fs::path& data = sample_dir();
  const fs::path out = fresh_dir("ingest");
  REQUIRE(dispatch({"ingest", "--annotations", (data / "likert_main.tsv").string(), "--morris",
                    (data / "morris.tsv").string(), "--out", out.string()}) == 0);

  const AnnotationData direct = load_annotations(data / "likert_main.tsv", Condition::main);
  const json report = json::parse(read_text_file(out / "report.json"));
  CHECK(report.at("annotations").at("condition") == "main");
  CHECK(report.at("annotations").at("total_annotations") == direct.report.total_annotations);
  CHECK(report.at("annotations").at("distinct_items") == direct.report.distinct_items);
  CHECK(report.at("annotations").at("rejected_rows") == direct.report.rejected_rows);
  CHECK(report.at("morris").at("items") == load_morris(data / "morris.tsv").size());

  // The canonical file reloads to the same data.
  const AnnotationData reloaded = load_annotations(out / "canonical.tsv", Condition::main);
  CHECK(reloaded.annotations.size() == direct.annotations.size());
  CHECK(reloaded.records.size() == direct.records.size());

  const json manifest = json::parse(read_text_file(out / "manifest.json"));
  CHECK(manifest.at("command") == "ingest");
  CHECK(manifest.at("inputs").size() == 2);
  CHECK(manifest.at("outputs").contains("canonical.tsv"));
  CHECK(manifest.at("outputs").contains("canonical_morris.tsv"));
  CHECK(manifest.at("outputs").contains("report.json"));

  // Reruns produce byte-identical data outputs.
  const fs::path again = fresh_dir("ingest_again");
  REQUIRE(dispatch({"ingest", "--annotations", (data / "likert_main.tsv").string(), "--out",
                    again.string()}) == 0);
  CHECK(read_text_file(out / "canonical.tsv") == read_text_file(again / "canonical.tsv"));
}

TEST_CASE("the agreement command writes tables that match the library") {
  const fs::path& data = sample_dir();
  const fs::path out = fresh_dir("agreement");
  REQUIRE(dispatch({"agreement", "--annotations", (data / "likert_main.tsv").string(), "--out",
                    out.string()}) == 0);

  const std::string histogram = read_text_file(out / "histogram.csv");
  CHECK(histogram.rfind("group,s1,s2,s3,s4,s5,mean,total\n", 0) == 0);
  CHECK(read_text_file(out / "disagreement.csv").find("overall") != std::string::npos);
  CHECK(read_text_file(out / "binarize.csv").find("overall") != std::string::npos);

  // Re-derive the total histogram row straight from the library.
  const AnnotationData direct = load_annotations(data / "likert_main.tsv", Condition::main);
  const auto scored = consolidate(direct.annotations, Aggregation::median);
  const LikertHistogram hist = histogram_and_means(scored, direct.records);
  std::string want = "total";
  for (int s = 0; s < 5; ++s) want += "," + std::to_string(hist.total.counts[s]);
  CHECK(histogram.find(want) != std::string::npos);
}

TEST_CASE("preference-test writes its verdict when asked") {
  const fs::path& data = sample_dir();
  const fs::path out = fresh_dir("preference");
  REQUIRE(dispatch({"preference-test", "--trials", (data / "trials_demo.csv").string(), "--out",
                    out.string()}) == 0);

  const PreferenceResult direct = preference_eval(load_trials_csv(data / "trials_demo.csv"));
  const json verdict = json::parse(read_text_file(out / "preference.json"));
  CHECK(verdict.at("wins_a") == direct.wins_a);
  CHECK(verdict.at("wins_b") == direct.wins_b);
  CHECK(verdict.at("discarded") == direct.discarded);
  CHECK(verdict.at("p_two_sided").get<double>() ==
        doctest::Approx(direct.p_two_sided).epsilon(1e-12));
  CHECK(direct.p_two_sided > 0.0101);
  CHECK(direct.p_two_sided < 0.0111);
}
