#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phmm/cli.hpp"
#include "phmm/corpus.hpp"
#include "phmm/decode.hpp"
#include "phmm/demo.hpp"
#include "phmm/io.hpp"

using namespace phmm;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "phmm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("phmm_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("generate: deterministic, summarized, one record per line") {
  TempDir dir("generate");
  const Run a = run({"generate", "--lexicon", "demo", "--n", "10", "--seed", "7", "--out", dir / "a.jsonl"});
  const Run b = run({"generate", "--lexicon", "demo", "--n", "10", "--seed", "7", "--out", dir / "b.jsonl"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(a.out.find("utterances=10") != std::string::npos);
  CHECK(a.out.find("seed=7") != std::string::npos);

  REQUIRE(run({"generate", "--demo", "--n", "100", "--seed", "1", "--out", dir / "c.jsonl"}).code == kExitOk);
  const auto lines = json_lines(slurp(dir / "c.jsonl"));
  std::size_t records = 0;
  for (const auto& j : lines) records += j.contains("signs");
  CHECK(records == 100);
  CHECK(load_corpus(dir / "c.jsonl").utterances.size() == 100);
}

TEST_CASE("usage and input errors map to exit codes") {
  TempDir dir("errors");
  CHECK(run({"generate", "--demo", "--n", "0", "--seed", "1", "--out", dir / "x"}).code == kExitUsage);
  CHECK(run({"generate", "--demo", "--n", "5", "--out", dir / "x"}).code == kExitUsage);
  CHECK(run({"generate", "--demo", "--n", "5", "--seed", "1", "--out", dir / "x", "--bogus"}).code == kExitUsage);
  CHECK(run({"generate", "--demo", "--n", "5", "--seed", "1", "--out", dir / "x", "--min-signs", "3",
             "--max-signs", "2"})
            .code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"train", "--demo", "--corpus", dir / "x", "--mode", "embedded", "--out", dir / "m"}).code ==
        kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);

  std::ofstream(dir / "bad.json") << "{\"format_version\": 1, \"channels\": [\"right_hand\"]}";
  const Run bad = run({"generate", "--lexicon", dir / "bad.json", "--n", "5", "--seed", "1", "--out", dir / "x"});
  CHECK(bad.code == kExitInput);
  CHECK(bad.err.find("inventories") != std::string::npos);
  CHECK(run({"complexity", "--lexicon", dir / "missing.json"}).code == kExitInput);
  CHECK(run({"decode", "--demo", "--corpus", dir / "missing.jsonl"}).code == kExitInput);
}

TEST_CASE("train: report, iteration cap, trajectories") {
  TempDir dir("train");
  REQUIRE(run({"generate", "--demo", "--n", "40", "--seed", "4", "--noise", "0.02", "--paths", "--out",
               dir / "c.jsonl"})
              .code == kExitOk);

  const Run one = run({"train", "--demo", "--corpus", dir / "c.jsonl", "--mode", "embedded", "--seed", "3",
                       "--max-iters", "1", "--out", dir / "m1.json"});
  REQUIRE(one.code == kExitOk);
  const json r1 = json::parse(one.out);
  REQUIRE(r1["channels"].size() == 3);
  for (const auto& ch : r1["channels"]) {
    CHECK(ch["iterations"] == 1);
    for (const auto& [key, rep] : ch["reports"].items()) CHECK(rep["trajectory"].size() == 2);
  }

  for (const std::string mode : {"embedded", "segmented"}) {
    const Run full = run({"train", "--demo", "--corpus", dir / "c.jsonl", "--mode", mode, "--seed", "3", "--out",
                          dir / (mode + ".json")});
    REQUIRE(full.code == kExitOk);
    const json r = json::parse(full.out);
    for (const auto& ch : r["channels"])
      for (const auto& [key, rep] : ch["reports"].items()) {
        const auto traj = rep["trajectory"].get<std::vector<double>>();
        for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj[i] >= traj[i - 1] - 1e-10);
      }
    const ModelFile m = load_model(dir / (mode + ".json"));
    REQUIRE(m.provenance.has_value());
    CHECK(m.provenance->seed == 3u);
  }
}

TEST_CASE("train: a channel ignores the other channels' data") {
  TempDir dir("independence");
  REQUIRE(run({"generate", "--demo", "--n", "30", "--seed", "8", "--noise", "0.05", "--out", dir / "c.jsonl"})
              .code == kExitOk);
  Corpus shuffled = load_corpus(dir / "c.jsonl");
  const std::size_t head = 2, n = shuffled.utterances.size();
  const MultiObservation first = shuffled.utterances[0].channels;
  for (std::size_t u = 0; u + 1 < n; ++u)
    shuffled.utterances[u].channels[head] = shuffled.utterances[u + 1].channels[head];
  shuffled.utterances[n - 1].channels[head] = first[head];
  save_corpus(dir / "s.jsonl", shuffled);

  REQUIRE(run({"train", "--demo", "--corpus", dir / "c.jsonl", "--mode", "embedded", "--seed", "5", "--out",
               dir / "a.json"})
              .code == kExitOk);
  REQUIRE(run({"train", "--demo", "--corpus", dir / "s.jsonl", "--mode", "embedded", "--seed", "5", "--out",
               dir / "b.json"})
              .code == kExitOk);
  const Lexicon a = load_model(dir / "a.json").lexicon, b = load_model(dir / "b.json").lexicon;
  for (std::size_t c = 0; c < head; ++c) CHECK(a.channels[c].phonemes == b.channels[c].phonemes);
  CHECK_FALSE(a.channels[head].phonemes == b.channels[head].phonemes);
}

TEST_CASE("train: degenerate start exits 4, thread count does not change the model") {
  TempDir dir("degenerate");
  REQUIRE(run({"generate", "--demo", "--n", "20", "--seed", "2", "--out", dir / "c.jsonl"}).code == kExitOk);
  // Right-hand symbol 0 loses all mass while the corpus still contains it.
  Lexicon lex = demo_lexicon();
  for (auto& pm : lex.channels[0].phonemes) {
    Matrix p = pm.hmm.emissions.probs();
    for (std::size_t i = 0; i < p.rows(); ++i) {
      p(i, 1) += p(i, 0);
      p(i, 0) = 0.0;
    }
    pm.hmm.emissions = EmissionModel::discrete(p);
  }
  save_model(dir / "zeroed.json", {lex, std::nullopt});
  Corpus corpus = load_corpus(dir / "c.jsonl");
  corpus.utterances[0].channels[0][0] = Observation{Symbol{0}};
  save_corpus(dir / "c0.jsonl", corpus);
  const Run r = run({"train", "--lexicon", dir / "zeroed.json", "--keep-init", "--corpus", dir / "c0.jsonl", "--mode",
                     "embedded", "--seed", "1", "--smoothing", "0", "--out", dir / "m.json"});
  CHECK(r.code == kExitTraining);

  REQUIRE(run({"train", "--demo", "--corpus", dir / "c.jsonl", "--mode", "embedded", "--seed", "1", "--out",
               dir / "t1.json"})
              .code == kExitOk);
  REQUIRE(run({"train", "--demo", "--corpus", dir / "c.jsonl", "--mode", "embedded", "--seed", "1", "--threads",
               "4", "--out", dir / "t4.json"})
              .code == kExitOk);
  CHECK(slurp(dir / "t1.json") == slurp(dir / "t4.json"));
}

TEST_CASE("decode: recovers noise-free demo data, scores add up") {
  TempDir dir("decode");
  REQUIRE(run({"generate", "--demo", "--n", "25", "--seed", "12", "--out", dir / "c.jsonl"}).code == kExitOk);
  const Run r = run({"decode", "--demo", "--corpus", dir / "c.jsonl", "--out", dir / "h.jsonl"});
  REQUIRE(r.code == kExitOk);
  const auto recs = json_lines(slurp(dir / "h.jsonl"));
  REQUIRE(recs.size() == 25);
  for (const auto& rec : recs) {
    CHECK(rec["format_version"] == kFormatVersion);
    CHECK(rec["signs"] == rec["reference"]);
    std::vector<double> scores;
    for (const auto& [name, s] : rec["channel_scores"].items()) scores.push_back(s.get<double>());
    CHECK(scores.size() == 3);
    CHECK(channel_total(scores) == rec["total"].get<double>());
  }

  const Run threaded = run({"decode", "--demo", "--corpus", dir / "c.jsonl", "--threads", "3"});
  CHECK(threaded.out == slurp(dir / "h.jsonl"));

  const Run synced = run({"decode", "--demo", "--corpus", dir / "c.jsonl", "--mode", "synced"});
  REQUIRE(synced.code == kExitOk);
  // Synced decoding forces sign boundaries to coincide across channels, which
  // the generator does not, so it may miss; it can never beat the free optimum.
  const auto srecs = json_lines(synced.out);
  REQUIRE(srecs.size() == recs.size());
  std::size_t agree = 0;
  for (std::size_t u = 0; u < recs.size(); ++u) {
    CHECK(srecs[u]["total"].get<double>() <= recs[u]["total"].get<double>() + 1e-9);
    agree += srecs[u]["signs"] == srecs[u]["reference"];
  }
  CHECK(agree >= 20);
}

TEST_CASE("decode: unequal lengths in synced mode become error records") {
  TempDir dir("unequal");
  REQUIRE(run({"generate", "--demo", "--n", "12", "--seed", "6", "--jitter", "2", "--out", dir / "c.jsonl"}).code ==
          kExitOk);
  const Corpus corpus = load_corpus(dir / "c.jsonl");
  const Run r = run({"decode", "--demo", "--corpus", dir / "c.jsonl", "--mode", "synced"});
  REQUIRE(r.code == kExitOk);
  const auto recs = json_lines(r.out);
  REQUIRE(recs.size() == corpus.utterances.size());
  std::size_t errors = 0;
  for (std::size_t u = 0; u < recs.size(); ++u) {
    const auto& ch = corpus.utterances[u].channels;
    const bool equal = ch[0].size() == ch[1].size() && ch[1].size() == ch[2].size();
    CHECK(recs[u]["error"].is_null() == equal);
    if (!equal) {
      ++errors;
      CHECK(recs[u]["signs"].is_null());
      CHECK(recs[u]["error"].get<std::string>().find("UnequalChannelLengths") != std::string::npos);
    }
  }
  CHECK(errors > 0);
}

TEST_CASE("decode: corpus channels that do not match the model exit 3") {
  TempDir dir("mismatch");
  REQUIRE(run({"generate", "--demo", "--n", "3", "--seed", "1", "--out", dir / "c.jsonl"}).code == kExitOk);
  Corpus corpus = load_corpus(dir / "c.jsonl");
  corpus.channels[2] = "torso";
  save_corpus(dir / "m.jsonl", corpus);
  CHECK(run({"decode", "--demo", "--corpus", dir / "m.jsonl"}).code == kExitInput);
  CHECK(run({"evaluate", "--demo", "--corpus", dir / "m.jsonl"}).code == kExitInput);
}

TEST_CASE("evaluate and complexity") {
  TempDir dir("evaluate");
  REQUIRE(run({"generate", "--demo", "--n", "20", "--seed", "9", "--out", dir / "c.jsonl"}).code == kExitOk);
  const Run a = run({"evaluate", "--demo", "--corpus", dir / "c.jsonl", "--no-timing"});
  const Run b = run({"evaluate", "--demo", "--corpus", dir / "c.jsonl", "--no-timing", "--out", dir / "r.json",
                     "--hypotheses", dir / "h.jsonl"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(a.out == slurp(dir / "r.json"));
  CHECK(json_lines(slurp(dir / "h.jsonl")).size() == 20);
  const json report = json::parse(a.out);
  CHECK(report["ser"] == 0.0);
  CHECK(report["exact_match"] == 1.0);
  CHECK_FALSE(report.contains("mean_decode_seconds"));
  CHECK(json::parse(run({"evaluate", "--demo", "--corpus", dir / "c.jsonl"}).out).contains("mean_decode_seconds"));

  const Run demo = run({"complexity", "--demo"});
  REQUIRE(demo.code == kExitOk);
  const ModelCount mc = model_count(demo_lexicon());
  CHECK(report["model_count"]["factored"] == mc.factored);
  CHECK(report["model_count"]["product"] == mc.product);
  CHECK(demo.out.find("factored=" + std::to_string(mc.factored) + " product=" + std::to_string(mc.product)) == 0);

  CHECK(run({"complexity", "--inventories", "10,8,4"}).out.rfind("factored=22 product=320 ", 0) == 0);
  CHECK(run({"complexity", "--inventories", "10,8,4,6"}).out.rfind("factored=28 product=1920 ", 0) == 0);
  CHECK(run({"complexity", "--inventories", "7"}).out.rfind("factored=7 product=7 ratio=1", 0) == 0);
}

TEST_CASE("split writes both parts") {
  TempDir dir("split");
  REQUIRE(run({"generate", "--demo", "--n", "10", "--seed", "1", "--out", dir / "c.jsonl"}).code == kExitOk);
  const Run r = run({"split", "--corpus", dir / "c.jsonl", "--fraction", "0.8", "--seed", "2", "--train-out",
                     dir / "tr.jsonl", "--test-out", dir / "te.jsonl"});
  REQUIRE(r.code == kExitOk);
  CHECK(load_corpus(dir / "tr.jsonl").utterances.size() == 8);
  CHECK(load_corpus(dir / "te.jsonl").utterances.size() == 2);
}
