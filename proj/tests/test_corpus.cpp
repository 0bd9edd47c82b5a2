#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "phmm/compose.hpp"
#include "phmm/corpus.hpp"
#include "phmm/demo.hpp"
#include "phmm/error.hpp"
#include "phmm/inference.hpp"
#include "support/random_models.hpp"

using namespace phmm;
using namespace phmm::testing;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Parse;
}

// Every state emits its own symbol with certainty.
Lexicon deterministic_lexicon() {
  Lexicon lex;
  lex.policy = EpenthesisPolicy::between_signs;
  for (std::size_t c = 0; c < 2; ++c) {
    ChannelInventory inv{default_channel_names()[c], {}, 2};
    for (std::size_t p = 0; p < 3; ++p) {
      Matrix probs(2, 6, 0.0);
      probs(0, 2 * p) = 1.0;
      probs(1, 2 * p + 1) = 1.0;
      inv.phonemes.push_back({"p" + std::to_string(p), make_bakis(2, 0.5, EmissionModel::discrete(probs)), 0.5});
    }
    lex.channels.push_back(inv);
  }
  lex.signs = {{"a", {{0}, {1}}}, {"b", {{1, 0}, {0}}}, {"c", {{1}, {1}}}, {"d", {{0, 1}, {0, 1}}}};
  return lex;
}

std::string dump(const Corpus& c) {
  std::ostringstream out;
  write_corpus(out, c);
  return out.str();
}

}  // namespace

TEST_CASE("generate: noiseless deterministic emissions follow the state path") {
  const Lexicon lex = deterministic_lexicon();
  GenConfig cfg;
  cfg.n_utterances = 40;
  cfg.signs_per_utterance = {1, 3};
  cfg.seed = 7;
  cfg.include_paths = true;
  const Corpus corpus = generate(lex, cfg);
  REQUIRE(corpus.utterances.size() == 40);
  CHECK(corpus.channels == std::vector<std::string>{"right_hand", "left_hand"});
  for (const auto& u : corpus.utterances) {
    REQUIRE(u.paths.has_value());
    const auto signs = lex.sign_indices(u.signs);
    CHECK(u.channels[0].size() == u.channels[1].size());
    for (std::size_t c = 0; c < 2; ++c) {
      const ComposedModel cm = compose_utterance(lex, c, signs);
      const auto& path = (*u.paths)[c];
      REQUIRE(path.size() == u.channels[c].size());
      // the path runs through every link and finishes in the last state
      CHECK(path.back() == cm.segments.back().last_state());
      for (std::size_t t = 0; t < path.size(); ++t) {
        const auto seg = std::find_if(cm.segments.begin(), cm.segments.end(),
                                      [&](const auto& s) { return path[t] <= s.last_state(); });
        const auto& pm = lex.channels[c].phonemes[seg->link.phoneme];
        const Symbol expected = static_cast<Symbol>(2 * std::stoi(pm.id.substr(1)) + (path[t] - seg->offset));
        CHECK(std::get<Symbol>(u.channels[c][t]) == expected);
      }
      const Matrix emis = emission_log_matrix(cm.hmm.emissions, u.channels[c]);
      CHECK(std::isfinite(path_log_prob(TransitionGraph::build(cm.hmm), emis, path)));
      CHECK(std::isfinite(forward(cm.hmm, u.channels[c]).loglik));
    }
  }
}

TEST_CASE("generate: determinism and seed sensitivity") {
  const Lexicon lex = demo_lexicon();
  GenConfig cfg;
  cfg.n_utterances = 15;
  cfg.seed = 3;
  cfg.channel_noise = {0.05};
  cfg.desync_jitter = 2;
  const std::string a = dump(generate(lex, cfg));
  CHECK(a == dump(generate(lex, cfg)));
  cfg.seed = 4;
  CHECK(a != dump(generate(lex, cfg)));

  // utterance i only depends on (seed, i)
  cfg.seed = 3;
  cfg.n_utterances = 5;
  const Corpus prefix = generate(lex, cfg);
  cfg.n_utterances = 15;
  const Corpus full = generate(lex, cfg);
  for (std::size_t i = 0; i < 5; ++i) CHECK(prefix.utterances[i] == full.utterances[i]);
}

TEST_CASE("generate: single-sign draws are uniform over the vocabulary") {
  Lexicon lex = deterministic_lexicon();
  GenConfig cfg;
  cfg.n_utterances = 1000;
  cfg.signs_per_utterance = {1, 1};
  cfg.seed = 11;
  std::map<std::string, int> counts;
  for (const auto& u : generate(lex, cfg).utterances) {
    REQUIRE(u.signs.size() == 1);
    ++counts[u.signs[0]];
  }
  const double sigma = std::sqrt(1000 * 0.25 * 0.75);
  for (const auto& s : lex.signs) CHECK(std::abs(counts[s.id] - 250.0) <= 3 * sigma);
}

TEST_CASE("generate: jitter, dwell and length ranges") {
  const Lexicon lex = demo_lexicon();
  GenConfig cfg;
  cfg.n_utterances = 60;
  cfg.signs_per_utterance = {2, 3};
  cfg.seed = 21;
  cfg.desync_jitter = 3;
  cfg.epenthesis_dwell = IntRange{3, 8};
  cfg.include_paths = true;
  const Corpus corpus = generate(lex, cfg);
  bool any_differ = false;
  for (const auto& u : corpus.utterances) {
    CHECK(u.signs.size() >= 2);
    CHECK(u.signs.size() <= 3);
    const auto signs = lex.sign_indices(u.signs);
    for (std::size_t c = 0; c < 3; ++c) {
      const long diff = static_cast<long>(u.channels[c].size()) - static_cast<long>(u.channels[0].size());
      CHECK(std::abs(diff) <= 3);
      any_differ = any_differ || diff != 0;
      const ComposedModel cm = compose_utterance(lex, c, signs);
      for (const auto& seg : cm.segments) {
        if (!seg.link.epenthesis) continue;
        std::size_t frames = 0;
        for (std::size_t q : (*u.paths)[c]) frames += q >= seg.offset && q <= seg.last_state();
        CHECK(frames >= 3);
        CHECK(frames <= 8);
      }
    }
  }
  CHECK(any_differ);

  cfg.desync_jitter = 0;
  for (const auto& u : generate(lex, cfg).utterances) {
    CHECK(u.channels[1].size() == u.channels[0].size());
    CHECK(u.channels[2].size() == u.channels[0].size());
  }

  // a 3-state filler needs at least three frames
  cfg.epenthesis_dwell = IntRange{1, 2};
  CHECK(kind_of([&] { generate(lex, cfg); }) == ErrorKind::GenerationFailed);
}

TEST_CASE("generate: substitution noise rate") {
  const Lexicon lex = deterministic_lexicon();
  GenConfig cfg;
  cfg.n_utterances = 200;
  cfg.seed = 5;
  cfg.include_paths = true;
  cfg.channel_noise = {0.3, 1.0};
  const Corpus noisy = generate(lex, cfg);
  cfg.channel_noise = {0.0};
  const Corpus clean = generate(lex, cfg);
  std::size_t changed = 0, total = 0;
  for (std::size_t i = 0; i < noisy.utterances.size(); ++i) {
    const auto& n = noisy.utterances[i];
    const auto& c = clean.utterances[i];
    CHECK(n.paths == c.paths);  // noise draws come after the path draws
    for (std::size_t t = 0; t < n.channels[0].size(); ++t) {
      changed += n.channels[0][t] != c.channels[0][t];
      ++total;
    }
    for (std::size_t t = 0; t < n.channels[1].size(); ++t) CHECK(n.channels[1][t] != c.channels[1][t]);
  }
  const double rate = static_cast<double>(changed) / static_cast<double>(total);
  CHECK(std::abs(rate - 0.3) <= 3 * std::sqrt(0.3 * 0.7 / static_cast<double>(total)));

  cfg.channel_noise = {1.5};
  CHECK(kind_of([&] { generate(lex, cfg); }) == ErrorKind::InvalidConfig);
  cfg.channel_noise = {0.1, 0.1, 0.1};
  CHECK(kind_of([&] { generate(lex, cfg); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("generate: continuous channels") {
  Rng rng(9);
  Lexicon lex;
  ChannelInventory inv{"right_hand", {}, std::nullopt};
  for (int p = 0; p < 2; ++p) {
    Hmm h = random_gaussian_hmm(rng, 2, 3);
    h = make_bakis(2, 0.7, h.emissions);
    inv.phonemes.push_back({"g" + std::to_string(p), h, 0.3});
  }
  lex.channels.push_back(inv);
  lex.signs = {{"x", {{0}}}, {"y", {{1, 0}}}};
  GenConfig cfg;
  cfg.n_utterances = 10;
  cfg.channel_noise = {0.5};
  const Corpus corpus = generate(lex, cfg);
  for (const auto& u : corpus.utterances)
    for (const auto& x : u.channels[0]) CHECK(std::get<FeatureVector>(x).size() == 3);

  std::stringstream io;
  write_corpus(io, corpus);
  CHECK(read_corpus(io) == corpus);  // bit-exact doubles
}

TEST_CASE("generate: ground truth beats other single signs on separated data") {
  const Lexicon lex = demo_lexicon();
  GenConfig cfg;
  cfg.n_utterances = 40;
  cfg.signs_per_utterance = {1, 1};
  cfg.seed = 13;
  for (const auto& u : generate(lex, cfg).utterances) {
    double truth = 0.0;
    for (std::size_t c = 0; c < 3; ++c) truth += forward(compose_utterance_model(lex, c, u.signs), u.channels[c]).loglik;
    CHECK(std::isfinite(truth));
    for (const auto& s : lex.signs) {
      if (s.id == u.signs[0]) continue;
      double other = 0.0;
      for (std::size_t c = 0; c < 3; ++c)
        other += forward(compose_utterance_model(lex, c, std::vector<std::string>{s.id}), u.channels[c]).loglik;
      CHECK(truth >= other);
    }
  }
}

TEST_CASE("split: sizes, coverage and seeds") {
  GenConfig cfg;
  cfg.n_utterances = 10;
  const Corpus ten = generate(deterministic_lexicon(), cfg);
  const auto [train, test] = split(ten, 0.5, 1);
  CHECK(train.utterances.size() == 5);
  CHECK(test.utterances.size() == 5);
  std::set<std::string> ids;
  for (const auto& u : train.utterances) ids.insert(u.id);
  for (const auto& u : test.utterances) CHECK(ids.insert(u.id).second);
  CHECK(ids.size() == 10);

  const auto again = split(ten, 0.5, 1);
  CHECK(again.first == train);

  cfg.n_utterances = 20;
  const Corpus twenty = generate(deterministic_lexicon(), cfg);
  CHECK_FALSE(split(twenty, 0.5, 1).first == split(twenty, 0.5, 2).first);

  CHECK(kind_of([&] { split(ten, 0.01, 1); }) == ErrorKind::DegenerateSplit);
  CHECK(kind_of([&] { split(ten, 0.99, 1); }) == ErrorKind::DegenerateSplit);
  CHECK(kind_of([&] { split(Corpus{}, 0.5, 1); }) == ErrorKind::DegenerateSplit);
  CHECK(kind_of([&] { split(ten, 1.0, 1); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("corpus file format") {
  GenConfig cfg;
  cfg.n_utterances = 3;
  cfg.include_paths = true;
  const Lexicon lex = deterministic_lexicon();
  const Corpus corpus = generate(lex, cfg);
  const std::string text = dump(corpus);
  CHECK(text.rfind("{\"corpus_version\":1,\"id\":\"utt00000\",\"signs\":[", 0) == 0);
  std::istringstream in(text);
  const Corpus back = read_corpus(in);
  CHECK(back == corpus);
  CHECK(dump(back) == text);

  Corpus reordered = corpus;
  std::swap(reordered.channels[0], reordered.channels[1]);
  for (auto& u : reordered.utterances) {
    std::swap(u.channels[0], u.channels[1]);
    std::swap((*u.paths)[0], (*u.paths)[1]);
  }
  CHECK(observations_for(reordered, reordered.utterances[1], lex) ==
        observations_for(corpus, corpus.utterances[1], lex));

  auto parse = [](const std::string& s) {
    std::istringstream is(s);
    return read_corpus(is);
  };
  CHECK(kind_of([&] { parse("{\"corpus_version\":2,\"id\":\"a\",\"signs\":[],\"channels\":{}}\n"); }) ==
        ErrorKind::UnsupportedVersion);
  CHECK(kind_of([&] { parse("not json\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] { parse("{\"id\":\"a\"}\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([&] {
          parse("{\"corpus_version\":1,\"id\":\"a\",\"signs\":[\"x\"],\"channels\":{\"h\":[0,[1.0]]}}\n");
        }) == ErrorKind::Parse);
  CHECK(parse("\n\n").utterances.empty());
}
