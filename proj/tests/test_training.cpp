#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phmm/compose.hpp"
#include "phmm/error.hpp"
#include "phmm/inference.hpp"
#include "phmm/training.hpp"
#include "support/random_models.hpp"

using namespace phmm;
using namespace phmm::testing;

namespace {

double total_loglik(const Hmm& h, std::span<const ObservationSeq> data) {
  double ll = 0.0;
  for (const auto& seq : data) ll += forward(h, seq).loglik;
  return ll;
}

void check_monotone(const TrainReport& r) {
  for (std::size_t k = 1; k < r.loglik_trajectory.size(); ++k)
    CHECK(r.loglik_trajectory[k] >= r.loglik_trajectory[k - 1] - 1e-10);
}

std::vector<ObservationSeq> sample_many(const Hmm& h, std::size_t count, std::size_t len,
                                        std::uint64_t seed) {
  std::vector<ObservationSeq> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample(h, len, derive_seed(seed, i)).obs);
  return out;
}

Hmm two_state_truth() {
  Hmm h;
  h.pi = {0.8, 0.2};
  h.trans = Matrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});
  h.emissions = EmissionModel::discrete(Matrix::from_rows({{0.7, 0.2, 0.1}, {0.1, 0.2, 0.7}}));
  return h;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

}  // namespace

TEST_CASE("baum_welch: deterministic model is a fixed point") {
  const Hmm det = make_bakis(3, 0.0, EmissionModel::discrete(Matrix::from_rows(
                                         {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})));
  const auto data = sample_many(det, 5, 6, 1);
  TrainConfig cfg;
  cfg.smoothing = 0.0;
  const auto r = baum_welch(det, data, cfg);
  CHECK(r.report.iterations_run == 1);
  CHECK(r.report.converged);
  REQUIRE(r.report.loglik_trajectory.size() == 2);
  CHECK(r.report.loglik_trajectory[0] == 0.0);
  CHECK(r.report.loglik_trajectory[1] == 0.0);
  CHECK(r.model == det);
}

TEST_CASE("baum_welch: single state learns the repeated symbol") {
  Hmm one;
  one.pi = {1.0};
  one.trans = Matrix::from_rows({{1.0}});
  one.emissions = EmissionModel::discrete(Matrix::from_rows({{0.25, 0.25, 0.5}}));
  const std::vector<ObservationSeq> data{symbols({0, 0, 0}), symbols({0, 0})};
  const auto r = baum_welch(one, data, TrainConfig{});
  CHECK(r.model.emissions.probs()(0, 0) >= 1.0 - 1e-7);
  CHECK(r.model.emissions.probs()(0, 1) > 0.0);  // smoothing keeps it positive
}

TEST_CASE("baum_welch: monotone trajectory re-derived by forward after every iteration") {
  const Hmm truth = two_state_truth();
  const auto data = sample_many(truth, 50, 30, 17);
  Rng rng(5);
  const Hmm init = random_discrete_hmm(rng, 2, 3);

  std::vector<double> rescored{total_loglik(init, data)};
  TrainConfig cfg;
  cfg.seed = 3;
  const auto r = baum_welch(init, data, cfg, [&](std::size_t, const Hmm& m) {
    CHECK_NOTHROW(validate(m));
    rescored.push_back(total_loglik(m, data));
  });
  check_monotone(r.report);
  CHECK(r.report.final_loglik() >= r.report.loglik_trajectory.front());
  REQUIRE(rescored.size() == r.report.loglik_trajectory.size());
  for (std::size_t k = 0; k < rescored.size(); ++k)
    CHECK(std::abs(rescored[k] - r.report.loglik_trajectory[k]) <= 1e-9);
}

TEST_CASE("baum_welch: gaussian emissions keep the variance floor and improve") {
  Rng rng(12);
  const Hmm truth = random_gaussian_hmm(rng, 3, 2);
  std::vector<ObservationSeq> data;
  for (std::size_t i = 0; i < 20; ++i) data.push_back(sample(truth, 25, 100 + i).obs);
  const Hmm init = initialize(truth, data, InitStrategy::uniform_perturbed, 9);
  const auto r = baum_welch(init, data, TrainConfig{}, [](std::size_t, const Hmm& m) {
    CHECK_NOTHROW(validate(m));
  });
  check_monotone(r.report);
  CHECK(r.report.final_loglik() > r.report.loglik_trajectory.front());
}

TEST_CASE("baum_welch: max_iters, determinism and thread independence") {
  const auto data = sample_many(two_state_truth(), 20, 15, 4);
  Rng rng(8);
  const Hmm init = random_discrete_hmm(rng, 2, 3);

  TrainConfig one;
  one.max_iters = 1;
  const auto r1 = baum_welch(init, data, one);
  CHECK(r1.report.iterations_run == 1);
  CHECK(r1.report.loglik_trajectory.size() == 2);

  TrainConfig cfg;
  const auto a = baum_welch(init, data, cfg);
  const auto b = baum_welch(init, data, cfg);
  cfg.threads = 3;
  const auto c = baum_welch(init, data, cfg);
  CHECK(a.model == b.model);
  CHECK(a.model == c.model);
  CHECK(a.report.loglik_trajectory == c.report.loglik_trajectory);
}

TEST_CASE("baum_welch: error paths") {
  const Hmm h = two_state_truth();
  CHECK_THROWS_AS(baum_welch(h, std::vector<ObservationSeq>{}, TrainConfig{}), Error);
  try {
    baum_welch(h, std::vector<ObservationSeq>{{FeatureVector{1.0}}}, TrainConfig{});
    FAIL("");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IncompatibleData);
  }
  Hmm zero = h;
  zero.emissions = EmissionModel::discrete(Matrix::from_rows({{1, 0, 0}, {1, 0, 0}}));
  try {
    baum_welch(zero, std::vector<ObservationSeq>{symbols({2, 2})}, TrainConfig{});
    FAIL("");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateModel);
  }
  TrainConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(baum_welch(h, std::vector<ObservationSeq>{symbols({0})}, bad), Error);
}

TEST_CASE("initialize respects topology and data statistics") {
  const Hmm shape = make_bakis(3, 0.5, EmissionModel::discrete(Matrix(3, 4, 0.25)));
  const std::vector<ObservationSeq> data{symbols({0, 0, 1, 1, 1, 1})};
  for (auto strategy : {InitStrategy::uniform_perturbed, InitStrategy::from_global_stats}) {
    const Hmm h = initialize(shape, data, strategy, 42);
    CHECK_NOTHROW(validate(h));
    CHECK(h.pi == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(h.trans(0, 2) == 0.0);
    CHECK(h.emissions.probs()(1, 3) == 0.0);  // unseen symbol
    CHECK(h.emissions.probs()(1, 1) > h.emissions.probs()(1, 0));
  }
  const Hmm flat = initialize(shape, data, InitStrategy::from_global_stats, 1);
  CHECK(flat.trans(0, 0) == 0.5);
  CHECK(flat.emissions.probs()(0, 1) == doctest::Approx(4.0 / 6.0));
  const Hmm a = initialize(shape, data, InitStrategy::uniform_perturbed, 1);
  const Hmm b = initialize(shape, data, InitStrategy::uniform_perturbed, 2);
  CHECK_FALSE(a == b);
}

TEST_CASE("train_segmented: reduction, independence, missing data") {
  Rng rng(30);
  const Hmm p_truth = random_bakis_hmm(rng, 3, 4);
  const Hmm q_truth = random_bakis_hmm(rng, 3, 4);
  std::map<std::string, std::vector<ObservationSeq>> segs;
  segs["p"] = sample_many(p_truth, 15, 9, 1);
  segs["q"] = sample_many(q_truth, 15, 9, 2);

  TrainConfig cfg;
  cfg.seed = 77;
  const std::vector<PhonemeTemplate> only_p{{"p", p_truth}};
  const auto single = train_segmented(only_p, segs, cfg);
  const Hmm init = initialize(p_truth, segs["p"], cfg.init, phoneme_seed(cfg.seed, "p"));
  TrainConfig sub = cfg;
  sub.seed = phoneme_seed(cfg.seed, "p");
  CHECK(single.models.at("p").hmm == baum_welch(init, segs["p"], sub).model);
  CHECK(single.models.at("p").exit_prob > 0.0);
  CHECK(single.models.at("p").exit_prob <= 1.0);

  const std::vector<PhonemeTemplate> both{{"p", p_truth}, {"q", q_truth}};
  const auto r1 = train_segmented(both, segs, cfg);
  auto swapped = segs;
  swapped["q"] = sample_many(p_truth, 7, 5, 99);
  const auto r2 = train_segmented(both, swapped, cfg);
  CHECK(r1.models.at("p") == r2.models.at("p"));
  CHECK_FALSE(r1.models.at("q") == r2.models.at("q"));

  segs.erase("q");
  try {
    train_segmented(both, segs, cfg);
    FAIL("");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingPhonemeData);
  }
}

TEST_CASE("train_segmented: recovered models score held-out data like the generators") {
  Rng rng(404);
  std::vector<PhonemeTemplate> inventory;
  std::map<std::string, Hmm> truths;
  std::map<std::string, std::vector<ObservationSeq>> train, held_out;
  for (int p = 0; p < 4; ++p) {
    const std::string id = "ph" + std::to_string(p);
    Hmm truth = random_bakis_hmm(rng, 3, 5);
    // sharpen emissions so the phonemes are learnable from modest data
    Matrix probs(3, 5, 0.05);
    for (std::size_t s = 0; s < 3; ++s) probs(s, (p + s) % 5) = 0.8;
    truth.emissions = EmissionModel::discrete(probs);
    train[id] = sample_many(truth, 150, 12, derive_seed(1, p));
    held_out[id] = sample_many(truth, 100, 12, derive_seed(2, p));
    inventory.push_back({id, truth});
    truths[id] = truth;
  }
  TrainConfig cfg;
  cfg.seed = 5;
  const auto result = train_segmented(inventory, train, cfg);
  for (const auto& [id, truth] : truths) {
    const double reference = total_loglik(truth, held_out[id]);
    const double recovered = total_loglik(result.models.at(id).hmm, held_out[id]);
    CHECK(std::abs(recovered - reference) / std::abs(reference) <= 0.05);
    check_monotone(result.reports.at(id));
  }
}

TEST_CASE("train_embedded: single phoneme single sign reduces to baum_welch") {
  Rng rng(50);
  LexiconShape shape;
  shape.channels = 1;
  shape.signs = 1;
  shape.inventory = 1;
  shape.states = 3;
  const Lexicon lex = random_lexicon(rng, shape);
  const Hmm& h = lex.channels[0].phonemes[0].hmm;
  std::vector<LabeledSequence> utts;
  std::vector<ObservationSeq> plain;
  for (std::size_t i = 0; i < 10; ++i) {
    auto obs = sample(h, 8, i).obs;
    utts.push_back({{0}, obs});
    plain.push_back(obs);
  }
  const auto emb = train_embedded(lex, 0, utts, TrainConfig{});
  const auto bw = baum_welch(h, plain, TrainConfig{});
  const Hmm& e = emb.phonemes[0].hmm;
  CHECK(max_abs_diff(e.trans, bw.model.trans) <= 1e-12);
  CHECK(max_abs_diff(e.emissions.probs(), bw.model.emissions.probs()) <= 1e-12);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(e.pi[i] - bw.model.pi[i]) <= 1e-12);
  REQUIRE(emb.report.loglik_trajectory.size() == bw.report.loglik_trajectory.size());
  for (std::size_t k = 0; k < bw.report.loglik_trajectory.size(); ++k)
    CHECK(std::abs(emb.report.loglik_trajectory[k] - bw.report.loglik_trajectory[k]) <= 1e-9);
}

namespace {

struct EmbeddedFixture {
  Lexicon lexicon;
  std::vector<LabeledSequence> utterances;
};

EmbeddedFixture embedded_fixture(std::uint64_t seed, std::size_t n_utts) {
  Rng rng(seed);
  LexiconShape shape;
  shape.channels = 1;
  shape.signs = 3;
  shape.inventory = 3;
  shape.states = 3;
  shape.alphabet = 6;
  shape.phonemes_per_sign = 2;
  shape.policy = EpenthesisPolicy::between_signs;
  EmbeddedFixture f{random_lexicon(rng, shape), {}};
  for (std::size_t u = 0; u < n_utts; ++u) {
    std::vector<std::size_t> signs;
    const std::size_t len = 1 + rng() % 3;
    for (std::size_t k = 0; k < len; ++k) signs.push_back(rng() % 3);
    const auto cm = compose_utterance(f.lexicon, 0, signs);
    f.utterances.push_back({signs, sample(cm.hmm, 3 * cm.hmm.n_states(), rng()).obs});
  }
  return f;
}

double rescore(const Lexicon& lex, std::span<const LabeledSequence> utts) {
  double ll = 0.0;
  for (const auto& u : utts) ll += forward(compose_utterance_model(lex, 0, lex.sign_ids(u.signs)), u.obs).loglik;
  return ll;
}

}  // namespace

TEST_CASE("train_embedded: monotone, re-scored trajectory on a 3-sign lexicon") {
  const auto f = embedded_fixture(61, 100);
  const auto full = train_embedded(f.lexicon, 0, f.utterances, TrainConfig{});
  check_monotone(full.report);
  CHECK(full.report.untouched_phonemes.empty());
  CHECK(std::abs(rescore(f.lexicon, f.utterances) - full.report.loglik_trajectory[0]) <= 1e-9);

  for (std::size_t k = 1; k <= 4 && k <= full.report.iterations_run; ++k) {
    TrainConfig cfg;
    cfg.max_iters = k;
    const auto partial = train_embedded(f.lexicon, 0, f.utterances, cfg);
    Lexicon trained = f.lexicon;
    trained.channels[0].phonemes = partial.phonemes;
    CHECK_NOTHROW(validate(trained));
    CHECK(std::abs(rescore(trained, f.utterances) - partial.report.final_loglik()) <= 1e-9);
    CHECK(partial.report.final_loglik() == full.report.loglik_trajectory[k]);
  }

  TrainConfig threaded;
  threaded.threads = 4;
  const auto t = train_embedded(f.lexicon, 0, f.utterances, threaded);
  CHECK(t.report.loglik_trajectory == full.report.loglik_trajectory);
  for (std::size_t p = 0; p < t.phonemes.size(); ++p) CHECK(t.phonemes[p] == full.phonemes[p]);
}

TEST_CASE("train_embedded: unused phoneme is returned unchanged and flagged") {
  auto f = embedded_fixture(62, 20);
  // a fourth phoneme no sign uses
  Rng rng(1);
  f.lexicon.channels[0].phonemes.push_back(random_phoneme(rng, "unused", 3, 6, true));
  const auto r = train_embedded(f.lexicon, 0, f.utterances, TrainConfig{});
  CHECK(r.report.untouched_phonemes == std::vector<std::string>{"unused"});
  CHECK(r.phonemes.back() == f.lexicon.channels[0].phonemes.back());

  std::vector<LabeledSequence> bad{{{7}, symbols({0})}};
  try {
    train_embedded(f.lexicon, 0, bad, TrainConfig{});
    FAIL("");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownSign);
  }
}
