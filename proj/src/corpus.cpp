#include "phmm/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "phmm/compose.hpp"
#include "phmm/error.hpp"
#include "phmm/random.hpp"

namespace phmm {

using json = nlohmann::ordered_json;

void GenConfig::validate(const Lexicon& lexicon) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (n_utterances == 0) fail("n_utterances must be positive");
  if (signs_per_utterance.lo == 0 || signs_per_utterance.lo > signs_per_utterance.hi)
    fail("signs_per_utterance must be a nonempty range of positive counts");
  if (epenthesis_dwell && (epenthesis_dwell->lo == 0 || epenthesis_dwell->lo > epenthesis_dwell->hi))
    fail("epenthesis_dwell must be a nonempty range of positive frame counts");
  if (channel_noise.size() != 1 && channel_noise.size() != lexicon.n_channels())
    fail("channel_noise needs one value or one per channel");
  for (std::size_t c = 0; c < lexicon.n_channels(); ++c) {
    const double p = noise(c);
    if (!(p >= 0.0) || !std::isfinite(p)) fail("channel noise must be finite and nonnegative");
    if (lexicon.channels[c].phonemes.front().hmm.emissions.is_discrete() && p > 1.0)
      fail("substitution probability above 1 for channel '" + lexicon.channels[c].name + "'");
  }
}

double GenConfig::noise(std::size_t channel) const {
  return channel_noise.size() == 1 ? channel_noise[0] : channel_noise.at(channel);
}

namespace {

constexpr std::size_t kMaxAttempts = 1000;
constexpr std::size_t kMaxFrames = 100000;

struct Chain {
  ComposedModel model;
  std::vector<double> exit;  // termination probability per state
};

Chain open_chain(const Lexicon& lexicon, std::size_t c, std::span<const std::size_t> signs) {
  const auto links = expand_signs(lexicon, c, signs);
  Chain ch{compose_chain(lexicon.channels[c], links, true, true), {}};
  ch.exit.assign(ch.model.hmm.n_states(), 0.0);
  const auto& last = ch.model.segments.back();
  ch.exit[last.last_state()] = lexicon.channels[c].phonemes[last.link.phoneme].exit_prob;
  return ch;
}

// Runs the chain until it leaves through the final exit.
std::optional<StatePath> free_run(const Chain& ch, Rng& rng) {
  const Hmm& h = ch.model.hmm;
  StatePath path{sample_index(h.pi, rng)};
  while (path.size() < kMaxFrames) {
    const std::size_t q = path.back();
    if (uniform01(rng) < ch.exit[q]) return path;
    path.push_back(sample_index(h.trans.row(q), rng));
  }
  return std::nullopt;
}

// A path of exactly `len` frames drawn from the chain conditioned on leaving
// right after the last frame; nullopt when no such path exists.
std::optional<StatePath> run_for(const Chain& ch, std::size_t len, Rng& rng) {
  const Hmm& h = ch.model.hmm;
  const std::size_t n = h.n_states();
  std::vector<std::vector<double>> beta(len, std::vector<double>(n, 0.0));
  beta[len - 1] = ch.exit;
  for (std::size_t t = len - 1; t-- > 0;) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += h.trans(i, j) * beta[t + 1][j];
      beta[t][i] = acc;
      total += acc;
    }
    if (total <= 0.0) return std::nullopt;
    for (double& b : beta[t]) b /= total;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = h.pi[i] * beta[0][i];
  if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0.0; })) return std::nullopt;
  StatePath path{sample_index(w, rng)};
  for (std::size_t t = 1; t < len; ++t) {
    for (std::size_t j = 0; j < n; ++j) w[j] = h.trans(path.back(), j) * beta[t][j];
    path.push_back(sample_index(w, rng));
  }
  return path;
}

bool dwell_ok(const Chain& ch, const StatePath& path, const std::optional<IntRange>& dwell) {
  if (!dwell) return true;
  for (const auto& seg : ch.model.segments) {
    if (!seg.link.epenthesis) continue;
    std::size_t frames = 0;
    for (std::size_t q : path) frames += q >= seg.offset && q <= seg.last_state();
    if (frames < dwell->lo || frames > dwell->hi) return false;
  }
  return true;
}

Observation add_noise(const EmissionModel& em, Observation x, double level, Rng& rng) {
  if (level <= 0.0) return x;
  if (em.is_discrete()) {
    const auto alphabet = em.alphabet_size();
    if (alphabet < 2 || uniform01(rng) >= level) return x;
    const auto s = std::get<Symbol>(x);
    auto k = static_cast<Symbol>(uniform_index(rng, alphabet - 1));
    return Symbol{k >= s ? k + 1 : k};
  }
  std::normal_distribution<double> normal(0.0, level);
  auto v = std::get<FeatureVector>(x);
  for (double& d : v) d += normal(rng);
  return v;
}

std::string utterance_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt%05zu", index);
  return buf;
}

Utterance generate_one(const Lexicon& lexicon, const GenConfig& cfg, std::size_t index) {
  Rng rng(derive_seed(cfg.seed, index));
  const auto& range = cfg.signs_per_utterance;
  const std::size_t n_signs = range.lo + uniform_index(rng, range.hi - range.lo + 1);
  std::vector<std::size_t> signs(n_signs);
  for (auto& s : signs) s = uniform_index(rng, lexicon.signs.size());

  const std::size_t C = lexicon.n_channels();
  std::vector<Chain> chains;
  for (std::size_t c = 0; c < C; ++c) chains.push_back(open_chain(lexicon, c, signs));

  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<StatePath> paths;
    auto lead = free_run(chains[0], rng);
    if (!lead || !dwell_ok(chains[0], *lead, cfg.epenthesis_dwell)) continue;
    const std::size_t T0 = lead->size();
    paths.push_back(std::move(*lead));
    for (std::size_t c = 1; c < C && paths.size() == c; ++c) {
      for (std::size_t tries = 0; tries < 20; ++tries) {
        std::size_t len = T0;
        if (cfg.desync_jitter > 0) {
          const std::size_t lo = T0 > cfg.desync_jitter ? T0 - cfg.desync_jitter : 1;
          len = lo + uniform_index(rng, T0 + cfg.desync_jitter - lo + 1);
        }
        auto p = run_for(chains[c], len, rng);
        if (p && dwell_ok(chains[c], *p, cfg.epenthesis_dwell)) {
          paths.push_back(std::move(*p));
          break;
        }
      }
    }
    if (paths.size() != C) continue;

    Utterance u;
    u.id = utterance_id(index);
    u.signs = lexicon.sign_ids(signs);
    for (std::size_t c = 0; c < C; ++c) {
      const EmissionModel& em = chains[c].model.hmm.emissions;
      ObservationSeq obs;
      for (std::size_t q : paths[c]) obs.push_back(add_noise(em, em.sample(q, rng), cfg.noise(c), rng));
      u.channels.push_back(std::move(obs));
    }
    if (cfg.include_paths) u.paths = std::move(paths);
    return u;
  }
  throw Error(ErrorKind::GenerationFailed,
              "could not satisfy length and dwell constraints for utterance " + std::to_string(index),
              index);
}

}  // namespace

Corpus generate(const Lexicon& lexicon, const GenConfig& cfg) {
  validate(lexicon);
  cfg.validate(lexicon);
  Corpus corpus;
  for (const auto& ch : lexicon.channels) corpus.channels.push_back(ch.name);
  for (std::size_t i = 0; i < cfg.n_utterances; ++i) corpus.utterances.push_back(generate_one(lexicon, cfg, i));
  return corpus;
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorKind::InvalidConfig, "train fraction must lie in (0, 1)");
  const std::size_t n = corpus.utterances.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw Error(ErrorKind::DegenerateSplit,
                "fraction " + std::to_string(train_fraction) + " of " + std::to_string(n) +
                    " utterances leaves one side empty");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
  std::vector<char> in_train(n, 0);
  for (std::size_t k = 0; k < n_train; ++k) in_train[perm[k]] = 1;

  std::pair<Corpus, Corpus> out;
  out.first.channels = out.second.channels = corpus.channels;
  for (std::size_t i = 0; i < n; ++i)
    (in_train[i] ? out.first : out.second).utterances.push_back(corpus.utterances[i]);
  return out;
}

MultiObservation observations_for(const Corpus& corpus, const Utterance& u, const Lexicon& lexicon) {
  MultiObservation out;
  for (const auto& ch : lexicon.channels) {
    const auto it = std::find(corpus.channels.begin(), corpus.channels.end(), ch.name);
    if (it == corpus.channels.end())
      throw Error(ErrorKind::IncompatibleData, "corpus has no channel '" + ch.name + "'");
    out.push_back(u.channels.at(static_cast<std::size_t>(it - corpus.channels.begin())));
  }
  return out;
}

namespace {

json observations_to_json(const ObservationSeq& seq) {
  json arr = json::array();
  for (const auto& x : seq) {
    if (const auto* s = std::get_if<Symbol>(&x))
      arr.push_back(*s);
    else
      arr.push_back(std::get<FeatureVector>(x));
  }
  return arr;
}

ObservationSeq observations_from_json(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw Error(ErrorKind::Parse, "channel data must be a nonempty array");
  const bool discrete = arr.front().is_number_unsigned();
  ObservationSeq out;
  for (const auto& x : arr) {
    if (discrete) {
      if (!x.is_number_unsigned() || x.get<std::uint64_t>() > UINT32_MAX)
        throw Error(ErrorKind::Parse, "expected a symbol index");
      out.emplace_back(static_cast<Symbol>(x.get<std::uint64_t>()));
    } else {
      if (!x.is_array() || x.empty()) throw Error(ErrorKind::Parse, "expected a feature vector");
      FeatureVector v;
      for (const auto& d : x) {
        if (!d.is_number()) throw Error(ErrorKind::Parse, "feature values must be numbers");
        v.push_back(d.get<double>());
      }
      if (!out.empty() && std::get<FeatureVector>(out.front()).size() != v.size())
        throw Error(ErrorKind::Parse, "feature vectors differ in length");
      out.emplace_back(std::move(v));
    }
  }
  return out;
}

}  // namespace

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& u : corpus.utterances) {
    json rec;
    rec["corpus_version"] = kCorpusVersion;
    rec["id"] = u.id;
    rec["signs"] = u.signs;
    json channels = json::object();
    for (std::size_t c = 0; c < corpus.channels.size(); ++c)
      channels[corpus.channels[c]] = observations_to_json(u.channels[c]);
    rec["channels"] = std::move(channels);
    if (u.paths) {
      json paths = json::object();
      for (std::size_t c = 0; c < corpus.channels.size(); ++c) paths[corpus.channels[c]] = (*u.paths)[c];
      rec["paths"] = std::move(paths);
    }
    out << rec.dump() << '\n';
  }
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "corpus line " + std::to_string(line_no) + ": ";
    try {
      const json rec = json::parse(line);
      if (!rec.is_object() || !rec.contains("corpus_version"))
        throw Error(ErrorKind::Parse, "missing corpus_version");
      const int version = rec.at("corpus_version").get<int>();
      if (version > kCorpusVersion || version < 1)
        throw Error(ErrorKind::UnsupportedVersion, "corpus_version " + std::to_string(version) +
                                                       " is not supported (max " +
                                                       std::to_string(kCorpusVersion) + ")");
      Utterance u;
      u.id = rec.at("id").get<std::string>();
      if (!ids.insert(u.id).second) throw Error(ErrorKind::Parse, "duplicate utterance id '" + u.id + "'");
      u.signs = rec.at("signs").get<std::vector<std::string>>();
      const json& channels = rec.at("channels");
      if (!channels.is_object() || channels.empty()) throw Error(ErrorKind::Parse, "channels must be an object");
      if (corpus.utterances.empty())
        for (const auto& [name, _] : channels.items()) corpus.channels.push_back(name);
      if (channels.size() != corpus.channels.size())
        throw Error(ErrorKind::Parse, "utterance '" + u.id + "' has a different channel set");
      for (const auto& name : corpus.channels) {
        if (!channels.contains(name))
          throw Error(ErrorKind::Parse, "utterance '" + u.id + "' lacks channel '" + name + "'");
        u.channels.push_back(observations_from_json(channels.at(name)));
      }
      if (rec.contains("paths")) {
        std::vector<StatePath> paths;
        for (const auto& name : corpus.channels) paths.push_back(rec.at("paths").at(name).get<StatePath>());
        u.paths = std::move(paths);
      }
      corpus.utterances.push_back(std::move(u));
    } catch (const Error& e) {
      throw Error(e.kind(), where + std::string(e.detail()));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, where + e.what());
    }
  }
  return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  write_corpus(out, corpus);
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  return read_corpus(in);
}

}  // namespace phmm
