#include "phmm/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "phmm/compose.hpp"
#include "phmm/error.hpp"
#include "phmm/inference.hpp"
#include "phmm/parallel_for.hpp"
#include "phmm/random.hpp"

namespace phmm {
namespace {

// Expected sufficient statistics of one or more sequences under one model.
struct Counts {
  std::vector<double> initial;
  Matrix transitions;
  SufficientStats emissions;
  double loglik = 0.0;

  static Counts like(const Hmm& h) {
    return {std::vector<double>(h.n_states(), 0.0), Matrix(h.n_states(), h.n_states()),
            SufficientStats::like(h.emissions), 0.0};
  }

  void merge(const Counts& o) {
    for (std::size_t i = 0; i < initial.size(); ++i) initial[i] += o.initial[i];
    for (std::size_t i = 0; i < transitions.rows(); ++i)
      for (std::size_t j = 0; j < transitions.cols(); ++j) transitions(i, j) += o.transitions(i, j);
    emissions.merge(o.emissions);
    loglik += o.loglik;
  }
};

Counts expected_counts(const Hmm& hmm, const TransitionGraph& g, const ObservationSeq& obs) {
  const Matrix emis = emission_log_matrix(hmm.emissions, obs);
  const ForwardResult fw = forward(g, emis);
  Counts c = Counts::like(hmm);
  c.loglik = fw.loglik;
  if (fw.loglik == kLogZero) return c;

  const Matrix beta = backward(g, emis);
  const std::size_t T = obs.size();
  const std::size_t n = hmm.n_states();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double gamma = std::min(1.0, std::exp(fw.alpha(t, i) + beta(t, i) - fw.loglik));
      if (t == 0) c.initial[i] += gamma;
      accumulate(c.emissions, i, obs[t], gamma);
    }
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (fw.alpha(t, i) == kLogZero) continue;
      for (const auto& arc : g.outgoing[i]) {
        const std::size_t j = arc.state;
        c.transitions(i, j) +=
            std::exp(fw.alpha(t, i) + arc.log_prob + emis(t + 1, j) + beta(t + 1, j) - fw.loglik);
      }
    }
  }
  return c;
}

void normalize_into(std::span<const double> counts, std::span<double> out) {
  double total = 0.0;
  for (double x : counts) total += x;
  if (total <= 0.0) return;  // no evidence: keep previous values
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] / total;
}

void check_data(const EmissionModel& em, std::span<const ObservationSeq> data) {
  if (data.empty()) throw Error(ErrorKind::IncompatibleData, "no training sequences");
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].empty())
      throw Error(ErrorKind::IncompatibleData, "sequence " + std::to_string(s) + " is empty", s);
    for (const auto& x : data[s]) {
      try {
        em.check_compatible(x);
      } catch (const Error& e) {
        throw Error(ErrorKind::IncompatibleData,
                    "sequence " + std::to_string(s) + ": " + e.what(), s);
      }
    }
  }
}

void check_finite(double loglik, std::size_t index) {
  if (loglik == kLogZero)
    throw Error(ErrorKind::DegenerateModel,
                "sequence " + std::to_string(index) + " has zero likelihood under the initial model",
                index);
}

bool has_converged(double prev, double cur, double rel_tol) {
  return std::abs(cur - prev) / (std::abs(cur) + 1.0) < rel_tol;
}

Counts e_step(const Hmm& hmm, std::span<const ObservationSeq> data, std::size_t threads) {
  const TransitionGraph g = TransitionGraph::build(hmm);
  std::vector<Counts> per(data.size());
  parallel_for(data.size(), threads, [&](std::size_t s) { per[s] = expected_counts(hmm, g, data[s]); });
  Counts total = Counts::like(hmm);
  for (std::size_t s = 0; s < per.size(); ++s) {
    check_finite(per[s].loglik, s);
    total.merge(per[s]);
  }
  return total;
}

Hmm m_step(const Hmm& old, const Counts& c, double smoothing) {
  Hmm next = old;
  normalize_into(c.initial, next.pi);
  for (std::size_t i = 0; i < old.n_states(); ++i) normalize_into(c.transitions.row(i), next.trans.row(i));
  next.emissions = maximize(c.emissions, smoothing, &old.emissions);
  return next;
}

}  // namespace

std::string_view to_string(InitStrategy s) {
  return s == InitStrategy::from_global_stats ? "from_global_stats" : "uniform_perturbed";
}

InitStrategy init_strategy_from_string(std::string_view name) {
  if (name == "uniform_perturbed") return InitStrategy::uniform_perturbed;
  if (name == "from_global_stats") return InitStrategy::from_global_stats;
  throw Error(ErrorKind::Parse, "unknown init strategy '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (max_iters < 1) throw Error(ErrorKind::InvalidConfig, "max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "rel_tol must be > 0");
  if (!(smoothing >= 0.0)) throw Error(ErrorKind::InvalidConfig, "smoothing must be >= 0");
}

std::uint64_t phoneme_seed(std::uint64_t seed, std::string_view id) {
  return derive_seed(seed, stable_hash(id));
}

Hmm initialize(const Hmm& shape, std::span<const ObservationSeq> data, InitStrategy strategy,
               std::uint64_t seed) {
  check_data(shape.emissions, data);
  Rng rng(seed);
  const bool perturb = strategy == InitStrategy::uniform_perturbed;
  auto noise = [&] { return perturb ? 0.9 + 0.2 * uniform01(rng) : 1.0; };
  auto normalize = [](std::span<double> row) {
    double total = 0.0;
    for (double x : row) total += x;
    for (double& x : row) x /= total;
  };

  const std::size_t n = shape.n_states();
  const bool bakis = shape.topology == Topology::left_to_right;
  Hmm h;
  h.topology = shape.topology;
  h.pi.assign(n, 0.0);
  if (bakis) {
    h.pi[0] = 1.0;
  } else {
    for (double& p : h.pi) p = noise();
    normalize(h.pi);
  }
  h.trans = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (!bakis || j == i || j == i + 1) h.trans(i, j) = noise();
    normalize(h.trans.row(i));
  }

  const EmissionModel& em = shape.emissions;
  if (em.is_discrete()) {
    std::vector<double> freq(em.alphabet_size(), 0.0);
    for (const auto& seq : data)
      for (const auto& x : seq) freq[std::get<Symbol>(x)] += 1.0;
    normalize(freq);
    Matrix probs(n, freq.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < freq.size(); ++k) probs(i, k) = freq[k] * noise();
      normalize(probs.row(i));
    }
    h.emissions = EmissionModel::discrete(std::move(probs));
    return h;
  }

  const std::size_t dim = em.dimension();
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  double count = 0.0;
  for (const auto& seq : data)
    for (const auto& x : seq) {
      const auto& v = std::get<FeatureVector>(x);
      for (std::size_t d = 0; d < dim; ++d) {
        sum[d] += v[d];
        sq[d] += v[d] * v[d];
      }
      count += 1.0;
    }
  Matrix means(n, dim), vars(n, dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const double mean = sum[d] / count;
    const double var = std::max(sq[d] / count - mean * mean, kVarianceFloor);
    const double sigma = std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) {
      double offset = 0.0;
      if (perturb) {
        offset = (uniform01(rng) - 0.5) * sigma;
      } else if (n > 1) {
        offset = (-0.5 + static_cast<double>(i) / static_cast<double>(n - 1)) * sigma;
      }
      means(i, d) = mean + offset;
      vars(i, d) = var;
    }
  }
  h.emissions = EmissionModel::gaussian(std::move(means), std::move(vars));
  return h;
}

TrainResult baum_welch(const Hmm& init, std::span<const ObservationSeq> data,
                       const TrainConfig& cfg, const IterationObserver& observer) {
  cfg.validate();
  validate(init);
  check_data(init.emissions, data);

  TrainResult out{init, {}};
  Counts counts = e_step(out.model, data, cfg.threads);
  out.report.loglik_trajectory.push_back(counts.loglik);

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    out.model = m_step(out.model, counts, cfg.smoothing);
    out.report.iterations_run = it;
    if (observer) observer(it, out.model);
    const double prev = counts.loglik;
    counts = e_step(out.model, data, cfg.threads);
    out.report.loglik_trajectory.push_back(counts.loglik);
    if (has_converged(prev, counts.loglik, cfg.rel_tol)) {
      out.report.converged = true;
      break;
    }
  }
  return out;
}

SegmentedResult train_segmented(std::span<const PhonemeTemplate> inventory,
                                const std::map<std::string, std::vector<ObservationSeq>>& segments,
                                const TrainConfig& cfg) {
  cfg.validate();
  for (const auto& tpl : inventory) {
    const auto it = segments.find(tpl.id);
    if (it == segments.end() || it->second.empty())
      throw Error(ErrorKind::MissingPhonemeData, "no segments for phoneme '" + tpl.id + "'");
  }

  SegmentedResult out;
  for (const auto& tpl : inventory) {
    const auto& data = segments.at(tpl.id);
    TrainConfig sub = cfg;
    sub.seed = phoneme_seed(cfg.seed, tpl.id);
    const Hmm init = initialize(tpl.shape, data, cfg.init, sub.seed);
    TrainResult r = baum_welch(init, data, sub);

    // expected frames spent in the last state, one exit per segment
    const TransitionGraph g = TransitionGraph::build(r.model);
    const std::size_t last = r.model.n_states() - 1;
    double occupancy = 0.0;
    for (const auto& seq : data) {
      const Matrix emis = emission_log_matrix(r.model.emissions, seq);
      const ForwardResult fw = forward(g, emis);
      const Matrix beta = backward(g, emis);
      for (std::size_t t = 0; t < seq.size(); ++t)
        occupancy += std::exp(fw.alpha(t, last) + beta(t, last) - fw.loglik);
    }
    const double exit_prob =
        occupancy > 0.0 ? std::min(1.0, static_cast<double>(data.size()) / occupancy) : 1.0;

    out.models.emplace(tpl.id, PhonemeModel{tpl.id, std::move(r.model), exit_prob});
    out.reports.emplace(tpl.id, std::move(r.report));
  }
  return out;
}

namespace {

struct TiedCounts {
  std::vector<double> entry;
  Matrix transitions;
  SufficientStats emissions;
  double exits = 0.0;
  double stays = 0.0;
};

}  // namespace

EmbeddedResult train_embedded(const Lexicon& lexicon, std::size_t channel,
                              std::span<const LabeledSequence> utterances, const TrainConfig& cfg) {
  cfg.validate();
  if (channel >= lexicon.n_channels())
    throw Error(ErrorKind::IncompatibleData, "channel index out of range", channel);
  if (utterances.empty()) throw Error(ErrorKind::IncompatibleData, "no training utterances");

  const ChannelInventory& base = lexicon.channels[channel];
  for (const auto& p : base.phonemes) validate(p.hmm);

  std::vector<std::vector<ChainLink>> links(utterances.size());
  std::vector<std::size_t> occurrences(base.phonemes.size(), 0);
  for (std::size_t u = 0; u < utterances.size(); ++u) {
    links[u] = expand_signs(lexicon, channel, utterances[u].signs);
    for (const auto& l : links[u]) ++occurrences[l.phoneme];
    const ObservationSeq& obs = utterances[u].obs;
    check_data(base.phonemes.front().hmm.emissions, std::span(&obs, 1));
  }

  EmbeddedResult out;
  out.phonemes = base.phonemes;
  for (std::size_t p = 0; p < occurrences.size(); ++p)
    if (occurrences[p] == 0) out.report.untouched_phonemes.push_back(base.phonemes[p].id);

  ChannelInventory current = base;
  struct PerUtterance {
    Counts counts;
    std::vector<ComposedSegment> segments;
  };

  auto run_e_step = [&](std::vector<TiedCounts>& tied) {
    std::vector<PerUtterance> per(utterances.size());
    parallel_for(utterances.size(), cfg.threads, [&](std::size_t u) {
      ComposedModel cm = compose_chain(current, links[u], true);
      const TransitionGraph g = TransitionGraph::build(cm.hmm);
      per[u] = {expected_counts(cm.hmm, g, utterances[u].obs), std::move(cm.segments)};
    });

    tied.clear();
    for (const auto& p : current.phonemes) {
      const std::size_t n = p.hmm.n_states();
      tied.push_back({std::vector<double>(n, 0.0), Matrix(n, n),
                      SufficientStats::like(p.hmm.emissions), 0.0, 0.0});
    }
    double total = 0.0;
    for (std::size_t u = 0; u < per.size(); ++u) {
      const Counts& c = per[u].counts;
      check_finite(c.loglik, u);
      total += c.loglik;
      const auto& segs = per[u].segments;
      for (std::size_t k = 0; k < segs.size(); ++k) {
        const auto& seg = segs[k];
        TiedCounts& tc = tied[seg.link.phoneme];
        tc.emissions.merge_block(c.emissions, seg.offset, seg.n_states, 0);
        for (std::size_t a = 0; a < seg.n_states; ++a)
          for (std::size_t b = 0; b < seg.n_states; ++b)
            tc.transitions(a, b) += c.transitions(seg.offset + a, seg.offset + b);
        if (k == 0)
          for (std::size_t b = 0; b < seg.n_states; ++b) tc.entry[b] += c.initial[seg.offset + b];
        if (k + 1 < segs.size()) {
          const auto& next = segs[k + 1];
          TiedCounts& tn = tied[next.link.phoneme];
          for (std::size_t b = 0; b < seg.n_states; ++b)
            tc.stays += c.transitions(seg.last_state(), seg.offset + b);
          for (std::size_t b = 0; b < next.n_states; ++b) {
            const double x = c.transitions(seg.last_state(), next.offset + b);
            tc.exits += x;
            tn.entry[b] += x;
          }
        }
      }
    }
    return total;
  };

  std::vector<TiedCounts> tied;
  double ll = run_e_step(tied);
  out.report.loglik_trajectory.push_back(ll);

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    for (std::size_t p = 0; p < current.phonemes.size(); ++p) {
      if (occurrences[p] == 0) continue;
      PhonemeModel& pm = current.phonemes[p];
      const TiedCounts& tc = tied[p];
      Hmm next = pm.hmm;
      normalize_into(tc.entry, next.pi);
      for (std::size_t i = 0; i < next.n_states(); ++i)
        normalize_into(tc.transitions.row(i), next.trans.row(i));
      next.emissions = maximize(tc.emissions, cfg.smoothing, &pm.hmm.emissions);
      pm.hmm = std::move(next);
      if (tc.exits > 0.0) pm.exit_prob = tc.exits / (tc.exits + tc.stays);
    }
    out.report.iterations_run = it;
    const double prev = ll;
    ll = run_e_step(tied);
    out.report.loglik_trajectory.push_back(ll);
    if (has_converged(prev, ll, cfg.rel_tol)) {
      out.report.converged = true;
      break;
    }
  }
  out.phonemes = current.phonemes;
  return out;
}

}  // namespace phmm
