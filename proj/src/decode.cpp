#include "phmm/decode.hpp"

#include <algorithm>
#include <cmath>

#include "phmm/compose.hpp"
#include "phmm/error.hpp"
#include "phmm/parallel_for.hpp"

namespace phmm {

LogProb channel_total(std::span<const LogProb> scores) {
  std::vector<LogProb> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  LogProb acc = 0.0;
  for (LogProb s : sorted) acc += s;
  return acc;
}

void check_observations(const Lexicon& lexicon, const MultiObservation& mobs) {
  if (mobs.size() != lexicon.n_channels())
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(lexicon.n_channels()) + " channels, got " +
                    std::to_string(mobs.size()));
  for (std::size_t c = 0; c < mobs.size(); ++c)
    if (mobs[c].empty())
      throw Error(ErrorKind::EmptyObservation,
                  "channel '" + lexicon.channels[c].name + "' has no observations", c);
}

UtteranceScorer::UtteranceScorer(const Lexicon& lexicon, const MultiObservation& mobs)
    : lexicon_(lexicon) {
  check_observations(lexicon, mobs);
  cache_.resize(lexicon.n_channels());
  for (std::size_t c = 0; c < lexicon.n_channels(); ++c)
    for (const auto& pm : lexicon.channels[c].phonemes)
      cache_[c].push_back(emission_log_matrix(pm.hmm.emissions, mobs[c]));
}

Matrix UtteranceScorer::chain_emissions(std::size_t c, std::span<const std::size_t> phonemes) const {
  std::size_t width = 0;
  for (std::size_t p : phonemes) width += cache_[c][p].cols();
  const std::size_t T = cache_[c].front().rows();
  Matrix out(T, width);
  std::size_t offset = 0;
  for (std::size_t p : phonemes) {
    const Matrix& m = cache_[c][p];
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < m.cols(); ++j) out(t, offset + j) = m(t, j);
    offset += m.cols();
  }
  return out;
}

LogProb UtteranceScorer::channel_score(std::size_t c, std::span<const std::size_t> signs,
                                       StatePath* path) const {
  const ComposedModel cm = compose_utterance(lexicon_, c, signs, false);
  std::vector<std::size_t> phonemes;
  for (const auto& seg : cm.segments) phonemes.push_back(seg.link.phoneme);
  const Matrix emis = chain_emissions(c, phonemes);
  try {
    ViterbiResult v = viterbi(TransitionGraph::build(cm.hmm), emis);
    if (path) *path = std::move(v.path);
    return v.score;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AllPathsZero) throw;
    if (path) path->clear();
    return kLogZero;
  }
}

Hypothesis UtteranceScorer::score(std::span<const std::size_t> signs) const {
  Hypothesis h;
  h.signs = lexicon_.sign_ids(signs);
  h.channel_paths.resize(lexicon_.n_channels());
  for (std::size_t c = 0; c < lexicon_.n_channels(); ++c) {
    h.channel_scores.push_back(channel_score(c, signs, &h.channel_paths[c]));
    if (h.channel_scores.back() == kLogZero && !h.dead_channel) h.dead_channel = c;
  }
  h.total = channel_total(h.channel_scores);
  return h;
}

LogProb UtteranceScorer::total(std::span<const std::size_t> signs) const {
  std::vector<LogProb> scores;
  for (std::size_t c = 0; c < lexicon_.n_channels(); ++c) {
    scores.push_back(channel_score(c, signs, nullptr));
    if (scores.back() == kLogZero) return kLogZero;
  }
  return channel_total(scores);
}

Hypothesis score_hypothesis(const Lexicon& lexicon, std::span<const std::string> signs,
                            const MultiObservation& mobs) {
  if (signs.empty()) throw Error(ErrorKind::EmptySequence, "sign sequence is empty");
  const auto idx = lexicon.sign_indices(signs);
  return UtteranceScorer(lexicon, mobs).score(idx);
}

Hypothesis decode_exhaustive(const Lexicon& lexicon, const MultiObservation& mobs,
                             std::size_t max_signs, std::size_t threads) {
  if (max_signs == 0) throw Error(ErrorKind::InvalidConfig, "max_signs must be positive");
  if (lexicon.signs.empty()) throw Error(ErrorKind::InvalidLexicon, "lexicon has no signs");
  const std::uint64_t V = lexicon.signs.size();
  std::uint64_t longest = 1;
  for (std::size_t k = 0; k < max_signs; ++k) {
    if (longest > kMaxCandidates / V)
      throw Error(ErrorKind::SearchSpaceTooLarge,
                  std::to_string(V) + "^" + std::to_string(max_signs) + " candidates exceed " +
                      std::to_string(kMaxCandidates));
    longest *= V;
  }

  const UtteranceScorer scorer(lexicon, mobs);
  const auto order = lexicon.sorted_sign_order();
  auto candidate = [&](std::size_t len, std::uint64_t rank) {
    std::vector<std::size_t> signs(len);
    for (std::size_t k = len; k-- > 0;) {
      signs[k] = order[rank % V];
      rank /= V;
    }
    return signs;
  };

  std::vector<std::size_t> best;
  LogProb best_total = kLogZero;
  std::uint64_t count = 1;
  for (std::size_t len = 1; len <= max_signs; ++len) {
    count *= V;
    std::vector<LogProb> totals(count);
    parallel_for(count, threads, [&](std::size_t r) { totals[r] = scorer.total(candidate(len, r)); });
    for (std::uint64_t r = 0; r < count; ++r)
      if (totals[r] > best_total) {
        best_total = totals[r];
        best = candidate(len, r);
      }
  }
  if (best.empty()) throw Error(ErrorKind::NoFiniteHypothesis, "every candidate scores -inf");
  return scorer.score(best);
}

namespace {

// One per-channel tuple of sub-models entered and left together: a sign
// (closed when it ends the sequence, open when something follows) or the
// epenthesis filler.
struct JointUnit {
  std::vector<std::size_t> sizes;  // per channel
  std::vector<std::size_t> strides;
  std::size_t size = 1;
  std::vector<Matrix> emissions;        // per channel, T x sizes[c]
  std::vector<std::vector<double>> pi;  // per channel entry distribution
  std::vector<double> exit_prob;        // per channel, of the last phoneme
  std::vector<std::vector<std::pair<std::size_t, LogProb>>> out;  // joint arcs
  std::vector<std::vector<double>> entries;  // per entry tuple: per-channel pi values
  std::vector<std::size_t> entry_local;

  std::size_t channel_state(std::size_t local, std::size_t c) const {
    return (local / strides[c]) % sizes[c];
  }
};

JointUnit make_unit(const Lexicon& lexicon, const UtteranceScorer& scorer,
                    const std::vector<std::vector<std::size_t>>& phonemes, bool open_end) {
  const std::size_t C = lexicon.n_channels();
  JointUnit u;
  std::vector<TransitionGraph> graphs;
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<ChainLink> links;
    for (std::size_t p : phonemes[c]) links.push_back({p, 0, false});
    const ComposedModel cm = compose_chain(lexicon.channels[c], links, false, open_end);
    u.sizes.push_back(cm.hmm.n_states());
    u.pi.push_back(cm.hmm.pi);
    u.exit_prob.push_back(lexicon.channels[c].phonemes[phonemes[c].back()].exit_prob);
    u.emissions.push_back(scorer.chain_emissions(c, phonemes[c]));
    graphs.push_back(TransitionGraph::build(cm.hmm));
  }
  // channel 0 varies slowest
  u.strides.assign(C, 1);
  for (std::size_t c = C; c-- > 0;) {
    u.strides[c] = u.size;
    u.size *= u.sizes[c];
  }

  u.out.resize(u.size);
  for (std::size_t local = 0; local < u.size; ++local) {
    std::vector<std::pair<std::size_t, LogProb>> arcs{{0, 0.0}};
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<std::pair<std::size_t, LogProb>> next;
      for (const auto& [dst, lp] : arcs)
        for (const auto& arc : graphs[c].outgoing[u.channel_state(local, c)])
          next.push_back({dst + arc.state * u.strides[c], lp + arc.log_prob});
      arcs = std::move(next);
    }
    std::sort(arcs.begin(), arcs.end());
    u.out[local] = std::move(arcs);
  }

  std::vector<std::pair<std::size_t, std::vector<double>>> entries{{0, {}}};
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<std::pair<std::size_t, std::vector<double>>> next;
    for (const auto& [local, probs] : entries)
      for (std::size_t b = 0; b < u.sizes[c]; ++b)
        if (u.pi[c][b] > 0.0) {
          auto p = probs;
          p.push_back(u.pi[c][b]);
          next.push_back({local + b * u.strides[c], std::move(p)});
        }
    entries = std::move(next);
  }
  std::sort(entries.begin(), entries.end());
  for (auto& [local, probs] : entries) {
    u.entry_local.push_back(local);
    u.entries.push_back(std::move(probs));
  }
  return u;
}

enum class BlockKind { closed, open, filler };

struct Block {
  std::size_t unit;
  std::size_t layer;
  BlockKind kind;
  std::size_t sign;  // lexicon index; unused for fillers
  std::size_t offset;
  std::vector<std::size_t> successors;  // block ids entered on exit
};

}  // namespace

Hypothesis decode_synced(const Lexicon& lexicon, const MultiObservation& mobs,
                         std::optional<std::size_t> beam_width, std::optional<std::size_t> max_signs) {
  check_observations(lexicon, mobs);
  if (beam_width && *beam_width == 0) throw Error(ErrorKind::InvalidConfig, "beam width must be positive");
  if (max_signs && *max_signs == 0) throw Error(ErrorKind::InvalidConfig, "max_signs must be positive");
  const std::size_t C = lexicon.n_channels();
  const std::size_t T = mobs[0].size();
  for (std::size_t c = 1; c < C; ++c)
    if (mobs[c].size() != T)
      throw Error(ErrorKind::UnequalChannelLengths, "synchronized decoding needs equal channel lengths", c);

  const UtteranceScorer scorer(lexicon, mobs);
  const auto order = lexicon.sorted_sign_order();
  const bool fillers = lexicon.policy == EpenthesisPolicy::between_signs;

  // units: [closed sign i, open sign i] per sign, then the filler
  std::vector<JointUnit> units;
  for (const auto& sign : lexicon.signs) {
    units.push_back(make_unit(lexicon, scorer, sign.phonemes, false));
    units.push_back(make_unit(lexicon, scorer, sign.phonemes, true));
  }
  std::size_t filler_unit = units.size();
  if (fillers) {
    std::vector<std::vector<std::size_t>> eps;
    for (const auto& ch : lexicon.channels) eps.push_back({*ch.epenthesis});
    units.push_back(make_unit(lexicon, scorer, eps, true));
  }

  // Blocks are laid out layer by layer (layer = sign position when the length
  // is bounded), closed signs first, in sign-id order. Lower ids win ties.
  const std::size_t layers = max_signs ? *max_signs : 1;
  std::vector<Block> blocks;
  std::vector<std::vector<std::size_t>> layer_signs(layers);  // sign block ids per layer
  std::vector<std::size_t> layer_filler(layers, SIZE_MAX);
  std::size_t n_states = 0;
  auto add = [&](std::size_t unit, std::size_t layer, BlockKind kind, std::size_t sign) {
    blocks.push_back({unit, layer, kind, sign, n_states, {}});
    n_states += units[unit].size;
    return blocks.size() - 1;
  };
  for (std::size_t l = 0; l < layers; ++l) {
    const bool more = !max_signs || l + 1 < layers;
    for (std::size_t s : order) layer_signs[l].push_back(add(2 * s, l, BlockKind::closed, s));
    if (!more) continue;
    for (std::size_t s : order) layer_signs[l].push_back(add(2 * s + 1, l, BlockKind::open, s));
    if (fillers) layer_filler[l] = add(filler_unit, l, BlockKind::filler, 0);
  }
  for (auto& b : blocks) {
    const std::size_t next_layer = max_signs ? b.layer + 1 : 0;
    if (b.kind == BlockKind::open && fillers)
      b.successors.push_back(layer_filler[b.layer]);
    else if (b.kind != BlockKind::closed)
      b.successors = layer_signs[next_layer];
  }

  std::vector<std::size_t> block_of(n_states);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    std::fill_n(block_of.begin() + blocks[b].offset, units[blocks[b].unit].size, b);

  auto joint_emission = [&](const JointUnit& u, std::size_t local, std::size_t t) {
    LogProb e = 0.0;
    for (std::size_t c = 0; c < C; ++c) e += u.emissions[c](t, u.channel_state(local, c));
    return e;
  };

  std::vector<LogProb> score(n_states, kLogZero), next(n_states);
  std::vector<std::uint32_t> back(T * n_states, 0);
  std::vector<char> crossed(T * n_states, 0);

  auto prune = [&](std::vector<LogProb>& s) {
    if (!beam_width) return;
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] != kLogZero) live.push_back(i);
    if (live.size() <= *beam_width) return;
    auto better = [&](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); };
    std::nth_element(live.begin(), live.begin() + (*beam_width - 1), live.end(), better);
    const std::size_t cut = live[*beam_width - 1];
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] != kLogZero && better(cut, i)) s[i] = kLogZero;
  };

  for (std::size_t b : layer_signs[0]) {
    const JointUnit& u = units[blocks[b].unit];
    for (std::size_t k = 0; k < u.entry_local.size(); ++k) {
      LogProb lp = 0.0;
      for (double p : u.entries[k]) lp += std::log(p);
      score[blocks[b].offset + u.entry_local[k]] = lp + joint_emission(u, u.entry_local[k], 0);
    }
  }
  prune(score);

  for (std::size_t t = 1; t < T; ++t) {
    std::fill(next.begin(), next.end(), kLogZero);
    std::uint32_t* bp = &back[t * n_states];
    char* cr = &crossed[t * n_states];
    auto relax = [&](std::size_t dst, LogProb s, std::size_t src, bool cross) {
      if (s > next[dst]) {
        next[dst] = s;
        bp[dst] = static_cast<std::uint32_t>(src);
        cr[dst] = cross;
      }
    };
    for (std::size_t src = 0; src < n_states; ++src) {
      if (score[src] == kLogZero) continue;
      const Block& blk = blocks[block_of[src]];
      const JointUnit& u = units[blk.unit];
      const std::size_t local = src - blk.offset;
      for (const auto& [dst, lp] : u.out[local]) relax(blk.offset + dst, score[src] + lp, src, false);
      if (local + 1 != u.size) continue;  // exits only from the all-last-states tuple
      for (std::size_t nb : blk.successors) {
        const JointUnit& v = units[blocks[nb].unit];
        for (std::size_t k = 0; k < v.entry_local.size(); ++k) {
          LogProb lp = 0.0;
          for (std::size_t c = 0; c < C; ++c) lp += std::log(u.exit_prob[c] * v.entries[k][c]);
          relax(blocks[nb].offset + v.entry_local[k], score[src] + lp, src, true);
        }
      }
    }
    for (std::size_t dst = 0; dst < n_states; ++dst)
      if (next[dst] != kLogZero) {
        const Block& blk = blocks[block_of[dst]];
        next[dst] += joint_emission(units[blk.unit], dst - blk.offset, t);
      }
    prune(next);
    std::swap(score, next);
  }

  // Sequences may end inside a closed sign or inside a filler; open signs are
  // never better than their closed twin.
  std::size_t best = SIZE_MAX;
  for (std::size_t i = 0; i < n_states; ++i) {
    const BlockKind k = blocks[block_of[i]].kind;
    if (k == BlockKind::open) continue;
    if (score[i] != kLogZero && (best == SIZE_MAX || score[i] > score[best])) best = i;
  }
  if (best == SIZE_MAX)
    throw Error(ErrorKind::NoFiniteHypothesis, "no synchronized path has nonzero probability");

  std::vector<std::size_t> states(T);
  std::vector<char> entered(T, 0);
  states[T - 1] = best;
  for (std::size_t t = T - 1; t > 0; --t) {
    entered[t] = crossed[t * n_states + states[t]];
    states[t - 1] = back[t * n_states + states[t]];
  }
  entered[0] = 1;

  std::vector<std::size_t> signs;
  std::vector<std::size_t> visited;  // block per entered segment
  for (std::size_t t = 0; t < T; ++t)
    if (entered[t]) {
      visited.push_back(block_of[states[t]]);
      if (blocks[visited.back()].kind != BlockKind::filler) signs.push_back(blocks[visited.back()].sign);
    }
  if (blocks[visited.back()].kind == BlockKind::filler) signs.push_back(order.front());

  Hypothesis h;
  h.signs = lexicon.sign_ids(signs);
  h.channel_paths.assign(C, StatePath(T));
  std::vector<std::size_t> offset(C, 0);
  std::size_t seg = 0;
  for (std::size_t t = 0; t < T; ++t) {
    if (entered[t] && t > 0) {
      const JointUnit& prev = units[blocks[visited[seg]].unit];
      for (std::size_t c = 0; c < C; ++c) offset[c] += prev.sizes[c];
      ++seg;
    }
    const Block& blk = blocks[block_of[states[t]]];
    for (std::size_t c = 0; c < C; ++c)
      h.channel_paths[c][t] = offset[c] + units[blk.unit].channel_state(states[t] - blk.offset, c);
  }
  for (std::size_t c = 0; c < C; ++c) {
    const ComposedModel cm = compose_utterance(lexicon, c, signs, false);
    std::vector<std::size_t> phonemes;
    for (const auto& s : cm.segments) phonemes.push_back(s.link.phoneme);
    h.channel_scores.push_back(path_log_prob(TransitionGraph::build(cm.hmm),
                                             scorer.chain_emissions(c, phonemes), h.channel_paths[c]));
  }
  h.total = channel_total(h.channel_scores);
  return h;
}

std::string_view to_string(DecodeMode m) {
  return m == DecodeMode::exhaustive ? "exhaustive" : "synced";
}

DecodeMode decode_mode_from_string(std::string_view name) {
  if (name == "exhaustive") return DecodeMode::exhaustive;
  if (name == "synced") return DecodeMode::synced;
  throw Error(ErrorKind::InvalidConfig, "unknown decode mode '" + std::string(name) + "'");
}

Hypothesis decode(const Lexicon& lexicon, const MultiObservation& mobs, const DecodeOptions& opts) {
  if (opts.mode == DecodeMode::exhaustive)
    return decode_exhaustive(lexicon, mobs, opts.max_signs, opts.threads);
  return decode_synced(lexicon, mobs, opts.beam_width,
                       opts.bound_synced_length ? std::optional(opts.max_signs) : std::nullopt);
}

}  // namespace phmm
