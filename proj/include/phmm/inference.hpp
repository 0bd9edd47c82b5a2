#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "phmm/hmm.hpp"
#include "phmm/log_math.hpp"
#include "phmm/observation.hpp"

namespace phmm {

// Nonzero transitions of a model in log form, in both directions. Arc lists
// are sorted by the other endpoint's index.
struct TransitionGraph {
  struct Arc {
    std::size_t state;
    LogProb log_prob;
  };

  std::vector<LogProb> log_pi;
  std::vector<std::vector<Arc>> incoming;
  std::vector<std::vector<Arc>> outgoing;

  std::size_t n_states() const noexcept { return log_pi.size(); }

  static TransitionGraph build(const Hmm& hmm);
};

struct ForwardResult {
  LogProb loglik = kLogZero;
  Matrix alpha;  // alpha(t, i) = log P(o_0..o_t, q_t = i)
};

struct ViterbiResult {
  StatePath path;
  LogProb score = kLogZero;
};

struct SampleResult {
  ObservationSeq obs;
  StatePath path;
};

// All routines take either raw observations or a precomputed T x n_states
// table of log emission densities (see emission_log_matrix).

ForwardResult forward(const Hmm& hmm, std::span<const Observation> obs);
ForwardResult forward(const TransitionGraph& graph, const Matrix& log_emissions);

// beta(t, i) = log P(o_{t+1}..o_{T-1} | q_t = i); the last row is zero.
Matrix backward(const Hmm& hmm, std::span<const Observation> obs);
Matrix backward(const TransitionGraph& graph, const Matrix& log_emissions);

// Most likely state path. On equal scores the lowest state index wins, both
// for the final state and for every backpointer. Throws AllPathsZero.
ViterbiResult viterbi(const Hmm& hmm, std::span<const Observation> obs);
ViterbiResult viterbi(const TransitionGraph& graph, const Matrix& log_emissions);

// log P(path, obs), accumulated in the same order as viterbi.
LogProb path_log_prob(const TransitionGraph& graph, const Matrix& log_emissions,
                      const StatePath& path);

SampleResult sample(const Hmm& hmm, std::size_t t_len, std::uint64_t seed);

}  // namespace phmm
