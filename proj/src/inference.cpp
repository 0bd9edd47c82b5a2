#include "phmm/inference.hpp"

#include <string>

#include "phmm/error.hpp"
#include "phmm/random.hpp"

namespace phmm {
namespace {

void check_table(const TransitionGraph& graph, const Matrix& log_emissions) {
  if (log_emissions.rows() == 0)
    throw Error(ErrorKind::EmptyObservation, "observation sequence is empty");
  if (log_emissions.cols() != graph.n_states())
    throw Error(ErrorKind::DimensionMismatch,
                "emission table has " + std::to_string(log_emissions.cols()) +
                    " columns for a model with " + std::to_string(graph.n_states()) + " states");
}

Matrix scored(const Hmm& hmm, std::span<const Observation> obs) {
  if (obs.empty()) throw Error(ErrorKind::EmptyObservation, "observation sequence is empty");
  return emission_log_matrix(hmm.emissions, obs);
}

}  // namespace

TransitionGraph TransitionGraph::build(const Hmm& hmm) {
  const std::size_t n = hmm.n_states();
  if (hmm.trans.rows() != n || hmm.trans.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "transition matrix is not n_states x n_states");
  TransitionGraph g;
  g.log_pi.resize(n);
  g.incoming.resize(n);
  g.outgoing.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.log_pi[i] = safe_log(hmm.pi[i]);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = hmm.trans(i, j);
      if (a <= 0.0) continue;
      const LogProb la = std::log(a);
      g.outgoing[i].push_back({j, la});
      g.incoming[j].push_back({i, la});
    }
  }
  return g;
}

ForwardResult forward(const Hmm& hmm, std::span<const Observation> obs) {
  return forward(TransitionGraph::build(hmm), scored(hmm, obs));
}

ForwardResult forward(const TransitionGraph& graph, const Matrix& log_emissions) {
  check_table(graph, log_emissions);
  const std::size_t T = log_emissions.rows();
  const std::size_t n = graph.n_states();
  ForwardResult out;
  out.alpha = Matrix(T, n, kLogZero);
  for (std::size_t i = 0; i < n; ++i) out.alpha(0, i) = graph.log_pi[i] + log_emissions(0, i);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      LogProb acc = kLogZero;
      for (const auto& arc : graph.incoming[j])
        acc = log_add(acc, out.alpha(t - 1, arc.state) + arc.log_prob);
      out.alpha(t, j) = acc + log_emissions(t, j);
    }
  }
  out.loglik = log_sum_exp(out.alpha.row(T - 1));
  return out;
}

Matrix backward(const Hmm& hmm, std::span<const Observation> obs) {
  return backward(TransitionGraph::build(hmm), scored(hmm, obs));
}

Matrix backward(const TransitionGraph& graph, const Matrix& log_emissions) {
  check_table(graph, log_emissions);
  const std::size_t T = log_emissions.rows();
  const std::size_t n = graph.n_states();
  Matrix beta(T, n, kLogZero);
  for (std::size_t i = 0; i < n; ++i) beta(T - 1, i) = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      LogProb acc = kLogZero;
      for (const auto& arc : graph.outgoing[i])
        acc = log_add(acc, arc.log_prob + log_emissions(t + 1, arc.state) + beta(t + 1, arc.state));
      beta(t, i) = acc;
    }
  }
  return beta;
}

ViterbiResult viterbi(const Hmm& hmm, std::span<const Observation> obs) {
  return viterbi(TransitionGraph::build(hmm), scored(hmm, obs));
}

ViterbiResult viterbi(const TransitionGraph& graph, const Matrix& log_emissions) {
  check_table(graph, log_emissions);
  const std::size_t T = log_emissions.rows();
  const std::size_t n = graph.n_states();
  std::vector<LogProb> prev(n), cur(n);
  std::vector<std::size_t> back(T * n, 0);

  for (std::size_t i = 0; i < n; ++i) prev[i] = graph.log_pi[i] + log_emissions(0, i);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      LogProb best = kLogZero;
      std::size_t arg = 0;
      bool found = false;
      // incoming arcs are in increasing source order; strict > keeps the lowest
      for (const auto& arc : graph.incoming[j]) {
        const LogProb s = prev[arc.state] + arc.log_prob;
        if (!found || s > best) {
          best = s;
          arg = arc.state;
          found = true;
        }
      }
      cur[j] = best + log_emissions(t, j);
      back[t * n + j] = arg;
    }
    std::swap(prev, cur);
  }

  ViterbiResult out;
  std::size_t last = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (prev[i] > prev[last]) last = i;
  out.score = prev[last];
  if (out.score == kLogZero)
    throw Error(ErrorKind::AllPathsZero, "every state path has probability zero");

  out.path.resize(T);
  out.path[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) out.path[t - 1] = back[t * n + out.path[t]];
  return out;
}

LogProb path_log_prob(const TransitionGraph& graph, const Matrix& log_emissions,
                      const StatePath& path) {
  check_table(graph, log_emissions);
  if (path.size() != log_emissions.rows())
    throw Error(ErrorKind::DimensionMismatch, "path length differs from observation length");
  for (std::size_t q : path)
    if (q >= graph.n_states()) throw Error(ErrorKind::StateOutOfRange, "path state out of range", q);

  LogProb s = graph.log_pi[path[0]] + log_emissions(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t) {
    LogProb la = kLogZero;
    for (const auto& arc : graph.outgoing[path[t - 1]])
      if (arc.state == path[t]) la = arc.log_prob;
    s = (s + la) + log_emissions(t, path[t]);
  }
  return s;
}

SampleResult sample(const Hmm& hmm, std::size_t t_len, std::uint64_t seed) {
  if (t_len == 0) throw Error(ErrorKind::EmptyObservation, "sample length must be positive");
  Rng rng(seed);
  SampleResult out;
  out.obs.reserve(t_len);
  out.path.reserve(t_len);
  std::size_t q = sample_index(hmm.pi, rng);
  for (std::size_t t = 0; t < t_len; ++t) {
    if (t > 0) q = sample_index(hmm.trans.row(q), rng);
    out.path.push_back(q);
    out.obs.push_back(hmm.emissions.sample(q, rng));
  }
  return out;
}

}  // namespace phmm
