#include "phmm/hmm.hpp"

#include <cmath>
#include <string>

#include "phmm/error.hpp"

namespace phmm {
namespace {

constexpr double kRowTolerance = 1e-12;

void check_distribution(std::span<const double> row, std::size_t index, std::string_view what) {
  double sum = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!(row[j] >= 0.0) || !std::isfinite(row[j]))
      throw Error(ErrorKind::NegativeEntry,
                  std::string(what) + " entry " + std::to_string(j) + " is " +
                      std::to_string(row[j]),
                  index, j, row[j]);
    sum += row[j];
  }
  if (std::abs(sum - 1.0) > kRowTolerance)
    throw Error(ErrorKind::NonStochasticRow,
                std::string(what) + " sums to " + std::to_string(sum), index, kNoIndex, sum);
}

}  // namespace

std::string_view to_string(Topology t) {
  return t == Topology::left_to_right ? "left_to_right" : "ergodic";
}

Topology topology_from_string(std::string_view name) {
  if (name == "left_to_right") return Topology::left_to_right;
  if (name == "ergodic") return Topology::ergodic;
  throw Error(ErrorKind::Parse, "unknown topology '" + std::string(name) + "'");
}

void validate(const Hmm& hmm, bool check_emissions) {
  const std::size_t n = hmm.n_states();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "model has no states");
  if (hmm.trans.rows() != n || hmm.trans.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "transition matrix is not n_states x n_states");

  // kNoIndex as the row marks the initial distribution.
  check_distribution(hmm.pi, kNoIndex, "initial distribution");
  for (std::size_t i = 0; i < n; ++i)
    check_distribution(hmm.trans.row(i), i, "transition row " + std::to_string(i));

  if (hmm.topology == Topology::left_to_right) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if ((j < i || j > i + 1) && hmm.trans(i, j) != 0.0)
          throw Error(ErrorKind::TopologyViolation,
                      "left_to_right forbids " + std::to_string(i) + " -> " + std::to_string(j), i,
                      j, hmm.trans(i, j));
  }

  if (check_emissions) {
    if (hmm.emissions.n_states() != n)
      throw Error(ErrorKind::DimensionMismatch, "emission model state count differs");
    hmm.emissions.validate();
  }
}

Hmm make_bakis(std::size_t n_states, double self_loop, EmissionModel emissions) {
  Hmm h;
  h.topology = Topology::left_to_right;
  h.pi.assign(n_states, 0.0);
  h.pi[0] = 1.0;
  h.trans = Matrix(n_states, n_states);
  for (std::size_t i = 0; i + 1 < n_states; ++i) {
    h.trans(i, i) = self_loop;
    h.trans(i, i + 1) = 1.0 - self_loop;
  }
  h.trans(n_states - 1, n_states - 1) = 1.0;
  h.emissions = std::move(emissions);
  return h;
}

}  // namespace phmm
