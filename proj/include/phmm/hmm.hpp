#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "phmm/emissions.hpp"
#include "phmm/matrix.hpp"

namespace phmm {

enum class Topology { ergodic, left_to_right };

std::string_view to_string(Topology t);
Topology topology_from_string(std::string_view name);

// A first-order HMM: initial distribution, row-stochastic transitions and
// per-state emissions. There are no non-emitting entry/exit states.
struct Hmm {
  std::vector<double> pi;
  Matrix trans;
  EmissionModel emissions;
  Topology topology = Topology::ergodic;

  std::size_t n_states() const noexcept { return pi.size(); }

  friend bool operator==(const Hmm&, const Hmm&) = default;
};

// Checks stochasticity (1e-12), non-negativity, shape and the Bakis
// constraint for left_to_right. `check_emissions` also validates B; composed
// models built for scoring only carry no emissions.
void validate(const Hmm& hmm, bool check_emissions = true);

// Left-to-right chain with self-loops: state i -> i with `self_loop`, i -> i+1
// otherwise; the last state is absorbing. Starts in state 0.
Hmm make_bakis(std::size_t n_states, double self_loop, EmissionModel emissions);

using StatePath = std::vector<std::size_t>;

}  // namespace phmm
