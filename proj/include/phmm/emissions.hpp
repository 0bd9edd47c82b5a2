#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "phmm/log_math.hpp"
#include "phmm/matrix.hpp"
#include "phmm/observation.hpp"
#include "phmm/random.hpp"

namespace phmm {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kDefaultSmoothing = 1e-8;

enum class EmissionKind { discrete, gaussian };

// Per-state output densities: a categorical table (n_states x alphabet) or a
// diagonal Gaussian (n_states x dim means and variances).
class EmissionModel {
 public:
  EmissionModel() = default;

  static EmissionModel discrete(Matrix probs);
  static EmissionModel gaussian(Matrix means, Matrix variances);

  // Stacks the states of several models of the same kind and shape.
  static EmissionModel concat(std::span<const EmissionModel* const> parts);

  EmissionKind kind() const noexcept { return kind_; }
  bool is_discrete() const noexcept { return kind_ == EmissionKind::discrete; }
  std::size_t n_states() const noexcept;
  std::size_t alphabet_size() const noexcept { return probs_.cols(); }
  std::size_t dimension() const noexcept { return means_.cols(); }

  const Matrix& probs() const noexcept { return probs_; }
  const Matrix& means() const noexcept { return means_; }
  const Matrix& variances() const noexcept { return variances_; }

  // Throws VariantMismatch / DimensionMismatch when x cannot be scored.
  void check_compatible(const Observation& x) const;

  // Rows stochastic within 1e-12 (discrete) or variances >= floor (gaussian).
  void validate() const;

  Observation sample(std::size_t state, Rng& rng) const;

  friend bool operator==(const EmissionModel& a, const EmissionModel& b) {
    return a.kind_ == b.kind_ && a.probs_ == b.probs_ && a.means_ == b.means_ &&
           a.variances_ == b.variances_;
  }

 private:
  friend LogProb log_density(const EmissionModel&, std::size_t, const Observation&);

  EmissionKind kind_ = EmissionKind::discrete;
  Matrix probs_;
  Matrix log_probs_;
  Matrix means_;
  Matrix variances_;
};

LogProb log_density(const EmissionModel& em, std::size_t state, const Observation& x);

// T x n_states table of log_density for a whole sequence.
Matrix emission_log_matrix(const EmissionModel& em, std::span<const Observation> obs);

// Expected-count accumulators for the M-step.
class SufficientStats {
 public:
  SufficientStats() = default;
  static SufficientStats like(const EmissionModel& em);
  static SufficientStats discrete(std::size_t n_states, std::size_t alphabet);
  static SufficientStats gaussian(std::size_t n_states, std::size_t dim);

  EmissionKind kind() const noexcept { return kind_; }
  std::size_t n_states() const noexcept { return weights_.size(); }
  double weight(std::size_t state) const { return weights_[state]; }

  const Matrix& counts() const noexcept { return counts_; }
  const Matrix& sums() const noexcept { return sums_; }
  const Matrix& squared_sums() const noexcept { return squared_sums_; }

  // Adds another accumulator state-by-state; the caller fixes merge order.
  void merge(const SufficientStats& other);

  // Adds `other`'s states [0, n) into this one's states [offset, offset + n).
  void merge_block(const SufficientStats& other, std::size_t other_offset,
                   std::size_t count, std::size_t offset);

 private:
  friend void accumulate(SufficientStats&, std::size_t, const Observation&, double);

  EmissionKind kind_ = EmissionKind::discrete;
  std::vector<double> weights_;
  Matrix counts_;
  Matrix sums_;
  Matrix squared_sums_;
};

void accumulate(SufficientStats& stats, std::size_t state, const Observation& x,
                double weight);

// Closed-form M-step. States with zero total weight take their parameters
// from `previous` when given; otherwise a discrete state needs smoothing > 0
// and a gaussian state is an EmptyState error.
EmissionModel maximize(const SufficientStats& stats, double smoothing,
                       const EmissionModel* previous = nullptr);

}  // namespace phmm
