#include "phmm/emissions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "phmm/error.hpp"

namespace phmm {
namespace {

constexpr double kRowTolerance = 1e-12;
constexpr double kWeightSlack = 1e-12;

Matrix log_table(const Matrix& probs) {
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r)
    for (std::size_t c = 0; c < probs.cols(); ++c) out(r, c) = safe_log(probs(r, c));
  return out;
}

void check_state(std::size_t state, std::size_t n_states) {
  if (state >= n_states)
    throw Error(ErrorKind::StateOutOfRange,
                "state " + std::to_string(state) + " >= " + std::to_string(n_states),
                state);
}

}  // namespace

EmissionModel EmissionModel::discrete(Matrix probs) {
  EmissionModel em;
  em.kind_ = EmissionKind::discrete;
  em.log_probs_ = log_table(probs);
  em.probs_ = std::move(probs);
  return em;
}

EmissionModel EmissionModel::gaussian(Matrix means, Matrix variances) {
  if (means.rows() != variances.rows() || means.cols() != variances.cols())
    throw Error(ErrorKind::DimensionMismatch, "means and variances differ in shape");
  EmissionModel em;
  em.kind_ = EmissionKind::gaussian;
  em.means_ = std::move(means);
  em.variances_ = std::move(variances);
  return em;
}

EmissionModel EmissionModel::concat(std::span<const EmissionModel* const> parts) {
  if (parts.empty()) return {};
  const EmissionKind kind = parts.front()->kind();
  const std::size_t width =
      kind == EmissionKind::discrete ? parts.front()->alphabet_size() : parts.front()->dimension();
  std::size_t total = 0;
  for (const EmissionModel* p : parts) {
    const std::size_t w = p->is_discrete() ? p->alphabet_size() : p->dimension();
    if (p->kind() != kind) throw Error(ErrorKind::VariantMismatch, "mixed emission kinds");
    if (w != width) throw Error(ErrorKind::DimensionMismatch, "mixed alphabet sizes or dimensions");
    total += p->n_states();
  }
  auto stack = [&](auto member) {
    Matrix out(total, width);
    std::size_t r = 0;
    for (const EmissionModel* p : parts) {
      const Matrix& m = (p->*member);
      for (std::size_t i = 0; i < m.rows(); ++i, ++r)
        for (std::size_t c = 0; c < width; ++c) out(r, c) = m(i, c);
    }
    return out;
  };
  if (kind == EmissionKind::discrete) return discrete(stack(&EmissionModel::probs_));
  return gaussian(stack(&EmissionModel::means_), stack(&EmissionModel::variances_));
}

std::size_t EmissionModel::n_states() const noexcept {
  return is_discrete() ? probs_.rows() : means_.rows();
}

void EmissionModel::check_compatible(const Observation& x) const {
  if (is_discrete()) {
    const Symbol* s = std::get_if<Symbol>(&x);
    if (s == nullptr)
      throw Error(ErrorKind::VariantMismatch, "vector observation for discrete emissions");
    if (*s >= alphabet_size())
      throw Error(ErrorKind::DimensionMismatch,
                  "symbol " + std::to_string(*s) + " outside alphabet of size " +
                      std::to_string(alphabet_size()));
    return;
  }
  const FeatureVector* v = std::get_if<FeatureVector>(&x);
  if (v == nullptr)
    throw Error(ErrorKind::VariantMismatch, "symbol observation for gaussian emissions");
  if (v->size() != dimension())
    throw Error(ErrorKind::DimensionMismatch,
                "vector of dimension " + std::to_string(v->size()) + ", model has " +
                    std::to_string(dimension()));
}

void EmissionModel::validate() const {
  if (is_discrete()) {
    for (std::size_t i = 0; i < probs_.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < probs_.cols(); ++k) {
        const double p = probs_(i, k);
        if (!(p >= 0.0))
          throw Error(ErrorKind::NegativeEntry,
                      "emission[" + std::to_string(i) + "][" + std::to_string(k) + "] < 0", i, k, p);
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance)
        throw Error(ErrorKind::NonStochasticRow,
                    "emission row " + std::to_string(i) + " sums to " + std::to_string(sum), i,
                    kNoIndex, sum);
    }
    return;
  }
  for (std::size_t i = 0; i < variances_.rows(); ++i) {
    for (std::size_t d = 0; d < variances_.cols(); ++d) {
      if (!std::isfinite(means_(i, d)))
        throw Error(ErrorKind::NegativeEntry, "non-finite gaussian mean", i, d, means_(i, d));
      if (!(variances_(i, d) >= kVarianceFloor) || !std::isfinite(variances_(i, d)))
        throw Error(ErrorKind::NegativeEntry,
                    "variance[" + std::to_string(i) + "][" + std::to_string(d) +
                        "] below floor",
                    i, d, variances_(i, d));
    }
  }
}

Observation EmissionModel::sample(std::size_t state, Rng& rng) const {
  check_state(state, n_states());
  if (is_discrete()) return static_cast<Symbol>(sample_index(probs_.row(state), rng));
  FeatureVector v(dimension());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t d = 0; d < v.size(); ++d)
    v[d] = means_(state, d) + std::sqrt(variances_(state, d)) * normal(rng);
  return v;
}

LogProb log_density(const EmissionModel& em, std::size_t state, const Observation& x) {
  check_state(state, em.n_states());
  em.check_compatible(x);
  if (em.is_discrete()) return em.log_probs_(state, std::get<Symbol>(x));
  const auto& v = std::get<FeatureVector>(x);
  double acc = 0.0;
  for (std::size_t d = 0; d < v.size(); ++d) {
    const double var = em.variances_(state, d);
    const double diff = v[d] - em.means_(state, d);
    acc += std::log(2.0 * std::numbers::pi * var) + diff * diff / var;
  }
  return -0.5 * acc;
}

Matrix emission_log_matrix(const EmissionModel& em, std::span<const Observation> obs) {
  Matrix out(obs.size(), em.n_states());
  for (std::size_t t = 0; t < obs.size(); ++t)
    for (std::size_t i = 0; i < em.n_states(); ++i) out(t, i) = log_density(em, i, obs[t]);
  return out;
}

SufficientStats SufficientStats::discrete(std::size_t n_states, std::size_t alphabet) {
  SufficientStats s;
  s.kind_ = EmissionKind::discrete;
  s.weights_.assign(n_states, 0.0);
  s.counts_ = Matrix(n_states, alphabet);
  return s;
}

SufficientStats SufficientStats::gaussian(std::size_t n_states, std::size_t dim) {
  SufficientStats s;
  s.kind_ = EmissionKind::gaussian;
  s.weights_.assign(n_states, 0.0);
  s.sums_ = Matrix(n_states, dim);
  s.squared_sums_ = Matrix(n_states, dim);
  return s;
}

SufficientStats SufficientStats::like(const EmissionModel& em) {
  return em.is_discrete() ? discrete(em.n_states(), em.alphabet_size())
                          : gaussian(em.n_states(), em.dimension());
}

void SufficientStats::merge(const SufficientStats& other) {
  if (other.kind_ != kind_ || other.n_states() != n_states())
    throw Error(ErrorKind::DimensionMismatch, "merging incompatible statistics");
  merge_block(other, 0, n_states(), 0);
}

void SufficientStats::merge_block(const SufficientStats& other, std::size_t other_offset,
                                  std::size_t count, std::size_t offset) {
  if (other.kind_ != kind_ || other_offset + count > other.n_states() ||
      offset + count > n_states())
    throw Error(ErrorKind::DimensionMismatch, "merging incompatible statistics");
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = other_offset + i;
    const std::size_t dst = offset + i;
    weights_[dst] += other.weights_[src];
    if (kind_ == EmissionKind::discrete) {
      for (std::size_t k = 0; k < counts_.cols(); ++k) counts_(dst, k) += other.counts_(src, k);
    } else {
      for (std::size_t d = 0; d < sums_.cols(); ++d) {
        sums_(dst, d) += other.sums_(src, d);
        squared_sums_(dst, d) += other.squared_sums_(src, d);
      }
    }
  }
}

void accumulate(SufficientStats& stats, std::size_t state, const Observation& x,
                double weight) {
  if (!(weight >= 0.0) || weight > 1.0 + kWeightSlack)
    throw Error(ErrorKind::NegativeWeight, "weight " + std::to_string(weight) + " outside [0, 1]",
                state, kNoIndex, weight);
  check_state(state, stats.n_states());
  if (weight == 0.0) return;
  if (stats.kind_ == EmissionKind::discrete) {
    const Symbol* s = std::get_if<Symbol>(&x);
    if (s == nullptr) throw Error(ErrorKind::VariantMismatch, "vector observation for discrete stats");
    if (*s >= stats.counts_.cols())
      throw Error(ErrorKind::DimensionMismatch, "symbol outside alphabet");
    stats.counts_(state, *s) += weight;
  } else {
    const FeatureVector* v = std::get_if<FeatureVector>(&x);
    if (v == nullptr) throw Error(ErrorKind::VariantMismatch, "symbol observation for gaussian stats");
    if (v->size() != stats.sums_.cols())
      throw Error(ErrorKind::DimensionMismatch, "vector dimension mismatch");
    for (std::size_t d = 0; d < v->size(); ++d) {
      stats.sums_(state, d) += weight * (*v)[d];
      stats.squared_sums_(state, d) += weight * (*v)[d] * (*v)[d];
    }
  }
  stats.weights_[state] += weight;
}

EmissionModel maximize(const SufficientStats& stats, double smoothing,
                       const EmissionModel* previous) {
  if (!(smoothing >= 0.0)) throw Error(ErrorKind::InvalidConfig, "negative smoothing");
  const std::size_t n = stats.n_states();
  if (previous != nullptr &&
      (previous->kind() != stats.kind() || previous->n_states() != n))
    throw Error(ErrorKind::DimensionMismatch, "fallback model does not match statistics");

  if (stats.kind() == EmissionKind::discrete) {
    const Matrix& counts = stats.counts();
    Matrix probs(n, counts.cols());
    for (std::size_t i = 0; i < n; ++i) {
      if (stats.weight(i) <= 0.0 && previous != nullptr) {
        for (std::size_t k = 0; k < counts.cols(); ++k) probs(i, k) = previous->probs()(i, k);
        continue;
      }
      if (stats.weight(i) <= 0.0 && smoothing == 0.0)
        throw Error(ErrorKind::EmptyState, "state " + std::to_string(i) + " has no weight", i);
      double total = 0.0;
      for (std::size_t k = 0; k < counts.cols(); ++k) total += counts(i, k) + smoothing;
      for (std::size_t k = 0; k < counts.cols(); ++k) probs(i, k) = (counts(i, k) + smoothing) / total;
    }
    return EmissionModel::discrete(std::move(probs));
  }

  const std::size_t dim = stats.sums().cols();
  Matrix means(n, dim);
  Matrix vars(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = stats.weight(i);
    if (w <= 0.0) {
      if (previous == nullptr)
        throw Error(ErrorKind::EmptyState, "state " + std::to_string(i) + " has no weight", i);
      for (std::size_t d = 0; d < dim; ++d) {
        means(i, d) = previous->means()(i, d);
        vars(i, d) = previous->variances()(i, d);
      }
      continue;
    }
    for (std::size_t d = 0; d < dim; ++d) {
      const double mean = stats.sums()(i, d) / w;
      const double var = stats.squared_sums()(i, d) / w - mean * mean;
      means(i, d) = mean;
      vars(i, d) = std::max(var, kVarianceFloor);
    }
  }
  return EmissionModel::gaussian(std::move(means), std::move(vars));
}

}  // namespace phmm
