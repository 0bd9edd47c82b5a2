#pragma once

#include <cstdint>
#include <initializer_list>
#include <variant>
#include <vector>

namespace phmm {

using Symbol = std::uint32_t;
using FeatureVector = std::vector<double>;

// One frame of one channel: a categorical token or a real feature vector.
using Observation = std::variant<Symbol, FeatureVector>;
using ObservationSeq = std::vector<Observation>;

inline bool is_symbol(const Observation& x) { return std::holds_alternative<Symbol>(x); }

inline ObservationSeq symbols(std::initializer_list<Symbol> ids) {
  ObservationSeq out;
  out.reserve(ids.size());
  for (Symbol s : ids) out.emplace_back(s);
  return out;
}

}  // namespace phmm
