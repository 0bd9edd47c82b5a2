#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace phmm {

enum class ErrorKind {
  // hmm_core
  NonStochasticRow,
  NegativeEntry,
  TopologyViolation,
  EmptyObservation,
  DimensionMismatch,
  AllPathsZero,
  // emissions
  VariantMismatch,
  StateOutOfRange,
  NegativeWeight,
  EmptyState,
  // training
  IncompatibleData,
  DegenerateModel,
  MissingPhonemeData,
  InvalidConfig,
  // parallel
  UnknownSign,
  EmptySequence,
  NoFiniteHypothesis,
  UnequalChannelLengths,
  SearchSpaceTooLarge,
  InvalidLexicon,
  // corpus / io
  DegenerateSplit,
  GenerationFailed,
  Parse,
  UnsupportedVersion,
  Io,
};

std::string_view to_string(ErrorKind kind);

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

// Every library failure is an Error. `row`/`col` carry the offending indices
// when the kind has them (row is also used for channel or state indices),
// `value` carries e.g. the offending row sum.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::size_t row = kNoIndex,
        std::size_t col = kNoIndex,
        double value = std::numeric_limits<double>::quiet_NaN());

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }
  double value() const noexcept { return value_; }
  // The message without the leading "Kind: ".
  std::string_view detail() const noexcept {
    return std::string_view(what()).substr(to_string(kind_).size() + 2);
  }

 private:
  ErrorKind kind_;
  std::size_t row_;
  std::size_t col_;
  double value_;
};

}  // namespace phmm
