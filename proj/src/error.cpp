#include "phmm/error.hpp"

namespace phmm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonStochasticRow: return "NonStochasticRow";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::TopologyViolation: return "TopologyViolation";
    case ErrorKind::EmptyObservation: return "EmptyObservation";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::AllPathsZero: return "AllPathsZero";
    case ErrorKind::VariantMismatch: return "VariantMismatch";
    case ErrorKind::StateOutOfRange: return "StateOutOfRange";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::EmptyState: return "EmptyState";
    case ErrorKind::IncompatibleData: return "IncompatibleData";
    case ErrorKind::DegenerateModel: return "DegenerateModel";
    case ErrorKind::MissingPhonemeData: return "MissingPhonemeData";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::UnknownSign: return "UnknownSign";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::NoFiniteHypothesis: return "NoFiniteHypothesis";
    case ErrorKind::UnequalChannelLengths: return "UnequalChannelLengths";
    case ErrorKind::SearchSpaceTooLarge: return "SearchSpaceTooLarge";
    case ErrorKind::InvalidLexicon: return "InvalidLexicon";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::GenerationFailed: return "GenerationFailed";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::size_t row,
             std::size_t col, double value)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      row_(row),
      col_(col),
      value_(value) {}

}  // namespace phmm
