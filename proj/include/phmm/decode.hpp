#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phmm/hmm.hpp"
#include "phmm/inference.hpp"
#include "phmm/lexicon.hpp"
#include "phmm/log_math.hpp"

namespace phmm {

struct Hypothesis {
  std::vector<std::string> signs;
  std::vector<LogProb> channel_scores;
  LogProb total = kLogZero;
  // State paths in the coordinates of each channel's composed utterance model.
  std::vector<StatePath> channel_paths;
  // First channel whose composed model cannot produce its observations.
  std::optional<std::size_t> dead_channel;
};

// Sum of per-channel scores, added in ascending order so that the result does
// not depend on channel order.
LogProb channel_total(std::span<const LogProb> scores);

// Throws DimensionMismatch (wrong channel count) or EmptyObservation.
void check_observations(const Lexicon& lexicon, const MultiObservation& mobs);

// Scores sign sequences against one utterance. Per-phoneme emission tables are
// computed once and shared by every hypothesis.
class UtteranceScorer {
 public:
  UtteranceScorer(const Lexicon& lexicon, const MultiObservation& mobs);

  Hypothesis score(std::span<const std::size_t> signs) const;
  LogProb total(std::span<const std::size_t> signs) const;

  // T x n_states log-emission table of phoneme p in channel c.
  const Matrix& phoneme_emissions(std::size_t c, std::size_t p) const { return cache_[c][p]; }
  // Emission table of an arbitrary chain of phonemes in channel c.
  Matrix chain_emissions(std::size_t c, std::span<const std::size_t> phonemes) const;

 private:
  LogProb channel_score(std::size_t c, std::span<const std::size_t> signs, StatePath* path) const;

  const Lexicon& lexicon_;
  std::vector<std::vector<Matrix>> cache_;
};

// Independent per-channel Viterbi alignment of the given sign sequence.
Hypothesis score_hypothesis(const Lexicon& lexicon, std::span<const std::string> signs,
                            const MultiObservation& mobs);

// Best of every sign sequence of length 1..max_signs. Ties go to the shorter
// sequence, then to the lexicographically smaller id sequence. Refuses more
// than kMaxCandidates sequences of the longest length.
inline constexpr std::uint64_t kMaxCandidates = 1000000;
Hypothesis decode_exhaustive(const Lexicon& lexicon, const MultiObservation& mobs,
                             std::size_t max_signs, std::size_t threads = 1);

// Joint Viterbi over all channels at once in which every channel enters and
// leaves each sign (and each epenthesis filler) at the same frame. Needs equal
// channel lengths. Without a beam the search is exact for this constrained
// space; `beam_width` keeps only that many joint states per frame.
// `max_signs` optionally bounds the sequence length.
Hypothesis decode_synced(const Lexicon& lexicon, const MultiObservation& mobs,
                         std::optional<std::size_t> beam_width = std::nullopt,
                         std::optional<std::size_t> max_signs = std::nullopt);

enum class DecodeMode { exhaustive, synced };

std::string_view to_string(DecodeMode m);
DecodeMode decode_mode_from_string(std::string_view name);

struct DecodeOptions {
  DecodeMode mode = DecodeMode::exhaustive;
  std::size_t max_signs = 3;               // exhaustive always, synced when set
  std::optional<std::size_t> beam_width;   // synced only
  bool bound_synced_length = true;
  std::size_t threads = 1;                 // exhaustive candidate scoring
};

Hypothesis decode(const Lexicon& lexicon, const MultiObservation& mobs, const DecodeOptions& opts);

}  // namespace phmm
