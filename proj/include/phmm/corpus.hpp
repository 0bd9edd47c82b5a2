#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phmm/hmm.hpp"
#include "phmm/lexicon.hpp"

namespace phmm {

struct IntRange {
  std::size_t lo = 1;
  std::size_t hi = 1;

  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct GenConfig {
  std::size_t n_utterances = 100;
  IntRange signs_per_utterance{1, 3};
  std::uint64_t seed = 0;
  // Frames spent in each epenthesis filler; unconstrained when unset.
  std::optional<IntRange> epenthesis_dwell;
  // Per channel (or one value for all): substitution probability for discrete
  // channels, standard deviation of additive noise for continuous ones.
  std::vector<double> channel_noise{0.0};
  // Channels other than the first get a length within this many frames of the
  // first channel's; 0 keeps every channel the same length.
  std::size_t desync_jitter = 0;
  bool include_paths = false;

  void validate(const Lexicon& lexicon) const;
  double noise(std::size_t channel) const;
};

struct Utterance {
  std::string id;
  std::vector<std::string> signs;
  MultiObservation channels;  // corpus channel order
  std::optional<std::vector<StatePath>> paths;  // composed-model coordinates

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Corpus {
  std::vector<std::string> channels;
  std::vector<Utterance> utterances;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Utterance u is drawn from its own generator seeded by (cfg.seed, u), so the
// result is reproducible and independent of generation order. Throws
// GenerationFailed when a dwell or length constraint cannot be met.
Corpus generate(const Lexicon& lexicon, const GenConfig& cfg);

// Seeded shuffle, then the first round(fraction * n) utterances go to
// training. Both parts keep corpus order. Throws DegenerateSplit.
std::pair<Corpus, Corpus> split(const Corpus& corpus, double train_fraction, std::uint64_t seed);

// Observations of `u` in the lexicon's channel order. IncompatibleData when a
// channel is missing.
MultiObservation observations_for(const Corpus& corpus, const Utterance& u, const Lexicon& lexicon);

inline constexpr int kCorpusVersion = 1;

// One JSON object per line:
//   {"corpus_version":1,"id":..,"signs":[..],"channels":{name:[..]},"paths":{name:[..]}}
// Discrete observations are integers, continuous ones arrays of numbers.
void write_corpus(std::ostream& out, const Corpus& corpus);
Corpus read_corpus(std::istream& in);  // Parse, UnsupportedVersion
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

}  // namespace phmm
