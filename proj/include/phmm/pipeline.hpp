#pragma once

#include <map>
#include <string>
#include <vector>

#include "phmm/corpus.hpp"
#include "phmm/lexicon.hpp"
#include "phmm/training.hpp"

namespace phmm {

enum class TrainMode { segmented, embedded };

std::string_view to_string(TrainMode m);
TrainMode train_mode_from_string(std::string_view name);

struct ChannelTraining {
  std::string channel;
  // Embedded: one report for the whole channel. Segmented: one per phoneme.
  std::map<std::string, TrainReport> reports;
};

struct LexiconTraining {
  Lexicon lexicon;
  std::vector<ChannelTraining> channels;
};

// Seed used for everything trained in channel `name`.
std::uint64_t channel_seed(std::uint64_t seed, std::string_view name);

// Replaces every phoneme model by a fresh one of the same shape, initialized
// from the channel's pooled corpus observations; exit probabilities restart at
// 0.5.
Lexicon initialize_lexicon(const Lexicon& structure, const Corpus& corpus, const TrainConfig& cfg);

// Observation segments per phoneme id of one channel, cut along the corpus'
// ground-truth state paths. IncompatibleData when paths are missing.
std::map<std::string, std::vector<ObservationSeq>> phoneme_segments(const Lexicon& lexicon,
                                                                    std::size_t channel,
                                                                    const Corpus& corpus);

// Trains each channel on its own observations only. Embedded training starts
// from `start`'s phoneme models; segmented training initializes its own.
LexiconTraining train_lexicon(const Lexicon& start, const Corpus& corpus, TrainMode mode,
                              const TrainConfig& cfg);

}  // namespace phmm
