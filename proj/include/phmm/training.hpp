#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "phmm/emissions.hpp"
#include "phmm/hmm.hpp"
#include "phmm/lexicon.hpp"
#include "phmm/observation.hpp"

namespace phmm {

enum class InitStrategy { uniform_perturbed, from_global_stats };

std::string_view to_string(InitStrategy s);
InitStrategy init_strategy_from_string(std::string_view name);

struct TrainConfig {
  std::size_t max_iters = 100;
  double rel_tol = 1e-6;  // stop when |dLL| / (|LL| + 1) < rel_tol
  std::uint64_t seed = 0;
  double smoothing = kDefaultSmoothing;
  InitStrategy init = InitStrategy::uniform_perturbed;
  // E-step workers. Statistics are merged in sequence order, so the result
  // does not depend on this value.
  std::size_t threads = 1;

  void validate() const;
};

struct TrainReport {
  // Total data log-likelihood of the initial model followed by one entry per
  // EM iteration (the model after that iteration).
  std::vector<double> loglik_trajectory;
  std::size_t iterations_run = 0;
  bool converged = false;
  // Embedded training: phonemes with no occurrence in the data; they are
  // returned exactly as initialized.
  std::vector<std::string> untouched_phonemes;

  double final_loglik() const { return loglik_trajectory.back(); }
};

// Called after every M-step with the iteration number (1-based) and the new
// model.
using IterationObserver = std::function<void(std::size_t, const Hmm&)>;

// Fresh parameters with `shape`'s state count, topology and emission shape,
// seeded from the data's global statistics. Left-to-right models start in
// state 0 and keep their structural zeros.
Hmm initialize(const Hmm& shape, std::span<const ObservationSeq> data, InitStrategy strategy,
               std::uint64_t seed);

struct TrainResult {
  Hmm model;
  TrainReport report;
};

// Throws IncompatibleData for empty or mismatched data and DegenerateModel
// when some sequence has zero likelihood under `init`.
TrainResult baum_welch(const Hmm& init, std::span<const ObservationSeq> data,
                       const TrainConfig& cfg, const IterationObserver& observer = {});

// Seed used for phoneme `id` by train_segmented.
std::uint64_t phoneme_seed(std::uint64_t seed, std::string_view id);

// Phoneme id plus a model whose shape (states, topology, emissions) is used
// for initialization.
struct PhonemeTemplate {
  std::string id;
  Hmm shape;
};

struct SegmentedResult {
  std::map<std::string, PhonemeModel> models;
  std::map<std::string, TrainReport> reports;
};

// Each phoneme is initialized and trained from its own segments only, with a
// seed derived from (cfg.seed, phoneme id). exit_prob is set to the inverse
// of the expected dwell in the last state. Throws MissingPhonemeData.
SegmentedResult train_segmented(std::span<const PhonemeTemplate> inventory,
                                const std::map<std::string, std::vector<ObservationSeq>>& segments,
                                const TrainConfig& cfg);

struct LabeledSequence {
  std::vector<std::size_t> signs;  // lexicon sign indices
  ObservationSeq obs;              // this channel's observations
};

struct EmbeddedResult {
  std::vector<PhonemeModel> phonemes;  // inventory order
  TrainReport report;
};

// Baum-Welch over each utterance's composed model with phoneme parameters
// (transitions, emissions, entry distribution, exit_prob) tied across all
// occurrences. Starts from the lexicon's current phoneme models.
EmbeddedResult train_embedded(const Lexicon& lexicon, std::size_t channel,
                              std::span<const LabeledSequence> utterances, const TrainConfig& cfg);

}  // namespace phmm
