#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phmm/corpus.hpp"
#include "phmm/decode.hpp"
#include "phmm/lexicon.hpp"

namespace phmm {

enum class EditOp { match, substitute, insert, remove };

struct AlignedPair {
  EditOp op;
  std::optional<std::size_t> ref;  // index into the reference
  std::optional<std::size_t> hyp;  // index into the hypothesis
};

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::vector<AlignedPair> alignment;  // in sequence order

  std::size_t errors() const { return substitutions + insertions + deletions; }
};

// Minimal unit-cost Levenshtein alignment. Among equally short alignments the
// one taking substitutions (or matches), then insertions, then deletions first
// when tracing back from the end is chosen.
EditCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp);

struct UtteranceResult {
  std::string id;
  std::vector<std::string> reference;
  std::optional<Hypothesis> hypothesis;  // empty when decoding found nothing
  double decode_seconds = 0.0;
};

// Label used in confusion counts for a missing or extra sign.
inline constexpr const char* kGap = "<none>";

struct EvalReport {
  std::size_t n_utterances = 0;
  std::size_t reference_signs = 0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  double ser = 0.0;
  double exact_match = 0.0;
  std::size_t decode_failures = 0;
  // reference sign (or kGap) -> hypothesis sign (or kGap) -> count
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
  double mean_decode_seconds = 0.0;
  ModelCount model_count;
  std::vector<UtteranceResult> utterances;
};

// Decodes every utterance and pools the edit counts over the corpus.
// NoFiniteHypothesis counts as deleting the whole reference; other errors
// propagate. `threads` decodes utterances concurrently.
EvalReport evaluate(const Lexicon& lexicon, const Corpus& corpus, const DecodeOptions& opts,
                    std::size_t threads = 1);

// Folds per-utterance results into pooled counts.
EvalReport summarize(const Lexicon& lexicon, std::vector<UtteranceResult> results);

}  // namespace phmm
