#pragma once

#include <span>
#include <string>
#include <vector>

#include "phmm/hmm.hpp"
#include "phmm/lexicon.hpp"

namespace phmm {

// One phoneme occurrence inside a composed chain.
struct ChainLink {
  std::size_t phoneme = 0;        // index into the channel inventory
  std::size_t sign_position = 0;  // which sign of the sequence it belongs to
  bool epenthesis = false;        // filler inserted after sign_position
};

struct ComposedSegment {
  ChainLink link;
  std::size_t offset = 0;
  std::size_t n_states = 0;

  std::size_t last_state() const { return offset + n_states - 1; }
};

struct ComposedModel {
  Hmm hmm;
  std::vector<ComposedSegment> segments;
};

// The phoneme occurrences spelled by a sign sequence in one channel, with the
// epenthesis filler between consecutive signs when the policy asks for it.
std::vector<ChainLink> expand_signs(const Lexicon& lexicon, std::size_t channel,
                                    std::span<const std::size_t> signs);

// Left-to-right concatenation. The last state of every non-final link keeps
// (1 - e) of its own row and sends e * pi_next into the successor, where e is
// that phoneme's exit_prob. With `open_end` the final link is treated the same
// way and its exit mass leaves the model (rows then sum to 1 - e).
// Emissions are stacked only when `with_emissions` is set.
ComposedModel compose_chain(const ChannelInventory& inventory, std::span<const ChainLink> links,
                            bool with_emissions = true, bool open_end = false);

ComposedModel compose_utterance(const Lexicon& lexicon, std::size_t channel,
                                std::span<const std::size_t> signs, bool with_emissions = true);

// Throws UnknownSign or EmptySequence.
Hmm compose_utterance_model(const Lexicon& lexicon, std::size_t channel,
                            std::span<const std::string> sign_ids);

}  // namespace phmm
