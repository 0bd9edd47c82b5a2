#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phmm/hmm.hpp"
#include "phmm/observation.hpp"

namespace phmm {

// One phoneme of one channel. `exit_prob` is the probability mass that leaves
// the model's last state when it is followed by another model in a chain; the
// last state keeps (1 - exit_prob) times its own row.
struct PhonemeModel {
  std::string id;
  Hmm hmm;
  double exit_prob = 0.5;

  friend bool operator==(const PhonemeModel&, const PhonemeModel&) = default;
};

struct ChannelInventory {
  std::string name;
  std::vector<PhonemeModel> phonemes;
  std::optional<std::size_t> epenthesis;  // index into phonemes

  std::optional<std::size_t> find(std::string_view id) const;
  // Phoneme models excluding the epenthesis filler.
  std::size_t sign_phoneme_count() const;
};

// A sign: per channel, a nonempty phoneme index sequence into that channel's
// inventory.
struct Sign {
  std::string id;
  std::vector<std::vector<std::size_t>> phonemes;
};

enum class EpenthesisPolicy { none, between_signs };

std::string_view to_string(EpenthesisPolicy p);
EpenthesisPolicy epenthesis_policy_from_string(std::string_view name);

inline const std::vector<std::string>& default_channel_names() {
  static const std::vector<std::string> names{"right_hand", "left_hand", "head"};
  return names;
}

struct Lexicon {
  std::vector<ChannelInventory> channels;
  std::vector<Sign> signs;
  EpenthesisPolicy policy = EpenthesisPolicy::none;

  std::size_t n_channels() const noexcept { return channels.size(); }
  std::size_t channel_index(std::string_view name) const;  // throws IncompatibleData
  std::size_t sign_index(std::string_view id) const;       // throws UnknownSign
  std::vector<std::size_t> sign_indices(std::span<const std::string> ids) const;
  std::vector<std::string> sign_ids(std::span<const std::size_t> indices) const;
  // Sign indices ordered by id (std::string comparison).
  std::vector<std::size_t> sorted_sign_order() const;
};

// InvalidLexicon for structural problems; Hmm errors for bad phoneme models.
void validate(const Lexicon& lexicon);

// Channel `k` of the result is channel `order[k]` of the input.
Lexicon permute_channels(const Lexicon& lexicon, std::span<const std::size_t> order);

// Per-channel observation sequences of one utterance, in lexicon channel
// order; lengths may differ.
using MultiObservation = std::vector<ObservationSeq>;

struct ModelCount {
  std::uint64_t factored = 0;  // sum of inventory sizes (+ fillers if used)
  std::uint64_t product = 0;   // product of inventory sizes
};

ModelCount model_count(const Lexicon& lexicon);

}  // namespace phmm
