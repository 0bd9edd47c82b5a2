#include "phmm/lexicon.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "phmm/error.hpp"

namespace phmm {

std::optional<std::size_t> ChannelInventory::find(std::string_view id) const {
  for (std::size_t i = 0; i < phonemes.size(); ++i)
    if (phonemes[i].id == id) return i;
  return std::nullopt;
}

std::size_t ChannelInventory::sign_phoneme_count() const {
  return phonemes.size() - (epenthesis ? 1 : 0);
}

std::string_view to_string(EpenthesisPolicy p) {
  return p == EpenthesisPolicy::between_signs ? "between_signs" : "none";
}

EpenthesisPolicy epenthesis_policy_from_string(std::string_view name) {
  if (name == "none") return EpenthesisPolicy::none;
  if (name == "between_signs") return EpenthesisPolicy::between_signs;
  throw Error(ErrorKind::Parse, "unknown epenthesis policy '" + std::string(name) + "'");
}

std::size_t Lexicon::channel_index(std::string_view name) const {
  for (std::size_t c = 0; c < channels.size(); ++c)
    if (channels[c].name == name) return c;
  throw Error(ErrorKind::IncompatibleData, "unknown channel '" + std::string(name) + "'");
}

std::size_t Lexicon::sign_index(std::string_view id) const {
  for (std::size_t s = 0; s < signs.size(); ++s)
    if (signs[s].id == id) return s;
  throw Error(ErrorKind::UnknownSign, "sign '" + std::string(id) + "' is not in the lexicon");
}

std::vector<std::size_t> Lexicon::sign_indices(std::span<const std::string> ids) const {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(sign_index(id));
  return out;
}

std::vector<std::string> Lexicon::sign_ids(std::span<const std::size_t> indices) const {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (std::size_t s : indices) out.push_back(signs.at(s).id);
  return out;
}

std::vector<std::size_t> Lexicon::sorted_sign_order() const {
  std::vector<std::size_t> order(signs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return signs[a].id < signs[b].id; });
  return order;
}

void validate(const Lexicon& lexicon) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidLexicon, msg); };
  if (lexicon.channels.empty()) fail("lexicon has no channels");

  std::set<std::string> channel_names;
  for (const auto& ch : lexicon.channels) {
    if (!channel_names.insert(ch.name).second) fail("duplicate channel '" + ch.name + "'");
    if (ch.phonemes.empty()) fail("channel '" + ch.name + "' has no phonemes");
    std::set<std::string> ids;
    for (const auto& p : ch.phonemes) {
      if (!ids.insert(p.id).second) fail("duplicate phoneme '" + p.id + "' in " + ch.name);
      if (!(p.exit_prob > 0.0 && p.exit_prob <= 1.0))
        fail("phoneme '" + p.id + "' exit_prob outside (0, 1]");
      validate(p.hmm);
    }
    const auto& first = ch.phonemes.front().hmm.emissions;
    for (const auto& p : ch.phonemes) {
      const auto& em = p.hmm.emissions;
      const bool same_shape = em.kind() == first.kind() &&
                              (em.is_discrete() ? em.alphabet_size() == first.alphabet_size()
                                                : em.dimension() == first.dimension());
      if (!same_shape) fail("phonemes of channel '" + ch.name + "' disagree on emission shape");
    }
    if (ch.epenthesis && *ch.epenthesis >= ch.phonemes.size())
      fail("channel '" + ch.name + "' epenthesis index out of range");
    if (lexicon.policy == EpenthesisPolicy::between_signs && !ch.epenthesis)
      fail("policy between_signs needs an epenthesis phoneme in channel '" + ch.name + "'");
  }

  if (lexicon.signs.empty()) fail("lexicon has no signs");
  std::set<std::string> sign_ids;
  for (const auto& s : lexicon.signs) {
    if (!sign_ids.insert(s.id).second) fail("duplicate sign '" + s.id + "'");
    if (s.phonemes.size() != lexicon.channels.size())
      fail("sign '" + s.id + "' does not cover every channel");
    for (std::size_t c = 0; c < s.phonemes.size(); ++c) {
      if (s.phonemes[c].empty())
        fail("sign '" + s.id + "' has no phonemes in channel '" + lexicon.channels[c].name + "'");
      for (std::size_t p : s.phonemes[c]) {
        if (p >= lexicon.channels[c].phonemes.size())
          fail("sign '" + s.id + "' references a missing phoneme");
        if (lexicon.channels[c].epenthesis == p)
          fail("sign '" + s.id + "' uses the epenthesis phoneme");
      }
    }
  }
}

Lexicon permute_channels(const Lexicon& lexicon, std::span<const std::size_t> order) {
  if (order.size() != lexicon.n_channels())
    throw Error(ErrorKind::DimensionMismatch, "channel permutation has the wrong size");
  Lexicon out;
  out.policy = lexicon.policy;
  for (std::size_t c : order) out.channels.push_back(lexicon.channels.at(c));
  for (const auto& s : lexicon.signs) {
    Sign p{s.id, {}};
    for (std::size_t c : order) p.phonemes.push_back(s.phonemes.at(c));
    out.signs.push_back(std::move(p));
  }
  return out;
}

ModelCount model_count(const Lexicon& lexicon) {
  ModelCount mc;
  mc.product = 1;
  for (const auto& ch : lexicon.channels) {
    const std::uint64_t n = ch.sign_phoneme_count();
    mc.factored += n;
    if (n != 0 && mc.product > std::numeric_limits<std::uint64_t>::max() / n)
      throw Error(ErrorKind::SearchSpaceTooLarge, "model product overflows 64 bits");
    mc.product *= n;
  }
  if (lexicon.policy == EpenthesisPolicy::between_signs) mc.factored += lexicon.n_channels();
  return mc;
}

}  // namespace phmm
