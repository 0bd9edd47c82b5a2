#include "phmm/compose.hpp"

#include "phmm/error.hpp"

namespace phmm {

std::vector<ChainLink> expand_signs(const Lexicon& lexicon, std::size_t channel,
                                    std::span<const std::size_t> signs) {
  if (signs.empty()) throw Error(ErrorKind::EmptySequence, "sign sequence is empty");
  if (channel >= lexicon.n_channels())
    throw Error(ErrorKind::DimensionMismatch, "channel index out of range", channel);
  const auto& inventory = lexicon.channels[channel];
  const bool fillers = lexicon.policy == EpenthesisPolicy::between_signs;
  std::vector<ChainLink> links;
  for (std::size_t k = 0; k < signs.size(); ++k) {
    if (signs[k] >= lexicon.signs.size())
      throw Error(ErrorKind::UnknownSign, "sign index out of range", signs[k]);
    if (k > 0 && fillers) {
      if (!inventory.epenthesis)
        throw Error(ErrorKind::InvalidLexicon, "channel '" + inventory.name + "' has no epenthesis");
      links.push_back({*inventory.epenthesis, k - 1, true});
    }
    for (std::size_t p : lexicon.signs[signs[k]].phonemes.at(channel)) links.push_back({p, k, false});
  }
  return links;
}

ComposedModel compose_chain(const ChannelInventory& inventory, std::span<const ChainLink> links,
                            bool with_emissions, bool open_end) {
  if (links.empty()) throw Error(ErrorKind::EmptySequence, "nothing to compose");

  ComposedModel out;
  std::size_t total = 0;
  bool bakis = true;
  for (std::size_t k = 0; k < links.size(); ++k) {
    const PhonemeModel& pm = inventory.phonemes.at(links[k].phoneme);
    out.segments.push_back({links[k], total, pm.hmm.n_states()});
    total += pm.hmm.n_states();
    bakis = bakis && pm.hmm.topology == Topology::left_to_right;
    if (k > 0)
      for (std::size_t b = 1; b < pm.hmm.n_states(); ++b) bakis = bakis && pm.hmm.pi[b] == 0.0;
  }

  Hmm& h = out.hmm;
  h.pi.assign(total, 0.0);
  h.trans = Matrix(total, total);
  h.topology = bakis ? Topology::left_to_right : Topology::ergodic;

  const Hmm& first = inventory.phonemes[links[0].phoneme].hmm;
  for (std::size_t b = 0; b < first.n_states(); ++b) h.pi[b] = first.pi[b];

  for (std::size_t k = 0; k < out.segments.size(); ++k) {
    const auto& seg = out.segments[k];
    const PhonemeModel& pm = inventory.phonemes[seg.link.phoneme];
    const Matrix& a = pm.hmm.trans;
    const std::size_t n = seg.n_states;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t j = 0; j < n; ++j) h.trans(seg.offset + i, seg.offset + j) = a(i, j);

    const bool has_next = k + 1 < out.segments.size();
    const double stay = (has_next || open_end) ? 1.0 - pm.exit_prob : 1.0;
    for (std::size_t j = 0; j < n; ++j)
      h.trans(seg.last_state(), seg.offset + j) = stay == 1.0 ? a(n - 1, j) : stay * a(n - 1, j);
    if (has_next) {
      const auto& next = out.segments[k + 1];
      const Hmm& nh = inventory.phonemes[next.link.phoneme].hmm;
      for (std::size_t b = 0; b < next.n_states; ++b)
        h.trans(seg.last_state(), next.offset + b) = pm.exit_prob * nh.pi[b];
    }
  }

  if (with_emissions) {
    std::vector<const EmissionModel*> parts;
    for (const auto& seg : out.segments) parts.push_back(&inventory.phonemes[seg.link.phoneme].hmm.emissions);
    h.emissions = EmissionModel::concat(parts);
  }
  return out;
}

ComposedModel compose_utterance(const Lexicon& lexicon, std::size_t channel,
                                std::span<const std::size_t> signs, bool with_emissions) {
  const auto links = expand_signs(lexicon, channel, signs);
  return compose_chain(lexicon.channels[channel], links, with_emissions);
}

Hmm compose_utterance_model(const Lexicon& lexicon, std::size_t channel,
                            std::span<const std::string> sign_ids) {
  if (sign_ids.empty()) throw Error(ErrorKind::EmptySequence, "sign sequence is empty");
  const auto idx = lexicon.sign_indices(sign_ids);
  return compose_utterance(lexicon, channel, idx, true).hmm;
}

}  // namespace phmm
