#include "phmm/pipeline.hpp"

#include "phmm/compose.hpp"
#include "phmm/error.hpp"
#include "phmm/random.hpp"

namespace phmm {

std::string_view to_string(TrainMode m) { return m == TrainMode::segmented ? "segmented" : "embedded"; }

TrainMode train_mode_from_string(std::string_view name) {
  if (name == "segmented") return TrainMode::segmented;
  if (name == "embedded") return TrainMode::embedded;
  throw Error(ErrorKind::InvalidConfig, "unknown training mode '" + std::string(name) + "'");
}

std::uint64_t channel_seed(std::uint64_t seed, std::string_view name) {
  return derive_seed(seed, stable_hash(name));
}

namespace {

std::size_t corpus_channel(const Corpus& corpus, const std::string& name) {
  for (std::size_t k = 0; k < corpus.channels.size(); ++k)
    if (corpus.channels[k] == name) return k;
  throw Error(ErrorKind::IncompatibleData, "corpus has no channel '" + name + "'");
}

}  // namespace

Lexicon initialize_lexicon(const Lexicon& structure, const Corpus& corpus, const TrainConfig& cfg) {
  if (corpus.utterances.empty()) throw Error(ErrorKind::IncompatibleData, "corpus is empty");
  Lexicon out = structure;
  for (auto& ch : out.channels) {
    const std::size_t k = corpus_channel(corpus, ch.name);
    std::vector<ObservationSeq> pooled;
    for (const auto& u : corpus.utterances) pooled.push_back(u.channels[k]);
    const std::uint64_t seed = channel_seed(cfg.seed, ch.name);
    for (auto& pm : ch.phonemes) {
      pm.hmm = initialize(pm.hmm, pooled, cfg.init, phoneme_seed(seed, pm.id));
      pm.exit_prob = 0.5;
    }
  }
  return out;
}

std::map<std::string, std::vector<ObservationSeq>> phoneme_segments(const Lexicon& lexicon,
                                                                    std::size_t channel,
                                                                    const Corpus& corpus) {
  const auto& inv = lexicon.channels.at(channel);
  const std::size_t k = corpus_channel(corpus, inv.name);
  std::map<std::string, std::vector<ObservationSeq>> out;
  for (const auto& u : corpus.utterances) {
    if (!u.paths)
      throw Error(ErrorKind::IncompatibleData,
                  "segmented training needs state paths; utterance '" + u.id + "' has none");
    const auto signs = lexicon.sign_indices(u.signs);
    const ComposedModel cm = compose_utterance(lexicon, channel, signs, false);
    const StatePath& path = (*u.paths)[k];
    const ObservationSeq& obs = u.channels[k];
    if (path.size() != obs.size())
      throw Error(ErrorKind::IncompatibleData, "utterance '" + u.id + "' path and observations differ in length");
    for (const auto& seg : cm.segments) {
      ObservationSeq piece;
      for (std::size_t t = 0; t < path.size(); ++t)
        if (path[t] >= seg.offset && path[t] <= seg.last_state()) piece.push_back(obs[t]);
      if (!piece.empty()) out[inv.phonemes[seg.link.phoneme].id].push_back(std::move(piece));
    }
  }
  return out;
}

LexiconTraining train_lexicon(const Lexicon& start, const Corpus& corpus, TrainMode mode,
                              const TrainConfig& cfg) {
  validate(start);
  cfg.validate();
  if (corpus.utterances.empty()) throw Error(ErrorKind::IncompatibleData, "corpus is empty");
  LexiconTraining out{start, {}};
  for (std::size_t c = 0; c < start.n_channels(); ++c) {
    auto& inv = out.lexicon.channels[c];
    TrainConfig ccfg = cfg;
    ccfg.seed = channel_seed(cfg.seed, inv.name);
    ChannelTraining ct{inv.name, {}};
    if (mode == TrainMode::embedded) {
      const std::size_t k = corpus_channel(corpus, inv.name);
      std::vector<LabeledSequence> data;
      for (const auto& u : corpus.utterances) data.push_back({start.sign_indices(u.signs), u.channels[k]});
      EmbeddedResult r = train_embedded(start, c, data, ccfg);
      inv.phonemes = std::move(r.phonemes);
      ct.reports[inv.name] = std::move(r.report);
    } else {
      std::vector<PhonemeTemplate> templates;
      for (const auto& pm : inv.phonemes) templates.push_back({pm.id, pm.hmm});
      SegmentedResult r = train_segmented(templates, phoneme_segments(start, c, corpus), ccfg);
      for (auto& pm : inv.phonemes) pm = r.models.at(pm.id);
      ct.reports = std::move(r.reports);
    }
    out.channels.push_back(std::move(ct));
  }
  return out;
}

}  // namespace phmm
