#include "phmm/demo.hpp"

#include <string>

namespace phmm {

namespace {

constexpr std::size_t kStates = 3;
constexpr double kSelfLoop = 0.6;
constexpr double kExit = 0.4;
constexpr double kPeak = 0.94;

ChannelInventory make_channel(const std::string& name, const std::string& prefix, std::size_t n_sign_phonemes) {
  const std::size_t n_phonemes = n_sign_phonemes + 1;  // + filler
  const std::size_t alphabet = n_phonemes * kStates;
  ChannelInventory inv;
  inv.name = name;
  for (std::size_t p = 0; p < n_phonemes; ++p) {
    Matrix probs(kStates, alphabet, (1.0 - kPeak) / static_cast<double>(alphabet - 1));
    for (std::size_t s = 0; s < kStates; ++s) probs(s, p * kStates + s) = kPeak;
    const bool filler = p == n_sign_phonemes;
    inv.phonemes.push_back({filler ? prefix + "ep" : prefix + std::to_string(p),
                            make_bakis(kStates, kSelfLoop, EmissionModel::discrete(probs)), kExit});
  }
  inv.epenthesis = n_sign_phonemes;
  return inv;
}

}  // namespace

Lexicon demo_lexicon() {
  Lexicon lex;
  lex.policy = EpenthesisPolicy::between_signs;
  lex.channels.push_back(make_channel("right_hand", "R", 4));
  lex.channels.push_back(make_channel("left_hand", "L", 3));
  lex.channels.push_back(make_channel("head", "H", 2));
  // right hand, left hand, head phoneme indices
  lex.signs = {
      {"hello", {{0, 1}, {0}, {1}}},  {"thanks", {{1}, {0}, {0}}},
      {"house", {{2, 3}, {1}, {0}}},  {"work", {{3}, {2}, {0}}},
      {"friend", {{0}, {1, 2}, {1}}}, {"eat", {{2}, {0}, {1}}},
      {"drink", {{1, 2}, {2}, {1}}},  {"school", {{3, 0}, {1}, {0}}},
  };
  return lex;
}

}  // namespace phmm
