#pragma once

#include "phmm/lexicon.hpp"

namespace phmm {

// Eight signs over right hand, left hand and head. Every phoneme is a 3-state
// left-to-right model whose states each put 0.94 of their emission mass on a
// symbol no other state of the channel uses. Inter-sign epenthesis is on.
Lexicon demo_lexicon();

}  // namespace phmm
