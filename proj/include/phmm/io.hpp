#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phmm/decode.hpp"
#include "phmm/eval.hpp"
#include "phmm/lexicon.hpp"

namespace phmm {

inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kFormatVersion = 1;

struct Provenance {
  std::optional<std::uint64_t> seed;
  std::string config_hash;
  std::string tool_version{kToolVersion};

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// A lexicon with its phoneme models; the same format serves as input
// (structure to train) and output (trained models).
struct ModelFile {
  Lexicon lexicon;
  std::optional<Provenance> provenance;
};

// 16 hex digits of the FNV-1a hash of `canonical`.
std::string config_hash(std::string_view canonical);

std::string model_to_string(const ModelFile& model);
// Parse / UnsupportedVersion for malformed files, then lexicon validation.
ModelFile model_from_string(std::string_view text);
void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);

// One decoded utterance as written to a hypotheses file.
struct DecodeRecord {
  std::string id;
  std::vector<std::string> reference;
  std::optional<Hypothesis> hypothesis;
  std::optional<std::string> error;  // why there is no hypothesis
};

// One JSON object per line; -inf scores are written as null.
void write_decode_record(std::ostream& out, const DecodeRecord& rec,
                         const std::vector<std::string>& channel_names);

// JSON document with pooled counts, rates, confusions and model counts.
// Timing fields are left out unless `with_timing`.
std::string report_to_string(const EvalReport& report, bool with_timing);

}  // namespace phmm
