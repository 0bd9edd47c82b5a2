#include "phmm/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "phmm/error.hpp"
#include "phmm/random.hpp"

namespace phmm {

using json = nlohmann::ordered_json;

std::string config_hash(std::string_view canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash(canonical)));
  return buf;
}

namespace {

json score_json(double s) { return std::isfinite(s) ? json(s) : json(nullptr); }

json matrix_json(const Matrix& m) { return m.to_rows(); }

json hmm_json(const Hmm& h) {
  json j;
  j["topology"] = std::string(to_string(h.topology));
  j["pi"] = h.pi;
  j["trans"] = matrix_json(h.trans);
  json e;
  if (h.emissions.is_discrete()) {
    e["kind"] = "discrete";
    e["probs"] = matrix_json(h.emissions.probs());
  } else {
    e["kind"] = "gaussian";
    e["means"] = matrix_json(h.emissions.means());
    e["variances"] = matrix_json(h.emissions.variances());
  }
  j["emissions"] = std::move(e);
  return j;
}

// Field access that reports the dotted path of whatever is missing or wrong.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  Reader operator[](std::string_view key) const {
    const std::string p = path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    if (!j_.is_object()) fail(path_, "expected an object");
    const auto it = j_.find(key);
    if (it == j_.end()) fail(p, "missing field");
    return {*it, p};
  }
  Reader operator[](std::size_t i) const {
    return {j_.at(i), path_ + "[" + std::to_string(i) + "]"};
  }
  bool has(std::string_view key) const { return j_.is_object() && j_.contains(key); }
  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }
  std::size_t size() const {
    if (!j_.is_array()) fail(path_, "expected an array");
    return j_.size();
  }

  template <typename T>
  T as() const {
    try {
      return j_.get<T>();
    } catch (const json::exception&) {
      fail(path_, "has the wrong type");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::Parse, "'" + path + "' " + what);
  }

 private:
  const json& j_;
  std::string path_;
};

Matrix read_matrix(const Reader& r) {
  const auto rows = r.as<std::vector<std::vector<double>>>();
  for (const auto& row : rows)
    if (row.size() != rows.front().size()) Reader::fail(r.path(), "has ragged rows");
  return Matrix::from_rows(rows);
}

Hmm read_hmm(const Reader& r) {
  Hmm h;
  const auto topology = r["topology"].as<std::string>();
  try {
    h.topology = topology_from_string(topology);
  } catch (const Error&) {
    Reader::fail(r.path() + ".topology", "is not a known topology");
  }
  h.pi = r["pi"].as<std::vector<double>>();
  h.trans = read_matrix(r["trans"]);
  const Reader e = r["emissions"];
  const auto kind = e["kind"].as<std::string>();
  if (kind == "discrete")
    h.emissions = EmissionModel::discrete(read_matrix(e["probs"]));
  else if (kind == "gaussian")
    h.emissions = EmissionModel::gaussian(read_matrix(e["means"]), read_matrix(e["variances"]));
  else
    Reader::fail(e.path() + ".kind", "must be 'discrete' or 'gaussian'");
  return h;
}

void check_version(const Reader& root) {
  const int v = root["format_version"].as<int>();
  if (v < 1 || v > kFormatVersion)
    throw Error(ErrorKind::UnsupportedVersion, "format_version " + std::to_string(v) +
                                                   " is not supported (max " +
                                                   std::to_string(kFormatVersion) + ")");
}

}  // namespace

std::string model_to_string(const ModelFile& model) {
  const Lexicon& lex = model.lexicon;
  json j;
  j["format_version"] = kFormatVersion;
  json channels = json::array();
  for (const auto& ch : lex.channels) channels.push_back(ch.name);
  j["channels"] = channels;
  json inventories = json::object();
  for (const auto& ch : lex.channels) {
    json inv;
    inv["epenthesis"] = ch.epenthesis ? json(ch.phonemes[*ch.epenthesis].id) : json(nullptr);
    json phonemes = json::array();
    for (const auto& p : ch.phonemes) {
      json pj;
      pj["id"] = p.id;
      pj["exit_prob"] = p.exit_prob;
      pj["hmm"] = hmm_json(p.hmm);
      phonemes.push_back(std::move(pj));
    }
    inv["phonemes"] = std::move(phonemes);
    inventories[ch.name] = std::move(inv);
  }
  j["inventories"] = std::move(inventories);
  json lj;
  lj["epenthesis_policy"] = std::string(to_string(lex.policy));
  json signs = json::array();
  for (const auto& s : lex.signs) {
    json sj;
    sj["id"] = s.id;
    json per = json::object();
    for (std::size_t c = 0; c < lex.n_channels(); ++c) {
      json ids = json::array();
      for (std::size_t p : s.phonemes.at(c)) ids.push_back(lex.channels[c].phonemes.at(p).id);
      per[lex.channels[c].name] = std::move(ids);
    }
    sj["phonemes"] = std::move(per);
    signs.push_back(std::move(sj));
  }
  lj["signs"] = std::move(signs);
  j["lexicon"] = std::move(lj);
  if (model.provenance) {
    json pj;
    pj["seed"] = model.provenance->seed ? json(*model.provenance->seed) : json(nullptr);
    pj["config_hash"] = model.provenance->config_hash;
    pj["tool_version"] = model.provenance->tool_version;
    j["provenance"] = std::move(pj);
  }
  return j.dump(2) + "\n";
}

ModelFile model_from_string(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("model file is not valid JSON: ") + e.what());
  }
  const Reader root(j, "");
  check_version(root);

  ModelFile out;
  Lexicon& lex = out.lexicon;
  const auto names = root["channels"].as<std::vector<std::string>>();
  const Reader inventories = root["inventories"];
  for (const auto& name : names) {
    const Reader inv = inventories[name];
    ChannelInventory ch;
    ch.name = name;
    const Reader phonemes = inv["phonemes"];
    for (std::size_t i = 0; i < phonemes.size(); ++i) {
      const Reader p = phonemes[i];
      ch.phonemes.push_back({p["id"].as<std::string>(), read_hmm(p["hmm"]), p["exit_prob"].as<double>()});
    }
    const Reader eps = inv["epenthesis"];
    if (!eps.raw().is_null()) {
      const auto id = eps.as<std::string>();
      ch.epenthesis = ch.find(id);
      if (!ch.epenthesis) Reader::fail(eps.path(), "names unknown phoneme '" + id + "'");
    }
    lex.channels.push_back(std::move(ch));
  }
  const Reader lj = root["lexicon"];
  const auto policy = lj["epenthesis_policy"].as<std::string>();
  try {
    lex.policy = epenthesis_policy_from_string(policy);
  } catch (const Error&) {
    Reader::fail("lexicon.epenthesis_policy", "must be 'none' or 'between_signs'");
  }
  const Reader signs = lj["signs"];
  for (std::size_t i = 0; i < signs.size(); ++i) {
    const Reader s = signs[i];
    Sign sign{s["id"].as<std::string>(), {}};
    for (const auto& ch : lex.channels) {
      const Reader ids = s["phonemes"][ch.name];
      std::vector<std::size_t> seq;
      for (const auto& id : ids.as<std::vector<std::string>>()) {
        const auto p = ch.find(id);
        if (!p) Reader::fail(ids.path(), "names unknown phoneme '" + id + "'");
        seq.push_back(*p);
      }
      sign.phonemes.push_back(std::move(seq));
    }
    lex.signs.push_back(std::move(sign));
  }
  if (root.has("provenance")) {
    const Reader p = root["provenance"];
    Provenance prov;
    if (!p["seed"].raw().is_null()) prov.seed = p["seed"].as<std::uint64_t>();
    prov.config_hash = p["config_hash"].as<std::string>();
    prov.tool_version = p["tool_version"].as<std::string>();
    out.provenance = std::move(prov);
  }
  validate(lex);
  return out;
}

void save_model(const std::string& path, const ModelFile& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << model_to_string(model);
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return model_from_string(text.str());
}

void write_decode_record(std::ostream& out, const DecodeRecord& rec,
                         const std::vector<std::string>& channel_names) {
  json j;
  j["format_version"] = kFormatVersion;
  j["id"] = rec.id;
  j["reference"] = rec.reference;
  if (rec.hypothesis) {
    const Hypothesis& h = *rec.hypothesis;
    j["signs"] = h.signs;
    j["total"] = score_json(h.total);
    json scores = json::object();
    for (std::size_t c = 0; c < channel_names.size(); ++c) scores[channel_names[c]] = score_json(h.channel_scores[c]);
    j["channel_scores"] = std::move(scores);
    j["dead_channel"] = h.dead_channel ? json(channel_names[*h.dead_channel]) : json(nullptr);
  } else {
    j["signs"] = nullptr;
    j["total"] = nullptr;
    j["channel_scores"] = nullptr;
    j["dead_channel"] = nullptr;
  }
  j["error"] = rec.error ? json(*rec.error) : json(nullptr);
  out << j.dump() << '\n';
}

std::string report_to_string(const EvalReport& r, bool with_timing) {
  json j;
  j["format_version"] = kFormatVersion;
  j["n_utterances"] = r.n_utterances;
  j["reference_signs"] = r.reference_signs;
  j["substitutions"] = r.substitutions;
  j["insertions"] = r.insertions;
  j["deletions"] = r.deletions;
  j["ser"] = r.ser;
  j["exact_match"] = r.exact_match;
  j["decode_failures"] = r.decode_failures;
  j["model_count"] = {{"factored", r.model_count.factored}, {"product", r.model_count.product}};
  json confusion = json::object();
  for (const auto& [ref, row] : r.confusion) {
    json rj = json::object();
    for (const auto& [hyp, n] : row) rj[hyp] = n;
    confusion[ref] = std::move(rj);
  }
  j["confusion"] = std::move(confusion);
  if (with_timing) j["mean_decode_seconds"] = r.mean_decode_seconds;
  return j.dump(2) + "\n";
}

}  // namespace phmm
