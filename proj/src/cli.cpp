#include "phmm/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/logger.h>
#include <spdlog/sinks/ostream_sink.h>

#include "phmm/corpus.hpp"
#include "phmm/decode.hpp"
#include "phmm/demo.hpp"
#include "phmm/error.hpp"
#include "phmm/eval.hpp"
#include "phmm/io.hpp"
#include "phmm/parallel_for.hpp"
#include "phmm/pipeline.hpp"

namespace phmm {

namespace {

using json = nlohmann::ordered_json;

struct Context {
  std::ostream& out;
  std::ostream& err;
  spdlog::logger& log;
};

Lexicon load_lexicon(const std::string& source) {
  if (source == "demo") return demo_lexicon();
  return load_model(source).lexicon;
}

// Trivial lexicon with the given sign-phoneme inventory sizes; only its
// counts are meaningful.
Lexicon counting_lexicon(const std::vector<std::size_t>& sizes, bool fillers) {
  Lexicon lex;
  lex.policy = fillers ? EpenthesisPolicy::between_signs : EpenthesisPolicy::none;
  const Hmm unit = make_bakis(1, 0.5, EmissionModel::discrete(Matrix(1, 1, 1.0)));
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    ChannelInventory inv;
    inv.name = "channel" + std::to_string(c);
    for (std::size_t p = 0; p < sizes[c]; ++p) inv.phonemes.push_back({"p" + std::to_string(p), unit, 0.5});
    if (fillers) {
      inv.epenthesis = inv.phonemes.size();
      inv.phonemes.push_back({"ep", unit, 0.5});
    }
    lex.channels.push_back(std::move(inv));
  }
  return lex;
}

std::ostream& open_output(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  return file;
}

json trajectory_json(const TrainReport& r) {
  json j;
  j["iterations"] = r.iterations_run;
  j["converged"] = r.converged;
  j["final_loglik"] = r.final_loglik();
  j["trajectory"] = r.loglik_trajectory;
  if (!r.untouched_phonemes.empty()) j["untouched_phonemes"] = r.untouched_phonemes;
  return j;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string lexicon = "demo";
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t min_signs = 1, max_signs = 3;
  std::vector<double> noise{0.0};
  std::size_t jitter = 0;
  std::size_t dwell_min = 0, dwell_max = 0;
  bool paths = false;
};

int cmd_generate(const GenerateArgs& a, Context& ctx) {
  const Lexicon lex = load_lexicon(a.lexicon);
  GenConfig cfg;
  cfg.n_utterances = a.n;
  cfg.seed = a.seed;
  cfg.signs_per_utterance = {a.min_signs, a.max_signs};
  cfg.channel_noise = a.noise;
  cfg.desync_jitter = a.jitter;
  cfg.include_paths = a.paths;
  if (a.dwell_max > 0) cfg.epenthesis_dwell = IntRange{a.dwell_min, a.dwell_max};
  const Corpus corpus = generate(lex, cfg);
  save_corpus(a.out, corpus);
  ctx.log.info("wrote {} utterances to {}", corpus.utterances.size(), a.out);
  ctx.out << "utterances=" << corpus.utterances.size() << " seed=" << a.seed << " out=" << a.out << "\n";
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string lexicon = "demo";
  std::string corpus;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-6;
  double smoothing = kDefaultSmoothing;
  std::string init = "uniform_perturbed";
  std::size_t threads = 1;
  bool keep_init = false;
  std::string out;
};

int cmd_train(const TrainArgs& a, Context& ctx) {
  const Lexicon structure = load_lexicon(a.lexicon);
  const Corpus corpus = load_corpus(a.corpus);
  TrainConfig cfg;
  cfg.max_iters = a.max_iters;
  cfg.rel_tol = a.tol;
  cfg.seed = a.seed;
  cfg.smoothing = a.smoothing;
  cfg.init = init_strategy_from_string(a.init);
  cfg.threads = a.threads;
  cfg.validate();
  const TrainMode mode = train_mode_from_string(a.mode);

  const Lexicon start = a.keep_init ? structure : initialize_lexicon(structure, corpus, cfg);
  ctx.log.info("training {} channels ({}) on {} utterances", start.n_channels(), a.mode,
               corpus.utterances.size());
  const LexiconTraining trained = train_lexicon(start, corpus, mode, cfg);

  std::ostringstream canon;
  canon << std::setprecision(17) << "mode=" << a.mode << ";max_iters=" << cfg.max_iters
        << ";rel_tol=" << cfg.rel_tol << ";smoothing=" << cfg.smoothing << ";init=" << a.init
        << ";keep_init=" << a.keep_init << ";seed=" << cfg.seed;
  ModelFile model{trained.lexicon, Provenance{a.seed, config_hash(canon.str()), std::string(kToolVersion)}};
  save_model(a.out, model);

  json report;
  report["mode"] = a.mode;
  report["seed"] = a.seed;
  json channels = json::array();
  for (const auto& ct : trained.channels) {
    json cj;
    cj["channel"] = ct.channel;
    double total = 0.0;
    std::size_t iters = 0;
    json parts = json::object();
    for (const auto& [key, r] : ct.reports) {
      total += r.final_loglik();
      iters = std::max(iters, r.iterations_run);
      parts[key] = trajectory_json(r);
    }
    cj["final_loglik"] = total;
    cj["iterations"] = iters;
    cj["reports"] = std::move(parts);
    channels.push_back(std::move(cj));
    ctx.log.info("{}: final loglik {} after {} iterations", ct.channel, total, iters);
  }
  report["channels"] = std::move(channels);
  ctx.out << report.dump(2) << "\n";
  return kExitOk;
}

// ---- decode / evaluate ------------------------------------------------------

struct DecodeArgs {
  std::string model;
  std::string corpus;
  std::string mode = "exhaustive";
  std::size_t max_signs = 3;
  std::size_t beam = 0;
  bool unbounded = false;
  std::size_t threads = 1;
  std::string out;
  std::string hypotheses;  // evaluate only
  bool no_timing = false;  // evaluate only
};

DecodeOptions decode_options(const DecodeArgs& a) {
  DecodeOptions o;
  o.mode = decode_mode_from_string(a.mode);
  o.max_signs = a.max_signs;
  if (a.beam > 0) o.beam_width = a.beam;
  o.bound_synced_length = !a.unbounded;
  return o;
}

void write_records(std::ostream& out, const Lexicon& lex, const std::vector<DecodeRecord>& records) {
  std::vector<std::string> names;
  for (const auto& ch : lex.channels) names.push_back(ch.name);
  for (const auto& r : records) write_decode_record(out, r, names);
}

int cmd_decode(const DecodeArgs& a, Context& ctx) {
  const Lexicon lex = load_lexicon(a.model);
  validate(lex);
  const Corpus corpus = load_corpus(a.corpus);
  const DecodeOptions opts = decode_options(a);
  std::vector<MultiObservation> inputs;
  for (const auto& u : corpus.utterances) inputs.push_back(observations_for(corpus, u, lex));

  std::vector<DecodeRecord> records(corpus.utterances.size());
  parallel_for(records.size(), a.threads, [&](std::size_t i) {
    records[i].id = corpus.utterances[i].id;
    records[i].reference = corpus.utterances[i].signs;
    try {
      records[i].hypothesis = decode(lex, inputs[i], opts);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoFiniteHypothesis && e.kind() != ErrorKind::UnequalChannelLengths) throw;
      records[i].error = e.what();
    }
  });
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.error.has_value();
  if (failed > 0) ctx.log.warn("{} of {} utterances have no hypothesis", failed, records.size());

  std::ofstream file;
  write_records(open_output(a.out, file, ctx.out), lex, records);
  return kExitOk;
}

int cmd_evaluate(const DecodeArgs& a, Context& ctx) {
  const Lexicon lex = load_lexicon(a.model);
  const Corpus corpus = load_corpus(a.corpus);
  const EvalReport report = evaluate(lex, corpus, decode_options(a), a.threads);
  ctx.log.info("SER {} over {} utterances", report.ser, report.n_utterances);
  if (!a.hypotheses.empty()) {
    std::vector<DecodeRecord> records;
    for (const auto& u : report.utterances) {
      DecodeRecord r{u.id, u.reference, u.hypothesis, std::nullopt};
      if (!u.hypothesis) r.error = std::string(to_string(ErrorKind::NoFiniteHypothesis));
      records.push_back(std::move(r));
    }
    std::ofstream file;
    write_records(open_output(a.hypotheses, file, ctx.out), lex, records);
  }
  std::ofstream file;
  open_output(a.out, file, ctx.out) << report_to_string(report, !a.no_timing);
  return kExitOk;
}

// ---- complexity / split -----------------------------------------------------

struct ComplexityArgs {
  std::string lexicon;
  std::vector<std::size_t> inventories;
  bool epenthesis = false;
};

int cmd_complexity(const ComplexityArgs& a, Context& ctx) {
  ModelCount mc;
  if (!a.inventories.empty())
    mc = model_count(counting_lexicon(a.inventories, a.epenthesis));
  else {
    const Lexicon lex = load_lexicon(a.lexicon.empty() ? "demo" : a.lexicon);
    validate(lex);
    mc = model_count(lex);
  }
  const double ratio = mc.factored ? static_cast<double>(mc.product) / static_cast<double>(mc.factored) : 0.0;
  ctx.out << "factored=" << mc.factored << " product=" << mc.product << " ratio=" << std::setprecision(6)
          << ratio << "\n";
  return kExitOk;
}

struct SplitArgs {
  std::string corpus;
  double fraction = 0.8;
  std::uint64_t seed = 0;
  std::string train_out, test_out;
};

int cmd_split(const SplitArgs& a, Context& ctx) {
  const auto [train, test] = split(load_corpus(a.corpus), a.fraction, a.seed);
  save_corpus(a.train_out, train);
  save_corpus(a.test_out, test);
  ctx.out << "train=" << train.utterances.size() << " test=" << test.utterances.size() << "\n";
  return kExitOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::DegenerateModel:
      return kExitTraining;
    case ErrorKind::InvalidConfig:
      return kExitUsage;
    default:
      return kExitInput;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  spdlog::logger log("phmm", sink);
  log.set_pattern("[%l] %v");
  log.set_level(spdlog::level::info);
  if (const char* level = std::getenv("SPDLOG_LEVEL")) log.set_level(spdlog::level::from_str(level));
  Context ctx{out, err, log};

  CLI::App app{"Parallel-channel HMM sign recognizer"};
  app.name("phmm");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  auto add_lexicon = [](CLI::App* sub, std::string& target, const std::string& name) {
    sub->add_option(name, target, "Model/lexicon file, or 'demo' for the built-in lexicon");
    sub->add_flag_callback("--demo", [&target] { target = "demo"; }, "Use the built-in demo lexicon");
  };

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Sample a synthetic corpus from a lexicon");
  add_lexicon(gen, ga.lexicon, "--lexicon");
  gen->add_option("--n", ga.n, "Number of utterances")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", ga.seed, "Random seed")->required();
  gen->add_option("--out", ga.out, "Corpus file to write")->required();
  gen->add_option("--min-signs", ga.min_signs, "Fewest signs per utterance")->check(CLI::PositiveNumber);
  gen->add_option("--max-signs", ga.max_signs, "Most signs per utterance")->check(CLI::PositiveNumber);
  gen->add_option("--noise", ga.noise, "Noise level, one value or one per channel")->delimiter(',');
  gen->add_option("--jitter", ga.jitter, "Max length difference between channels");
  gen->add_option("--dwell-min", ga.dwell_min, "Fewest frames per epenthesis filler");
  gen->add_option("--dwell-max", ga.dwell_max, "Most frames per epenthesis filler");
  gen->add_flag("--paths", ga.paths, "Store ground-truth state paths");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train every channel's phoneme models");
  add_lexicon(train, ta.lexicon, "--lexicon");
  train->add_option("--corpus", ta.corpus, "Training corpus")->required();
  train->add_option("--mode", ta.mode, "segmented or embedded")
      ->required()
      ->check(CLI::IsMember({"segmented", "embedded"}));
  train->add_option("--seed", ta.seed, "Random seed")->required();
  train->add_option("--max-iters", ta.max_iters, "EM iteration limit")->check(CLI::PositiveNumber);
  train->add_option("--tol", ta.tol, "Relative log-likelihood tolerance")->check(CLI::NonNegativeNumber);
  train->add_option("--smoothing", ta.smoothing, "Emission probability floor")->check(CLI::NonNegativeNumber);
  train->add_option("--init", ta.init, "uniform_perturbed or from_global_stats")
      ->check(CLI::IsMember({"uniform_perturbed", "from_global_stats"}));
  train->add_option("--threads", ta.threads, "E-step workers")->check(CLI::PositiveNumber);
  train->add_flag("--keep-init", ta.keep_init, "Start from the lexicon's parameters");
  train->add_option("--out", ta.out, "Model file to write")->required();

  DecodeArgs da, ea;
  auto decode_flags = [&](CLI::App* sub, DecodeArgs& a) {
    add_lexicon(sub, a.model, "--model");
    sub->add_option("--corpus", a.corpus, "Corpus to decode")->required();
    sub->add_option("--mode", a.mode, "exhaustive or synced")->check(CLI::IsMember({"exhaustive", "synced"}));
    sub->add_option("--max-signs", a.max_signs, "Longest sign sequence considered")->check(CLI::PositiveNumber);
    sub->add_option("--beam", a.beam, "Synced mode: joint states kept per frame")->check(CLI::PositiveNumber);
    sub->add_flag("--unbounded", a.unbounded, "Synced mode: no length bound");
    sub->add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", a.out, "Output file (default stdout)");
  };
  auto* dec = app.add_subcommand("decode", "Recognize the sign sequence of every utterance");
  decode_flags(dec, da);
  auto* ev = app.add_subcommand("evaluate", "Decode a labeled corpus and report error rates");
  decode_flags(ev, ea);
  ev->add_option("--hypotheses", ea.hypotheses, "Also write per-utterance hypotheses here");
  ev->add_flag("--no-timing", ea.no_timing, "Leave timing out of the report");

  ComplexityArgs ca;
  auto* cx = app.add_subcommand("complexity", "Compare factored and product model counts");
  add_lexicon(cx, ca.lexicon, "--lexicon");
  cx->add_option("--inventories", ca.inventories, "Inventory sizes, e.g. 10,8,4")->delimiter(',');
  cx->add_flag("--epenthesis", ca.epenthesis, "With --inventories: add one filler per channel");

  SplitArgs sa;
  auto* sp = app.add_subcommand("split", "Split a corpus into training and test parts");
  sp->add_option("--corpus", sa.corpus, "Corpus to split")->required();
  sp->add_option("--fraction", sa.fraction, "Training fraction in (0, 1)")->check(CLI::Range(0.0, 1.0));
  sp->add_option("--seed", sa.seed, "Random seed")->required();
  sp->add_option("--train-out", sa.train_out, "Training part")->required();
  sp->add_option("--test-out", sa.test_out, "Test part")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (dec->parsed() && da.model.empty()) {
    err << "decode: --model or --demo is required\n";
    return kExitUsage;
  }
  if (ev->parsed() && ea.model.empty()) {
    err << "evaluate: --model or --demo is required\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(ga, ctx);
    if (train->parsed()) return cmd_train(ta, ctx);
    if (dec->parsed()) return cmd_decode(da, ctx);
    if (ev->parsed()) return cmd_evaluate(ea, ctx);
    if (cx->parsed()) return cmd_complexity(ca, ctx);
    if (sp->parsed()) return cmd_split(sa, ctx);
  } catch (const Error& e) {
    log.error("{}", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    log.error("{}", e.what());
    return kExitInput;
  }
  return kExitUsage;
}

}  // namespace phmm
