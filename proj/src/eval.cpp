#include "phmm/eval.hpp"

#include <algorithm>
#include <chrono>

#include "phmm/error.hpp"
#include "phmm/parallel_for.hpp"

namespace phmm {

EditCounts edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]), d[i][j - 1] + 1, d[i - 1][j] + 1});

  EditCounts out;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])) {
      const bool same = ref[i - 1] == hyp[j - 1];
      out.alignment.push_back({same ? EditOp::match : EditOp::substitute, i - 1, j - 1});
      out.substitutions += !same;
      --i;
      --j;
    } else if (j > 0 && d[i][j] == d[i][j - 1] + 1) {
      out.alignment.push_back({EditOp::insert, std::nullopt, j - 1});
      ++out.insertions;
      --j;
    } else {
      out.alignment.push_back({EditOp::remove, i - 1, std::nullopt});
      ++out.deletions;
      --i;
    }
  }
  std::reverse(out.alignment.begin(), out.alignment.end());
  return out;
}

EvalReport summarize(const Lexicon& lexicon, std::vector<UtteranceResult> results) {
  EvalReport r;
  r.model_count = model_count(lexicon);
  r.n_utterances = results.size();
  std::size_t exact = 0;
  double seconds = 0.0;
  for (const auto& u : results) {
    const std::vector<std::string> none;
    const auto& hyp = u.hypothesis ? u.hypothesis->signs : none;
    r.decode_failures += !u.hypothesis;
    const EditCounts e = edit_distance(u.reference, hyp);
    r.reference_signs += u.reference.size();
    r.substitutions += e.substitutions;
    r.insertions += e.insertions;
    r.deletions += e.deletions;
    exact += u.hypothesis && e.errors() == 0;
    seconds += u.decode_seconds;
    for (const auto& a : e.alignment)
      ++r.confusion[a.ref ? u.reference[*a.ref] : kGap][a.hyp ? hyp[*a.hyp] : kGap];
  }
  const std::size_t errors = r.substitutions + r.insertions + r.deletions;
  if (r.reference_signs > 0)
    r.ser = static_cast<double>(errors) / static_cast<double>(r.reference_signs);
  if (r.n_utterances > 0) {
    r.exact_match = static_cast<double>(exact) / static_cast<double>(r.n_utterances);
    r.mean_decode_seconds = seconds / static_cast<double>(r.n_utterances);
  }
  r.utterances = std::move(results);
  return r;
}

EvalReport evaluate(const Lexicon& lexicon, const Corpus& corpus, const DecodeOptions& opts,
                    std::size_t threads) {
  validate(lexicon);
  std::vector<UtteranceResult> results(corpus.utterances.size());
  std::vector<MultiObservation> inputs;
  for (const auto& u : corpus.utterances) inputs.push_back(observations_for(corpus, u, lexicon));
  parallel_for(results.size(), threads, [&](std::size_t i) {
    const Utterance& u = corpus.utterances[i];
    UtteranceResult& r = results[i];
    r.id = u.id;
    r.reference = u.signs;
    const auto start = std::chrono::steady_clock::now();
    try {
      r.hypothesis = decode(lexicon, inputs[i], opts);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoFiniteHypothesis) throw;
    }
    r.decode_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return summarize(lexicon, std::move(results));
}

}  // namespace phmm
