#pragma once

#include <map>
#include <string>
#include <vector>

#include "bacap/numerics.hpp"

namespace bacap {

// One decoded candidate with its reference sentences, keyed by video id so
// corpus iteration order is canonical.
struct EvalEntry {
  std::vector<std::string> candidate;
  std::vector<std::vector<std::string>> references;
};
using EvalCorpus = std::map<std::string, EvalEntry>;

// Corpus-level BLEU-4: clipped n-gram matches and candidate n-gram totals are
// aggregated over the whole corpus before the precisions are combined with
// uniform 1/4 weights. The brevity penalty uses, per video, the reference
// length closest to the candidate length (ties prefer the shorter). Any order
// with zero aggregate matches makes the score 0.
double bleu4(const EvalCorpus& corpus);

// ROUGE-L F-measure with beta = 1.2: per video the maximum over references of
// F = (1+b^2) R P / (R + b^2 P) with R, P from the longest common
// subsequence; the corpus score is the mean over videos.
double rouge_l(const EvalCorpus& corpus);

// CIDEr over n = 1..4: per n-gram tf (raw counts) weighted by
// idf = log(V / max(df, 1)) where df counts videos whose references contain
// the n-gram and V is the corpus size; per-video score is the mean over n of
// the mean cosine similarity against each reference (zero vectors score 0).
struct CiderResult {
  double mean = 0.0;
  std::map<std::string, double> per_video;
};
CiderResult cider(const EvalCorpus& corpus);

// One-to-one matching of predicted to reference positions within the given
// tolerance (both lists are sorted first). With no matches the score is 0
// unless both lists are empty, which counts as perfect.
struct BoundaryF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Index matches = 0;
};
BoundaryF1 boundary_f1(std::vector<Index> predicted, std::vector<Index> reference,
                       Index tolerance);

}  // namespace bacap
