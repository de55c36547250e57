#include "bacap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <unordered_map>

namespace bacap {

namespace {

constexpr int kMaxOrder = 4;

void check_corpus(const EvalCorpus& corpus, const char* where) {
  if (corpus.empty()) throw std::invalid_argument(std::string(where) + ": empty corpus");
  for (const auto& [id, entry] : corpus) {
    if (entry.references.empty()) {
      throw std::invalid_argument(std::string(where) + ": video '" + id + "' has no references");
    }
  }
}

// N-grams joined on a separator that tokenized words cannot contain.
std::unordered_map<std::string, std::int64_t> ngram_counts(const std::vector<std::string>& words,
                                                           int n) {
  std::unordered_map<std::string, std::int64_t> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
    std::string key = words[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += words[i + static_cast<std::size_t>(j)];
    }
    counts[key] += 1;
  }
  return counts;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  std::vector<std::size_t> prev(nb + 1, 0);
  std::vector<std::size_t> cur(nb + 1, 0);
  for (std::size_t i = 1; i <= na; ++i) {
    for (std::size_t j = 1; j <= nb; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[nb];
}

}  // namespace

double bleu4(const EvalCorpus& corpus) {
  check_corpus(corpus, "bleu4");
  std::int64_t matched[kMaxOrder] = {};
  std::int64_t total[kMaxOrder] = {};
  std::int64_t candidate_len = 0;
  std::int64_t reference_len = 0;

  for (const auto& [id, entry] : corpus) {
    const std::int64_t c = static_cast<std::int64_t>(entry.candidate.size());
    candidate_len += c;

    // Reference length closest to the candidate's; ties pick the shorter.
    std::int64_t best_r = static_cast<std::int64_t>(entry.references.front().size());
    for (const auto& ref : entry.references) {
      const std::int64_t r = static_cast<std::int64_t>(ref.size());
      const std::int64_t d = std::llabs(r - c);
      const std::int64_t best_d = std::llabs(best_r - c);
      if (d < best_d || (d == best_d && r < best_r)) best_r = r;
    }
    reference_len += best_r;

    for (int n = 1; n <= kMaxOrder; ++n) {
      const auto cand_counts = ngram_counts(entry.candidate, n);
      std::unordered_map<std::string, std::int64_t> max_ref_counts;
      for (const auto& ref : entry.references) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) {
          auto& m = max_ref_counts[gram];
          m = std::max(m, count);
        }
      }
      for (const auto& [gram, count] : cand_counts) {
        total[n - 1] += count;
        auto it = max_ref_counts.find(gram);
        if (it != max_ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (matched[n] == 0) return 0.0;
    log_precision_sum +=
        0.25 * std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  const double bp = candidate_len >= reference_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(reference_len) /
                                             static_cast<double>(candidate_len));
  return bp * std::exp(log_precision_sum);
}

double rouge_l(const EvalCorpus& corpus) {
  check_corpus(corpus, "rouge_l");
  constexpr double kBeta = 1.2;
  constexpr double kBetaSq = kBeta * kBeta;
  double sum = 0.0;
  for (const auto& [id, entry] : corpus) {
    double best = 0.0;
    for (const auto& ref : entry.references) {
      if (entry.candidate.empty() || ref.empty()) continue;
      const double lcs = static_cast<double>(lcs_length(entry.candidate, ref));
      if (lcs == 0.0) continue;
      const double recall = lcs / static_cast<double>(ref.size());
      const double precision = lcs / static_cast<double>(entry.candidate.size());
      const double f =
          (1.0 + kBetaSq) * recall * precision / (recall + kBetaSq * precision);
      best = std::max(best, f);
    }
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

CiderResult cider(const EvalCorpus& corpus) {
  check_corpus(corpus, "cider");
  if (corpus.size() < 2) {
    throw std::invalid_argument("cider: idf needs at least two videos");
  }
  const double v_total = static_cast<double>(corpus.size());

  // Document frequency per order: number of videos whose references contain
  // the n-gram at least once.
  std::unordered_map<std::string, std::int64_t> df[kMaxOrder];
  for (const auto& [id, entry] : corpus) {
    for (int n = 1; n <= kMaxOrder; ++n) {
      std::unordered_map<std::string, std::int64_t> seen;
      for (const auto& ref : entry.references) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) seen[gram] = 1;
      }
      for (const auto& [gram, one] : seen) df[n - 1][gram] += 1;
    }
  }
  const auto idf = [&](int n, const std::string& gram) {
    auto it = df[n - 1].find(gram);
    const std::int64_t d = it == df[n - 1].end() ? 0 : it->second;
    // Unseen n-grams keep idf = log(V): df is clamped to 1.
    return std::log(v_total / static_cast<double>(std::max<std::int64_t>(d, 1)));
  };

  CiderResult result;
  for (const auto& [id, entry] : corpus) {
    double score = 0.0;
    for (int n = 1; n <= kMaxOrder; ++n) {
      std::unordered_map<std::string, double> cand_vec;
      double cand_norm_sq = 0.0;
      for (const auto& [gram, count] : ngram_counts(entry.candidate, n)) {
        const double w = static_cast<double>(count) * idf(n, gram);
        cand_vec[gram] = w;
        cand_norm_sq += w * w;
      }
      double ref_mean = 0.0;
      for (const auto& ref : entry.references) {
        double ref_norm_sq = 0.0;
        double dot = 0.0;
        for (const auto& [gram, count] : ngram_counts(ref, n)) {
          const double w = static_cast<double>(count) * idf(n, gram);
          ref_norm_sq += w * w;
          auto it = cand_vec.find(gram);
          if (it != cand_vec.end()) dot += w * it->second;
        }
        if (cand_norm_sq > 0.0 && ref_norm_sq > 0.0) {
          ref_mean += dot / (std::sqrt(cand_norm_sq) * std::sqrt(ref_norm_sq));
        }
      }
      score += ref_mean / static_cast<double>(entry.references.size());
    }
    score /= kMaxOrder;
    result.per_video[id] = score;
    result.mean += score;
  }
  result.mean /= v_total;
  return result;
}

BoundaryF1 boundary_f1(std::vector<Index> predicted, std::vector<Index> reference,
                       Index tolerance) {
  if (tolerance < 0) throw std::invalid_argument("boundary_f1: tolerance must be >= 0");
  std::sort(predicted.begin(), predicted.end());
  std::sort(reference.begin(), reference.end());

  BoundaryF1 out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < predicted.size() && j < reference.size()) {
    if (predicted[i] < reference[j] - tolerance) {
      ++i;
    } else if (reference[j] < predicted[i] - tolerance) {
      ++j;
    } else {
      ++out.matches;
      ++i;
      ++j;
    }
  }
  if (out.matches == 0) {
    const bool perfect = predicted.empty() && reference.empty();
    out.precision = out.recall = out.f1 = perfect ? 1.0 : 0.0;
    return out;
  }
  out.precision = static_cast<double>(out.matches) / static_cast<double>(predicted.size());
  out.recall = static_cast<double>(out.matches) / static_cast<double>(reference.size());
  out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

}  // namespace bacap
