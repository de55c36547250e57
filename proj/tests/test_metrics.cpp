#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bacap/metrics.hpp"
#include "bacap/numerics.hpp"
#include "metric_oracles.hpp"

using namespace bacap;

namespace {

std::vector<std::string> W(const std::string& sentence) {
  std::istringstream is(sentence);
  std::vector<std::string> words;
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

EvalCorpus single(const std::string& cand, const std::vector<std::string>& refs) {
  EvalCorpus c;
  c["v0"].candidate = W(cand);
  for (const std::string& r : refs) c["v0"].references.push_back(W(r));
  return c;
}

EvalCorpus random_corpus(Rng& rng) {
  const std::vector<std::string> vocab{"w0", "w1", "w2", "w3", "w4", "w5"};
  const auto sentence = [&](Index max_len) {
    const Index len = rng.uniform_int(1, max_len);
    std::vector<std::string> words;
    for (Index i = 0; i < len; ++i) {
      words.push_back(vocab[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<Index>(vocab.size()) - 1))]);
    }
    return words;
  };
  EvalCorpus corpus;
  const Index n_videos = rng.uniform_int(2, 6);
  for (Index v = 0; v < n_videos; ++v) {
    EvalEntry e;
    e.candidate = sentence(12);
    const Index n_refs = rng.uniform_int(1, 3);
    for (Index r = 0; r < n_refs; ++r) e.references.push_back(sentence(12));
    corpus["vid" + std::to_string(v)] = e;
  }
  return corpus;
}

}  // namespace

TEST_CASE("bleu4 is exactly 1 for a corpus of perfect matches") {
  EvalCorpus c;
  c["a"].candidate = W("a cat sits on the mat");
  c["a"].references = {W("a cat sits on the mat")};
  c["b"].candidate = W("the dog runs far away");
  c["b"].references = {W("somewhere else entirely now yes"), W("the dog runs far away")};
  CHECK(bleu4(c) == 1.0);
}

TEST_CASE("bleu4 brevity penalty on an all-matching short candidate") {
  const EvalCorpus c = single("a a a a", {"a a a a a"});
  // Every clipped precision is 1; only the length penalty remains.
  CHECK(bleu4(c) == doctest::Approx(std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-12));
  CHECK(bleu4(c) == doctest::Approx(0.7788).epsilon(1e-4));
}

TEST_CASE("bleu4 is 0 whenever any order has no matches") {
  CHECK(bleu4(single("x y z w", {"a b c d"})) == 0.0);
  // Unigrams match but no bigram does.
  CHECK(bleu4(single("a b", {"a c b"})) == 0.0);
  // A candidate shorter than four tokens has no 4-grams at all.
  CHECK(bleu4(single("a b c", {"a b c"})) == 0.0);
}

TEST_CASE("bleu4 brevity penalty ties prefer the shorter reference") {
  const EvalCorpus c = single("a b c d e", {"a b c d", "a b c d e f"});
  // Both references are one token away; picking length 4 keeps the penalty at 1.
  CHECK(bleu4(c) == 1.0);
}

TEST_CASE("rouge_l equals the common recall/precision when they coincide") {
  const EvalCorpus c = single("a b c d", {"a c b d"});
  CHECK(rouge_l(c) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("rouge_l hand cases") {
  CHECK(rouge_l(single("a b c", {"a b c"})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rouge_l(single("x y", {"a b"})) == 0.0);
  CHECK(rouge_l(single("", {"a b"})) == 0.0);
  // Maximum over references: the second reference matches perfectly.
  const EvalCorpus c = single("a b c", {"z z z", "a b c"});
  CHECK(rouge_l(c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cider scores 1 when candidates equal their references under distinct vocabularies") {
  EvalCorpus c;
  c["v0"].candidate = W("a b c d e");
  c["v0"].references = {W("a b c d e")};
  c["v1"].candidate = W("p q r s t");
  c["v1"].references = {W("p q r s t")};
  const CiderResult r = cider(c);
  CHECK(r.per_video.at("v0") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.per_video.at("v1") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cider gives zero weight to n-grams present in every video") {
  EvalCorpus c;
  c["v0"].candidate = W("common");
  c["v0"].references = {W("common")};
  c["v1"].candidate = W("common");
  c["v1"].references = {W("common")};
  const CiderResult r = cider(c);
  CHECK(r.per_video.at("v0") == 0.0);
  CHECK(r.per_video.at("v1") == 0.0);
  CHECK(r.mean == 0.0);
}

TEST_CASE("cider requires at least two videos") {
  CHECK_THROWS_AS(cider(single("a b", {"a b"})), std::invalid_argument);
}

TEST_CASE("metrics validate their corpus") {
  const EvalCorpus empty;
  CHECK_THROWS_AS(bleu4(empty), std::invalid_argument);
  CHECK_THROWS_AS(rouge_l(empty), std::invalid_argument);
  CHECK_THROWS_AS(cider(empty), std::invalid_argument);

  EvalCorpus no_refs;
  no_refs["v0"].candidate = W("a b");
  no_refs["v0"].references = {W("a b")};
  no_refs["v1"].candidate = W("c d");  // no references
  CHECK_THROWS_AS(bleu4(no_refs), std::invalid_argument);
  CHECK_THROWS_AS(rouge_l(no_refs), std::invalid_argument);
  CHECK_THROWS_AS(cider(no_refs), std::invalid_argument);
}

TEST_CASE("metrics are invariant to video relabeling and reference order") {
  Rng rng(501);
  for (int rep = 0; rep < 10; ++rep) {
    const EvalCorpus corpus = random_corpus(rng);

    EvalCorpus relabeled;
    int k = 0;
    for (const auto& [id, entry] : corpus) {
      // Reverse both the id order and each entry's reference order.
      EvalEntry e = entry;
      std::reverse(e.references.begin(), e.references.end());
      relabeled["z" + std::to_string(99 - k)] = e;
      ++k;
    }

    CHECK(bleu4(relabeled) == doctest::Approx(bleu4(corpus)).epsilon(1e-12));
    CHECK(rouge_l(relabeled) == doctest::Approx(rouge_l(corpus)).epsilon(1e-12));
    CHECK(cider(relabeled).mean == doctest::Approx(cider(corpus).mean).epsilon(1e-12));
  }
}

TEST_CASE("caption metrics agree with independent reimplementations") {
  Rng rng(502);
  for (int rep = 0; rep < 50; ++rep) {
    const EvalCorpus corpus = random_corpus(rng);
    CHECK(bleu4(corpus) == doctest::Approx(oracle::bleu4(corpus)).epsilon(1e-9));
    CHECK(rouge_l(corpus) == doctest::Approx(oracle::rouge_l(corpus)).epsilon(1e-9));
    CHECK(cider(corpus).mean == doctest::Approx(oracle::cider_mean(corpus)).epsilon(1e-9));
  }
}

TEST_CASE("boundary_f1 hand cases") {
  SUBCASE("both empty counts as perfect") {
    const BoundaryF1 r = boundary_f1({}, {}, 2);
    CHECK(r.matches == 0);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
  }
  SUBCASE("one side empty scores zero") {
    const BoundaryF1 r = boundary_f1({3, 7}, {}, 2);
    CHECK(r.f1 == 0.0);
    const BoundaryF1 q = boundary_f1({}, {4}, 2);
    CHECK(q.f1 == 0.0);
  }
  SUBCASE("duplicate predictions cost precision") {
    const BoundaryF1 r = boundary_f1({5, 5}, {5}, 0);
    CHECK(r.matches == 1);
    CHECK(r.precision == doctest::Approx(0.5));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("tolerance widens the match window") {
    CHECK(boundary_f1({3}, {5}, 2).matches == 1);
    CHECK(boundary_f1({3}, {5}, 1).matches == 0);
  }
  SUBCASE("exact agreement") {
    const BoundaryF1 r = boundary_f1({4, 9, 15}, {9, 4, 15}, 0);  // order is irrelevant
    CHECK(r.matches == 3);
    CHECK(r.f1 == 1.0);
  }
  SUBCASE("negative tolerance is rejected") {
    CHECK_THROWS_AS(boundary_f1({1}, {1}, -1), std::invalid_argument);
  }
}

TEST_CASE("boundary_f1 matching is maximal") {
  Rng rng(503);
  for (int rep = 0; rep < 200; ++rep) {
    const Index tol = rng.uniform_int(0, 3);
    const auto positions = [&](Index max_count) {
      std::vector<Index> v;
      const Index n = rng.uniform_int(0, max_count);
      for (Index i = 0; i < n; ++i) v.push_back(rng.uniform_int(1, 30));
      return v;
    };
    const std::vector<Index> pred = positions(8);
    const std::vector<Index> ref = positions(8);
    const BoundaryF1 r = boundary_f1(pred, ref, tol);
    CHECK(r.matches == oracle::max_boundary_matches(pred, ref, tol));
    if (r.matches > 0) {
      CHECK(r.precision ==
            doctest::Approx(static_cast<double>(r.matches) / static_cast<double>(pred.size())));
      CHECK(r.recall ==
            doctest::Approx(static_cast<double>(r.matches) / static_cast<double>(ref.size())));
    }
  }
}
