#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "support.hpp"
#include "tfmt/detector.hpp"

using namespace tfmt;

namespace {

FeatureMap random_map(Rng& rng, int n, int d) {
  FeatureMap t(n, d);
  t.data = test::random_vector(rng, t.data.size());
  return t;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<ScoredCell> random_cells(Rng& rng, int n, int count) {
  std::vector<ScoredCell> out;
  for (int i = 0; i < count; ++i) {
    out.push_back({int(rng.below(std::size_t(n))), int(rng.below(std::size_t(n))), rng.uniform()});
  }
  return out;
}

}  // namespace

TEST_CASE("corner scores") {
  Rng rng(1);
  DetectorParams p = make_detector_params(3, Task::Aste, HeadKind::Region);
  const FeatureMap t = random_map(rng, 2, 3);
  for (double v : rpn_scores(t, p).begin) CHECK(v == 0.5);

  p.begin_w.data = {0.5, -1.0, 2.0};
  p.begin_b.data = {0.1};
  p.end_w.data = {-0.3, 0.2, 0.7};
  p.end_b.data = {-0.2};
  const RpnScores s = rpn_scores(t, p);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const auto c = t.cell(i, j);
      CHECK(s.begin[std::size_t(i * 2 + j)] ==
            doctest::Approx(sigmoid(0.5 * c[0] - 1.0 * c[1] + 2.0 * c[2] + 0.1)).epsilon(1e-14));
      CHECK(s.end[std::size_t(i * 2 + j)] ==
            doctest::Approx(sigmoid(-0.3 * c[0] + 0.2 * c[1] + 0.7 * c[2] - 0.2)).epsilon(1e-14));
      CHECK(s.begin[std::size_t(i * 2 + j)] > 0.0);
      CHECK(s.begin[std::size_t(i * 2 + j)] < 1.0);
    }
  }
  p.begin_b.data = {0.4};
  const RpnScores raised = rpn_scores(t, p);
  for (std::size_t i = 0; i < 4; ++i) CHECK(raised.begin[i] > s.begin[i]);
}

TEST_CASE("top-k size rule") {
  CHECK(topk_count(6, 0.3) == 2);
  CHECK(topk_count(10, 0.3) == 3);
  CHECK(topk_count(11, 0.3) == 4);
  CHECK(topk_count(1, 0.3) == 1);
  CHECK(topk_count(1, 1.0) == 1);
  CHECK(topk_count(24, 1.0) == 24);
  CHECK_THROWS_AS(topk_count(5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(topk_count(5, 1.5), std::invalid_argument);
}

TEST_CASE("top-k prune picks the highest cells with row-major ties") {
  const std::vector<double> uniform(9, 0.5);
  const auto first = topk_prune(uniform, 3, 1.0);
  REQUIRE(first.size() == 3);
  CHECK((first[0].row == 0 && first[0].col == 0));
  CHECK((first[1].row == 0 && first[1].col == 1));
  CHECK((first[2].row == 0 && first[2].col == 2));

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + int(rng.below(10));
    const double kappa = 0.05 + 0.95 * rng.uniform();
    std::vector<double> scores(std::size_t(n) * n);
    for (double& v : scores) v = double(rng.below(5)) / 4.0;
    const auto top = topk_prune(scores, n, kappa);
    CHECK(int(top.size()) == std::min(topk_count(n, kappa), n * n));
    // Brute force: order every cell by (score desc, index asc).
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return scores[std::size_t(x)] > scores[std::size_t(y)]; });
    for (std::size_t i = 0; i < top.size(); ++i) {
      CHECK(top[i].row * n + top[i].col == idx[i]);
      CHECK(top[i].score == scores[std::size_t(idx[i])]);
    }
  }
}

TEST_CASE("region proposals") {
  auto rects = [](const std::vector<RegionProposal>& ps) {
    std::vector<Rect> out;
    for (const auto& p : ps) out.push_back(p.rect);
    return out;
  };
  CHECK(rects(propose_regions({{1, 4, 0.9}, {0, 0, 0.8}}, {{2, 4, 0.7}})) ==
        std::vector<Rect>{{0, 0, 2, 4}, {1, 4, 2, 4}});
  CHECK(propose_regions({{3, 3, 0.9}}, {{1, 1, 0.9}}).empty());
  CHECK(propose_regions({}, {{1, 1, 0.9}}).empty());
}

TEST_CASE("proposals equal brute-force pair enumeration") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + int(rng.below(12));
    const auto b = random_cells(rng, n, 1 + int(rng.below(8)));
    const auto e = random_cells(rng, n, 1 + int(rng.below(8)));
    std::set<Rect> want;
    for (const auto& x : b) {
      for (const auto& y : e) {
        if (x.row <= y.row && x.col <= y.col) want.insert({x.row, x.col, y.row, y.col});
      }
    }
    const auto got = propose_regions(b, e);
    REQUIRE(got.size() == want.size());
    std::size_t i = 0;
    for (const Rect& r : want) {
      CHECK(got[i].rect == r);
      CHECK(got[i].rect.valid());
      ++i;
    }
  }
}

TEST_CASE("RoI representation") {
  Rng rng(5);
  const int n = 6, d = 4;
  const FeatureMap t = random_map(rng, n, d);
  const RoiFeature one = roi_represent(t, {2, 3, 2, 3});
  REQUIRE(one.r.size() == 3u * d);
  for (int k = 0; k < d; ++k) {
    CHECK(one.r[std::size_t(k)] == t.cell(2, 3)[std::size_t(k)]);
    CHECK(one.r[std::size_t(d + k)] == t.cell(2, 3)[std::size_t(k)]);
    CHECK(one.r[std::size_t(2 * d + k)] == t.cell(2, 3)[std::size_t(k)]);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Span rows = test::random_span(rng, n, n), cols = test::random_span(rng, n, n);
    const Rect r{rows.start, cols.start, rows.end, cols.end};
    const RoiFeature roi = roi_represent(t, r);
    for (int k = 0; k < d; ++k) {
      double m = -1e300;
      for (int i = r.a; i <= r.c; ++i) {
        for (int j = r.b; j <= r.d; ++j) m = std::max(m, t.cell(i, j)[std::size_t(k)]);
      }
      CHECK(roi.r[std::size_t(2 * d + k)] == m);
      CHECK(roi.r[std::size_t(k)] == t.cell(r.a, r.b)[std::size_t(k)]);
      CHECK(roi.r[std::size_t(d + k)] == t.cell(r.c, r.d)[std::size_t(k)]);
    }
  }
  CHECK_THROWS_AS(roi_represent(t, {3, 0, 2, 1}), std::invalid_argument);
}

TEST_CASE("region classifier") {
  Rng rng(6);
  DetectorParams aste = make_detector_params(4, Task::Aste, HeadKind::Region);
  DetectorParams aope = make_detector_params(4, Task::Aope, HeadKind::Region);
  const auto r = test::random_vector(rng, 12);
  for (double p : classify_region(r, aste, Task::Aste).probs) CHECK(p == doctest::Approx(0.25));
  for (double p : classify_region(r, aope, Task::Aope).probs) CHECK(p == doctest::Approx(0.5));

  init_detector_params(aste, rng);
  for (int trial = 0; trial < 50; ++trial) {
    aste.cls_w.data = test::random_vector(rng, aste.cls_w.size(), 3.0);
    const auto x = test::random_vector(rng, 12);
    const auto p = classify_region(x, aste, Task::Aste).probs;
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    for (double v : p) CHECK(v >= 0.0);
  }
  const std::vector<double> logits{0.3, -1.2, 2.0, 0.1};
  auto shifted = logits;
  for (double& v : shifted) v += 50.0;
  const auto a = softmax(logits), b = softmax(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  CHECK_THROWS_AS(classify_region(r, aste, Task::Aope), std::invalid_argument);
}

TEST_CASE("argmax ties go to the lower class") {
  CHECK(predicted_class(std::vector<double>{0.3, 0.3, 0.2, 0.2}) == 0);
  CHECK(predicted_class(std::vector<double>{0.1, 0.4, 0.4, 0.1}) == 1);
}

TEST_CASE("triplet and pair decoding") {
  const std::vector<RegionProposal> one{{Rect{1, 4, 2, 4}, 0.9, 0.9}};
  CHECK(decode_triplets(one, {{{0.7, 0.1, 0.1, 0.1}}}) ==
        std::vector<Triplet>{{{1, 2}, {4, 4}, Polarity::Pos}});
  CHECK(decode_triplets(one, {{{0.1, 0.1, 0.1, 0.7}}}).empty());
  const std::vector<RegionProposal> dup{{Rect{1, 4, 2, 4}, 0.9, 0.9}, {Rect{1, 4, 2, 4}, 0.8, 0.8}};
  CHECK(decode_triplets(dup, {{{0.1, 0.1, 0.7, 0.1}}, {{0.1, 0.1, 0.6, 0.2}}}).size() == 1);
  CHECK(decode_pairs(one, {{{0.8, 0.2}}}) == std::vector<Pair>{{{1, 2}, {4, 4}}});
  CHECK(decode_pairs(one, {{{0.2, 0.8}}}).empty());
  CHECK_THROWS_AS(decode_triplets(one, {}), std::invalid_argument);
}

TEST_CASE("perfect scores recover the gold triplets end to end") {
  // Corner cells score 1 - eps and the classifier is forced per proposal.
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + int(rng.below(8));
    std::vector<Triplet> gold;
    for (int t = 0; t < 2; ++t) {
      Triplet tr{test::random_span(rng, n, 2), test::random_span(rng, n, 2), Polarity(rng.below(3))};
      bool clash = false;
      for (const auto& g : gold) {
        clash |= g.aspect.start == tr.aspect.start && g.opinion.start == tr.opinion.start;
        clash |= g.aspect.end == tr.aspect.end && g.opinion.end == tr.opinion.end;
      }
      if (!clash) gold.push_back(tr);
    }
    RpnScores s;
    s.n = n;
    s.begin.assign(std::size_t(n) * n, 1e-6);
    s.end.assign(std::size_t(n) * n, 1e-6);
    for (const auto& g : gold) {
      s.begin[std::size_t(g.aspect.start * n + g.opinion.start)] = 1 - 1e-6;
      s.end[std::size_t(g.aspect.end * n + g.opinion.end)] = 1 - 1e-6;
    }
    const CandidateSets c = candidate_sets(s, 2.0 / n);
    const auto proposals = propose_regions(c.begin, c.end);
    std::vector<ClassProbs> probs;
    for (const auto& p : proposals) {
      ClassProbs cp{{0.0, 0.0, 0.0, 1.0}};
      for (const auto& g : gold) {
        if (p.rect == Rect{g.aspect.start, g.opinion.start, g.aspect.end, g.opinion.end}) {
          cp.probs = {0.0, 0.0, 0.0, 0.0};
          cp.probs[std::size_t(int(g.polarity))] = 1.0;
        }
      }
      probs.push_back(cp);
    }
    std::sort(gold.begin(), gold.end(), [](const Triplet& x, const Triplet& y) {
      return Rect{x.aspect.start, x.opinion.start, x.aspect.end, x.opinion.end} <
             Rect{y.aspect.start, y.opinion.start, y.aspect.end, y.opinion.end};
    });
    CHECK(decode_triplets(proposals, probs) == gold);
  }
}

TEST_CASE("cell head") {
  Rng rng(8);
  DetectorParams p = make_detector_params(4, Task::Aste, HeadKind::Cell);
  CHECK(p.cls_w.empty());
  CHECK(p.cell_w.shape == std::vector<std::size_t>{6, 4});
  CHECK(make_detector_params(4, Task::Aope, HeadKind::Cell).cell_b.size() == 4);
  init_detector_params(p, rng);
  const FeatureMap t = random_map(rng, 3, 4);
  const CellScores s = cell_scores(t, p);
  CHECK(s.classes == 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const auto c = s.cell(i, j);
      CHECK(std::accumulate(c.begin(), c.end(), 0.0) == doctest::Approx(1.0));
      CHECK(int(cell_predictions(s).at(i, j)) == predicted_class(c));
    }
  }
  CHECK_THROWS_AS(cell_scores(t, make_detector_params(4, Task::Aste, HeadKind::Region)),
                  std::invalid_argument);
}
