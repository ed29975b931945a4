#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "audit_fixtures.hpp"
#include "support.hpp"
#include "tfmt/eval.hpp"

using namespace tfmt;

namespace {

const Triplet kA{{1, 2}, {4, 4}, Polarity::Pos};
const Triplet kB{{0, 0}, {3, 3}, Polarity::Neg};
const Triplet kC{{5, 6}, {2, 2}, Polarity::Neu};

}  // namespace

TEST_CASE("sentence-level F1") {
  CHECK(sentence_f1({{kA}, {kB}, {kA, kC}}, {{kA}, {kB}, {kC, kA}}) == 1.0);
  const Prf half = sentence_prf({{kA}, {kB}}, {{kA}, {kC}});
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.f1 == 0.5);
  CHECK(sentence_f1({{kA}}, {{kA, kB}}) == 0.0);
  CHECK(sentence_f1({{kA, kB}}, {{kA}}) == 0.0);
  CHECK(sentence_f1({{kA, kA}}, {{kA}}) == 1.0);
  // A sentence without gold and without predictions counts nowhere.
  const Prf empty = sentence_prf({{}, {kA}}, {{}, {kA}});
  CHECK(empty.f1 == 1.0);
  CHECK(sentence_prf({{}}, {{}}).f1 == 0.0);
  // Predicting on a gold-free sentence costs precision only.
  const Prf spurious = sentence_prf({{kB}, {kA}}, {{}, {kA}});
  CHECK(spurious.precision == 0.5);
  CHECK(spurious.recall == 1.0);
  CHECK_THROWS_AS(sentence_f1({{kA}}, {}), std::invalid_argument);
}

TEST_CASE("f1 of zero precision and recall") {
  CHECK(f1_score(0.0, 0.0) == 0.0);
  CHECK(f1_score(1.0, 0.5) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("triplet-level P/R/F1") {
  const Prf all = triplet_prf({{kA, kB}, {kC}}, {{kA, kB}, {kC}});
  CHECK(all.precision == 1.0);
  CHECK(all.recall == 1.0);
  CHECK(all.f1 == 1.0);
  const Prf none = triplet_prf({{}, {}}, {{kA}, {kB}});
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<Triplet>> preds, golds;
    std::size_t tp = 0, np = 0, ng = 0;
    for (int s = 0; s < 5; ++s) {
      const auto p = test::random_labeled(rng, 5, 3).triplets;
      const auto g = test::random_labeled(rng, 5, 3).triplets;
      const std::set<Triplet> ps(p.begin(), p.end()), gs(g.begin(), g.end());
      std::vector<Triplet> both;
      std::set_intersection(ps.begin(), ps.end(), gs.begin(), gs.end(), std::back_inserter(both));
      tp += both.size();
      np += ps.size();
      ng += gs.size();
      preds.push_back(p);
      golds.push_back(g);
    }
    const Prf r = triplet_prf(preds, golds);
    CHECK(r.precision == (np ? double(tp) / double(np) : 0.0));
    CHECK(r.recall == (ng ? double(tp) / double(ng) : 0.0));
    const double f = sentence_f1(preds, golds);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("audit taxonomy fixtures") {
  const auto cases = test::audit_cases();
  CHECK(cases.size() == 12);
  for (const auto& c : cases) {
    INFO(c.what);
    CHECK(classify_pseudo(c.pseudo, c.gold) == c.want);
    const AuditCounts counts = audit_pseudo_labels({c.pseudo}, c.gold);
    CHECK(counts[c.want] == 1);
    CHECK(counts.total() == 1);
  }
}

TEST_CASE("audit counts add up and ignore order") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    auto pseudo = test::random_labeled(rng, 8, 4).triplets;
    auto gold = test::random_labeled(rng, 8, 3).triplets;
    const AuditCounts a = audit_pseudo_labels(pseudo, gold);
    CHECK(a.total() == pseudo.size());
    std::reverse(pseudo.begin(), pseudo.end());
    std::rotate(gold.begin(), gold.begin() + (gold.empty() ? 0 : 1), gold.end());
    CHECK(audit_pseudo_labels(pseudo, gold).counts == a.counts);
  }
  CHECK(audit_pseudo_labels({kA, kB}, {kA, kB})[ErrorCategory::Correct] == 2);
}

TEST_CASE("report writers") {
  const EvalReport r = evaluate({{kA}, {kB}}, {{kA}, {kC}});
  CHECK(r.sentences == 2);
  std::ostringstream csv;
  write_report_csv(csv, r);
  CHECK(csv.str() ==
        "sentences,sentence_p,sentence_r,sentence_f1,triplet_p,triplet_r,triplet_f1\n"
        "2,0.500000,0.500000,0.500000,0.500000,0.500000,0.500000\n");
  AuditCounts counts;
  counts[ErrorCategory::WordsMisLocalized] = 3;
  std::ostringstream audit;
  write_audit_csv(audit, counts);
  CHECK(audit.str() ==
        "category,count\nCORRECT,0\nSENTIMENT_ERROR,0\nWORDS_MIS_LOCALIZED,3\nERROR,0\n");
}
