#include "tfmt/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace tfmt {

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("prediction and gold lists differ in length");
}

Prf make_prf(std::size_t tp, std::size_t predicted, std::size_t gold) {
  Prf r;
  r.precision = predicted ? double(tp) / double(predicted) : 0.0;
  r.recall = gold ? double(tp) / double(gold) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

Prf sentence_prf(const std::vector<std::vector<Triplet>>& preds,
                 const std::vector<std::vector<Triplet>>& golds) {
  check_aligned(preds.size(), golds.size());
  std::size_t tp = 0, with_pred = 0, with_gold = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::set<Triplet> p(preds[i].begin(), preds[i].end());
    const std::set<Triplet> g(golds[i].begin(), golds[i].end());
    with_pred += !p.empty();
    with_gold += !g.empty();
    tp += !g.empty() && p == g;
  }
  return make_prf(tp, with_pred, with_gold);
}

double sentence_f1(const std::vector<std::vector<Triplet>>& preds,
                   const std::vector<std::vector<Triplet>>& golds) {
  return sentence_prf(preds, golds).f1;
}

Prf triplet_prf(const std::vector<std::vector<Triplet>>& preds,
                const std::vector<std::vector<Triplet>>& golds) {
  check_aligned(preds.size(), golds.size());
  std::size_t tp = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::set<Triplet> p(preds[i].begin(), preds[i].end());
    const std::set<Triplet> g(golds[i].begin(), golds[i].end());
    np += p.size();
    ng += g.size();
    for (const auto& t : p) tp += g.count(t);
  }
  return make_prf(tp, np, ng);
}

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Correct: return "CORRECT";
    case ErrorCategory::SentimentError: return "SENTIMENT_ERROR";
    case ErrorCategory::WordsMisLocalized: return "WORDS_MIS_LOCALIZED";
    case ErrorCategory::Error: return "ERROR";
  }
  return "?";
}

ErrorCategory classify_pseudo(const Triplet& pseudo, const std::vector<Triplet>& gold) {
  bool same_spans = false, overlapping = false;
  for (const auto& g : gold) {
    const bool spans = g.aspect == pseudo.aspect && g.opinion == pseudo.opinion;
    if (spans && g.polarity == pseudo.polarity) return ErrorCategory::Correct;
    same_spans |= spans;
    overlapping |= !spans && g.polarity == pseudo.polarity && g.aspect.overlaps(pseudo.aspect) &&
                   g.opinion.overlaps(pseudo.opinion);
  }
  if (same_spans) return ErrorCategory::SentimentError;
  if (overlapping) return ErrorCategory::WordsMisLocalized;
  return ErrorCategory::Error;
}

std::size_t AuditCounts::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

AuditCounts& AuditCounts::operator+=(const AuditCounts& o) {
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  return *this;
}

AuditCounts audit_pseudo_labels(const std::vector<Triplet>& pseudo, const std::vector<Triplet>& gold) {
  AuditCounts out;
  for (const auto& p : pseudo) ++out[classify_pseudo(p, gold)];
  return out;
}

EvalReport evaluate(const std::vector<std::vector<Triplet>>& preds,
                    const std::vector<std::vector<Triplet>>& golds) {
  EvalReport r;
  r.sentences = preds.size();
  r.sentence = sentence_prf(preds, golds);
  r.triplet = triplet_prf(preds, golds);
  return r;
}

EvalReport evaluate_model(const ModelParams& params, const ModelConfig& cfg,
                          const std::vector<LabeledSentence>& data) {
  std::vector<std::vector<Triplet>> preds, golds;
  for (const auto& ls : data) {
    preds.push_back(predict(ls.sentence, params, cfg));
    golds.push_back(task_view(ls.triplets, cfg.task));
  }
  return evaluate(preds, golds);
}

void write_report_csv(std::ostream& os, const EvalReport& r) {
  os << "sentences,sentence_p,sentence_r,sentence_f1,triplet_p,triplet_r,triplet_f1\n";
  os << r.sentences << ',' << fmt(r.sentence.precision) << ',' << fmt(r.sentence.recall) << ','
     << fmt(r.sentence.f1) << ',' << fmt(r.triplet.precision) << ',' << fmt(r.triplet.recall)
     << ',' << fmt(r.triplet.f1) << '\n';
}

void write_report_summary(std::ostream& os, const EvalReport& r) {
  os << "sentences          " << r.sentences << '\n'
     << "sentence P/R/F1    " << fmt(r.sentence.precision) << ' ' << fmt(r.sentence.recall) << ' '
     << fmt(r.sentence.f1) << '\n'
     << "triplet  P/R/F1    " << fmt(r.triplet.precision) << ' ' << fmt(r.triplet.recall) << ' '
     << fmt(r.triplet.f1) << '\n';
}

void write_audit_csv(std::ostream& os, const AuditCounts& counts) {
  os << "category,count\n";
  for (int c = 0; c < kNumErrorCategories; ++c) {
    os << category_name(ErrorCategory(c)) << ',' << counts.counts[c] << '\n';
  }
}

}  // namespace tfmt
