#pragma once

#include <array>
#include <cstddef>
#include <ostream>
#include <string_view>
#include <vector>

#include "tfmt/corpus.hpp"
#include "tfmt/model.hpp"

namespace tfmt {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Harmonic mean with 0/0 taken as 0.
double f1_score(double precision, double recall);

/// A sentence is correct when its predicted set equals its non-empty gold
/// set. Precision divides by sentences with at least one prediction, recall
/// by sentences with at least one gold triplet.
Prf sentence_prf(const std::vector<std::vector<Triplet>>& preds,
                 const std::vector<std::vector<Triplet>>& golds);
double sentence_f1(const std::vector<std::vector<Triplet>>& preds,
                   const std::vector<std::vector<Triplet>>& golds);

/// Micro-averaged exact triplet match pooled over sentences.
Prf triplet_prf(const std::vector<std::vector<Triplet>>& preds,
                const std::vector<std::vector<Triplet>>& golds);

enum class ErrorCategory : int { Correct = 0, SentimentError = 1, WordsMisLocalized = 2, Error = 3 };
inline constexpr int kNumErrorCategories = 4;

std::string_view category_name(ErrorCategory c);

ErrorCategory classify_pseudo(const Triplet& pseudo, const std::vector<Triplet>& gold);

struct AuditCounts {
  std::array<std::size_t, kNumErrorCategories> counts{};

  std::size_t total() const;
  std::size_t& operator[](ErrorCategory c) { return counts[std::size_t(c)]; }
  std::size_t operator[](ErrorCategory c) const { return counts[std::size_t(c)]; }
  AuditCounts& operator+=(const AuditCounts& o);
};

AuditCounts audit_pseudo_labels(const std::vector<Triplet>& pseudo, const std::vector<Triplet>& gold);

struct EvalReport {
  std::size_t sentences = 0;
  Prf sentence;
  Prf triplet;
};

EvalReport evaluate(const std::vector<std::vector<Triplet>>& preds,
                    const std::vector<std::vector<Triplet>>& golds);
/// Runs the model on every sentence and scores against the task view of the
/// gold labels.
EvalReport evaluate_model(const ModelParams& params, const ModelConfig& cfg,
                          const std::vector<LabeledSentence>& data);

void write_report_csv(std::ostream& os, const EvalReport& r);
void write_report_summary(std::ostream& os, const EvalReport& r);
void write_audit_csv(std::ostream& os, const AuditCounts& counts);

}  // namespace tfmt
