#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "tfmt/objective.hpp"

namespace tfmt {

struct GradcheckConfig {
  std::uint64_t seed = 11;
  Task task = Task::Aste;
  HeadKind head = HeadKind::Region;
  double eps = 1e-3;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  /// Teacher confidence threshold; low so the consistency term has labels.
  double eta = 0.3;
  /// Higher than the training default so the untrained micro model still
  /// proposes regions.
  double kappa = 0.6;
  double alpha = 1.0;
  /// Larger than the training default so the MMD term is not swamped.
  double beta = 0.5;
  bool inject_fault = false;
};

struct GroupReport {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +-eps probe crossed a kink
  double max_rel_err = 0.0;
  double max_abs_grad = 0.0;
};

struct GradcheckReport {
  std::vector<GroupReport> groups;
  LossBreakdown loss;
  std::size_t retained = 0;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  /// Every group had a checked coordinate and all stayed under tolerance.
  bool passed = false;
};

/// Finite-difference check of the full step objective on a micro model
/// (d = 8, sentences of at most 5 tokens) with every loss term active.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

void write_gradcheck_report(std::ostream& os, const GradcheckReport& r);

}  // namespace tfmt
