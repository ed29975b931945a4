#pragma once

// One training step's loss and its gradient with respect to the student.
// Teacher outputs enter only as pseudo labels, i.e. as constants.

#include <cstdint>
#include <span>
#include <vector>

#include "tfmt/losses.hpp"
#include "tfmt/model.hpp"

namespace tfmt {

/// A teacher prediction kept for the consistency loss. Cell-head labels use
/// the 1x1 rectangle of their cell.
struct PseudoLabel {
  Rect rect;
  std::vector<double> probs;
  double confidence = 0.0;
};

/// Max probability over foreground classes: every class but INVALID for
/// regions, every class but NONE for cells.
double foreground_confidence(std::span<const double> probs, HeadKind head);

/// Teacher forward pass; keeps predictions whose confidence is at least eta.
std::vector<PseudoLabel> teacher_pseudo_label(const Sentence& sentence, const ModelParams& teacher,
                                              const ModelConfig& cfg, double eta);

struct ObjectiveConfig {
  double alpha = 1.0;
  double beta = 0.005;
  bool use_uns = true;
  bool use_mmd = true;
  MmdConfig mmd;
  /// Test fixture: halves the classifier's gradient into the feature map so
  /// a gradient check must fail.
  bool inject_fault = false;
};

struct StepBatch {
  std::vector<LabeledSentence> source;
  std::vector<Sentence> target;
  std::vector<std::vector<PseudoLabel>> pseudo;  // aligned with target
};

struct ObjectiveResult {
  LossBreakdown loss;
  /// Hash of every discrete choice made on the way to the loss (ReLU masks,
  /// pooling winners, top-k sets, predicted classes, MMD median pairs). Two
  /// evaluations with equal signatures lie on the same smooth piece.
  std::uint64_t signature = 0;
  std::size_t retained = 0;
};

/// Batch loss. Reductions: l_rpn and l_rpc average over source sentences,
/// l_uns averages over all retained pseudo labels in the batch, and MMD
/// pools predicted-region features of each domain across the batch. For
/// the cell head, l_rpc is the per-cell cross-entropy, l_rpn is 0 and the
/// summed per-type MMD is reported as l_mmd_region.
///
/// When grads is given (zeroed, same shapes as student) it receives
/// dL/dtheta. A term whose weight is 0 is reported but not differentiated.
ObjectiveResult evaluate_objective(const ModelParams& student, const ModelConfig& mcfg,
                                   const ObjectiveConfig& ocfg, const StepBatch& batch,
                                   ModelParams* grads = nullptr);

}  // namespace tfmt
