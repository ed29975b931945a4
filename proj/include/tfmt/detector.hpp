#pragma once

#include <span>
#include <string>
#include <vector>

#include "tfmt/random.hpp"
#include "tfmt/tagging.hpp"
#include "tfmt/tensor.hpp"

namespace tfmt {

/// ASTE classifies regions into {POS, NEU, NEG, INVALID}; AOPE into
/// {VALID, INVALID}. INVALID is always the last class.
enum class Task { Aste, Aope };

/// Region-level (corner RPN + region classifier) or cell-level (one
/// classifier per table cell) detection head.
enum class HeadKind { Region, Cell };

int num_region_classes(Task task);
inline int invalid_class(Task task) { return num_region_classes(task) - 1; }
/// Cell classes: NONE, A, O, then the sentiment labels (ASTE) or VALID (AOPE).
int num_cell_classes(Task task);

struct DetectorParams {
  Tensor begin_w;  // [d]
  Tensor begin_b;  // [1]
  Tensor end_w;
  Tensor end_b;
  Tensor cls_w;    // [C, 3d]
  Tensor cls_b;    // [C]
  Tensor cell_w;   // [K, d], cell head only
  Tensor cell_b;

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    auto each = [&f](const char* name, auto& t) {
      if (!t.empty()) f(std::string(name), t);
    };
    each("begin_w", self.begin_w);
    each("begin_b", self.begin_b);
    each("end_w", self.end_w);
    each("end_b", self.end_b);
    each("cls_w", self.cls_w);
    each("cls_b", self.cls_b);
    each("cell_w", self.cell_w);
    each("cell_b", self.cell_b);
  }
};

DetectorParams make_detector_params(int d, Task task, HeadKind head);
void init_detector_params(DetectorParams& params, Rng& rng);

// -- region proposal network -------------------------------------------------

struct RpnScores {
  int n = 0;
  std::vector<double> begin;  // P^B, row-major n x n
  std::vector<double> end;    // P^E
};

RpnScores rpn_scores(const FeatureMap& top, const DetectorParams& params);
/// Backward of both corner heads given gradients w.r.t. their logits.
void rpn_backward(const FeatureMap& top, std::span<const double> d_begin_logits,
                  std::span<const double> d_end_logits, const DetectorParams& params,
                  DetectorParams& grads, FeatureMap& d_top);

struct ScoredCell {
  int row = 0;
  int col = 0;
  double score = 0.0;
};

struct CandidateSets {
  std::vector<ScoredCell> begin;
  std::vector<ScoredCell> end;
  int k = 0;
};

/// k = max(1, ceil(kappa * n)).
int topk_count(int n, double kappa);
/// The k best cells of an n x n score table, score-descending, ties in
/// row-major order.
std::vector<ScoredCell> topk_prune(std::span<const double> scores, int n, double kappa);
CandidateSets candidate_sets(const RpnScores& scores, double kappa);

struct RegionProposal {
  Rect rect;
  double begin_score = 0.0;
  double end_score = 0.0;
};

/// Pairs every begin corner with every end corner at or below-right of it.
/// Sorted by (a,b,c,d), no duplicates.
std::vector<RegionProposal> propose_regions(const std::vector<ScoredCell>& begin,
                                            const std::vector<ScoredCell>& end);

// -- RoI pooling and classification ------------------------------------------

struct RoiFeature {
  std::vector<double> r;       // t_ab ⊕ t_cd ⊕ max over the region
  std::vector<int> pool_cell;  // flat cell index that supplied each pooled max
};

RoiFeature roi_represent(const FeatureMap& top, const Rect& rect);
void roi_backward(const RoiFeature& roi, const Rect& rect, int n, std::span<const double> d_r,
                  FeatureMap& d_top);

struct ClassProbs {
  std::vector<double> probs;
};

std::vector<double> softmax(std::span<const double> logits);
/// dL/dlogits from dL/dprobs.
std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> d_probs);

ClassProbs classify_region(std::span<const double> r, const DetectorParams& params, Task task);
void classify_backward(std::span<const double> r, std::span<const double> d_logits,
                       const DetectorParams& params, DetectorParams& grads,
                       std::span<double> d_r);

/// Argmax; ties go to the lower class index.
int predicted_class(std::span<const double> probs);

std::vector<Triplet> decode_triplets(const std::vector<RegionProposal>& proposals,
                                     const std::vector<ClassProbs>& probs);
std::vector<Pair> decode_pairs(const std::vector<RegionProposal>& proposals,
                               const std::vector<ClassProbs>& probs);

// -- cell head ---------------------------------------------------------------

struct CellScores {
  int n = 0;
  int classes = 0;
  std::vector<double> probs;  // n*n x classes

  std::span<const double> cell(int i, int j) const {
    return {probs.data() + (std::size_t(i) * n + j) * classes, std::size_t(classes)};
  }
};

CellScores cell_scores(const FeatureMap& top, const DetectorParams& params);
void cell_backward(const FeatureMap& top, std::span<const double> d_logits,
                   const DetectorParams& params, DetectorParams& grads, FeatureMap& d_top);
/// Argmax label per cell. In AOPE the VALID class maps to CellLabel::Pos.
CellTable cell_predictions(const CellScores& scores);

}  // namespace tfmt
