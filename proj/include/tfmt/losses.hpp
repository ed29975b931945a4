#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "tfmt/detector.hpp"
#include "tfmt/tagging.hpp"

namespace tfmt {

struct LossBreakdown {
  double l_rpn = 0.0;
  double l_rpc = 0.0;
  double l_sup = 0.0;
  double l_uns = 0.0;
  double l_mmd_boundary = 0.0;
  double l_mmd_region = 0.0;
  double l_mmd = 0.0;
  double total = 0.0;
};

/// Fills l_sup, l_mmd and total from the component terms.
void total_loss(LossBreakdown& parts, double alpha, double beta);
/// L = L_sup + alpha * L_uns + beta * L_mmd.
double total_loss(double l_sup, double l_uns, double l_mmd, double alpha, double beta);

inline constexpr double kLogClamp = 1e-12;

/// Mean binary cross-entropy over all 2n^2 corner cells. When the gradient
/// buffers are given they receive dL/dlogit for each corner head.
double loss_rpn(const RpnScores& scores, const BoundaryLabels& labels,
                std::vector<double>* d_begin_logits = nullptr,
                std::vector<double>* d_end_logits = nullptr);

/// Mean categorical cross-entropy over proposals; 0 when there are none.
/// d_logits, when given, receives one gradient row per proposal.
double loss_rpc(const std::vector<ClassProbs>& probs, const std::vector<int>& gold,
                std::vector<std::vector<double>>* d_logits = nullptr);

struct MatchedProposals {
  std::vector<Rect> regions;
  std::vector<int> targets;  // class index per region
  std::size_t proposed = 0;  // regions[0..proposed) came from the RPN
};

/// Exact-rectangle gold assignment; unmatched proposals get INVALID.
/// With inject_missing, gold rectangles absent from the proposals are
/// appended once.
MatchedProposals match_gold(const std::vector<RegionProposal>& proposals,
                            const std::vector<GoldRegion>& gold, Task task,
                            bool inject_missing);

/// Mean squared L2 distance between aligned probability vectors; 0 when
/// empty. d_student, when given, receives dL/dP for the student side.
double loss_uns(const std::vector<std::vector<double>>& student,
                const std::vector<std::vector<double>>& teacher,
                std::vector<std::vector<double>>* d_student = nullptr);

using FeatureSet = std::vector<std::vector<double>>;

struct MmdConfig {
  /// Fixed Gaussian bandwidth; unset means the median pairwise distance of
  /// the pooled sample (1.0 when that median is 0).
  std::optional<double> sigma;
};

struct MmdResult {
  double value = 0.0;
  double sigma = 1.0;
  /// Index into the sorted pairwise-distance list used for the median, or
  /// -1 for a fixed/fallback bandwidth.
  int median_rank = -1;
  /// Point indices (into X then Y) of the one or two pairs defining the
  /// median; -1 when unused.
  std::array<int, 4> median_points{-1, -1, -1, -1};
  bool clamped = false;
};

/// Biased (V-statistic) Gaussian-kernel MMD^2, clamped at 0. Empty input on
/// either side gives 0. Gradients include the bandwidth's dependence on
/// the sample when the median rule is active.
MmdResult mmd(const FeatureSet& x, const FeatureSet& y, const MmdConfig& cfg = {},
              FeatureSet* dx = nullptr, FeatureSet* dy = nullptr);

/// Features of predicted regions in one domain.
struct RegionFeatureSets {
  FeatureSet begin;   // t_ab
  FeatureSet end;     // t_cd
  FeatureSet region;  // r_abcd
};

struct RegionMmd {
  double boundary = 0.0;
  double region = 0.0;
};

RegionMmd loss_mmd_region_level(const RegionFeatureSets& source, const RegionFeatureSets& target,
                                const MmdConfig& cfg = {}, RegionFeatureSets* d_source = nullptr,
                                RegionFeatureSets* d_target = nullptr);

/// Cell features grouped by predicted type {A, O, POS, NEG, NEU} (AOPE uses
/// the first three slots: A, O, VALID).
inline constexpr int kCellTypes = 5;
using CellFeatureSets = std::array<FeatureSet, kCellTypes>;

double loss_mmd_cell_level(const CellFeatureSets& source, const CellFeatureSets& target,
                           const MmdConfig& cfg = {}, CellFeatureSets* d_source = nullptr,
                           CellFeatureSets* d_target = nullptr);

}  // namespace tfmt
