#include "tfmt/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tfmt/kernels.hpp"

namespace tfmt {

int num_region_classes(Task task) { return task == Task::Aste ? 4 : 2; }
int num_cell_classes(Task task) { return task == Task::Aste ? kNumCellLabels : 4; }

DetectorParams make_detector_params(int d, Task task, HeadKind head) {
  DetectorParams p;
  const std::size_t ud = d;
  if (head == HeadKind::Region) {
    const std::size_t c = num_region_classes(task);
    p.begin_w = Tensor({ud});
    p.begin_b = Tensor({1});
    p.end_w = Tensor({ud});
    p.end_b = Tensor({1});
    p.cls_w = Tensor({c, 3 * ud});
    p.cls_b = Tensor({c});
  } else {
    const std::size_t k = num_cell_classes(task);
    p.cell_w = Tensor({k, ud});
    p.cell_b = Tensor({k});
  }
  return p;
}

void init_detector_params(DetectorParams& params, Rng& rng) {
  params.visit([&rng](const std::string& name, Tensor& t) {
    if (t.shape.size() < 2 && name != "begin_w" && name != "end_w") {
      t.zero();
      return;
    }
    const std::size_t fan_in = t.shape.back();
    const double scale = 1.0 / std::sqrt(double(fan_in));
    for (double& v : t.data) v = scale * rng.normal();
  });
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

RpnScores rpn_scores(const FeatureMap& top, const DetectorParams& params) {
  const int n = top.n, cells = n * n;
  if (int(params.begin_w.size()) != top.d) {
    throw std::invalid_argument("corner head width does not match feature map");
  }
  RpnScores s;
  s.n = n;
  s.begin.resize(cells);
  s.end.resize(cells);
  kernels::affine_rows(top.data, cells, top.d, params.begin_w.data, params.begin_b.data, 1,
                       s.begin);
  kernels::affine_rows(top.data, cells, top.d, params.end_w.data, params.end_b.data, 1, s.end);
  for (double& v : s.begin) v = sigmoid(v);
  for (double& v : s.end) v = sigmoid(v);
  return s;
}

void rpn_backward(const FeatureMap& top, std::span<const double> d_begin_logits,
                  std::span<const double> d_end_logits, const DetectorParams& params,
                  DetectorParams& grads, FeatureMap& d_top) {
  const int cells = top.n * top.n;
  const int d = top.d;
  kernels::affine_rows_backward_params(d_begin_logits, top.data, cells, d, 1,
                                       grads.begin_w.data, grads.begin_b.data);
  kernels::affine_rows_backward_params(d_end_logits, top.data, cells, d, 1, grads.end_w.data,
                                       grads.end_b.data);
  for (int c = 0; c < cells; ++c) {
    const double gb = d_begin_logits[c], ge = d_end_logits[c];
    double* out = d_top.data.data() + std::size_t(c) * d;
    for (int k = 0; k < d; ++k) out[k] += gb * params.begin_w[k] + ge * params.end_w[k];
  }
}

int topk_count(int n, double kappa) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw std::invalid_argument("kappa must lie in (0,1]");
  // Guard against kappa*n landing a hair above an integer from rounding.
  const double raw = kappa * n;
  const double nearest = std::round(raw);
  const int k = std::abs(raw - nearest) < 1e-9 ? int(nearest) : int(std::ceil(raw));
  return std::max(1, k);
}

std::vector<ScoredCell> topk_prune(std::span<const double> scores, int n, double kappa) {
  const int cells = n * n;
  const int k = std::min(topk_count(n, kappa), cells);
  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&scores](int x, int y) {
    if (scores[x] != scores[y]) return scores[x] > scores[y];
    return x < y;
  });
  std::vector<ScoredCell> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back({order[i] / n, order[i] % n, scores[order[i]]});
  return out;
}

CandidateSets candidate_sets(const RpnScores& scores, double kappa) {
  CandidateSets c;
  c.k = topk_count(scores.n, kappa);
  c.begin = topk_prune(scores.begin, scores.n, kappa);
  c.end = topk_prune(scores.end, scores.n, kappa);
  return c;
}

std::vector<RegionProposal> propose_regions(const std::vector<ScoredCell>& begin,
                                            const std::vector<ScoredCell>& end) {
  std::vector<RegionProposal> out;
  for (const auto& b : begin) {
    for (const auto& e : end) {
      if (b.row <= e.row && b.col <= e.col) {
        out.push_back({Rect{b.row, b.col, e.row, e.col}, b.score, e.score});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RegionProposal& x, const RegionProposal& y) { return x.rect < y.rect; });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const RegionProposal& x, const RegionProposal& y) {
                          return x.rect == y.rect;
                        }),
            out.end());
  return out;
}

RoiFeature roi_represent(const FeatureMap& top, const Rect& rect) {
  if (!rect.valid() || rect.c >= top.n || rect.d >= top.n || rect.a < 0 || rect.b < 0) {
    throw std::invalid_argument("region outside the feature map");
  }
  const int d = top.d, n = top.n;
  RoiFeature roi;
  roi.r.resize(std::size_t(3) * d);
  roi.pool_cell.assign(d, rect.a * n + rect.b);
  const auto tl = top.cell(rect.a, rect.b);
  const auto br = top.cell(rect.c, rect.d);
  std::copy(tl.begin(), tl.end(), roi.r.begin());
  std::copy(br.begin(), br.end(), roi.r.begin() + d);
  double* pooled = roi.r.data() + 2 * d;
  std::copy(tl.begin(), tl.end(), pooled);
  for (int i = rect.a; i <= rect.c; ++i) {
    for (int j = rect.b; j <= rect.d; ++j) {
      const auto t = top.cell(i, j);
      for (int k = 0; k < d; ++k) {
        if (t[k] > pooled[k]) {
          pooled[k] = t[k];
          roi.pool_cell[k] = i * n + j;
        }
      }
    }
  }
  return roi;
}

void roi_backward(const RoiFeature& roi, const Rect& rect, int n, std::span<const double> d_r,
                  FeatureMap& d_top) {
  const int d = d_top.d;
  auto tl = d_top.cell(rect.a, rect.b);
  auto br = d_top.cell(rect.c, rect.d);
  for (int k = 0; k < d; ++k) {
    tl[k] += d_r[k];
    br[k] += d_r[d + k];
    const int cell = roi.pool_cell[k];
    d_top.cell(cell / n, cell % n)[k] += d_r[2 * d + k];
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> d_probs) {
  double dot = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) dot += probs[k] * d_probs[k];
  std::vector<double> g(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) g[k] = probs[k] * (d_probs[k] - dot);
  return g;
}

ClassProbs classify_region(std::span<const double> r, const DetectorParams& params, Task task) {
  const int classes = int(params.cls_b.size());
  if (classes != num_region_classes(task)) {
    throw std::invalid_argument("classifier arity does not match the task");
  }
  const int in = int(r.size());
  if (params.cls_w.size() != std::size_t(classes) * in) {
    throw std::invalid_argument("classifier input width mismatch");
  }
  std::vector<double> logits(classes);
  for (int c = 0; c < classes; ++c) {
    double acc = params.cls_b[c];
    const double* w = params.cls_w.data.data() + std::size_t(c) * in;
    for (int k = 0; k < in; ++k) acc += w[k] * r[k];
    logits[c] = acc;
  }
  return {softmax(logits)};
}

void classify_backward(std::span<const double> r, std::span<const double> d_logits,
                       const DetectorParams& params, DetectorParams& grads,
                       std::span<double> d_r) {
  const int classes = int(d_logits.size());
  const int in = int(r.size());
  std::fill(d_r.begin(), d_r.end(), 0.0);
  for (int c = 0; c < classes; ++c) {
    const double g = d_logits[c];
    grads.cls_b[c] += g;
    double* gw = grads.cls_w.data.data() + std::size_t(c) * in;
    const double* w = params.cls_w.data.data() + std::size_t(c) * in;
    for (int k = 0; k < in; ++k) {
      gw[k] += g * r[k];
      d_r[k] += g * w[k];
    }
  }
}

int predicted_class(std::span<const double> probs) {
  return int(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<Triplet> decode_triplets(const std::vector<RegionProposal>& proposals,
                                     const std::vector<ClassProbs>& probs) {
  if (proposals.size() != probs.size()) throw std::invalid_argument("misaligned proposals");
  std::vector<GoldRegion> regions;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (probs[i].probs.size() != std::size_t(num_region_classes(Task::Aste))) {
      throw std::invalid_argument("decode_triplets expects ASTE class probabilities");
    }
    regions.push_back({proposals[i].rect, static_cast<RegionClass>(predicted_class(probs[i].probs))});
  }
  return decode_regions(regions);
}

std::vector<Pair> decode_pairs(const std::vector<RegionProposal>& proposals,
                               const std::vector<ClassProbs>& probs) {
  if (proposals.size() != probs.size()) throw std::invalid_argument("misaligned proposals");
  std::set<Pair> kept;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const int cls = predicted_class(probs[i].probs);
    if (cls == int(probs[i].probs.size()) - 1) continue;
    const Rect& r = proposals[i].rect;
    kept.insert({Span{r.a, r.c}, Span{r.b, r.d}});
  }
  return {kept.begin(), kept.end()};
}

CellScores cell_scores(const FeatureMap& top, const DetectorParams& params) {
  const int k = int(params.cell_b.size());
  if (k == 0) throw std::invalid_argument("model has no cell head");
  CellScores s;
  s.n = top.n;
  s.classes = k;
  const int cells = top.n * top.n;
  std::vector<double> logits(std::size_t(cells) * k);
  kernels::affine_rows(top.data, cells, top.d, params.cell_w.data, params.cell_b.data, k, logits);
  s.probs.resize(logits.size());
  for (int c = 0; c < cells; ++c) {
    const auto p = softmax(std::span<const double>(logits.data() + std::size_t(c) * k, k));
    std::copy(p.begin(), p.end(), s.probs.begin() + std::size_t(c) * k);
  }
  return s;
}

void cell_backward(const FeatureMap& top, std::span<const double> d_logits,
                   const DetectorParams& params, DetectorParams& grads, FeatureMap& d_top) {
  const int k = int(params.cell_b.size());
  const int cells = top.n * top.n;
  kernels::affine_rows_backward_params(d_logits, top.data, cells, top.d, k, grads.cell_w.data,
                                       grads.cell_b.data);
  std::vector<double> dx(std::size_t(cells) * top.d);
  kernels::affine_rows_backward_input(d_logits, cells, k, params.cell_w.data, top.d, dx);
  for (std::size_t i = 0; i < dx.size(); ++i) d_top.data[i] += dx[i];
}

CellTable cell_predictions(const CellScores& scores) {
  CellTable t(scores.n);
  for (int i = 0; i < scores.n; ++i) {
    for (int j = 0; j < scores.n; ++j) {
      const int c = predicted_class(scores.cell(i, j));
      t.at(i, j) = static_cast<CellLabel>(c);
    }
  }
  return t;
}

}  // namespace tfmt
