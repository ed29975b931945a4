#include "tfmt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "tfmt/kernels.hpp"

namespace tfmt {

void total_loss(LossBreakdown& parts, double alpha, double beta) {
  parts.l_sup = parts.l_rpn + parts.l_rpc;
  parts.l_mmd = parts.l_mmd_boundary + parts.l_mmd_region;
  parts.total = total_loss(parts.l_sup, parts.l_uns, parts.l_mmd, alpha, beta);
}

double total_loss(double l_sup, double l_uns, double l_mmd, double alpha, double beta) {
  return l_sup + alpha * l_uns + beta * l_mmd;
}

double loss_rpn(const RpnScores& scores, const BoundaryLabels& labels,
                std::vector<double>* d_begin_logits, std::vector<double>* d_end_logits) {
  if (scores.n != labels.n) throw std::invalid_argument("corner scores and labels differ in size");
  const std::size_t cells = std::size_t(scores.n) * scores.n;
  const double scale = 1.0 / (2.0 * double(cells));
  double total = 0.0;
  auto run = [&](const std::vector<double>& p, const std::vector<int>& y,
                 std::vector<double>* grad) {
    if (grad) grad->assign(cells, 0.0);
    for (std::size_t c = 0; c < cells; ++c) {
      const double pc = p[c];
      const double yc = y[c];
      total -= yc * std::log(std::max(pc, kLogClamp)) +
               (1.0 - yc) * std::log(std::max(1.0 - pc, kLogClamp));
      if (grad) {
        double g = 0.0;
        if (pc >= kLogClamp) g -= yc * (1.0 - pc);
        if (1.0 - pc >= kLogClamp) g += (1.0 - yc) * pc;
        (*grad)[c] = g * scale;
      }
    }
  };
  run(scores.begin, labels.begin, d_begin_logits);
  run(scores.end, labels.end, d_end_logits);
  return total * scale;
}

double loss_rpc(const std::vector<ClassProbs>& probs, const std::vector<int>& gold,
                std::vector<std::vector<double>>* d_logits) {
  if (probs.size() != gold.size()) throw std::invalid_argument("misaligned RPC targets");
  if (d_logits) d_logits->clear();
  if (probs.empty()) return 0.0;
  const double m = double(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto& p = probs[i].probs;
    const double py = p[gold[i]];
    total -= std::log(std::max(py, kLogClamp));
    if (d_logits) {
      std::vector<double> g(p.size(), 0.0);
      if (py >= kLogClamp) {
        for (std::size_t k = 0; k < p.size(); ++k) g[k] = p[k] / m;
        g[gold[i]] -= 1.0 / m;
      }
      d_logits->push_back(std::move(g));
    }
  }
  return total / m;
}

MatchedProposals match_gold(const std::vector<RegionProposal>& proposals,
                            const std::vector<GoldRegion>& gold, Task task,
                            bool inject_missing) {
  std::map<Rect, int> gold_class;
  for (const auto& g : gold) {
    if (g.cls == RegionClass::Invalid) continue;
    const int cls = task == Task::Aste ? int(g.cls) : 0;
    gold_class.emplace(g.rect, cls);
  }
  MatchedProposals out;
  const int invalid = invalid_class(task);
  for (const auto& p : proposals) {
    out.regions.push_back(p.rect);
    auto it = gold_class.find(p.rect);
    out.targets.push_back(it == gold_class.end() ? invalid : it->second);
  }
  out.proposed = out.regions.size();
  if (inject_missing) {
    for (const auto& [rect, cls] : gold_class) {
      if (std::find(out.regions.begin(), out.regions.begin() + out.proposed, rect) ==
          out.regions.begin() + out.proposed) {
        out.regions.push_back(rect);
        out.targets.push_back(cls);
      }
    }
  }
  return out;
}

double loss_uns(const std::vector<std::vector<double>>& student,
                const std::vector<std::vector<double>>& teacher,
                std::vector<std::vector<double>>* d_student) {
  if (student.size() != teacher.size()) throw std::invalid_argument("misaligned consistency sets");
  if (d_student) d_student->clear();
  if (student.empty()) return 0.0;
  const double m = double(student.size());
  double total = 0.0;
  for (std::size_t r = 0; r < student.size(); ++r) {
    const auto& s = student[r];
    const auto& t = teacher[r];
    if (s.size() != t.size()) throw std::invalid_argument("probability vectors differ in size");
    std::vector<double> g(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double diff = s[k] - t[k];
      total += diff * diff;
      g[k] = 2.0 * diff / m;
    }
    if (d_student) d_student->push_back(std::move(g));
  }
  return total / m;
}

MmdResult mmd(const FeatureSet& x, const FeatureSet& y, const MmdConfig& cfg, FeatureSet* dx,
              FeatureSet* dy) {
  const int m = int(x.size()), p = int(y.size());
  MmdResult res;
  if (dx) dx->assign(x.size(), std::vector<double>(x.empty() ? 0 : x[0].size(), 0.0));
  if (dy) dy->assign(y.size(), std::vector<double>(y.empty() ? 0 : y[0].size(), 0.0));
  if (m == 0 || p == 0) return res;
  const int dim = int(x[0].size());
  const int total = m + p;
  std::vector<double> z(std::size_t(total) * dim);
  for (int i = 0; i < total; ++i) {
    const auto& v = i < m ? x[i] : y[i - m];
    if (int(v.size()) != dim) throw std::invalid_argument("MMD features differ in dimension");
    std::copy(v.begin(), v.end(), z.begin() + std::size_t(i) * dim);
  }
  std::vector<double> sq(std::size_t(total) * total);
  kernels::pairwise_sq_dists(z, total, dim, sq);

  // Bandwidth: median over unordered pairs of distinct points.
  int med_a = -1, med_b = -1, med_c = -1, med_d = -1;
  double sigma = 1.0;
  if (cfg.sigma) {
    if (!(*cfg.sigma > 0.0)) throw std::invalid_argument("MMD bandwidth must be positive");
    sigma = *cfg.sigma;
  } else {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < total; ++i) {
      for (int j = i + 1; j < total; ++j) pairs.emplace_back(i, j);
    }
    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int u, int v) {
      return sq[std::size_t(pairs[u].first) * total + pairs[u].second] <
             sq[std::size_t(pairs[v].first) * total + pairs[v].second];
    });
    const std::size_t cnt = pairs.size();
    const std::size_t hi = cnt / 2;
    const std::size_t lo = cnt % 2 ? hi : hi - 1;
    auto dist = [&](std::size_t rank) {
      const auto [i, j] = pairs[order[rank]];
      return std::sqrt(sq[std::size_t(i) * total + j]);
    };
    const double median = 0.5 * (dist(lo) + dist(hi));
    if (median > 0.0) {
      sigma = median;
      res.median_rank = int(lo);
      std::tie(med_a, med_b) = pairs[order[lo]];
      std::tie(med_c, med_d) = pairs[order[hi]];
      res.median_points = {med_a, med_b, med_c, med_d};
    }
  }
  res.sigma = sigma;
  const double gamma = 1.0 / (2.0 * sigma * sigma);

  auto weight = [&](int a, int b) {
    const bool ax = a < m, bx = b < m;
    if (ax && bx) return 1.0 / (double(m) * m);
    if (!ax && !bx) return 1.0 / (double(p) * p);
    return -1.0 / (double(m) * p);
  };

  // Sum in the three blocks separately to mirror the estimator's definition.
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  std::vector<double> k(sq.size());
  for (int a = 0; a < total; ++a) {
    for (int b = 0; b < total; ++b) {
      const double v = std::exp(-gamma * sq[std::size_t(a) * total + b]);
      k[std::size_t(a) * total + b] = v;
      if (a < m && b < m) kxx += v;
      else if (a >= m && b >= m) kyy += v;
      else if (a < m) kxy += v;
    }
  }
  const double value = kxx / (double(m) * m) + kyy / (double(p) * p) - 2.0 * kxy / (double(m) * p);
  res.value = std::max(value, 0.0);
  res.clamped = value <= 0.0;
  if (value <= 0.0 || (!dx && !dy)) return res;

  std::vector<double> grad(z.size(), 0.0);
  double d_sigma = 0.0;
  for (int a = 0; a < total; ++a) {
    double* ga = grad.data() + std::size_t(a) * dim;
    const double* za = z.data() + std::size_t(a) * dim;
    for (int b = 0; b < total; ++b) {
      if (a == b) continue;
      const double wk = weight(a, b) * k[std::size_t(a) * total + b];
      d_sigma += wk * sq[std::size_t(a) * total + b];
      const double* zb = z.data() + std::size_t(b) * dim;
      const double coef = -4.0 * gamma * wk;
      for (int c = 0; c < dim; ++c) ga[c] += coef * (za[c] - zb[c]);
    }
  }
  d_sigma /= sigma * sigma * sigma;
  if (med_a >= 0) {
    // sigma = (dist(a,b) + dist(c,d)) / 2; the two may be the same pair.
    for (const auto& [i, j] : {std::pair{med_a, med_b}, std::pair{med_c, med_d}}) {
      const double dist = std::sqrt(sq[std::size_t(i) * total + j]);
      if (dist <= 0.0) continue;
      const double s = 0.5 * d_sigma / dist;
      for (int c = 0; c < dim; ++c) {
        const double diff = z[std::size_t(i) * dim + c] - z[std::size_t(j) * dim + c];
        grad[std::size_t(i) * dim + c] += s * diff;
        grad[std::size_t(j) * dim + c] -= s * diff;
      }
    }
  }
  for (int a = 0; a < total; ++a) {
    auto* target = a < m ? (dx ? &(*dx)[a] : nullptr) : (dy ? &(*dy)[a - m] : nullptr);
    if (!target) continue;
    std::copy(grad.begin() + std::size_t(a) * dim, grad.begin() + std::size_t(a + 1) * dim,
              target->begin());
  }
  return res;
}

RegionMmd loss_mmd_region_level(const RegionFeatureSets& source, const RegionFeatureSets& target,
                                const MmdConfig& cfg, RegionFeatureSets* d_source,
                                RegionFeatureSets* d_target) {
  RegionMmd out;
  auto ds = [d_source](FeatureSet RegionFeatureSets::*f) {
    return d_source ? &(d_source->*f) : nullptr;
  };
  auto dt = [d_target](FeatureSet RegionFeatureSets::*f) {
    return d_target ? &(d_target->*f) : nullptr;
  };
  using R = RegionFeatureSets;
  out.boundary = mmd(source.begin, target.begin, cfg, ds(&R::begin), dt(&R::begin)).value +
                 mmd(source.end, target.end, cfg, ds(&R::end), dt(&R::end)).value;
  out.region = mmd(source.region, target.region, cfg, ds(&R::region), dt(&R::region)).value;
  return out;
}

double loss_mmd_cell_level(const CellFeatureSets& source, const CellFeatureSets& target,
                           const MmdConfig& cfg, CellFeatureSets* d_source,
                           CellFeatureSets* d_target) {
  double total = 0.0;
  for (int t = 0; t < kCellTypes; ++t) {
    total += mmd(source[t], target[t], cfg, d_source ? &(*d_source)[t] : nullptr,
                 d_target ? &(*d_target)[t] : nullptr)
                 .value;
  }
  return total;
}

}  // namespace tfmt
