#include "tfmt/objective.hpp"

#include <algorithm>
#include <stdexcept>

namespace tfmt {

namespace {

struct Signature {
  std::uint64_t h = 0xcbf29ce484222325ULL;

  void mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  void mix(const Rect& r) {
    mix(std::uint64_t(r.a));
    mix(std::uint64_t(r.b));
    mix(std::uint64_t(r.c));
    mix(std::uint64_t(r.d));
  }
  void mix(const EncoderTrace& t) {
    for (int v : t.table.pool_arg) mix(std::uint64_t(v));
    for (const auto& pre : t.conv.pre_relu) {
      std::uint64_t bits = 0;
      int filled = 0;
      for (double v : pre) {
        bits = (bits << 1) | (v > 0.0 ? 1 : 0);
        if (++filled == 64) {
          mix(bits);
          bits = 0;
          filled = 0;
        }
      }
      mix(bits);
    }
  }
  void mix(const MmdResult& m) {
    for (int p : m.median_points) mix(std::uint64_t(p));
    mix(std::uint64_t(m.clamped));
  }
};

/// MMD feature slot of a predicted cell class, or -1 for NONE. Slots follow
/// {A, O, POS, NEG, NEU}; AOPE's VALID shares the POS slot.
int cell_slot(int cls) {
  switch (static_cast<CellLabel>(cls)) {
    case CellLabel::A: return 0;
    case CellLabel::O: return 1;
    case CellLabel::Pos: return 2;
    case CellLabel::Neg: return 3;
    case CellLabel::Neu: return 4;
    default: return -1;
  }
}

/// Per-sentence forward state for the region head.
struct RegionPass {
  EncoderTrace enc;
  RpnScores rpn;
  std::vector<Rect> regions;  // proposals, then injected gold / pseudo rects
  std::vector<int> targets;   // source only
  std::size_t proposed = 0;
  std::vector<RoiFeature> rois;
  std::vector<ClassProbs> probs;
  std::vector<std::vector<double>> d_r;  // accumulated dL/dr per region
  std::vector<std::size_t> predicted;    // proposals classified as foreground
  std::size_t pseudo_begin = 0;          // regions[pseudo_begin..) are pseudo rects
};

struct CellPass {
  EncoderTrace enc;
  CellScores scores;
  std::vector<int> predicted;       // argmax class per cell
  std::vector<double> d_logits;     // n*n x K
};

void add_to(std::vector<double>& dst, std::span<const double> src, double scale) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += scale * src[i];
}

RegionPass region_pass(const Sentence& s, const ModelParams& p, const ModelConfig& cfg,
                       bool with_proposals, Signature& sig) {
  RegionPass rp;
  rp.enc = encoder_forward(s, p.encoder, cfg.encoder);
  sig.mix(rp.enc);
  if (with_proposals) {
    rp.rpn = rpn_scores(rp.enc.top, p.detector);
    const CandidateSets cand = candidate_sets(rp.rpn, cfg.kappa);
    for (const auto& prop : propose_regions(cand.begin, cand.end)) rp.regions.push_back(prop.rect);
    rp.proposed = rp.regions.size();
  }
  return rp;
}

void classify_all(RegionPass& rp, const ModelParams& p, const ModelConfig& cfg, Signature& sig) {
  const int invalid = invalid_class(cfg.task);
  for (std::size_t i = rp.rois.size(); i < rp.regions.size(); ++i) {
    sig.mix(rp.regions[i]);
    rp.rois.push_back(roi_represent(rp.enc.top, rp.regions[i]));
    for (int c : rp.rois.back().pool_cell) sig.mix(std::uint64_t(c));
    rp.probs.push_back(classify_region(rp.rois.back().r, p.detector, cfg.task));
    rp.d_r.emplace_back(rp.rois.back().r.size(), 0.0);
    const int cls = predicted_class(rp.probs.back().probs);
    sig.mix(std::uint64_t(cls));
    if (i < rp.proposed && cls != invalid) rp.predicted.push_back(i);
  }
}

CellPass cell_pass(const Sentence& s, const ModelParams& p, const ModelConfig& cfg,
                   Signature& sig) {
  CellPass cp;
  cp.enc = encoder_forward(s, p.encoder, cfg.encoder);
  sig.mix(cp.enc);
  cp.scores = cell_scores(cp.enc.top, p.detector);
  const int n = cp.scores.n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cp.predicted.push_back(predicted_class(cp.scores.cell(i, j)));
      sig.mix(std::uint64_t(cp.predicted.back()));
    }
  }
  cp.d_logits.assign(cp.scores.probs.size(), 0.0);
  return cp;
}

/// Where a pooled MMD feature came from, to route its gradient back.
struct FeatureOwner {
  std::size_t pass;
  std::size_t index;  // region index (region head) or flat cell (cell head)
};

void check_pseudo(const StepBatch& batch) {
  if (!batch.pseudo.empty() && batch.pseudo.size() != batch.target.size()) {
    throw std::invalid_argument("pseudo labels are not aligned with the target batch");
  }
}

ObjectiveResult region_objective(const ModelParams& student, const ModelConfig& cfg,
                                 const ObjectiveConfig& ocfg, const StepBatch& batch,
                                 ModelParams* grads) {
  ObjectiveResult res;
  Signature sig;
  const bool need_target = !batch.target.empty() && (ocfg.use_uns || ocfg.use_mmd);
  const bool grad_uns = grads && ocfg.use_uns && ocfg.alpha != 0.0;
  const bool grad_mmd = grads && ocfg.use_mmd && ocfg.beta != 0.0;
  const double inv_src = batch.source.empty() ? 0.0 : 1.0 / double(batch.source.size());

  // Source: supervised terms.
  std::vector<RegionPass> src;
  std::vector<std::vector<double>> d_begin(batch.source.size()), d_end(batch.source.size());
  for (std::size_t s = 0; s < batch.source.size(); ++s) {
    const LabeledSentence& ls = batch.source[s];
    RegionPass rp = region_pass(ls.sentence, student, cfg, true, sig);
    const RegionEncoding gold = encode_region_labels(ls);
    res.loss.l_rpn += inv_src * loss_rpn(rp.rpn, gold.labels, grads ? &d_begin[s] : nullptr,
                                         grads ? &d_end[s] : nullptr);
    std::vector<RegionProposal> props;
    for (const Rect& r : rp.regions) props.push_back({r, 0.0, 0.0});
    MatchedProposals m = match_gold(props, gold.regions, cfg.task, true);
    rp.regions = std::move(m.regions);
    rp.targets = std::move(m.targets);
    classify_all(rp, student, cfg, sig);
    std::vector<std::vector<double>> d_logits;
    res.loss.l_rpc += inv_src * loss_rpc(rp.probs, rp.targets, grads ? &d_logits : nullptr);
    if (grads) {
      const double fault = ocfg.inject_fault ? 0.5 : 1.0;
      std::vector<double> d_r;
      for (std::size_t i = 0; i < d_logits.size(); ++i) {
        for (double& g : d_logits[i]) g *= inv_src;
        d_r.assign(rp.rois[i].r.size(), 0.0);
        classify_backward(rp.rois[i].r, d_logits[i], student.detector, grads->detector, d_r);
        add_to(rp.d_r[i], d_r, fault);
      }
      for (double& g : d_begin[s]) g *= inv_src;
      for (double& g : d_end[s]) g *= inv_src;
    }
    src.push_back(std::move(rp));
  }

  // Target: the student on the same (augmented) sentences the teacher saw.
  check_pseudo(batch);
  std::vector<RegionPass> tgt;
  if (need_target) {
    for (std::size_t t = 0; t < batch.target.size(); ++t) {
      RegionPass rp = region_pass(batch.target[t], student, cfg, ocfg.use_mmd, sig);
      rp.pseudo_begin = rp.regions.size();
      if (ocfg.use_uns && !batch.pseudo.empty()) {
        for (const auto& pl : batch.pseudo[t]) rp.regions.push_back(pl.rect);
      }
      classify_all(rp, student, cfg, sig);
      tgt.push_back(std::move(rp));
    }
  }

  if (ocfg.use_uns && !tgt.empty()) {
    std::vector<std::vector<double>> student_p, teacher_p;
    std::vector<FeatureOwner> owners;
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      const RegionPass& rp = tgt[t];
      for (std::size_t i = rp.pseudo_begin; i < rp.regions.size(); ++i) {
        student_p.push_back(rp.probs[i].probs);
        teacher_p.push_back(batch.pseudo[t][i - rp.pseudo_begin].probs);
        owners.push_back({t, i});
      }
    }
    res.retained = student_p.size();
    std::vector<std::vector<double>> d_p;
    res.loss.l_uns = loss_uns(student_p, teacher_p, grad_uns ? &d_p : nullptr);
    if (grad_uns) {
      std::vector<double> d_r;
      for (std::size_t k = 0; k < d_p.size(); ++k) {
        RegionPass& rp = tgt[owners[k].pass];
        const std::size_t i = owners[k].index;
        auto d_logits = softmax_backward(rp.probs[i].probs, d_p[k]);
        for (double& g : d_logits) g *= ocfg.alpha;
        d_r.assign(rp.rois[i].r.size(), 0.0);
        classify_backward(rp.rois[i].r, d_logits, student.detector, grads->detector, d_r);
        add_to(rp.d_r[i], d_r, 1.0);
      }
    }
  }

  if (ocfg.use_mmd && !tgt.empty()) {
    const int d = cfg.encoder.d;
    RegionFeatureSets fs[2];
    std::vector<FeatureOwner> owners[2];
    std::vector<RegionPass>* passes[2] = {&src, &tgt};
    for (int dom = 0; dom < 2; ++dom) {
      for (std::size_t s = 0; s < passes[dom]->size(); ++s) {
        const RegionPass& rp = (*passes[dom])[s];
        for (std::size_t i : rp.predicted) {
          const auto& r = rp.rois[i].r;
          fs[dom].begin.emplace_back(r.begin(), r.begin() + d);
          fs[dom].end.emplace_back(r.begin() + d, r.begin() + 2 * d);
          fs[dom].region.push_back(r);
          owners[dom].push_back({s, i});
        }
      }
    }
    RegionFeatureSets dfs[2];
    const RegionMmd m = loss_mmd_region_level(fs[0], fs[1], ocfg.mmd, grad_mmd ? &dfs[0] : nullptr,
                                              grad_mmd ? &dfs[1] : nullptr);
    res.loss.l_mmd_boundary = m.boundary;
    res.loss.l_mmd_region = m.region;
    // Re-run for the signature; cheap next to the forward passes.
    sig.mix(mmd(fs[0].begin, fs[1].begin, ocfg.mmd));
    sig.mix(mmd(fs[0].end, fs[1].end, ocfg.mmd));
    sig.mix(mmd(fs[0].region, fs[1].region, ocfg.mmd));
    if (grad_mmd) {
      for (int dom = 0; dom < 2; ++dom) {
        for (std::size_t k = 0; k < owners[dom].size(); ++k) {
          auto& rp = (*passes[dom])[owners[dom][k].pass];
          auto& dr = rp.d_r[owners[dom][k].index];
          for (int c = 0; c < d; ++c) {
            dr[c] += ocfg.beta * dfs[dom].begin[k][c];
            dr[d + c] += ocfg.beta * dfs[dom].end[k][c];
          }
          add_to(dr, dfs[dom].region[k], ocfg.beta);
        }
      }
    }
  }

  total_loss(res.loss, ocfg.alpha, ocfg.beta);
  res.signature = sig.h;
  if (!grads) return res;

  auto backprop = [&](RegionPass& rp, const std::vector<double>* db, const std::vector<double>* de) {
    FeatureMap d_top(rp.enc.top.n, rp.enc.top.d, rp.enc.top.layer);
    if (db) rpn_backward(rp.enc.top, *db, *de, student.detector, grads->detector, d_top);
    for (std::size_t i = 0; i < rp.regions.size(); ++i) {
      roi_backward(rp.rois[i], rp.regions[i], rp.enc.top.n, rp.d_r[i], d_top);
    }
    encoder_grad(student.encoder, cfg.encoder, rp.enc, d_top, grads->encoder);
  };
  for (std::size_t s = 0; s < src.size(); ++s) backprop(src[s], &d_begin[s], &d_end[s]);
  if (grad_uns || grad_mmd) {
    for (auto& rp : tgt) backprop(rp, nullptr, nullptr);
  }
  return res;
}

ObjectiveResult cell_objective(const ModelParams& student, const ModelConfig& cfg,
                               const ObjectiveConfig& ocfg, const StepBatch& batch,
                               ModelParams* grads) {
  ObjectiveResult res;
  Signature sig;
  const bool need_target = !batch.target.empty() && (ocfg.use_uns || ocfg.use_mmd);
  const bool grad_uns = grads && ocfg.use_uns && ocfg.alpha != 0.0;
  const bool grad_mmd = grads && ocfg.use_mmd && ocfg.beta != 0.0;
  const double inv_src = batch.source.empty() ? 0.0 : 1.0 / double(batch.source.size());
  const double fault = ocfg.inject_fault ? 0.5 : 1.0;

  std::vector<CellPass> src;
  for (const LabeledSentence& ls : batch.source) {
    CellPass cp = cell_pass(ls.sentence, student, cfg, sig);
    const std::vector<int> targets = cell_targets(ls, cfg.task);
    const int k = cp.scores.classes;
    std::vector<ClassProbs> probs(targets.size());
    for (std::size_t c = 0; c < targets.size(); ++c) {
      probs[c].probs.assign(cp.scores.probs.begin() + c * k, cp.scores.probs.begin() + (c + 1) * k);
    }
    std::vector<std::vector<double>> d_logits;
    res.loss.l_rpc += inv_src * loss_rpc(probs, targets, grads ? &d_logits : nullptr);
    if (grads) {
      for (std::size_t c = 0; c < d_logits.size(); ++c) {
        for (int j = 0; j < k; ++j) cp.d_logits[c * k + j] += fault * inv_src * d_logits[c][j];
      }
    }
    src.push_back(std::move(cp));
  }

  check_pseudo(batch);
  std::vector<CellPass> tgt;
  if (need_target) {
    for (const Sentence& s : batch.target) tgt.push_back(cell_pass(s, student, cfg, sig));
  }

  if (ocfg.use_uns && !tgt.empty() && !batch.pseudo.empty()) {
    std::vector<std::vector<double>> student_p, teacher_p;
    std::vector<FeatureOwner> owners;
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      for (const auto& pl : batch.pseudo[t]) {
        const auto p = tgt[t].scores.cell(pl.rect.a, pl.rect.b);
        student_p.emplace_back(p.begin(), p.end());
        teacher_p.push_back(pl.probs);
        owners.push_back({t, std::size_t(pl.rect.a) * tgt[t].scores.n + pl.rect.b});
      }
    }
    res.retained = student_p.size();
    std::vector<std::vector<double>> d_p;
    res.loss.l_uns = loss_uns(student_p, teacher_p, grad_uns ? &d_p : nullptr);
    if (grad_uns) {
      for (std::size_t q = 0; q < d_p.size(); ++q) {
        CellPass& cp = tgt[owners[q].pass];
        const int k = cp.scores.classes;
        const std::size_t cell = owners[q].index;
        const auto d_logits =
            softmax_backward(std::span<const double>(cp.scores.probs.data() + cell * k, k), d_p[q]);
        for (int j = 0; j < k; ++j) cp.d_logits[cell * k + j] += ocfg.alpha * d_logits[j];
      }
    }
  }

  std::vector<FeatureMap> d_tops[2];
  std::vector<CellPass>* passes[2] = {&src, &tgt};
  for (int dom = 0; dom < 2; ++dom) {
    for (const auto& cp : *passes[dom]) d_tops[dom].emplace_back(cp.enc.top.n, cp.enc.top.d, cp.enc.top.layer);
  }

  if (ocfg.use_mmd && !tgt.empty()) {
    CellFeatureSets fs[2];
    std::array<std::vector<FeatureOwner>, kCellTypes> owners[2];
    for (int dom = 0; dom < 2; ++dom) {
      for (std::size_t s = 0; s < passes[dom]->size(); ++s) {
        const CellPass& cp = (*passes[dom])[s];
        for (std::size_t c = 0; c < cp.predicted.size(); ++c) {
          const int slot = cell_slot(cp.predicted[c]);
          if (slot < 0) continue;
          const int n = cp.enc.top.n;
          const auto f = cp.enc.top.cell(int(c) / n, int(c) % n);
          fs[dom][slot].emplace_back(f.begin(), f.end());
          owners[dom][slot].push_back({s, c});
        }
      }
    }
    CellFeatureSets dfs[2];
    res.loss.l_mmd_region = loss_mmd_cell_level(fs[0], fs[1], ocfg.mmd, grad_mmd ? &dfs[0] : nullptr,
                                                grad_mmd ? &dfs[1] : nullptr);
    for (int k = 0; k < kCellTypes; ++k) sig.mix(mmd(fs[0][k], fs[1][k], ocfg.mmd));
    if (grad_mmd) {
      for (int dom = 0; dom < 2; ++dom) {
        for (int k = 0; k < kCellTypes; ++k) {
          for (std::size_t q = 0; q < owners[dom][k].size(); ++q) {
            const auto& o = owners[dom][k][q];
            FeatureMap& dt = d_tops[dom][o.pass];
            const int n = dt.n;
            auto cell = dt.cell(int(o.index) / n, int(o.index) % n);
            for (std::size_t c = 0; c < cell.size(); ++c) cell[c] += ocfg.beta * dfs[dom][k][q][c];
          }
        }
      }
    }
  }

  total_loss(res.loss, ocfg.alpha, ocfg.beta);
  res.signature = sig.h;
  if (!grads) return res;

  for (int dom = 0; dom < 2; ++dom) {
    if (dom == 1 && !grad_uns && !grad_mmd) break;
    for (std::size_t s = 0; s < passes[dom]->size(); ++s) {
      CellPass& cp = (*passes[dom])[s];
      cell_backward(cp.enc.top, cp.d_logits, student.detector, grads->detector, d_tops[dom][s]);
      encoder_grad(student.encoder, cfg.encoder, cp.enc, d_tops[dom][s], grads->encoder);
    }
  }
  return res;
}

}  // namespace

double foreground_confidence(std::span<const double> probs, HeadKind head) {
  if (probs.size() < 2) throw std::invalid_argument("need at least two classes");
  const auto first = head == HeadKind::Region ? probs.begin() : probs.begin() + 1;
  const auto last = head == HeadKind::Region ? probs.end() - 1 : probs.end();
  return *std::max_element(first, last);
}

std::vector<PseudoLabel> teacher_pseudo_label(const Sentence& sentence, const ModelParams& teacher,
                                              const ModelConfig& cfg, double eta) {
  std::vector<PseudoLabel> out;
  if (cfg.head == HeadKind::Cell) {
    const EncoderTrace enc = encoder_forward(sentence, teacher.encoder, cfg.encoder);
    const CellScores scores = cell_scores(enc.top, teacher.detector);
    for (int i = 0; i < scores.n; ++i) {
      for (int j = 0; j < scores.n; ++j) {
        const auto p = scores.cell(i, j);
        const double conf = foreground_confidence(p, HeadKind::Cell);
        if (conf >= eta) out.push_back({Rect{i, j, i, j}, {p.begin(), p.end()}, conf});
      }
    }
    return out;
  }
  const RegionForward f = region_forward(sentence, teacher, cfg);
  for (std::size_t i = 0; i < f.proposals.size(); ++i) {
    const double conf = foreground_confidence(f.probs[i].probs, HeadKind::Region);
    if (conf >= eta) out.push_back({f.proposals[i].rect, f.probs[i].probs, conf});
  }
  return out;
}

ObjectiveResult evaluate_objective(const ModelParams& student, const ModelConfig& mcfg,
                                   const ObjectiveConfig& ocfg, const StepBatch& batch,
                                   ModelParams* grads) {
  if (grads && !same_shapes(student, *grads)) {
    throw std::invalid_argument("gradient buffer does not match the model");
  }
  return mcfg.head == HeadKind::Cell ? cell_objective(student, mcfg, ocfg, batch, grads)
                                     : region_objective(student, mcfg, ocfg, batch, grads);
}

}  // namespace tfmt
