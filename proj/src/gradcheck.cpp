#include "tfmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tfmt {

namespace {

Sentence words(const std::string& text) {
  Sentence s;
  std::istringstream is(text);
  for (std::string w; is >> w;) s.tokens.push_back(w);
  return s;
}

LabeledSentence labeled(const std::string& text, std::vector<Triplet> triplets) {
  return {words(text), std::move(triplets)};
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  ModelConfig mcfg;
  mcfg.encoder.d = 8;
  mcfg.encoder.layers = 2;
  mcfg.encoder.vocab_buckets = 64;
  mcfg.encoder.max_n = 5;
  mcfg.task = cfg.task;
  mcfg.head = cfg.head;
  mcfg.kappa = cfg.kappa;

  ModelParams student = make_model_params(mcfg);
  ModelParams teacher = make_model_params(mcfg);
  Rng rs = Rng::stream(cfg.seed, 1), rt = Rng::stream(cfg.seed, 2);
  init_model_params(student, mcfg, rs);
  init_model_params(teacher, mcfg, rt);
  // Region head: lean away from INVALID so both domains have predicted
  // regions for MMD. Cell head: lean towards NONE so only a few cells per
  // type are predicted; with many cells the MMD median pair changes under
  // almost every probe.
  for (ModelParams* m : {&student, &teacher}) {
    Tensor& b = cfg.head == HeadKind::Region ? m->detector.cls_b : m->detector.cell_b;
    for (std::size_t c = 0; c < b.size(); ++c) {
      const bool background = cfg.head == HeadKind::Region ? c + 1 == b.size() : c == 0;
      b[c] = background ? (cfg.head == HeadKind::Region ? -1.0 : 1.0) : 0.5;
    }
  }
  // Keep first-conv pre-activations clear of zero (half the channels on,
  // half off) so most probes do not cross a ReLU kink.
  for (auto& block : student.encoder.blocks) {
    for (double& w : block.conv1_w.data) w *= 0.2;
    for (std::size_t c = 0; c < block.conv1_b.size(); ++c) block.conv1_b[c] = c % 2 ? -0.6 : 0.6;
  }

  StepBatch batch;
  batch.source.push_back(labeled("the crust is crisp .", {{{1, 1}, {3, 3}, Polarity::Pos}}));
  batch.source.push_back(
      labeled("our tea seems so bland", {{{1, 1}, {4, 4}, Polarity::Neg}, {{1, 1}, {3, 3}, Polarity::Neu}}));
  batch.target.push_back(words("their plot was tense ."));
  batch.target.push_back(words("that cast felt wooden"));
  for (const Sentence& s : batch.target) {
    batch.pseudo.push_back(teacher_pseudo_label(s, teacher, mcfg, cfg.eta));
  }

  ObjectiveConfig ocfg;
  ocfg.alpha = cfg.alpha;
  ocfg.beta = cfg.beta;
  ocfg.inject_fault = cfg.inject_fault;

  GradcheckReport report;
  ModelParams grads = student;
  for (Tensor* t : tensors(grads)) t->zero();
  const ObjectiveResult base = evaluate_objective(student, mcfg, ocfg, batch, &grads);
  report.loss = base.loss;
  report.retained = base.retained;

  const auto params = tensors(student);
  const auto analytic = tensors(grads);
  std::vector<std::string> names;
  student.visit([&names](const std::string& name, const Tensor&) { names.push_back(name); });

  for (std::size_t k = 0; k < params.size(); ++k) {
    GroupReport g;
    g.name = names[k];
    Tensor& t = *params[k];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + cfg.eps;
      const ObjectiveResult plus = evaluate_objective(student, mcfg, ocfg, batch);
      t[i] = orig - cfg.eps;
      const ObjectiveResult minus = evaluate_objective(student, mcfg, ocfg, batch);
      t[i] = orig;
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++g.skipped;
        continue;
      }
      const double numeric = (plus.loss.total - minus.loss.total) / (2.0 * cfg.eps);
      const double a = (*analytic[k])[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), cfg.floor});
      g.max_rel_err = std::max(g.max_rel_err, std::abs(a - numeric) / denom);
      g.max_abs_grad = std::max(g.max_abs_grad, std::abs(a));
      ++g.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, g.max_rel_err);
    report.checked += g.checked;
    report.skipped += g.skipped;
    report.groups.push_back(g);
  }
  const bool every_group = std::all_of(report.groups.begin(), report.groups.end(),
                                      [](const GroupReport& g) { return g.checked > 0; });
  report.passed = every_group && report.max_rel_err < cfg.tolerance;
  return report;
}

void write_gradcheck_report(std::ostream& os, const GradcheckReport& r) {
  os << "group,checked,skipped,max_abs_grad,max_rel_err\n";
  char buf[256];
  for (const auto& g : r.groups) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6e,%.6e\n", g.name.c_str(), g.checked, g.skipped,
                  g.max_abs_grad, g.max_rel_err);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "# loss total=%.9g l_sup=%.9g l_uns=%.9g l_mmd=%.9g retained=%zu\n"
                "# checked=%zu skipped=%zu max_rel_err=%.6e %s\n",
                r.loss.total, r.loss.l_sup, r.loss.l_uns, r.loss.l_mmd, r.retained, r.checked,
                r.skipped, r.max_rel_err, r.passed ? "PASS" : "FAIL");
  os << buf;
}

}  // namespace tfmt
