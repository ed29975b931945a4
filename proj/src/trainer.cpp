#include "tfmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tfmt {

namespace {

// Independent random streams so that switching one part of the pipeline
// off never shifts the draws of another.
enum Stream : std::uint64_t {
  kTeacherInit = 1,
  kStudentInit = 2,
  kSourceShuffle = 3,
  kTargetShuffle = 4,
  kAugment = 5,
  kPretrainShuffle = 6,
};

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + s + "'");
  }
  return v;
}

long long parse_int(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError("bad integer for " + std::string(key) + ": '" + s + "'");
  }
  return v;
}

std::uint64_t parse_seed(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || end != s.c_str() + s.size()) {
    throw ConfigError("bad seed for " + std::string(key) + ": '" + s + "'");
  }
  return v;
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.l_rpn) && std::isfinite(l.l_rpc) && std::isfinite(l.l_uns) &&
         std::isfinite(l.l_mmd) && std::isfinite(l.total);
}

[[noreturn]] void diverged(int epoch, long step, const LossBreakdown& l) {
  std::ostringstream os;
  os << "non-finite loss at epoch " << epoch << " step " << step << ": l_rpn=" << l.l_rpn
     << " l_rpc=" << l.l_rpc << " l_uns=" << l.l_uns << " l_mmd=" << l.l_mmd
     << " total=" << l.total;
  throw std::runtime_error(os.str());
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (Tensor* t : tensors(z)) t->zero();
  return z;
}

EpochLog summarize(int epoch, long step, const std::vector<StepLog>& steps, std::size_t first) {
  EpochLog e;
  e.epoch = epoch;
  e.step = step;
  const std::size_t count = steps.size() - first;
  if (count == 0) return e;
  for (std::size_t i = first; i < steps.size(); ++i) {
    const LossBreakdown& l = steps[i].loss;
    e.mean.l_rpn += l.l_rpn;
    e.mean.l_rpc += l.l_rpc;
    e.mean.l_sup += l.l_sup;
    e.mean.l_uns += l.l_uns;
    e.mean.l_mmd_boundary += l.l_mmd_boundary;
    e.mean.l_mmd_region += l.l_mmd_region;
    e.mean.l_mmd += l.l_mmd;
    e.mean.total += l.total;
  }
  const double inv = 1.0 / double(count);
  for (double* v : {&e.mean.l_rpn, &e.mean.l_rpc, &e.mean.l_sup, &e.mean.l_uns,
                    &e.mean.l_mmd_boundary, &e.mean.l_mmd_region, &e.mean.l_mmd, &e.mean.total}) {
    *v *= inv;
  }
  return e;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Tfmt: return "tfmt";
    case Variant::CTfmt: return "ctfmt";
    case Variant::SelfTrain: return "self_train";
    case Variant::SourceOnly: return "source_only";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::Tfmt, Variant::CTfmt, Variant::SelfTrain, Variant::SourceOnly}) {
    if (s == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(s) +
                    "' (expected tfmt, ctfmt, self_train or source_only)");
}

std::string_view task_name(Task t) { return t == Task::Aste ? "aste" : "aope"; }

Task parse_task(std::string_view s) {
  if (s == "aste") return Task::Aste;
  if (s == "aope") return Task::Aope;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected aste or aope)");
}

Ablations parse_ablations(std::string_view s) {
  Ablations a;
  if (s.empty() || s == "none") return a;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find_first_of(",+", pos), s.size());
    const std::string_view item = s.substr(pos, comma - pos);
    if (item == "no_aug") a.no_aug = true;
    else if (item == "no_uns") a.no_uns = true;
    else if (item == "no_mmd") a.no_mmd = true;
    else throw ConfigError("unknown ablation '" + std::string(item) + "'");
    pos = comma + 1;
  }
  return a;
}

std::string ablations_name(const Ablations& a) {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(a.no_aug, "no_aug");
  add(a.no_uns, "no_uns");
  add(a.no_mmd, "no_mmd");
  return out.empty() ? "none" : out;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) throw ConfigError("lambda must lie in (0, 1)");
  if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
  if (!(cfg.kappa > 0.0 && cfg.kappa <= 1.0)) throw ConfigError("kappa must lie in (0, 1]");
  if (!(cfg.aug_rate >= 0.0 && cfg.aug_rate <= 1.0)) throw ConfigError("aug_rate must lie in [0, 1]");
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be > 0");
  validate(cfg.encoder);
}

ModelConfig model_config(const TrainConfig& cfg) {
  ModelConfig m;
  m.encoder = cfg.encoder;
  m.task = cfg.mode;
  m.head = cfg.variant == Variant::CTfmt ? HeadKind::Cell : HeadKind::Region;
  m.kappa = cfg.kappa;
  return m;
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
  return {
      {"alpha", hexfloat(cfg.alpha)},
      {"beta", hexfloat(cfg.beta)},
      {"lambda", hexfloat(cfg.lambda)},
      {"eta", hexfloat(cfg.eta)},
      {"kappa", hexfloat(cfg.kappa)},
      {"aug_rate", hexfloat(cfg.aug_rate)},
      {"batch", std::to_string(cfg.batch)},
      {"epochs", std::to_string(cfg.epochs)},
      {"lr", hexfloat(cfg.lr)},
      {"seed", std::to_string(cfg.seed)},
      {"mode", std::string(task_name(cfg.mode))},
      {"variant", std::string(variant_name(cfg.variant))},
      {"ablate", ablations_name(cfg.ablations)},
      {"d", std::to_string(cfg.encoder.d)},
      {"layers", std::to_string(cfg.encoder.layers)},
      {"vocab_buckets", std::to_string(cfg.encoder.vocab_buckets)},
      {"window", std::to_string(cfg.encoder.window)},
      {"max_n", std::to_string(cfg.encoder.max_n)},
  };
}

bool is_config_key(std::string_view key) {
  for (const auto& [k, v] : config_entries(TrainConfig{})) {
    if (k == key) return true;
  }
  return false;
}

void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  auto as_int = [&] { return int(parse_int(key, value)); };
  if (key == "alpha") cfg.alpha = parse_double(key, value);
  else if (key == "beta") cfg.beta = parse_double(key, value);
  else if (key == "lambda") cfg.lambda = parse_double(key, value);
  else if (key == "eta") cfg.eta = parse_double(key, value);
  else if (key == "kappa") cfg.kappa = parse_double(key, value);
  else if (key == "aug_rate") cfg.aug_rate = parse_double(key, value);
  else if (key == "batch") cfg.batch = as_int();
  else if (key == "epochs") cfg.epochs = as_int();
  else if (key == "lr") cfg.lr = parse_double(key, value);
  else if (key == "seed") cfg.seed = parse_seed(key, value);
  else if (key == "mode") cfg.mode = parse_task(value);
  else if (key == "variant") cfg.variant = parse_variant(value);
  else if (key == "ablate") cfg.ablations = parse_ablations(value);
  else if (key == "d") cfg.encoder.d = as_int();
  else if (key == "layers") cfg.encoder.layers = as_int();
  else if (key == "vocab_buckets") cfg.encoder.vocab_buckets = as_int();
  else if (key == "window") cfg.encoder.window = as_int();
  else if (key == "max_n") cfg.encoder.max_n = as_int();
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

// -- optimisation ------------------------------------------------------------

Adam::Adam(const ModelParams& shape_of, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor* t : tensors(shape_of)) {
    m_.emplace_back(t->size(), 0.0);
    v_.emplace_back(t->size(), 0.0);
  }
}

void Adam::step(ModelParams& params, const ModelParams& grads) {
  const auto p = tensors(params);
  const auto g = tensors(grads);
  if (p.size() != m_.size() || g.size() != m_.size()) {
    throw std::invalid_argument("optimizer state does not match the model");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = (*g[k])[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      (*p[k])[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void ema_update(ModelParams& teacher, const ModelParams& student, double lambda) {
  if (!same_shapes(teacher, student)) throw std::invalid_argument("teacher and student shapes differ");
  const auto t = tensors(teacher);
  const auto s = tensors(student);
  for (std::size_t k = 0; k < t.size(); ++k) {
    for (std::size_t i = 0; i < t[k]->size(); ++i) {
      (*t[k])[i] = lambda * (*t[k])[i] + (1.0 - lambda) * (*s[k])[i];
    }
  }
}

Sentence augment(const Sentence& sentence, double rate, const std::vector<std::string>& lexicon,
                 Rng& rng) {
  if (lexicon.empty()) throw std::invalid_argument("augmentation lexicon is empty");
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("augmentation rate outside [0,1]");
  Sentence out = sentence;
  for (auto& tok : out.tokens) {
    if (rng.bernoulli(rate)) tok = lexicon[rng.below(lexicon.size())];
  }
  return out;
}

std::vector<Triplet> pseudo_triplets(const std::vector<PseudoLabel>& labels, const ModelConfig& cfg,
                                     int n) {
  if (cfg.head == HeadKind::Cell) {
    CellTable table(n);
    for (const auto& pl : labels) {
      const auto best = std::max_element(pl.probs.begin() + 1, pl.probs.end()) - pl.probs.begin();
      table.at(pl.rect.a, pl.rect.b) = static_cast<CellLabel>(best);
    }
    return decode_cell_table(table);
  }
  std::set<Triplet> out;
  for (const auto& pl : labels) {
    const auto best = std::max_element(pl.probs.begin(), pl.probs.end() - 1) - pl.probs.begin();
    const Polarity pol = cfg.task == Task::Aste ? static_cast<Polarity>(best) : Polarity::Pos;
    out.insert({Span{pl.rect.a, pl.rect.c}, Span{pl.rect.b, pl.rect.d}, pol});
  }
  return {out.begin(), out.end()};
}

// -- training loop -----------------------------------------------------------

void write_metric_log(std::ostream& os, const std::vector<EpochLog>& epochs) {
  os << kMetricLogHeader << '\n';
  char buf[512];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f\n", e.epoch,
                  e.step, e.mean.l_rpn, e.mean.l_rpc, e.mean.l_sup, e.mean.l_uns, e.mean.l_mmd,
                  e.mean.total, e.dev_f1, e.test_f1);
    os << buf;
  }
}

void train_supervised(ModelParams& model, const ModelConfig& mcfg, const TrainConfig& cfg,
                      const std::vector<LabeledSentence>& data, Rng& shuffle_rng,
                      std::vector<StepLog>* log) {
  if (data.empty()) throw std::invalid_argument("no labeled sentences to train on");
  Adam opt(model, cfg.lr);
  ObjectiveConfig ocfg;
  ocfg.use_uns = ocfg.use_mmd = false;
  ModelParams grads = zeros_like(model);
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto order = iota_indices(data.size());
    shuffle_rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch) {
      StepBatch batch;
      for (std::size_t i = pos; i < std::min(order.size(), pos + cfg.batch); ++i) {
        batch.source.push_back(data[order[i]]);
      }
      for (Tensor* t : tensors(grads)) t->zero();
      const ObjectiveResult r = evaluate_objective(model, mcfg, ocfg, batch, &grads);
      ++step;
      if (!finite(r.loss)) diverged(epoch, step, r.loss);
      opt.step(model, grads);
      if (log) log->push_back({epoch, step, r.loss, 0});
    }
  }
}

ModelParams pretrain_teacher(const std::vector<LabeledSentence>& source, const TrainConfig& cfg) {
  validate(cfg);
  const ModelConfig mcfg = model_config(cfg);
  ModelParams teacher = make_model_params(mcfg);
  Rng init = Rng::stream(cfg.seed, kTeacherInit);
  init_model_params(teacher, mcfg, init);
  Rng shuffle = Rng::stream(cfg.seed, kPretrainShuffle);
  if (cfg.epochs > 0) train_supervised(teacher, mcfg, cfg, source, shuffle);
  return teacher;
}

FitResult fit(const Datasets& data, const TrainConfig& cfg) {
  validate(cfg);
  if (data.source_train.empty() || data.source_dev.empty() || data.target_test.empty()) {
    throw std::invalid_argument("fit needs non-empty source train/dev and target test sets");
  }
  const bool mean_teacher = cfg.variant == Variant::Tfmt || cfg.variant == Variant::CTfmt;
  const bool self_train = cfg.variant == Variant::SelfTrain;
  if ((mean_teacher || self_train) && data.target_unlabeled.empty()) {
    throw std::invalid_argument("this variant needs unlabeled target sentences");
  }
  const ModelConfig mcfg = model_config(cfg);

  ObjectiveConfig ocfg;
  ocfg.alpha = cfg.alpha;
  ocfg.beta = cfg.beta;
  ocfg.use_uns = mean_teacher && !cfg.ablations.no_uns;
  ocfg.use_mmd = mean_teacher && !cfg.ablations.no_mmd;
  const bool target_terms = ocfg.use_uns || ocfg.use_mmd;

  ModelParams teacher = cfg.variant == Variant::SourceOnly ? ModelParams{}
                                                           : pretrain_teacher(data.source_train, cfg);
  ModelParams student = make_model_params(mcfg);
  {
    Rng init = Rng::stream(cfg.seed, kStudentInit);
    init_model_params(student, mcfg, init);
  }
  if (cfg.variant == Variant::SourceOnly) teacher = student;

  Adam opt(student, cfg.lr);
  ModelParams grads = zeros_like(student);
  Rng src_rng = Rng::stream(cfg.seed, kSourceShuffle);
  Rng tgt_rng = Rng::stream(cfg.seed, kTargetShuffle);
  Rng aug_rng = Rng::stream(cfg.seed, kAugment);
  const std::vector<std::string> lexicon = vocabulary(data.target_unlabeled);

  std::vector<std::size_t> tgt_order;
  std::size_t tgt_pos = 0;
  auto next_target = [&]() -> const Sentence& {
    if (tgt_pos == tgt_order.size()) {
      tgt_order = iota_indices(data.target_unlabeled.size());
      tgt_rng.shuffle(tgt_order);
      tgt_pos = 0;
    }
    return data.target_unlabeled[tgt_order[tgt_pos++]].sentence;
  };

  FitResult res;
  res.checkpoint.config = cfg;
  res.checkpoint.student = student;
  res.checkpoint.teacher = teacher;
  bool have_best = false;
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<LabeledSentence> pool = data.source_train;
    if (self_train) {
      // The labeler is the pretrained model in the first round and the
      // previous round's student afterwards.
      for (const auto& ls : data.target_unlabeled) {
        const auto labels = teacher_pseudo_label(ls.sentence, teacher, mcfg, cfg.eta);
        auto trips = pseudo_triplets(labels, mcfg, ls.sentence.size());
        if (!trips.empty()) pool.push_back({ls.sentence, std::move(trips)});
      }
    }
    const std::size_t first_step = res.steps.size();
    auto order = iota_indices(pool.size());
    src_rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch) {
      StepBatch batch;
      const std::size_t stop = std::min(order.size(), pos + cfg.batch);
      for (std::size_t i = pos; i < stop; ++i) batch.source.push_back(pool[order[i]]);
      if (target_terms) {
        for (std::size_t i = pos; i < stop; ++i) {
          const Sentence& raw = next_target();
          batch.target.push_back(cfg.ablations.no_aug ? raw
                                                      : augment(raw, cfg.aug_rate, lexicon, aug_rng));
        }
        if (ocfg.use_uns) {
          for (const Sentence& s : batch.target) {
            batch.pseudo.push_back(teacher_pseudo_label(s, teacher, mcfg, cfg.eta));
          }
        }
      }
      for (Tensor* t : tensors(grads)) t->zero();
      const ObjectiveResult r = evaluate_objective(student, mcfg, ocfg, batch, &grads);
      ++step;
      if (!finite(r.loss)) diverged(epoch, step, r.loss);
      opt.step(student, grads);
      if (mean_teacher) ema_update(teacher, student, cfg.lambda);
      res.steps.push_back({epoch, step, r.loss, r.retained});
    }
    if (!mean_teacher) teacher = student;

    EpochLog e = summarize(epoch, step, res.steps, first_step);
    e.dev_f1 = evaluate_model(student, mcfg, data.source_dev).sentence.f1;
    e.test_f1 = evaluate_model(student, mcfg, data.target_test).sentence.f1;
    res.epochs.push_back(e);
    if (!have_best || e.dev_f1 >= res.best_dev_f1) {
      have_best = true;
      res.best_epoch = epoch;
      res.best_dev_f1 = e.dev_f1;
      res.test_f1 = e.test_f1;
      res.checkpoint.student = student;
      res.checkpoint.teacher = teacher;
      res.checkpoint.epoch = epoch;
    }
  }
  if (!have_best) {
    res.best_dev_f1 = evaluate_model(student, mcfg, data.source_dev).sentence.f1;
    res.test_f1 = evaluate_model(student, mcfg, data.target_test).sentence.f1;
  }
  res.checkpoint.history = res.epochs;
  return res;
}

}  // namespace tfmt
