#include "tfmt/model.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <stdexcept>

namespace tfmt {

void validate(const ModelConfig& cfg) {
  validate(cfg.encoder);
  if (!(cfg.kappa > 0.0 && cfg.kappa <= 1.0)) throw ConfigError("kappa must lie in (0, 1]");
}

ModelParams make_model_params(const ModelConfig& cfg) {
  validate(cfg);
  return {make_encoder_params(cfg.encoder), make_detector_params(cfg.encoder.d, cfg.task, cfg.head)};
}

void init_model_params(ModelParams& params, const ModelConfig& cfg, Rng& rng) {
  init_encoder_params(params.encoder, cfg.encoder, rng);
  init_detector_params(params.detector, rng);
}

std::vector<Tensor*> tensors(ModelParams& params) {
  std::vector<Tensor*> out;
  params.visit([&out](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> tensors(const ModelParams& params) {
  std::vector<const Tensor*> out;
  params.visit([&out](const std::string&, const Tensor& t) { out.push_back(&t); });
  return out;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t total = 0;
  for (const Tensor* t : tensors(params)) total += t->size();
  return total;
}

bool same_shapes(const ModelParams& x, const ModelParams& y) {
  const auto tx = tensors(x), ty = tensors(y);
  if (tx.size() != ty.size()) return false;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    if (tx[i]->shape != ty[i]->shape) return false;
  }
  return true;
}

std::uint64_t checksum(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor* t : tensors(params)) {
    for (double v : t->data) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

RegionForward region_forward(const Sentence& sentence, const ModelParams& params,
                             const ModelConfig& cfg) {
  RegionForward f;
  f.enc = encoder_forward(sentence, params.encoder, cfg.encoder);
  f.rpn = rpn_scores(f.enc.top, params.detector);
  const CandidateSets cand = candidate_sets(f.rpn, cfg.kappa);
  f.proposals = propose_regions(cand.begin, cand.end);
  for (const auto& p : f.proposals) {
    f.rois.push_back(roi_represent(f.enc.top, p.rect));
    f.probs.push_back(classify_region(f.rois.back().r, params.detector, cfg.task));
  }
  return f;
}

std::vector<Triplet> predict(const Sentence& sentence, const ModelParams& params,
                             const ModelConfig& cfg) {
  if (cfg.head == HeadKind::Cell) {
    const EncoderTrace enc = encoder_forward(sentence, params.encoder, cfg.encoder);
    return decode_cell_table(cell_predictions(cell_scores(enc.top, params.detector)));
  }
  const RegionForward f = region_forward(sentence, params, cfg);
  if (cfg.task == Task::Aste) return decode_triplets(f.proposals, f.probs);
  std::vector<Triplet> out;
  for (const Pair& p : decode_pairs(f.proposals, f.probs)) {
    out.push_back({p.aspect, p.opinion, Polarity::Pos});
  }
  return out;
}

std::vector<Triplet> task_view(const std::vector<Triplet>& gold, Task task) {
  std::set<Triplet> out;
  for (Triplet t : gold) {
    if (task == Task::Aope) t.polarity = Polarity::Pos;
    out.insert(t);
  }
  return {out.begin(), out.end()};
}

std::vector<int> cell_targets(const LabeledSentence& ls, Task task) {
  const CellTable table = encode_cell_labels(ls);
  std::vector<int> out(table.cells.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const int label = int(table.cells[c]);
    out[c] = task == Task::Aope ? std::min(label, int(CellLabel::Pos)) : label;
  }
  return out;
}

}  // namespace tfmt
