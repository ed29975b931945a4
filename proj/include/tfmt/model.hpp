#pragma once

#include <string>
#include <vector>

#include "tfmt/detector.hpp"
#include "tfmt/encoder.hpp"

namespace tfmt {

struct ModelConfig {
  EncoderConfig encoder;
  Task task = Task::Aste;
  HeadKind head = HeadKind::Region;
  double kappa = 0.3;
};

void validate(const ModelConfig& cfg);

/// Encoder plus detection head. Student and teacher are two instances.
struct ModelParams {
  EncoderParams encoder;
  DetectorParams detector;

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
    self.encoder.visit([&f](const std::string& name, auto& t) { f("encoder." + name, t); });
    self.detector.visit([&f](const std::string& name, auto& t) { f("detector." + name, t); });
  }
};

ModelParams make_model_params(const ModelConfig& cfg);
void init_model_params(ModelParams& params, const ModelConfig& cfg, Rng& rng);

std::vector<Tensor*> tensors(ModelParams& params);
std::vector<const Tensor*> tensors(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);
bool same_shapes(const ModelParams& x, const ModelParams& y);
/// FNV-1a over the raw bytes of every parameter, in visit order.
std::uint64_t checksum(const ModelParams& params);

/// Everything the region head computes for one sentence at inference.
struct RegionForward {
  EncoderTrace enc;
  RpnScores rpn;
  std::vector<RegionProposal> proposals;
  std::vector<RoiFeature> rois;
  std::vector<ClassProbs> probs;
};

RegionForward region_forward(const Sentence& sentence, const ModelParams& params,
                             const ModelConfig& cfg);

/// Predicted triplets. In AOPE mode every prediction carries Polarity::Pos,
/// so pairs and triplets share the evaluation code.
std::vector<Triplet> predict(const Sentence& sentence, const ModelParams& params,
                             const ModelConfig& cfg);

/// Gold triplets as the given task sees them: AOPE collapses polarity to
/// Pos and drops the resulting duplicates.
std::vector<Triplet> task_view(const std::vector<Triplet>& gold, Task task);

/// Cell-head training target per cell: the CellLabel index in ASTE; in AOPE
/// any sentiment label becomes the single VALID class.
std::vector<int> cell_targets(const LabeledSentence& ls, Task task);

}  // namespace tfmt
