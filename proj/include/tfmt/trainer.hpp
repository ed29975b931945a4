#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tfmt/corpus.hpp"
#include "tfmt/eval.hpp"
#include "tfmt/model.hpp"
#include "tfmt/objective.hpp"

namespace tfmt {

enum class Variant { Tfmt, CTfmt, SelfTrain, SourceOnly };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view s);
std::string_view task_name(Task t);
Task parse_task(std::string_view s);

struct Ablations {
  bool no_aug = false;
  bool no_uns = false;
  bool no_mmd = false;

  bool operator==(const Ablations&) const = default;
};

/// Subset of {no_aug, no_uns, no_mmd} joined by ',' or '+'; "none" or "" is
/// empty.
Ablations parse_ablations(std::string_view s);
/// '+'-joined, so the name fits in one CSV cell; "none" when empty.
std::string ablations_name(const Ablations& a);

struct TrainConfig {
  double alpha = 1.0;
  double beta = 0.005;
  double lambda = 0.6;
  double eta = 0.98;
  double kappa = 0.3;
  double aug_rate = 0.5;
  int batch = 4;
  int epochs = 10;
  double lr = 1e-2;
  std::uint64_t seed = 1;
  Task mode = Task::Aste;
  Variant variant = Variant::Tfmt;
  Ablations ablations;
  EncoderConfig encoder;
};

void validate(const TrainConfig& cfg);
ModelConfig model_config(const TrainConfig& cfg);

/// Key/value form used by config files and checkpoints. Doubles are written
/// as hexfloats so a round trip is exact.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg);
/// Throws ConfigError for an unknown key or a malformed value.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);
bool is_config_key(std::string_view key);

// -- optimisation ------------------------------------------------------------

class Adam {
 public:
  Adam(const ModelParams& shape_of, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(ModelParams& params, const ModelParams& grads);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Theta_t <- lambda * Theta_t + (1 - lambda) * Theta_s, elementwise.
void ema_update(ModelParams& teacher, const ModelParams& student, double lambda);

/// Replaces each token with probability rate by a uniform draw from lexicon.
Sentence augment(const Sentence& sentence, double rate, const std::vector<std::string>& lexicon,
                 Rng& rng);

/// Triplets read off retained pseudo labels: each region (or cell) takes its
/// most probable foreground class.
std::vector<Triplet> pseudo_triplets(const std::vector<PseudoLabel>& labels, const ModelConfig& cfg,
                                     int n);

// -- training loop -----------------------------------------------------------

struct Datasets {
  std::vector<LabeledSentence> source_train;
  std::vector<LabeledSentence> source_dev;
  std::vector<LabeledSentence> target_unlabeled;
  std::vector<LabeledSentence> target_test;
};

struct StepLog {
  int epoch = 0;
  long step = 0;
  LossBreakdown loss;
  std::size_t pseudo_labels = 0;
};

struct EpochLog {
  int epoch = 0;
  long step = 0;  // optimizer steps taken so far
  LossBreakdown mean;
  double dev_f1 = 0.0;
  double test_f1 = 0.0;
};

inline constexpr std::string_view kMetricLogHeader =
    "epoch,step,l_rpn,l_rpc,l_sup,l_uns,l_mmd,total,dev_f1,test_f1";

void write_metric_log(std::ostream& os, const std::vector<EpochLog>& epochs);

struct Checkpoint {
  TrainConfig config;
  int epoch = 0;
  std::vector<EpochLog> history;
  ModelParams student;
  ModelParams teacher;
};

struct FitResult {
  Checkpoint checkpoint;  // student/teacher as of the selected epoch
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;
  int best_epoch = 0;
  double best_dev_f1 = 0.0;
  double test_f1 = 0.0;  // target test F1 of the selected student
};

/// Supervised-only training of `model` (starting from its current values)
/// for cfg.epochs, shuffling with the given stream.
void train_supervised(ModelParams& model, const ModelConfig& mcfg, const TrainConfig& cfg,
                      const std::vector<LabeledSentence>& data, Rng& shuffle_rng,
                      std::vector<StepLog>* log = nullptr);

/// Randomly initialised teacher trained on the labeled source set.
ModelParams pretrain_teacher(const std::vector<LabeledSentence>& source, const TrainConfig& cfg);

FitResult fit(const Datasets& data, const TrainConfig& cfg);

}  // namespace tfmt
