#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tfmt/corpus.hpp"
#include "tfmt/random.hpp"
#include "tfmt/tensor.hpp"

namespace tfmt {

struct EncoderConfig {
  int d = 16;
  int layers = 2;
  int vocab_buckets = 4096;
  int window = 1;
  int max_n = 24;

  bool operator==(const EncoderConfig&) const = default;
};

void validate(const EncoderConfig& cfg);

struct ResidualBlockParams {
  Tensor conv1_w;  // [d, 3, 3, d]
  Tensor conv1_b;  // [d]
  Tensor conv2_w;
  Tensor conv2_b;
};

/// Trainable encoder state: hash embeddings, window mixer, relation-table
/// projection with its bilinear form, and the residual conv blocks.
struct EncoderParams {
  Tensor embedding;  // [buckets, d]
  Tensor position;   // [max_n, d]
  Tensor mix_w;      // [d, 2d]   input is token ⊕ neighbour mean
  Tensor mix_b;      // [d]
  Tensor bilinear;   // [d, d]
  Tensor table_w;    // [d, 3d+1] input is h_i ⊕ h_j ⊕ pool ⊕ bilinear score
  Tensor table_b;    // [d]
  std::vector<ResidualBlockParams> blocks;

  /// Calls f(name, tensor) for every tensor in a fixed order.
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
    f("embedding", self.embedding);
    f("position", self.position);
    f("mix_w", self.mix_w);
    f("mix_b", self.mix_b);
    f("bilinear", self.bilinear);
    f("table_w", self.table_w);
    f("table_b", self.table_b);
    for (std::size_t l = 0; l < self.blocks.size(); ++l) {
      const std::string p = "block" + std::to_string(l) + ".";
      f(p + "conv1_w", self.blocks[l].conv1_w);
      f(p + "conv1_b", self.blocks[l].conv1_b);
      f(p + "conv2_w", self.blocks[l].conv2_w);
      f(p + "conv2_b", self.blocks[l].conv2_b);
    }
  }
};

/// Zero-filled parameters with the shapes implied by cfg.
EncoderParams make_encoder_params(const EncoderConfig& cfg);
void init_encoder_params(EncoderParams& params, const EncoderConfig& cfg, Rng& rng);

std::uint64_t fnv1a64(std::string_view s);

struct SentenceEncoding {
  Matrix h;  // n x d
};

struct EmbedCache {
  std::vector<int> buckets;
  Matrix mixer_input;  // n x 2d: (embedding + position) ⊕ neighbour mean
};

SentenceEncoding embed(const Sentence& sentence, const EncoderParams& params,
                       const EncoderConfig& cfg, EmbedCache* cache = nullptr);
void embed_backward(const EncoderParams& params, const EncoderConfig& cfg,
                    const EmbedCache& cache, const SentenceEncoding& enc, const Matrix& d_hidden,
                    EncoderParams& grads);

struct TableCache {
  std::vector<double> inputs;  // n*n x (3d+1) projection inputs
  std::vector<int> pool_arg;   // n*n x d, token index holding each pooled max
};

/// Layer-0 relation table: t_ij = tanh(W [h_i ⊕ h_j ⊕ maxpool(h_lo..h_hi) ⊕ h_i^T V h_j] + b).
FeatureMap build_table(const SentenceEncoding& enc, const EncoderParams& params,
                       TableCache* cache = nullptr);
/// Accumulates parameter gradients and writes d_hidden (n x d, overwritten).
void build_table_backward(const EncoderParams& params, const SentenceEncoding& enc,
                          const TableCache& cache, const FeatureMap& t0, const FeatureMap& d_t0,
                          EncoderParams& grads, Matrix& d_hidden);

struct ConvCache {
  std::vector<FeatureMap> inputs;           // T^{l-1} per block
  std::vector<std::vector<double>> pre_relu;  // Conv1 output per block
  std::vector<std::vector<double>> relu;
};

/// T^l = T^{l-1} + Conv2(relu(Conv1(T^{l-1}))) for every block.
FeatureMap conv_stack(const FeatureMap& t0, const EncoderParams& params,
                      ConvCache* cache = nullptr);
/// Returns dL/dT^0.
FeatureMap conv_stack_backward(const EncoderParams& params, const ConvCache& cache,
                               const FeatureMap& d_top, EncoderParams& grads);

struct EncoderTrace {
  EmbedCache embed;
  SentenceEncoding hidden;
  TableCache table;
  FeatureMap t0;
  ConvCache conv;
  FeatureMap top;
};

EncoderTrace encoder_forward(const Sentence& sentence, const EncoderParams& params,
                             const EncoderConfig& cfg);
/// Backpropagates dL/dT^L through the whole encoder, accumulating into grads.
void encoder_grad(const EncoderParams& params, const EncoderConfig& cfg,
                  const EncoderTrace& trace, const FeatureMap& d_top, EncoderParams& grads);

}  // namespace tfmt
