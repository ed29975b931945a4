#include "tfmt/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "tfmt/kernels.hpp"

namespace tfmt {

void validate(const EncoderConfig& cfg) {
  if (cfg.d < 4 || cfg.d % 2 != 0) throw ConfigError("encoder width d must be even and >= 4");
  if (cfg.layers < 1) throw ConfigError("encoder needs at least one residual block");
  if (cfg.vocab_buckets < 2) throw ConfigError("vocab_buckets must be >= 2");
  if (cfg.window < 0) throw ConfigError("window must be >= 0");
  if (cfg.max_n < 1) throw ConfigError("max_n must be >= 1");
}

EncoderParams make_encoder_params(const EncoderConfig& cfg) {
  validate(cfg);
  const std::size_t d = cfg.d;
  EncoderParams p;
  p.embedding = Tensor({std::size_t(cfg.vocab_buckets), d});
  p.position = Tensor({std::size_t(cfg.max_n), d});
  p.mix_w = Tensor({d, 2 * d});
  p.mix_b = Tensor({d});
  p.bilinear = Tensor({d, d});
  p.table_w = Tensor({d, 3 * d + 1});
  p.table_b = Tensor({d});
  p.blocks.resize(cfg.layers);
  for (auto& b : p.blocks) {
    b.conv1_w = Tensor({d, 3, 3, d});
    b.conv1_b = Tensor({d});
    b.conv2_w = Tensor({d, 3, 3, d});
    b.conv2_b = Tensor({d});
  }
  return p;
}

namespace {

void fill_normal(Tensor& t, double stddev, Rng& rng) {
  for (double& v : t.data) v = stddev * rng.normal();
}

}  // namespace

void init_encoder_params(EncoderParams& p, const EncoderConfig& cfg, Rng& rng) {
  const double d = cfg.d;
  fill_normal(p.embedding, 0.5, rng);
  fill_normal(p.position, 0.5, rng);
  fill_normal(p.mix_w, 1.0 / std::sqrt(2 * d), rng);
  p.mix_b.zero();
  fill_normal(p.bilinear, 1.0 / d, rng);
  fill_normal(p.table_w, 1.0 / std::sqrt(3 * d + 1), rng);
  p.table_b.zero();
  for (auto& b : p.blocks) {
    fill_normal(b.conv1_w, 1.0 / std::sqrt(9 * d), rng);
    b.conv1_b.zero();
    fill_normal(b.conv2_w, 0.5 / std::sqrt(9 * d), rng);
    b.conv2_b.zero();
  }
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// -- embedding mixer ---------------------------------------------------------

namespace {

int neighbour_count(int i, int n, int window) {
  int count = 0;
  for (int j = std::max(0, i - window); j <= std::min(n - 1, i + window); ++j) {
    if (j != i) ++count;
  }
  return count;
}

}  // namespace

SentenceEncoding embed(const Sentence& sentence, const EncoderParams& params,
                       const EncoderConfig& cfg, EmbedCache* cache) {
  const int n = sentence.size();
  const int d = cfg.d;
  if (n < 1) throw std::invalid_argument("cannot embed an empty sentence");
  if (n > cfg.max_n) {
    throw std::invalid_argument("sentence of length " + std::to_string(n) +
                                " exceeds max_n=" + std::to_string(cfg.max_n));
  }
  EmbedCache local;
  EmbedCache& c = cache ? *cache : local;
  c.buckets.resize(n);
  for (int i = 0; i < n; ++i) {
    c.buckets[i] = int(fnv1a64(sentence.tokens[i]) % std::uint64_t(cfg.vocab_buckets));
  }
  c.mixer_input = Matrix(n, 2 * d);
  for (int i = 0; i < n; ++i) {
    auto row = c.mixer_input.row(i);
    const double* e = params.embedding.data.data() + std::size_t(c.buckets[i]) * d;
    const double* pos = params.position.data.data() + std::size_t(i) * d;
    for (int k = 0; k < d; ++k) row[k] = e[k] + pos[k];
    const int count = neighbour_count(i, n, cfg.window);
    if (count == 0) continue;
    for (int j = std::max(0, i - cfg.window); j <= std::min(n - 1, i + cfg.window); ++j) {
      if (j == i) continue;
      const double* ej = params.embedding.data.data() + std::size_t(c.buckets[j]) * d;
      for (int k = 0; k < d; ++k) row[d + k] += ej[k];
    }
    for (int k = 0; k < d; ++k) row[d + k] /= count;
  }
  SentenceEncoding enc{Matrix(n, d)};
  kernels::affine_rows(c.mixer_input.data, n, 2 * d, params.mix_w.data, params.mix_b.data, d,
                       enc.h.data);
  for (double& v : enc.h.data) v = std::tanh(v);
  return enc;
}

void embed_backward(const EncoderParams& params, const EncoderConfig& cfg,
                    const EmbedCache& cache, const SentenceEncoding& enc, const Matrix& d_hidden,
                    EncoderParams& grads) {
  const int n = enc.h.rows;
  const int d = cfg.d;
  std::vector<double> dz(d_hidden.data.size());
  for (std::size_t k = 0; k < dz.size(); ++k) {
    dz[k] = d_hidden.data[k] * (1.0 - enc.h.data[k] * enc.h.data[k]);
  }
  kernels::affine_rows_backward_params(dz, cache.mixer_input.data, n, 2 * d, d,
                                       grads.mix_w.data, grads.mix_b.data);
  std::vector<double> d_input(std::size_t(n) * 2 * d);
  kernels::affine_rows_backward_input(dz, n, d, params.mix_w.data, 2 * d, d_input);
  for (int i = 0; i < n; ++i) {
    const double* g = d_input.data() + std::size_t(i) * 2 * d;
    double* ge = grads.embedding.data.data() + std::size_t(cache.buckets[i]) * d;
    double* gp = grads.position.data.data() + std::size_t(i) * d;
    for (int k = 0; k < d; ++k) {
      ge[k] += g[k];
      gp[k] += g[k];
    }
    const int count = neighbour_count(i, n, cfg.window);
    if (count == 0) continue;
    for (int j = std::max(0, i - cfg.window); j <= std::min(n - 1, i + cfg.window); ++j) {
      if (j == i) continue;
      double* gj = grads.embedding.data.data() + std::size_t(cache.buckets[j]) * d;
      for (int k = 0; k < d; ++k) gj[k] += g[d + k] / count;
    }
  }
}

// -- relation table ----------------------------------------------------------

FeatureMap build_table(const SentenceEncoding& enc, const EncoderParams& params,
                       TableCache* cache) {
  const Matrix& h = enc.h;
  const int n = h.rows;
  const int d = h.cols;
  if (params.table_w.shape.size() != 2 || int(params.table_w.shape[0]) != d ||
      int(params.table_w.shape[1]) != 3 * d + 1) {
    throw std::invalid_argument("relation table projection does not match hidden width");
  }
  const int in = 3 * d + 1;
  TableCache local;
  TableCache& c = cache ? *cache : local;
  c.inputs.assign(std::size_t(n) * n * in, 0.0);
  c.pool_arg.assign(std::size_t(n) * n * d, 0);

  // g_j = V h_j, so the bilinear score is h_i . g_j.
  std::vector<double> g(std::size_t(n) * d);
  kernels::affine_rows(h.data, n, d, params.bilinear.data, {}, d, g);

  std::vector<double> run_max(d);
  std::vector<int> run_arg(d);
  for (int lo = 0; lo < n; ++lo) {
    for (int k = 0; k < d; ++k) {
      run_max[k] = h.at(lo, k);
      run_arg[k] = lo;
    }
    for (int hi = lo; hi < n; ++hi) {
      for (int k = 0; k < d; ++k) {
        if (h.at(hi, k) > run_max[k]) {
          run_max[k] = h.at(hi, k);
          run_arg[k] = hi;
        }
      }
      for (const auto& [i, j] : {std::pair{lo, hi}, std::pair{hi, lo}}) {
        const std::size_t cell = std::size_t(i) * n + j;
        double* u = c.inputs.data() + cell * in;
        for (int k = 0; k < d; ++k) {
          u[k] = h.at(i, k);
          u[d + k] = h.at(j, k);
          u[2 * d + k] = run_max[k];
          c.pool_arg[cell * d + k] = run_arg[k];
        }
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += h.at(i, k) * g[std::size_t(j) * d + k];
        u[3 * d] = s;
      }
    }
  }

  FeatureMap t(n, d, 0);
  kernels::affine_rows(c.inputs, n * n, in, params.table_w.data, params.table_b.data, d, t.data);
  for (double& v : t.data) v = std::tanh(v);
  return t;
}

void build_table_backward(const EncoderParams& params, const SentenceEncoding& enc,
                          const TableCache& cache, const FeatureMap& t0, const FeatureMap& d_t0,
                          EncoderParams& grads, Matrix& d_hidden) {
  const Matrix& h = enc.h;
  const int n = h.rows;
  const int d = h.cols;
  const int in = 3 * d + 1;
  const int cells = n * n;

  std::vector<double> dz(t0.data.size());
  for (std::size_t k = 0; k < dz.size(); ++k) {
    dz[k] = d_t0.data[k] * (1.0 - t0.data[k] * t0.data[k]);
  }
  kernels::affine_rows_backward_params(dz, cache.inputs, cells, in, d, grads.table_w.data,
                                       grads.table_b.data);
  std::vector<double> du(std::size_t(cells) * in);
  kernels::affine_rows_backward_input(dz, cells, d, params.table_w.data, in, du);

  std::vector<double> g(std::size_t(n) * d);
  kernels::affine_rows(h.data, n, d, params.bilinear.data, {}, d, g);
  std::vector<double> dg(std::size_t(n) * d, 0.0);

  d_hidden = Matrix(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::size_t cell = std::size_t(i) * n + j;
      const double* u = du.data() + cell * in;
      const double ds = u[3 * d];
      for (int k = 0; k < d; ++k) {
        d_hidden.at(i, k) += u[k] + ds * g[std::size_t(j) * d + k];
        d_hidden.at(j, k) += u[d + k];
        d_hidden.at(cache.pool_arg[cell * d + k], k) += u[2 * d + k];
        dg[std::size_t(j) * d + k] += ds * h.at(i, k);
      }
    }
  }
  kernels::affine_rows_backward_params(dg, h.data, n, d, d, grads.bilinear.data, {});
  std::vector<double> dh_bilinear(std::size_t(n) * d);
  kernels::affine_rows_backward_input(dg, n, d, params.bilinear.data, d, dh_bilinear);
  for (std::size_t k = 0; k < dh_bilinear.size(); ++k) d_hidden.data[k] += dh_bilinear[k];
}

// -- residual conv stack -----------------------------------------------------

FeatureMap conv_stack(const FeatureMap& t0, const EncoderParams& params, ConvCache* cache) {
  const int n = t0.n, d = t0.d;
  const kernels::ConvShape shape{n, d, d};
  if (cache) {
    cache->inputs.clear();
    cache->pre_relu.clear();
    cache->relu.clear();
  }
  FeatureMap t = t0;
  std::vector<double> a(t0.data.size()), r(t0.data.size()), c(t0.data.size());
  for (const auto& block : params.blocks) {
    if (block.conv1_w.size() != std::size_t(9) * d * d) {
      throw std::invalid_argument("conv kernel does not match feature width");
    }
    kernels::conv3x3_forward(t.data, block.conv1_w.data, block.conv1_b.data, shape, a);
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] > 0.0 ? a[k] : 0.0;
    kernels::conv3x3_forward(r, block.conv2_w.data, block.conv2_b.data, shape, c);
    if (cache) {
      cache->inputs.push_back(t);
      cache->pre_relu.push_back(a);
      cache->relu.push_back(r);
    }
    for (std::size_t k = 0; k < c.size(); ++k) t.data[k] += c[k];
    ++t.layer;
  }
  return t;
}

FeatureMap conv_stack_backward(const EncoderParams& params, const ConvCache& cache,
                               const FeatureMap& d_top, EncoderParams& grads) {
  const int n = d_top.n, d = d_top.d;
  const kernels::ConvShape shape{n, d, d};
  FeatureMap dt = d_top;
  std::vector<double> dr(dt.data.size()), dx(dt.data.size());
  for (int l = int(params.blocks.size()) - 1; l >= 0; --l) {
    const auto& block = params.blocks[l];
    auto& gb = grads.blocks[l];
    kernels::conv3x3_backward_input(dt.data, block.conv2_w.data, shape, dr);
    kernels::conv3x3_backward_params(dt.data, cache.relu[l], shape, gb.conv2_w.data,
                                     gb.conv2_b.data);
    const auto& a = cache.pre_relu[l];
    for (std::size_t k = 0; k < dr.size(); ++k) {
      if (!(a[k] > 0.0)) dr[k] = 0.0;
    }
    kernels::conv3x3_backward_input(dr, block.conv1_w.data, shape, dx);
    kernels::conv3x3_backward_params(dr, cache.inputs[l].data, shape, gb.conv1_w.data,
                                     gb.conv1_b.data);
    for (std::size_t k = 0; k < dx.size(); ++k) dt.data[k] += dx[k];
    --dt.layer;
  }
  dt.layer = 0;
  return dt;
}

// -- full encoder ------------------------------------------------------------

EncoderTrace encoder_forward(const Sentence& sentence, const EncoderParams& params,
                             const EncoderConfig& cfg) {
  EncoderTrace tr;
  tr.hidden = embed(sentence, params, cfg, &tr.embed);
  tr.t0 = build_table(tr.hidden, params, &tr.table);
  tr.top = conv_stack(tr.t0, params, &tr.conv);
  return tr;
}

void encoder_grad(const EncoderParams& params, const EncoderConfig& cfg,
                  const EncoderTrace& trace, const FeatureMap& d_top, EncoderParams& grads) {
  const FeatureMap d_t0 = conv_stack_backward(params, trace.conv, d_top, grads);
  Matrix d_hidden;
  build_table_backward(params, trace.hidden, trace.table, trace.t0, d_t0, grads, d_hidden);
  embed_backward(params, cfg, trace.embed, trace.hidden, d_hidden, grads);
}

}  // namespace tfmt
