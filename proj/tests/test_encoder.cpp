#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tfmt/encoder.hpp"

using namespace tfmt;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.d = 6;
  cfg.layers = 2;
  cfg.vocab_buckets = 97;
  cfg.max_n = 8;
  return cfg;
}

EncoderParams random_params(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderParams p = make_encoder_params(cfg);
  Rng rng(seed);
  init_encoder_params(p, cfg, rng);
  return p;
}

SentenceEncoding random_hidden(Rng& rng, int n, int d) {
  SentenceEncoding enc{Matrix(n, d)};
  enc.h.data = test::random_vector(rng, std::size_t(n) * d);
  return enc;
}

double dot_top(const EncoderTrace& t, const std::vector<double>& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * t.top.data[i];
  return s;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.d = 5;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = {};
  cfg.d = 2;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = {};
  cfg.layers = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = {};
  cfg.vocab_buckets = 1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("embedding shape, determinism and position dependence") {
  EncoderConfig cfg;
  const EncoderParams p = random_params(cfg, 1);
  const Sentence s = test::words("x y x y x");
  const SentenceEncoding a = embed(s, p, cfg), b = embed(s, p, cfg);
  CHECK(a.h.rows == 5);
  CHECK(a.h.cols == 16);
  CHECK(a.h.data == b.h.data);
  // Tokens 0 and 2 are both "x" with the same neighbours but different positions.
  const auto r0 = a.h.row(0), r2 = a.h.row(2);
  CHECK(!std::equal(r0.begin(), r0.end(), r2.begin()));

  cfg.max_n = 4;
  CHECK_THROWS_AS(embed(s, make_encoder_params(cfg), cfg), std::invalid_argument);
}

TEST_CASE("relation table pooled slot matches a direct loop") {
  Rng rng(9);
  const EncoderConfig cfg = small_config();
  const EncoderParams p = random_params(cfg, 2);
  const int n = 7, d = cfg.d;
  const SentenceEncoding enc = random_hidden(rng, n, d);
  TableCache cache;
  build_table(enc, p, &cache);
  const int in = 3 * d + 1;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double* u = cache.inputs.data() + (std::size_t(i) * n + j) * in;
      for (int k = 0; k < d; ++k) {
        double m = -1e300;
        for (int t = std::min(i, j); t <= std::max(i, j); ++t) m = std::max(m, enc.h.at(t, k));
        CHECK(u[2 * d + k] == m);
        CHECK(u[k] == enc.h.at(i, k));
        CHECK(u[d + k] == enc.h.at(j, k));
      }
      double bil = 0.0;
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) bil += enc.h.at(i, a) * p.bilinear[std::size_t(a * d + b)] * enc.h.at(j, b);
      }
      CHECK(u[3 * d] == doctest::Approx(bil).epsilon(1e-12));
    }
  }
}

TEST_CASE("relation table cells follow tanh(W u + b)") {
  Rng rng(10);
  const EncoderConfig cfg = small_config();
  const EncoderParams p = random_params(cfg, 3);
  const int n = 4, d = cfg.d, in = 3 * d + 1;
  const SentenceEncoding enc = random_hidden(rng, n, d);
  TableCache cache;
  const FeatureMap t = build_table(enc, p, &cache);
  for (int cell = 0; cell < n * n; ++cell) {
    for (int o = 0; o < d; ++o) {
      double z = p.table_b[std::size_t(o)];
      for (int c = 0; c < in; ++c) z += p.table_w[std::size_t(o * in + c)] * cache.inputs[std::size_t(cell * in + c)];
      CHECK(t.data[std::size_t(cell * d + o)] == doctest::Approx(std::tanh(z)).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant table when only the bilinear slot is read and V is zero") {
  Rng rng(11);
  const EncoderConfig cfg = small_config();
  EncoderParams p = random_params(cfg, 4);
  const int d = cfg.d, in = 3 * d + 1;
  p.bilinear.zero();
  p.table_w.zero();
  for (int o = 0; o < d; ++o) p.table_w[std::size_t(o * in + 3 * d)] = 1.0;
  const FeatureMap t = build_table(random_hidden(rng, 5, d), p);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    CHECK(t.data[i] == doctest::Approx(std::tanh(p.table_b[i % std::size_t(d)])));
  }
}

TEST_CASE("t_ij equals t_ji when h_i equals h_j, and differs otherwise") {
  Rng rng(12);
  const EncoderConfig cfg = small_config();
  const EncoderParams p = random_params(cfg, 5);
  SentenceEncoding enc = random_hidden(rng, 5, cfg.d);
  for (int k = 0; k < cfg.d; ++k) enc.h.at(3, k) = enc.h.at(1, k);
  const FeatureMap t = build_table(enc, p);
  const auto a = t.cell(1, 3), b = t.cell(3, 1);
  CHECK(std::equal(a.begin(), a.end(), b.begin()));
  const auto c = t.cell(0, 2), e = t.cell(2, 0);
  CHECK(!std::equal(c.begin(), c.end(), e.begin()));
}

TEST_CASE("zero kernels make the conv stack the identity") {
  Rng rng(13);
  const EncoderConfig cfg = small_config();
  EncoderParams p = random_params(cfg, 6);
  for (auto& b : p.blocks) {
    b.conv1_w.zero();
    b.conv1_b.zero();
    b.conv2_w.zero();
    b.conv2_b.zero();
  }
  FeatureMap t0(5, cfg.d);
  t0.data = test::random_vector(rng, t0.data.size());
  const FeatureMap top = conv_stack(t0, p);
  CHECK(top.n == 5);
  CHECK(top.d == cfg.d);
  CHECK(top.data == t0.data);
}

TEST_CASE("conv stack keeps the table shape and stays finite") {
  const EncoderConfig cfg = small_config();
  const EncoderParams p = random_params(cfg, 7);
  const EncoderTrace tr = encoder_forward(test::words("a b c d e f"), p, cfg);
  CHECK(tr.top.n == 6);
  CHECK(tr.top.d == cfg.d);
  CHECK(tr.top.data.size() == 6u * 6u * std::size_t(cfg.d));
  for (double v : tr.top.data) CHECK(std::isfinite(v));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  const EncoderConfig cfg = small_config();
  const EncoderParams p = random_params(cfg, 8);
  const EncoderTrace tr = encoder_forward(test::words("a b c"), p, cfg);
  EncoderParams g = make_encoder_params(cfg);
  encoder_grad(p, cfg, tr, FeatureMap(3, cfg.d), g);
  g.visit([](const std::string& name, const Tensor& t) {
    for (double v : t.data) CHECK_MESSAGE(v == 0.0, name);
  });
}

TEST_CASE("residual path passes the upstream gradient through") {
  Rng rng(14);
  const EncoderConfig cfg = small_config();
  EncoderParams p = random_params(cfg, 9);
  for (auto& b : p.blocks) b.conv2_w.zero();
  FeatureMap t0(4, cfg.d);
  t0.data = test::random_vector(rng, t0.data.size());
  ConvCache cache;
  conv_stack(t0, p, &cache);
  FeatureMap d_top(4, cfg.d);
  d_top.data = test::random_vector(rng, d_top.data.size());
  EncoderParams g = make_encoder_params(cfg);
  CHECK(conv_stack_backward(p, cache, d_top, g).data == d_top.data);
}

TEST_CASE("encoder gradient matches central differences") {
  Rng rng(15);
  EncoderConfig cfg = small_config();
  cfg.d = 4;
  const EncoderParams base = random_params(cfg, 10);
  const Sentence s = test::words("p q r p");
  const EncoderTrace tr = encoder_forward(s, base, cfg);
  const auto c = test::random_vector(rng, tr.top.data.size());
  FeatureMap d_top(tr.top.n, tr.top.d);
  d_top.data = c;
  EncoderParams g = make_encoder_params(cfg);
  encoder_grad(base, cfg, tr, d_top, g);

  EncoderParams p = base;
  std::vector<Tensor*> params, grads;
  p.visit([&](const std::string&, Tensor& t) { params.push_back(&t); });
  g.visit([&](const std::string&, Tensor& t) { grads.push_back(&t); });
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->size(); ++i) {
      const double orig = (*params[k])[i];
      (*params[k])[i] = orig + eps;
      const double up = dot_top(encoder_forward(s, p, cfg), c);
      (*params[k])[i] = orig - eps;
      const double down = dot_top(encoder_forward(s, p, cfg), c);
      (*params[k])[i] = orig;
      const double num = (up - down) / (2 * eps);
      const double ana = (*grads[k])[i];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-4}));
    }
  }
  CHECK(worst < 1e-4);
}
