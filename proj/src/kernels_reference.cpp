#include <algorithm>
#include <cstddef>

#include "tfmt/kernels.hpp"

namespace tfmt::kernels::reference {

namespace {

std::size_t widx(int o, int ky, int kx, int c, int cin) {
  return ((std::size_t(o) * 3 + ky) * 3 + kx) * cin + c;
}

}  // namespace

void conv3x3_forward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> b, ConvShape s, std::span<double> y) {
  const int n = s.n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int o = 0; o < s.out; ++o) {
        double acc = b[o];
        for (int c = 0; c < s.in; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int ii = i + ky - 1, jj = j + kx - 1;
              if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
              acc += w[widx(o, ky, kx, c, s.in)] * x[(std::size_t(ii) * n + jj) * s.in + c];
            }
          }
        }
        y[(std::size_t(i) * n + j) * s.out + o] = acc;
      }
    }
  }
}

void conv3x3_backward_input(std::span<const double> dy, std::span<const double> w,
                            ConvShape s, std::span<double> dx) {
  const int n = s.n;
  std::fill(dx.begin(), dx.end(), 0.0);
  // Scatter form: each output gradient pushes into the inputs it read.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int o = 0; o < s.out; ++o) {
        const double g = dy[(std::size_t(i) * n + j) * s.out + o];
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int ii = i + ky - 1, jj = j + kx - 1;
            if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
            for (int c = 0; c < s.in; ++c) {
              dx[(std::size_t(ii) * n + jj) * s.in + c] += g * w[widx(o, ky, kx, c, s.in)];
            }
          }
        }
      }
    }
  }
}

void conv3x3_backward_params(std::span<const double> dy, std::span<const double> x,
                             ConvShape s, std::span<double> dw, std::span<double> db) {
  const int n = s.n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int o = 0; o < s.out; ++o) {
        const double g = dy[(std::size_t(i) * n + j) * s.out + o];
        db[o] += g;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int ii = i + ky - 1, jj = j + kx - 1;
            if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
            for (int c = 0; c < s.in; ++c) {
              dw[widx(o, ky, kx, c, s.in)] += g * x[(std::size_t(ii) * n + jj) * s.in + c];
            }
          }
        }
      }
    }
  }
}

void affine_rows(std::span<const double> x, int rows, int in, std::span<const double> w,
                 std::span<const double> b, int out, std::span<double> y) {
  for (int r = 0; r < rows; ++r) {
    for (int o = 0; o < out; ++o) {
      double acc = b.empty() ? 0.0 : b[o];
      for (int c = 0; c < in; ++c) acc += w[std::size_t(o) * in + c] * x[std::size_t(r) * in + c];
      y[std::size_t(r) * out + o] = acc;
    }
  }
}

void affine_rows_backward_input(std::span<const double> dy, int rows, int out,
                                std::span<const double> w, int in, std::span<double> dx) {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < in; ++c) {
      double acc = 0.0;
      for (int o = 0; o < out; ++o) acc += dy[std::size_t(r) * out + o] * w[std::size_t(o) * in + c];
      dx[std::size_t(r) * in + c] = acc;
    }
  }
}

void affine_rows_backward_params(std::span<const double> dy, std::span<const double> x,
                                 int rows, int in, int out, std::span<double> dw,
                                 std::span<double> db) {
  for (int r = 0; r < rows; ++r) {
    for (int o = 0; o < out; ++o) {
      const double g = dy[std::size_t(r) * out + o];
      if (!db.empty()) db[o] += g;
      for (int c = 0; c < in; ++c) dw[std::size_t(o) * in + c] += g * x[std::size_t(r) * in + c];
    }
  }
}

void pairwise_sq_dists(std::span<const double> z, int m, int dim, std::span<double> out) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int c = 0; c < dim; ++c) {
        const double diff = z[std::size_t(i) * dim + c] - z[std::size_t(j) * dim + c];
        acc += diff * diff;
      }
      out[std::size_t(i) * m + j] = acc;
    }
  }
}

}  // namespace tfmt::kernels::reference
