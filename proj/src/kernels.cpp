#include "tfmt/kernels.hpp"

#include <algorithm>
#include <cstddef>

#ifdef TFMT_HAVE_OPENMP
#include <omp.h>
#endif

namespace tfmt::kernels {

int max_threads() {
#ifdef TFMT_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void conv3x3_forward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> b, ConvShape s, std::span<double> y) {
  const int n = s.n, cin = s.in, cout = s.out;
  const double* xp = x.data();
  const double* wp = w.data();
  const double* bp = b.data();
  double* yp = y.data();
#pragma omp parallel for schedule(static)
  for (int cell = 0; cell < n * n; ++cell) {
    const int i = cell / n, j = cell % n;
    double* out = yp + std::size_t(cell) * cout;
    for (int o = 0; o < cout; ++o) {
      double acc = bp[o];
      for (int ky = 0; ky < 3; ++ky) {
        const int ii = i + ky - 1;
        if (ii < 0 || ii >= n) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int jj = j + kx - 1;
          if (jj < 0 || jj >= n) continue;
          const double* xin = xp + (std::size_t(ii) * n + jj) * cin;
          const double* wk = wp + ((std::size_t(o) * 3 + ky) * 3 + kx) * cin;
#pragma omp simd reduction(+ : acc)
          for (int c = 0; c < cin; ++c) acc += wk[c] * xin[c];
        }
      }
      out[o] = acc;
    }
  }
}

void conv3x3_backward_input(std::span<const double> dy, std::span<const double> w,
                            ConvShape s, std::span<double> dx) {
  const int n = s.n, cin = s.in, cout = s.out;
  const double* dyp = dy.data();
  const double* wp = w.data();
  double* dxp = dx.data();
#pragma omp parallel for schedule(static)
  for (int cell = 0; cell < n * n; ++cell) {
    const int p = cell / n, q = cell % n;
    double* g = dxp + std::size_t(cell) * cin;
    std::fill(g, g + cin, 0.0);
    // Output (i,j) reads input (i+ky-1, j+kx-1); invert for (p,q).
    for (int ky = 0; ky < 3; ++ky) {
      const int i = p - ky + 1;
      if (i < 0 || i >= n) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const int j = q - kx + 1;
        if (j < 0 || j >= n) continue;
        const double* up = dyp + (std::size_t(i) * n + j) * cout;
        for (int o = 0; o < cout; ++o) {
          const double u = up[o];
          const double* wk = wp + ((std::size_t(o) * 3 + ky) * 3 + kx) * cin;
#pragma omp simd
          for (int c = 0; c < cin; ++c) g[c] += u * wk[c];
        }
      }
    }
  }
}

void conv3x3_backward_params(std::span<const double> dy, std::span<const double> x,
                             ConvShape s, std::span<double> dw, std::span<double> db) {
  const int n = s.n, cin = s.in, cout = s.out;
  const double* dyp = dy.data();
  const double* xp = x.data();
  double* dwp = dw.data();
  double* dbp = db.data();
#pragma omp parallel for schedule(static)
  for (int o = 0; o < cout; ++o) {
    double bias = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double u = dyp[(std::size_t(i) * n + j) * cout + o];
        bias += u;
        for (int ky = 0; ky < 3; ++ky) {
          const int ii = i + ky - 1;
          if (ii < 0 || ii >= n) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int jj = j + kx - 1;
            if (jj < 0 || jj >= n) continue;
            const double* xin = xp + (std::size_t(ii) * n + jj) * cin;
            double* g = dwp + ((std::size_t(o) * 3 + ky) * 3 + kx) * cin;
#pragma omp simd
            for (int c = 0; c < cin; ++c) g[c] += u * xin[c];
          }
        }
      }
    }
    dbp[o] += bias;
  }
}

void affine_rows(std::span<const double> x, int rows, int in, std::span<const double> w,
                 std::span<const double> b, int out, std::span<double> y) {
  const double* xp = x.data();
  const double* wp = w.data();
  const bool has_bias = !b.empty();
  const double* bp = b.data();
  double* yp = y.data();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* xr = xp + std::size_t(r) * in;
    double* yr = yp + std::size_t(r) * out;
    for (int o = 0; o < out; ++o) {
      const double* wr = wp + std::size_t(o) * in;
      double acc = has_bias ? bp[o] : 0.0;
#pragma omp simd reduction(+ : acc)
      for (int c = 0; c < in; ++c) acc += wr[c] * xr[c];
      yr[o] = acc;
    }
  }
}

void affine_rows_backward_input(std::span<const double> dy, int rows, int out,
                                std::span<const double> w, int in, std::span<double> dx) {
  const double* dyp = dy.data();
  const double* wp = w.data();
  double* dxp = dx.data();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const double* g = dyp + std::size_t(r) * out;
    double* dr = dxp + std::size_t(r) * in;
    std::fill(dr, dr + in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double u = g[o];
      const double* wr = wp + std::size_t(o) * in;
#pragma omp simd
      for (int c = 0; c < in; ++c) dr[c] += u * wr[c];
    }
  }
}

void affine_rows_backward_params(std::span<const double> dy, std::span<const double> x,
                                 int rows, int in, int out, std::span<double> dw,
                                 std::span<double> db) {
  const double* dyp = dy.data();
  const double* xp = x.data();
  double* dwp = dw.data();
  const bool has_bias = !db.empty();
  double* dbp = db.data();
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    double* wr = dwp + std::size_t(o) * in;
    double bias = 0.0;
    for (int r = 0; r < rows; ++r) {
      const double u = dyp[std::size_t(r) * out + o];
      bias += u;
      const double* xr = xp + std::size_t(r) * in;
#pragma omp simd
      for (int c = 0; c < in; ++c) wr[c] += u * xr[c];
    }
    if (has_bias) dbp[o] += bias;
  }
}

void pairwise_sq_dists(std::span<const double> z, int m, int dim, std::span<double> out) {
  const double* zp = z.data();
  double* op = out.data();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* zi = zp + std::size_t(i) * dim;
    for (int j = 0; j < m; ++j) {
      const double* zj = zp + std::size_t(j) * dim;
      double acc = 0.0;
      for (int c = 0; c < dim; ++c) {
        const double diff = zi[c] - zj[c];
        acc += diff * diff;
      }
      op[std::size_t(i) * m + j] = acc;
    }
  }
}

}  // namespace tfmt::kernels
