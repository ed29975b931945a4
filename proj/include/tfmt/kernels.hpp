#pragma once

// Dense inner loops of the model. Two implementations share each signature:
// tfmt::kernels (OpenMP, used by the model) and tfmt::kernels::reference
// (plain serial loops, kept for tests and the benchmark).
//
// Parallel loops partition the *outputs*; every output element is summed by
// one thread in a fixed order, so results do not depend on thread count.

#include <span>

namespace tfmt::kernels {

/// n x n feature map, channels-last, 3x3 kernel with zero padding.
/// Weights are laid out [out][ky][kx][in].
struct ConvShape {
  int n = 0;
  int in = 0;
  int out = 0;
};

void conv3x3_forward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> b, ConvShape s, std::span<double> y);
/// Overwrites dx.
void conv3x3_backward_input(std::span<const double> dy, std::span<const double> w,
                            ConvShape s, std::span<double> dx);
/// Accumulates into dw and db.
void conv3x3_backward_params(std::span<const double> dy, std::span<const double> x,
                             ConvShape s, std::span<double> dw, std::span<double> db);

/// y[r] = W x[r] + b for `rows` row vectors; W is out x in. b may be empty.
void affine_rows(std::span<const double> x, int rows, int in, std::span<const double> w,
                 std::span<const double> b, int out, std::span<double> y);
/// dx[r] = W^T dy[r]; overwrites dx.
void affine_rows_backward_input(std::span<const double> dy, int rows, int out,
                                std::span<const double> w, int in, std::span<double> dx);
/// dW += sum_r dy[r] x[r]^T, db += sum_r dy[r]; db may be empty.
void affine_rows_backward_params(std::span<const double> dy, std::span<const double> x,
                                 int rows, int in, int out, std::span<double> dw,
                                 std::span<double> db);

/// out[i*m + j] = ||z_i - z_j||^2 for m points of dimension dim.
void pairwise_sq_dists(std::span<const double> z, int m, int dim, std::span<double> out);

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

namespace reference {

void conv3x3_forward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> b, ConvShape s, std::span<double> y);
void conv3x3_backward_input(std::span<const double> dy, std::span<const double> w,
                            ConvShape s, std::span<double> dx);
void conv3x3_backward_params(std::span<const double> dy, std::span<const double> x,
                             ConvShape s, std::span<double> dw, std::span<double> db);
void affine_rows(std::span<const double> x, int rows, int in, std::span<const double> w,
                 std::span<const double> b, int out, std::span<double> y);
void affine_rows_backward_input(std::span<const double> dy, int rows, int out,
                                std::span<const double> w, int in, std::span<double> dx);
void affine_rows_backward_params(std::span<const double> dy, std::span<const double> x,
                                 int rows, int in, int out, std::span<double> dw,
                                 std::span<double> db);
void pairwise_sq_dists(std::span<const double> z, int m, int dim, std::span<double> out);

}  // namespace reference
}  // namespace tfmt::kernels
