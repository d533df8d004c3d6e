#pragma once

// Differentiable tensor ops. Matrix ops treat a tensor as rows() x cols().
// Matrix products report their multiply-adds to the active CostCollector;
// softmax reports 8 flops per element (exp and division at 4 each).

#include <span>
#include <vector>

#include "smpler/autodiff.hpp"

namespace smpler {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

/// a (m x n) + row (1 x n) broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// a (m x n) scaled row-wise by col (m x 1).
Var mul_col(const Var& a, const Var& col);

Var matmul(const Var& a, const Var& b);
/// s * a * b^T without materializing the transpose on the caller side.
Var matmul_nt(const Var& a, const Var& b, double s = 1.0);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);

/// m x n -> m x 1
Var row_sum(const Var& a);
/// m x n -> 1 x n
Var mean_rows(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

Var softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

Var gelu(const Var& a);
Var softplus(const Var& a);
Var tanh(const Var& a);
Var sqrt(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);

/// Row-wise 3x3 products: each row of a and b is a row-major 3x3 matrix.
Var mat3_mul_rows(const Var& a, const Var& b);
/// Row-wise affine map: t is n x 12 ([M | t] per row, M row-major), v is n x 3.
/// Returns M_r v_r + t_r for every row r.
Var affine_rows(const Var& t, const Var& v);

/// Average pooling of a grid stored as (h*w) x d tokens, window = stride.
Var avg_pool2d(const Var& grid, std::size_t h, std::size_t w, std::size_t stride);

struct GridPoint {
  double row = 0.0;
  double col = 0.0;
};

/// Bilinear samples of a (h*w) x d grid at continuous (row, col) points,
/// clamped to [0, h-1] x [0, w-1]. Differentiable in the grid values only.
Var bilinear_sample(const Var& grid, std::size_t h, std::size_t w, std::span<const GridPoint> points);

// Plain-value helpers used by the ops and by oracle-free code paths.
Tensor matmul_values(const Tensor& a, const Tensor& b);
Tensor transpose_values(const Tensor& a);
Tensor softmax_rows_values(const Tensor& a);
Tensor avg_pool2d_values(const Tensor& grid, std::size_t h, std::size_t w, std::size_t stride);
std::vector<double> bilinear_sample_values(const Tensor& grid, std::size_t h, std::size_t w, GridPoint p);

}  // namespace smpler
