#pragma once

#include "smpler/tensor.hpp"

namespace smpler {

/// Mean per-joint Euclidean error; H x 3 inputs.
double mpjpe(const Tensor& j, const Tensor& j_hat);
/// mpjpe after least-squares similarity alignment of the prediction j onto j_hat.
double pa_mpjpe(const Tensor& j, const Tensor& j_hat);
/// Mean per-vertex Euclidean error; N x 3 inputs.
double mpve(const Tensor& y, const Tensor& y_hat);
/// Mean geodesic angle in degrees between H x 9 row-major rotations.
double mpre(const Tensor& r, const Tensor& r_hat);

struct MetricReport {
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
  double mpve = 0.0;
  double mpre = 0.0;
};

MetricReport evaluate_metrics(const Tensor& joints, const Tensor& joints_gt, const Tensor& vertices,
                              const Tensor& vertices_gt, const Tensor& rotations, const Tensor& rotations_gt);

/// KL(p || uniform) = sum_k p_k ln(p_k n), 0 ln 0 = 0. Throws InvariantError
/// unless p is nonnegative and sums to 1 within 1e-9.
double attention_kl_diffuseness(std::span<const double> p);

}  // namespace smpler
