#include "smpler/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smpler/errors.hpp"
#include "smpler/geometry.hpp"

namespace smpler {

namespace {

double mean_row_norm(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape() || a.rank() != 2 || a.cols() != 3) {
    throw ShapeError(std::string(what) + ": expected two equal n x 3 inputs, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  if (a.rows() == 0) throw ShapeError(std::string(what) + ": empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double dx = a(i, 0) - b(i, 0), dy = a(i, 1) - b(i, 1), dz = a(i, 2) - b(i, 2);
    s += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return s / static_cast<double>(a.rows());
}

}  // namespace

double mpjpe(const Tensor& j, const Tensor& j_hat) { return mean_row_norm(j, j_hat, "mpjpe"); }

double pa_mpjpe(const Tensor& j, const Tensor& j_hat) {
  if (j.shape() != j_hat.shape()) throw ShapeError("pa_mpjpe: shape mismatch");
  const Similarity t = procrustes_align(j, j_hat);
  return mpjpe(apply_similarity(t, j), j_hat);
}

double mpve(const Tensor& y, const Tensor& y_hat) { return mean_row_norm(y, y_hat, "mpve"); }

double mpre(const Tensor& r, const Tensor& r_hat) {
  if (r.shape() != r_hat.shape() || r.rank() != 2 || r.cols() != 9 || r.rows() == 0) {
    throw ShapeError("mpre: expected two equal H x 9 rotation sets");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < r.rows(); ++i) {
    const Rotation a = Rotation::from_row_major(r.row(i));
    const Rotation b = Rotation::from_row_major(r_hat.row(i));
    if (!is_rotation(a, 1e-9) || !is_rotation(b, 1e-9)) {
      throw InvariantError("every rotation is in SO(3)", "mpre row " + std::to_string(i));
    }
    const double tr = (a * b.transposed()).trace();
    s += std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0));
  }
  return 180.0 / (std::numbers::pi * static_cast<double>(r.rows())) * s;
}

MetricReport evaluate_metrics(const Tensor& joints, const Tensor& joints_gt, const Tensor& vertices,
                              const Tensor& vertices_gt, const Tensor& rotations, const Tensor& rotations_gt) {
  MetricReport m;
  m.mpjpe = mpjpe(joints, joints_gt);
  m.pa_mpjpe = pa_mpjpe(joints, joints_gt);
  m.mpve = mpve(vertices, vertices_gt);
  m.mpre = mpre(rotations, rotations_gt);
  return m;
}

double attention_kl_diffuseness(std::span<const double> p) {
  if (p.empty()) throw InvariantError("attention weights form a distribution", "empty");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvariantError("attention weights form a distribution", "negative or non-finite");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvariantError("attention weights form a distribution", "sum " + std::to_string(total));
  }
  const double n = static_cast<double>(p.size());
  double kl = 0.0;
  for (double v : p) {
    if (v > 0.0) kl += v * std::log(v * n);
  }
  return kl;
}

}  // namespace smpler
