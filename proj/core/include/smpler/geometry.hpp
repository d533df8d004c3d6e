#pragma once

#include <array>
#include <span>

#include "smpler/autodiff.hpp"

namespace smpler {

using Vec3 = std::array<double, 3>;

/// 3x3 rotation matrix, row-major.
struct Rotation {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Rotation identity() { return {}; }
  static Rotation from_row_major(std::span<const double> v);
  /// Rotation about +z by `radians`.
  static Rotation about_z(double radians);

  double operator()(int r, int c) const { return m[3 * r + c]; }
  double& operator()(int r, int c) { return m[3 * r + c]; }

  Rotation transposed() const;
  double trace() const { return m[0] + m[4] + m[8]; }
  double determinant() const;
  Vec3 apply(const Vec3& v) const;

  /// ||R^T R - I||_F
  double orthogonality_error() const;

  friend Rotation operator*(const Rotation& a, const Rotation& b);
  friend bool operator==(const Rotation&, const Rotation&) = default;
};

/// True when ||R^T R - I||_F and |det R - 1| are both within tol.
bool is_rotation(const Rotation& r, double tol = 1e-9);

/// Orthonormalizes the two 3-vectors of a 6D rotation code: columns are
/// b1 = a1/|a1|, b2 = normalized a2 with its b1 component removed, b3 = b1 x b2.
/// Throws DegeneracyError when |a1| or the residual of a2 is below 1e-8.
Rotation gram_schmidt_so3(std::span<const double, 6> a);

/// Batched, differentiable version: n x 6 codes -> n x 9 row-major rotations.
Var gram_schmidt_rows(const Var& codes);

/// Exponential map of the skew matrix of an axis-angle vector.
Rotation rodrigues_exp(const Vec3& axis_angle);
/// Inverse of rodrigues_exp with angle in [0, pi].
Vec3 so3_log(const Rotation& r);

/// Similarity transform x -> s * x * R + t acting on row vectors.
struct Similarity {
  double scale = 1.0;
  Rotation rotation;
  Vec3 translation{0, 0, 0};
};

/// Applies a similarity to every row of an n x 3 tensor.
Tensor apply_similarity(const Similarity& t, const Tensor& points);

/// Least-squares similarity mapping `source` onto `target` (both n x 3,
/// n >= 3), with R constrained to SO(3).
Similarity procrustes_align(const Tensor& source, const Tensor& target);

/// Sum of squared row distances ||a_i - b_i||^2.
double sum_squared_residual(const Tensor& a, const Tensor& b);

}  // namespace smpler
