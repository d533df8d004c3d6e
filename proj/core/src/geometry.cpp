#include "smpler/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "smpler/errors.hpp"
#include "smpler/ops.hpp"

namespace smpler {

namespace {

constexpr double kDegenerate = 1e-8;

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

}  // namespace

Rotation Rotation::from_row_major(std::span<const double> v) {
  if (v.size() != 9) throw ShapeError("rotation needs 9 values");
  Rotation r;
  std::copy(v.begin(), v.end(), r.m.begin());
  return r;
}

Rotation Rotation::about_z(double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Rotation r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return r;
}

Rotation Rotation::transposed() const {
  Rotation t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t(i, j) = (*this)(j, i);
  return t;
}

double Rotation::determinant() const {
  const auto& a = m;
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
         a[2] * (a[3] * a[7] - a[4] * a[6]);
}

Vec3 Rotation::apply(const Vec3& v) const {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

double Rotation::orthogonality_error() const {
  const Rotation p = transposed() * (*this);
  double e = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d = p(i, j) - (i == j ? 1.0 : 0.0);
      e += d * d;
    }
  return std::sqrt(e);
}

Rotation operator*(const Rotation& a, const Rotation& b) {
  Rotation c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return c;
}

bool is_rotation(const Rotation& r, double tol) {
  return r.orthogonality_error() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Rotation gram_schmidt_so3(std::span<const double, 6> a) {
  const Vec3 a1{a[0], a[1], a[2]};
  const Vec3 a2{a[3], a[4], a[5]};
  const double n1 = norm(a1);
  if (!(n1 >= kDegenerate)) throw DegeneracyError("gram_schmidt_so3: first vector has near-zero norm");
  const Vec3 b1{a1[0] / n1, a1[1] / n1, a1[2] / n1};
  const double p = dot(a2, b1);
  const Vec3 u{a2[0] - p * b1[0], a2[1] - p * b1[1], a2[2] - p * b1[2]};
  const double n2 = norm(u);
  if (!(n2 >= kDegenerate)) throw DegeneracyError("gram_schmidt_so3: vectors are colinear");
  const Vec3 b2{u[0] / n2, u[1] / n2, u[2] / n2};
  const Vec3 b3 = cross(b1, b2);
  Rotation r;
  for (int i = 0; i < 3; ++i) {
    r(i, 0) = b1[i];
    r(i, 1) = b2[i];
    r(i, 2) = b3[i];
  }
  return r;
}

Var gram_schmidt_rows(const Var& codes) {
  if (codes.cols() != 6) throw ShapeError("gram_schmidt_rows expects n x 6 codes");
  const std::size_t n = codes.rows();
  const Var ones = Var::constant(Tensor({n, 1}, 1.0));

  const Var a1 = slice_cols(codes, 0, 3);
  const Var a2 = slice_cols(codes, 3, 6);
  const Var n1 = sqrt(row_sum(square(a1)));
  for (double v : n1.value().values()) {
    if (!(v >= kDegenerate)) throw DegeneracyError("gram_schmidt_rows: first vector has near-zero norm");
  }
  const Var b1 = mul_col(a1, div(ones, n1));
  const Var u = sub(a2, mul_col(b1, row_sum(mul(a2, b1))));
  const Var n2 = sqrt(row_sum(square(u)));
  for (double v : n2.value().values()) {
    if (!(v >= kDegenerate)) throw DegeneracyError("gram_schmidt_rows: vectors are colinear");
  }
  const Var b2 = mul_col(u, div(ones, n2));

  auto col = [](const Var& v, std::size_t c) { return slice_cols(v, c, c + 1); };
  const Var x1 = col(b1, 0), y1 = col(b1, 1), z1 = col(b1, 2);
  const Var x2 = col(b2, 0), y2 = col(b2, 1), z2 = col(b2, 2);
  const Var x3 = sub(mul(y1, z2), mul(z1, y2));
  const Var y3 = sub(mul(z1, x2), mul(x1, z2));
  const Var z3 = sub(mul(x1, y2), mul(y1, x2));
  return concat_cols({x1, x2, x3, y1, y2, y3, z1, z2, z3});
}

Rotation rodrigues_exp(const Vec3& v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericDomainError("rodrigues_exp: non-finite input");
  }
  const double theta = norm(v);
  // K = skew(v); K^2 = v v^T - |v|^2 I
  const double k[9] = {0, -v[2], v[1], v[2], 0, -v[0], -v[1], v[0], 0};
  double k2[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k2[3 * i + j] = v[i] * v[j] - (i == j ? theta * theta : 0.0);
  double a, b;
  if (theta < 1e-8) {
    a = 1.0;
    b = 0.5;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  Rotation r;
  for (int i = 0; i < 9; ++i) r.m[i] = (i % 4 == 0 ? 1.0 : 0.0) + a * k[i] + b * k2[i];
  return r;
}

Vec3 so3_log(const Rotation& r) {
  // vee(R - R^T) = 2 sin(theta) n
  const Vec3 w{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
  const double s = 0.5 * norm(w);
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);
  if (theta < 1e-8) {
    return {0.5 * w[0], 0.5 * w[1], 0.5 * w[2]};
  }
  if (theta < std::numbers::pi - 1e-3) {
    const double f = theta / (2.0 * std::sin(theta));
    return {f * w[0], f * w[1], f * w[2]};
  }
  // Near pi the skew part vanishes; read the axis from the symmetric part,
  // (R + R^T)/2 = cos(theta) I + (1 - cos(theta)) n n^T, using its largest diagonal.
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (r(i, i) > r(k, k)) k = i;
  const double one_minus_c = 1.0 - c;
  Vec3 n;
  const double nk = std::sqrt(std::max(0.0, (r(k, k) - c) / one_minus_c));
  for (int i = 0; i < 3; ++i) {
    n[i] = i == k ? nk : 0.5 * (r(i, k) + r(k, i)) / (one_minus_c * nk);
  }
  const double nn = norm(n);
  for (auto& x : n) x /= nn;
  if (dot(n, w) < 0.0) {
    for (auto& x : n) x = -x;
  }
  return {theta * n[0], theta * n[1], theta * n[2]};
}

Tensor apply_similarity(const Similarity& t, const Tensor& points) {
  if (points.cols() != 3) throw ShapeError("apply_similarity expects n x 3 points");
  Tensor out(points.shape());
  const auto& R = t.rotation;
  for (std::size_t i = 0; i < points.rows(); ++i)
    for (int j = 0; j < 3; ++j) {
      // row vector times R
      const double v = points(i, 0) * R(0, j) + points(i, 1) * R(1, j) + points(i, 2) * R(2, j);
      out(i, j) = t.scale * v + t.translation[j];
    }
  return out;
}

double sum_squared_residual(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("residual: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Similarity procrustes_align(const Tensor& source, const Tensor& target) {
  if (source.cols() != 3 || target.cols() != 3 || source.rows() != target.rows()) {
    throw ShapeError("procrustes_align expects two n x 3 point sets");
  }
  const std::size_t n = source.rows();
  if (n < 3) throw DegeneracyError("procrustes_align needs at least 3 points");
  require_finite(source, "procrustes_align source");
  require_finite(target, "procrustes_align target");

  Eigen::MatrixXd X(n, 3), Y(n, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) {
      X(i, j) = source(i, j);
      Y(i, j) = target(i, j);
    }
  const Eigen::RowVector3d mx = X.colwise().mean();
  const Eigen::RowVector3d my = Y.colwise().mean();
  X.rowwise() -= mx;
  Y.rowwise() -= my;

  const Eigen::JacobiSVD<Eigen::MatrixXd> shape_svd(X);
  const auto sv = shape_svd.singularValues();
  if (!(sv(0) > 1e-12) || sv(1) <= 1e-10 * sv(0)) {
    throw DegeneracyError("procrustes_align: centered source is rank deficient (colinear points)");
  }

  // max tr(R^T X^T Y) for row vectors x R: with X^T Y = U S V^T, R = U D V^T.
  const Eigen::Matrix3d M = X.transpose() * Y;
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d V = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (U * V.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  const Eigen::Matrix3d R = U * d.asDiagonal() * V.transpose();
  const double s = (svd.singularValues().array() * d.array()).sum() / X.squaredNorm();
  const Eigen::RowVector3d t = my - s * mx * R;

  Similarity out;
  out.scale = s;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out.rotation(i, j) = R(i, j);
    out.translation[i] = t(i);
  }
  return out;
}

}  // namespace smpler
