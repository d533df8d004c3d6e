#pragma once

// Plain-loop reference implementations used as test oracles. They share no
// code with the library ops: nested std::vector matrices, direct formulas.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "smpler/attention.hpp"
#include "smpler/rng.hpp"
#include "smpler/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const smpler::Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline smpler::Tensor to_tensor(const Mat& m) {
  smpler::Tensor t({m.size(), m.empty() ? 0 : m[0].size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t(i, j) = m[i][j];
  return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < b.size(); ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}

inline Mat add(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) c[i][j] += b[i][j];
  return c;
}

inline Mat scale(const Mat& a, double s) {
  Mat c = a;
  for (auto& r : c)
    for (auto& v : r) v *= s;
  return c;
}

inline Mat concat_rows(const std::vector<Mat>& parts) {
  Mat out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& x) {
  long double mx = x[0];
  for (double v : x) mx = std::max<long double>(mx, v);
  long double z = 0;
  std::vector<long double> e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z += (e[i] = std::exp(static_cast<long double>(x[i]) - mx));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(e[i] / z);
  return out;
}

inline Mat layer_norm(const Mat& x, const std::vector<double>& gain, const std::vector<double>& bias, double eps = 1e-5) {
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(x[i].size());
    double mu = 0.0;
    for (double v : x[i]) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x[i]) var += (v - mu) * (v - mu);
    var /= n;
    for (std::size_t j = 0; j < x[i].size(); ++j) out[i][j] = gain[j] * (x[i][j] - mu) / std::sqrt(var + eps) + bias[j];
  }
  return out;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline std::vector<double> row0(const smpler::Var& v) {
  auto r = v.value().values();
  return {r.begin(), r.end()};
}

/// Multi-head pre-LN attention with residual and MLP, following the layer's options.
/// bias is empty, one row (shared by all queries) or one row per query.
inline Mat attend(const Mat& q, const Mat& k, const Mat& v, const smpler::AttentionLayer& layer, const Mat& bias = {},
                  std::vector<Mat>* weights_per_head = nullptr) {
  const auto& o = layer.options;
  const std::size_t d = layer.d, heads = layer.heads, dh = d / heads;
  const auto g1 = row0(layer.ln1_gain), b1 = row0(layer.ln1_bias);
  const Mat qn = o.layer_norm ? layer_norm(q, g1, b1) : q;
  const Mat kn = o.layer_norm ? layer_norm(k, g1, b1) : k;
  const Mat vn = o.layer_norm ? layer_norm(v, g1, b1) : v;
  const Mat qp = matmul(qn, to_mat(layer.wq.value()));
  const Mat kp = matmul(kn, to_mat(layer.wk.value()));
  const Mat vp = matmul(vn, to_mat(layer.wv.value()));
  Mat heads_out(q.size(), std::vector<double>(d, 0.0));
  if (weights_per_head) weights_per_head->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    Mat w(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> logits(k.size());
      for (std::size_t j = 0; j < k.size(); ++j) {
        double s = 0.0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) s += qp[i][c] * kp[j][c];
        logits[j] = s / std::sqrt(static_cast<double>(dh));
        if (!bias.empty()) logits[j] += bias.size() == 1 ? bias[0][j] : bias[i][j];
      }
      w[i] = softmax(logits);
      for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < k.size(); ++j) s += w[i][j] * vp[j][c];
        heads_out[i][c] = s;
      }
    }
    if (weights_per_head) weights_per_head->push_back(w);
  }
  Mat x = matmul(heads_out, to_mat(layer.wo.value()));
  if (o.residual) x = add(q, x);
  if (o.mlp) {
    const Mat xn = o.layer_norm ? layer_norm(x, row0(layer.ln2_gain), row0(layer.ln2_bias)) : x;
    Mat hid = matmul(xn, to_mat(layer.mlp_w1.value()));
    const auto bb1 = row0(layer.mlp_b1), bb2 = row0(layer.mlp_b2);
    for (auto& r : hid)
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = gelu(r[j] + bb1[j]);
    Mat m = matmul(hid, to_mat(layer.mlp_w2.value()));
    for (auto& r : m)
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += bb2[j];
    x = o.residual ? add(x, m) : m;
  }
  return x;
}

/// x + MLP(LN2(x)) row by row.
inline Mat residual_mlp(const Mat& x, const smpler::AttentionLayer& layer) {
  const Mat xn = layer_norm(x, row0(layer.ln2_gain), row0(layer.ln2_bias));
  const smpler::Tensor w1 = layer.mlp_w1.value(), w2 = layer.mlp_w2.value();
  const auto b1 = row0(layer.mlp_b1), b2 = row0(layer.mlp_b2);
  Mat out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> hid(w1.cols());
    for (std::size_t j = 0; j < hid.size(); ++j) {
      double s = b1[j];
      for (std::size_t k = 0; k < xn[i].size(); ++k) s += xn[i][k] * w1(k, j);
      hid[j] = gelu(s);
    }
    for (std::size_t j = 0; j < out[i].size(); ++j) {
      double s = b2[j];
      for (std::size_t k = 0; k < hid.size(); ++k) s += hid[k] * w2(k, j);
      out[i][j] += s;
    }
  }
  return out;
}

/// Bilinear interpolation of a row-major (h*w) x c grid at (row, col), border clamped.
inline std::vector<double> bilinear(const Mat& grid, std::size_t h, std::size_t w, double row, double col) {
  row = std::min(std::max(row, 0.0), static_cast<double>(h - 1));
  col = std::min(std::max(col, 0.0), static_cast<double>(w - 1));
  const std::size_t r0 = static_cast<std::size_t>(std::floor(row)), c0 = static_cast<std::size_t>(std::floor(col));
  const std::size_t r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
  const double fr = row - static_cast<double>(r0), fc = col - static_cast<double>(c0);
  std::vector<double> out(grid[0].size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (1 - fr) * (1 - fc) * grid[r0 * w + c0][k] + (1 - fr) * fc * grid[r0 * w + c1][k] +
             fr * (1 - fc) * grid[r1 * w + c0][k] + fr * fc * grid[r1 * w + c1][k];
  }
  return out;
}

/// Gather-then-attend reference for one joint: r x r integer cells
/// floor(c) - r/2 + 1 ... floor(c) + r/2, eta sampled at (cell - joint + r/2).
inline Mat joint_aware(const Mat& t_row, const Mat& f1, std::size_t h, std::size_t w, double row, double col,
                       const Mat& eta_tilde, std::size_t r, const smpler::AttentionLayer& layer) {
  Mat patch;
  std::vector<double> bias;
  const double half = static_cast<double>(r) / 2.0;
  const double base_r = std::floor(row) - static_cast<double>(r / 2) + 1.0;
  const double base_c = std::floor(col) - static_cast<double>(r / 2) + 1.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      const double cr = base_r + static_cast<double>(i), cc = base_c + static_cast<double>(j);
      patch.push_back(bilinear(f1, h, w, cr, cc));
      bias.push_back(bilinear(eta_tilde, r + 1, r + 1, cr - row + half, cc - col + half)[0]);
    }
  return attend(t_row, patch, patch, layer, Mat{bias});
}

/// Random layer weights (including non-trivial layer-norm parameters and W_q).
inline smpler::AttentionLayer random_layer(std::size_t d, std::size_t heads, smpler::Rng& rng) {
  smpler::AttentionLayer l = smpler::AttentionLayer::create(d, heads, rng);
  l.wq = smpler::Var::parameter(rng.uniform_tensor({d, d}, -0.6, 0.6));
  l.ln1_gain = smpler::Var::parameter(rng.uniform_tensor({1, d}, 0.5, 1.5));
  l.ln1_bias = smpler::Var::parameter(rng.uniform_tensor({1, d}, -0.2, 0.2));
  l.ln2_gain = smpler::Var::parameter(rng.uniform_tensor({1, d}, 0.5, 1.5));
  l.ln2_bias = smpler::Var::parameter(rng.uniform_tensor({1, d}, -0.2, 0.2));
  l.mlp_b1 = smpler::Var::parameter(rng.uniform_tensor({1, 4 * d}, -0.2, 0.2));
  l.mlp_b2 = smpler::Var::parameter(rng.uniform_tensor({1, d}, -0.2, 0.2));
  return l;
}

inline double max_abs_diff(const Mat& a, const smpler::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b(i, j)));
  return m;
}

/// Quaternion of a row-major rotation (Shepperd's method); angle = 2 atan2(|q_vec|, |q_w|).
inline double quaternion_angle_degrees(const std::array<double, 9>& m) {
  const double tr = m[0] + m[4] + m[8];
  double w, x, y, z;
  if (tr > 0) {
    const double s = std::sqrt(tr + 1.0) * 2;
    w = 0.25 * s;
    x = (m[7] - m[5]) / s;
    y = (m[2] - m[6]) / s;
    z = (m[3] - m[1]) / s;
  } else if (m[0] > m[4] && m[0] > m[8]) {
    const double s = std::sqrt(1.0 + m[0] - m[4] - m[8]) * 2;
    w = (m[7] - m[5]) / s;
    x = 0.25 * s;
    y = (m[1] + m[3]) / s;
    z = (m[2] + m[6]) / s;
  } else if (m[4] > m[8]) {
    const double s = std::sqrt(1.0 + m[4] - m[0] - m[8]) * 2;
    w = (m[2] - m[6]) / s;
    x = (m[1] + m[3]) / s;
    y = 0.25 * s;
    z = (m[5] + m[7]) / s;
  } else {
    const double s = std::sqrt(1.0 + m[8] - m[0] - m[4]) * 2;
    w = (m[3] - m[1]) / s;
    x = (m[2] + m[6]) / s;
    y = (m[5] + m[7]) / s;
    z = 0.25 * s;
  }
  return 2.0 * std::atan2(std::sqrt(x * x + y * y + z * z), std::abs(w)) * 180.0 / 3.14159265358979323846;
}

}  // namespace oracle
