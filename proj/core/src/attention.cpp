#include "smpler/attention.hpp"

#include <cmath>

#include "smpler/errors.hpp"
#include "smpler/ops.hpp"

namespace smpler {

namespace {

Var uniform_param(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  return Var::parameter(rng.uniform_tensor({rows, cols}, -bound, bound));
}

Var zeros_param(std::size_t rows, std::size_t cols) { return Var::parameter(Tensor({rows, cols})); }

Var ones_param(std::size_t cols) { return Var::parameter(Tensor({1, cols}, 1.0)); }

void require_width(const Var& x, std::size_t d, const char* what) {
  if (x.shape().size() != 2 || x.cols() != d) {
    throw ShapeError(std::string("attend: ") + what + " must be l x " + std::to_string(d) + ", got " +
                     shape_string(x.shape()));
  }
}

}  // namespace

AttentionLayer AttentionLayer::create(std::size_t d, std::size_t heads, Rng& rng) {
  AttentionLayer l;
  l.d = d;
  l.heads = heads;
  l.validate_dims();
  const double b = 1.0 / std::sqrt(static_cast<double>(d));
  l.wq = zeros_param(d, d);
  l.wk = uniform_param(rng, d, d, b);
  l.wv = uniform_param(rng, d, d, b);
  l.wo = uniform_param(rng, d, d, b);
  l.ln1_gain = ones_param(d);
  l.ln1_bias = zeros_param(1, d);
  l.ln2_gain = ones_param(d);
  l.ln2_bias = zeros_param(1, d);
  l.mlp_w1 = uniform_param(rng, d, 4 * d, b);
  l.mlp_b1 = zeros_param(1, 4 * d);
  l.mlp_w2 = uniform_param(rng, 4 * d, d, 1.0 / std::sqrt(4.0 * static_cast<double>(d)));
  l.mlp_b2 = zeros_param(1, d);
  return l;
}

AttentionLayer AttentionLayer::identity(std::size_t d, std::size_t heads) {
  AttentionLayer l;
  l.d = d;
  l.heads = heads;
  l.validate_dims();
  l.wq = Var::parameter(Tensor::identity(d));
  l.wk = Var::parameter(Tensor::identity(d));
  l.wv = Var::parameter(Tensor::identity(d));
  l.wo = Var::parameter(Tensor::identity(d));
  l.ln1_gain = ones_param(d);
  l.ln1_bias = zeros_param(1, d);
  l.ln2_gain = ones_param(d);
  l.ln2_bias = zeros_param(1, d);
  l.mlp_w1 = zeros_param(d, 4 * d);
  l.mlp_b1 = zeros_param(1, 4 * d);
  l.mlp_w2 = zeros_param(4 * d, d);
  l.mlp_b2 = zeros_param(1, d);
  return l;
}

void AttentionLayer::validate_dims() const {
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw InvariantError("d divisible by n_heads", "d=" + std::to_string(d) + " heads=" + std::to_string(heads));
  }
}

void AttentionLayer::validate() const {
  validate_dims();
  for (const Var* w : {&wq, &wk, &wv, &wo, &mlp_w1, &mlp_w2}) {
    if (!*w || !w->value().all_finite()) throw InvariantError("all weight matrices finite", "");
  }
  if (wq.shape() != Shape{d, d} || wk.shape() != Shape{d, d} || wv.shape() != Shape{d, d} || wo.shape() != Shape{d, d}) {
    throw InvariantError("projections are d x d", "");
  }
}

void AttentionLayer::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "Wq", wq);
  fn(prefix + "Wk", wk);
  fn(prefix + "Wv", wv);
  fn(prefix + "Wo", wo);
  fn(prefix + "ln1.gain", ln1_gain);
  fn(prefix + "ln1.bias", ln1_bias);
  fn(prefix + "ln2.gain", ln2_gain);
  fn(prefix + "ln2.bias", ln2_bias);
  fn(prefix + "mlp.W1", mlp_w1);
  fn(prefix + "mlp.b1", mlp_b1);
  fn(prefix + "mlp.W2", mlp_w2);
  fn(prefix + "mlp.b2", mlp_b2);
}

Var attend(const Var& q, const Var& k, const Var& v, const AttentionLayer& layer, const Var& bias,
           AttentionTrace* trace) {
  const std::size_t d = layer.d;
  require_width(q, d, "Q");
  require_width(k, d, "K");
  require_width(v, d, "V");
  if (k.rows() != v.rows()) throw ShapeError("attend: K and V must have the same number of rows");
  if (k.rows() == 0) throw ShapeError("attend: no keys");
  const std::size_t lq = q.rows(), lk = k.rows();
  if (bias) {
    const bool row = bias.value().size() == lk;
    const bool full = bias.rows() == lq && bias.cols() == lk;
    if (!row && !full) throw ShapeError("attend: bias must be 1 x l_K or l_Q x l_K");
  }
  if (auto* c = active_collector()) {
    c->add_keys(lk, d);
  }

  const auto& o = layer.options;
  Var qp, kp, vp;
  {
    CategoryScope cat(CostCategory::kProjection);
    const Var qn = o.layer_norm ? layer_norm(q, layer.ln1_gain, layer.ln1_bias) : q;
    const Var kn = o.layer_norm ? layer_norm(k, layer.ln1_gain, layer.ln1_bias) : k;
    const Var vn = o.layer_norm ? (v.node() == k.node() ? kn : layer_norm(v, layer.ln1_gain, layer.ln1_bias)) : v;
    qp = matmul(qn, layer.wq);
    kp = matmul(kn, layer.wk);
    vp = matmul(vn, layer.wv);
  }

  const std::size_t dh = layer.head_width();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Var row_bias = bias && bias.rows() != lq ? reshape(bias, {1, lk}) : Var{};
  if (trace) {
    trace->weights = Tensor({lq, lk});
    trace->per_head.clear();
  }
  std::vector<Var> head_out;
  head_out.reserve(layer.heads);
  for (std::size_t h = 0; h < layer.heads; ++h) {
    const Var qh = layer.heads == 1 ? qp : slice_cols(qp, h * dh, (h + 1) * dh);
    const Var kh = layer.heads == 1 ? kp : slice_cols(kp, h * dh, (h + 1) * dh);
    const Var vh = layer.heads == 1 ? vp : slice_cols(vp, h * dh, (h + 1) * dh);
    Var logits;
    {
      CategoryScope cat(CostCategory::kInteraction);
      logits = matmul_nt(qh, kh, inv_sqrt);
    }
    if (bias) logits = row_bias ? add_row(logits, row_bias) : add(logits, bias);
    Var w;
    {
      CategoryScope cat(CostCategory::kSoftmax);
      w = softmax_rows(logits);
    }
    logits = {};
    if (trace) {
      const double inv_h = 1.0 / static_cast<double>(layer.heads);
      for (std::size_t i = 0; i < lq * lk; ++i) trace->weights[i] += inv_h * w.value()[i];
      if (trace->keep_heads) trace->per_head.push_back(w.value());
    }
    CategoryScope cat(CostCategory::kInteraction);
    head_out.push_back(matmul(w, vh));
  }

  Var x;
  {
    CategoryScope cat(CostCategory::kProjection);
    const Var cat_heads = layer.heads == 1 ? head_out.front() : concat_cols(head_out);
    x = matmul(cat_heads, layer.wo);
  }
  if (o.residual) x = add(q, x);
  if (o.mlp) {
    CategoryScope cat(CostCategory::kMlp);
    const Var xn = o.layer_norm ? layer_norm(x, layer.ln2_gain, layer.ln2_bias) : x;
    const Var hidden = gelu(add_row(matmul(xn, layer.mlp_w1), layer.mlp_b1));
    const Var m = add_row(matmul(hidden, layer.mlp_w2), layer.mlp_b2);
    x = o.residual ? add(x, m) : m;
  }
  return x;
}

Var full_attention(const Var& t, const Var& f, const AttentionLayer& layer, AttentionTrace* trace) {
  const Var x = f && f.rows() > 0 ? concat_rows({t, f}) : t;
  return attend(x, x, x, layer, {}, trace);
}

Var decoupled_attention(const Var& t, const Var& f, const AttentionLayer& cross, const AttentionLayer& self) {
  const Var x = f && f.rows() > 0 ? attend(t, f, f, cross) : t;
  return attend(x, x, x, self);
}

std::size_t FeaturePyramid::total_tokens() const {
  std::size_t n = 0;
  for (const auto& s : scales) n += s.rows();
  return n;
}

void FeaturePyramid::validate() const {
  if (scales.empty()) throw InvariantError("pyramid has S >= 1 scales", "");
  if (scales.size() != grids.size()) throw InvariantError("one grid shape per scale", "");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (scales[i].rows() != grids[i].tokens()) {
      throw InvariantError("token count l_F_i = h_i w_i", "scale " + std::to_string(i));
    }
    if (i > 0 && (grids[i].h * 2 != grids[i - 1].h || grids[i].w * 2 != grids[i - 1].w)) {
      throw InvariantError("resolution halves per scale", "scale " + std::to_string(i));
    }
  }
}

std::vector<Var> pooled_positional_encodings(const Var& phi1, GridShape grid1, std::size_t scales) {
  if (scales == 0) throw ShapeError("pooled_positional_encodings: need at least one scale");
  const std::size_t f = std::size_t{1} << (scales - 1);
  if (grid1.h % f != 0 || grid1.w % f != 0) {
    throw ShapeError("pooled_positional_encodings: grid not divisible by 2^(S-1)");
  }
  std::vector<Var> out{phi1};
  GridShape g = grid1;
  for (std::size_t i = 1; i < scales; ++i) {
    out.push_back(avg_pool2d(out.back(), g.h, g.w, 2));
    g = {g.h / 2, g.w / 2};
  }
  return out;
}

Var multiscale_attention(const Var& t, const FeaturePyramid& pyramid, const std::vector<Var>& encodings,
                         const std::vector<AttentionLayer>& layers, std::vector<AttentionTrace>* traces) {
  const std::size_t s = pyramid.size();
  if (s == 0 || layers.size() != s || encodings.size() != s) {
    throw ShapeError("multiscale_attention: scale/layer/encoding count mismatch");
  }
  if (traces) traces->assign(s, {});
  Var acc;
  for (std::size_t i = 0; i < s; ++i) {
    const Var keys = add(pyramid.scales[i], encodings[i]);
    const Var h = attend(t, keys, keys, layers[i], {}, traces ? &(*traces)[i] : nullptr);
    acc = i == 0 ? h : add(acc, h);
  }
  return s == 1 ? acc : scale(acc, 1.0 / static_cast<double>(s));
}

Var multiscale_concat(const Var& t, const FeaturePyramid& pyramid, const std::vector<Var>& encodings,
                      const AttentionLayer& layer, AttentionTrace* trace) {
  const std::size_t s = pyramid.size();
  if (s == 0 || encodings.size() != s) throw ShapeError("multiscale_concat: scale/encoding count mismatch");
  std::vector<Var> parts;
  for (std::size_t i = 0; i < s; ++i) parts.push_back(add(pyramid.scales[i], encodings[i]));
  const Var keys = s == 1 ? parts.front() : concat_rows(parts);
  return attend(t, keys, keys, layer, {}, trace);
}

GridPoint joint_to_grid(double x, double y, GridShape grid) {
  return {(y + 1.0) * 0.5 * static_cast<double>(grid.h - 1), (x + 1.0) * 0.5 * static_cast<double>(grid.w - 1)};
}

std::vector<GridPoint> joint_patch_cells(GridPoint c, std::size_t r) {
  if (r == 0) throw ShapeError("joint patch size r must be positive");
  const double half = static_cast<double>(r / 2);
  const double r0 = std::floor(c.row) - half + 1.0;
  const double c0 = std::floor(c.col) - half + 1.0;
  std::vector<GridPoint> cells;
  cells.reserve(r * r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) cells.push_back({r0 + static_cast<double>(i), c0 + static_cast<double>(j)});
  return cells;
}

Var joint_aware_attention(const Var& t_row, const Var& f1, GridShape grid1, GridPoint joint, const Var& eta_tilde,
                          std::size_t r, const AttentionLayer& layer, AttentionTrace* trace) {
  if (t_row.rows() != 1) throw ShapeError("joint_aware_attention: one query row expected");
  if (!std::isfinite(joint.row) || !std::isfinite(joint.col)) {
    throw NumericDomainError("joint_aware_attention: non-finite joint location");
  }
  if (eta_tilde.value().size() != (r + 1) * (r + 1)) {
    throw ShapeError("joint_aware_attention: eta_tilde must hold (r+1)^2 values");
  }
  const auto cells = joint_patch_cells(joint, r);
  const Var patch = bilinear_sample(f1, grid1.h, grid1.w, cells);

  // Offsets from the joint lie in (-r/2, r/2]; shift into the table's [0, r] range.
  const double half = static_cast<double>(r) / 2.0;
  std::vector<GridPoint> offsets;
  offsets.reserve(cells.size());
  for (const auto& c : cells) offsets.push_back({c.row - joint.row + half, c.col - joint.col + half});
  const Var eta = bilinear_sample(reshape(eta_tilde, {(r + 1) * (r + 1), 1}), r + 1, r + 1, offsets);
  return attend(t_row, patch, patch, layer, reshape(eta, {1, r * r}), trace);
}

Var joint_aware_rows(const Var& t, const Var& f1, GridShape grid1, const Tensor& joints_2d, const Var& eta_tilde,
                     std::size_t r, const AttentionLayer& layer, std::vector<AttentionTrace>* traces) {
  const std::size_t h = joints_2d.rows();
  if (joints_2d.cols() != 2 || t.rows() < h) throw ShapeError("joint_aware_rows: joints must be H x 2 with H <= l_T");
  if (traces) traces->assign(h, {});
  std::vector<Var> rows;
  rows.reserve(h);
  for (std::size_t i = 0; i < h; ++i) {
    const GridPoint p = joint_to_grid(joints_2d(i, 0), joints_2d(i, 1), grid1);
    rows.push_back(joint_aware_attention(slice_rows(t, i, i + 1), f1, grid1, p, eta_tilde, r, layer,
                                         traces ? &(*traces)[i] : nullptr));
  }
  return concat_rows(rows);
}

Var combined_attention(const Var& t, const FeaturePyramid& pyramid, const PositionalEncodings& pe,
                       const std::vector<Var>& encodings, const Tensor& joints_2d, const CombinedLayers& layers,
                       UnitTrace* trace) {
  const std::size_t h = joints_2d.rows();
  if (t.rows() < h) throw ShapeError("combined_attention: more joints than target rows");
  const Var ms = multiscale_attention(t, pyramid, encodings, layers.scales, trace ? &trace->scales : nullptr);
  const Var ja = joint_aware_rows(t, pyramid.scales.front(), pyramid.grids.front(), joints_2d, pe.eta_tilde, pe.r,
                                  layers.joint, trace ? &trace->joints : nullptr);
  const Var top = scale(add(ja, slice_rows(ms, 0, h)), 0.5);
  if (t.rows() == h) return top;
  return concat_rows({top, slice_rows(ms, h, t.rows())});
}

void UnitLayers::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t i = 0; i < cross.scales.size(); ++i) {
    cross.scales[i].visit(prefix + "cross.scale." + std::to_string(i) + ".", fn);
  }
  cross.joint.visit(prefix + "cross.joint.", fn);
  self.visit(prefix + "self.", fn);
}

Var transformer_unit(const Var& t, const FeaturePyramid& pyramid, const PositionalEncodings& pe,
                     const std::vector<Var>& encodings, const Tensor& joints_2d, const UnitLayers& layers,
                     const Var& target_pe, UnitTrace* trace) {
  const Var x = target_pe ? add(t, target_pe) : t;
  const Var c = combined_attention(x, pyramid, pe, encodings, joints_2d, layers.cross, trace);
  return attend(c, c, c, layers.self, {}, trace ? &trace->self : nullptr);
}

}  // namespace smpler
