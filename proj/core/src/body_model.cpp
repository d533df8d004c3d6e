#include "smpler/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smpler/errors.hpp"
#include "smpler/ops.hpp"
#include "smpler/rng.hpp"

namespace smpler {

namespace {

constexpr double kRowSumTol = 1e-6;

// Rest skeleton, pelvis at the origin, y up, +x to the body's left.
constexpr std::array<Vec3, kSmplJoints> kRestJoints{{
    {0.00, 0.00, 0.00},    // 0 pelvis
    {0.07, -0.09, 0.00},   // 1 l_hip
    {-0.07, -0.09, 0.00},  // 2 r_hip
    {0.00, 0.11, -0.02},   // 3 spine1
    {0.10, -0.47, 0.01},   // 4 l_knee
    {-0.10, -0.47, 0.01},  // 5 r_knee
    {0.00, 0.24, -0.01},   // 6 spine2
    {0.09, -0.87, -0.03},  // 7 l_ankle
    {-0.09, -0.87, -0.03}, // 8 r_ankle
    {0.00, 0.30, 0.01},    // 9 spine3
    {0.11, -0.93, 0.09},   // 10 l_foot
    {-0.11, -0.93, 0.09},  // 11 r_foot
    {0.00, 0.52, -0.02},   // 12 neck
    {0.08, 0.43, -0.01},   // 13 l_collar
    {-0.08, 0.43, -0.01},  // 14 r_collar
    {0.00, 0.60, 0.03},    // 15 head
    {0.18, 0.46, -0.02},   // 16 l_shoulder
    {-0.18, 0.46, -0.02},  // 17 r_shoulder
    {0.43, 0.45, -0.04},   // 18 l_elbow
    {-0.43, 0.45, -0.04},  // 19 r_elbow
    {0.68, 0.46, -0.04},   // 20 l_wrist
    {-0.68, 0.46, -0.04},  // 21 r_wrist
    {0.79, 0.44, -0.03},   // 22 l_hand
    {-0.79, 0.44, -0.03},  // 23 r_hand
}};

double distance_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  Vec3 ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = len2 > 0 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double e = ap[i] - t * ab[i];
    d2 += e * e;
  }
  return std::sqrt(d2);
}

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

void check_rows_sum_to_one(const Tensor& t, const std::string& name) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double s = 0.0;
    for (double v : t.row(r)) {
      if (!(v >= 0.0)) throw InvariantError(name + " entries are nonnegative", "row " + std::to_string(r));
      s += v;
    }
    if (std::abs(s - 1.0) > kRowSumTol) {
      throw InvariantError("each row of " + name + " sums to 1",
                           "row " + std::to_string(r) + " sums to " + std::to_string(s));
    }
  }
}

}  // namespace

const std::array<int, kSmplJoints>& smpl_parents() {
  static constexpr std::array<int, kSmplJoints> p{-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                                                   9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
  return p;
}

std::vector<std::size_t> BodyModel::kinematic_order() const {
  const std::size_t h = parents.size();
  if (h == 0) throw InvariantError("parents encode a tree rooted at joint 0", "no joints");
  if (parents[0] != -1) throw InvariantError("parents encode a tree rooted at joint 0", "parents[0] != -1");
  std::vector<std::vector<std::size_t>> children(h);
  for (std::size_t i = 1; i < h; ++i) {
    const int p = parents[i];
    if (p < 0 || static_cast<std::size_t>(p) >= h) {
      throw InvariantError("parents encode a tree rooted at joint 0",
                           "joint " + std::to_string(i) + " has parent " + std::to_string(p));
    }
    children[static_cast<std::size_t>(p)].push_back(i);
  }
  std::vector<std::size_t> order{0};
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (auto c : children[order[k]]) order.push_back(c);
  }
  if (order.size() != h) throw InvariantError("parents are acyclic", "joints unreachable from the root");
  return order;
}

void BodyModel::validate() const {
  const std::size_t n = template_vertices.rows();
  const std::size_t h = parents.size();
  if (template_vertices.shape() != Shape{n, 3}) throw InvariantError("template is N x 3", shape_string(template_vertices.shape()));
  if (shape_basis.shape() != Shape{n, 3, kShapeDims}) {
    throw InvariantError("shape_basis is N x 3 x 10", shape_string(shape_basis.shape()));
  }
  if (joint_regressor.shape() != Shape{h, n}) throw InvariantError("joint_regressor is H x N", shape_string(joint_regressor.shape()));
  if (skin_weights.shape() != Shape{n, h}) throw InvariantError("skin_weights is N x H", shape_string(skin_weights.shape()));
  for (const Tensor* t : {&template_vertices, &shape_basis, &joint_regressor, &skin_weights}) {
    if (!t->all_finite()) throw InvariantError("body model values are finite", "");
  }
  check_rows_sum_to_one(joint_regressor, "joint_regressor");
  check_rows_sum_to_one(skin_weights, "skin_weights");
  (void)kinematic_order();
}

Tensor BodyModel::rest_joints(const Tensor& beta) const {
  NoGradScope ng;
  const Var mesh = smpl_forward(*this, Var::constant(SmplParams::identity(num_joints()).rotations), Var::constant(beta));
  return regress_joints(*this, mesh.value());
}

SmplParams SmplParams::identity(std::size_t joints) {
  SmplParams p;
  p.rotations = Tensor({joints, 9});
  for (std::size_t j = 0; j < joints; ++j) {
    p.rotations(j, 0) = p.rotations(j, 4) = p.rotations(j, 8) = 1.0;
  }
  p.beta = Tensor({1, kShapeDims});
  p.camera = Tensor::from_rows({{1.0, 0.0, 0.0}});
  return p;
}

Rotation SmplParams::rotation(std::size_t joint) const { return Rotation::from_row_major(rotations.row(joint)); }

void SmplParams::set_rotation(std::size_t joint, const Rotation& r) {
  std::copy(r.m.begin(), r.m.end(), rotations.row(joint).begin());
}

void SmplParams::validate(double tol) const {
  if (rotations.rank() != 2 || rotations.cols() != 9) throw InvariantError("rotations are H x 9", shape_string(rotations.shape()));
  if (beta.size() != kShapeDims) throw InvariantError("beta has 10 entries", shape_string(beta.shape()));
  if (camera.size() != 3) throw InvariantError("camera has 3 entries", shape_string(camera.shape()));
  for (std::size_t j = 0; j < rotations.rows(); ++j) {
    if (!is_rotation(rotation(j), tol)) throw InvariantError("every rotation is in SO(3)", "joint " + std::to_string(j));
  }
  if (!(camera[0] > 0.0)) throw InvariantError("camera scale s > 0", std::to_string(camera[0]));
  require_finite(beta, "SmplParams beta");
  require_finite(camera, "SmplParams camera");
}

Var smpl_forward(const BodyModel& model, const Var& rotations, const Var& beta) {
  const std::size_t n = model.num_vertices();
  const std::size_t h = model.num_joints();
  if (rotations.shape() != Shape{h, 9}) throw ShapeError("smpl_forward: rotations must be H x 9");
  if (beta.value().size() != kShapeDims) throw ShapeError("smpl_forward: beta must hold 10 values");

  const Var basis = Var::constant(model.shape_basis.reshaped({3 * n, kShapeDims}));
  const Var offset = reshape(matmul_nt(reshape(beta, {1, kShapeDims}), basis), {n, 3});
  const Var shaped = add(Var::constant(model.template_vertices), offset);
  const Var joints = matmul(Var::constant(model.joint_regressor), shaped);

  // Per joint, the world transform maps a rest point x to G_k (x - j_k) + j_k + D_k.
  // Working with G_k - I and the displacement D_k keeps the identity pose exact.
  const Var eye = Var::constant(Tensor::identity(3));
  std::vector<Var> world(h), delta(h), disp(h), joint_col(h), rows(h);
  for (std::size_t k : model.kinematic_order()) {
    const Var local = reshape(slice_rows(rotations, k, k + 1), {3, 3});
    joint_col[k] = transpose(slice_rows(joints, k, k + 1));
    const int p = model.parents[k];
    if (p < 0) {
      world[k] = local;
      disp[k] = Var::constant(Tensor({3, 1}));
    } else {
      const auto pp = static_cast<std::size_t>(p);
      world[k] = matmul(world[pp], local);
      disp[k] = add(disp[pp], matmul(delta[pp], sub(joint_col[k], joint_col[pp])));
    }
    delta[k] = sub(world[k], eye);
    const Var t = sub(disp[k], matmul(delta[k], joint_col[k]));
    rows[k] = concat_cols({reshape(delta[k], {1, 9}), reshape(t, {1, 3})});
  }
  const Var blended = matmul(Var::constant(model.skin_weights), concat_rows(rows));
  return add(shaped, affine_rows(blended, shaped));
}

Tensor smpl_forward(const BodyModel& model, const SmplParams& params) {
  NoGradScope ng;
  return smpl_forward(model, Var::constant(params.rotations), Var::constant(params.beta)).value();
}

Var regress_joints(const BodyModel& model, const Var& mesh) {
  if (mesh.shape() != Shape{model.num_vertices(), 3}) throw ShapeError("regress_joints: mesh must be N x 3");
  return matmul(Var::constant(model.joint_regressor), mesh);
}

Tensor regress_joints(const BodyModel& model, const Tensor& mesh) {
  NoGradScope ng;
  return regress_joints(model, Var::constant(mesh)).value();
}

Var project_weak_perspective(const Var& joints, const Var& camera) {
  if (joints.cols() != 3) throw ShapeError("project_weak_perspective: joints must be H x 3");
  if (camera.value().size() != 3) throw ShapeError("project_weak_perspective: camera must hold 3 values");
  if (!(camera.value()[0] > 0.0)) throw InvariantError("camera scale s > 0", std::to_string(camera.value()[0]));
  const Var cam = reshape(camera, {1, 3});
  const Var shifted = add_row(slice_cols(joints, 0, 2), slice_cols(cam, 1, 3));
  const Var s = matmul(Var::constant(Tensor({joints.rows(), 1}, 1.0)), slice_cols(cam, 0, 1));
  return mul_col(shifted, s);
}

Tensor project_weak_perspective(const Tensor& joints, const Tensor& camera) {
  NoGradScope ng;
  return project_weak_perspective(Var::constant(joints), Var::constant(camera)).value();
}

BodyModel synthesize_toy_model(std::uint64_t seed, std::size_t n_vertices) {
  const std::size_t h = kSmplJoints;
  if (n_vertices < h) throw InvariantError("n_vertices >= H", std::to_string(n_vertices));
  const std::size_t per_joint = std::min<std::size_t>(3, n_vertices / h);
  Rng rng(seed);
  const auto& parents = smpl_parents();

  std::vector<std::vector<std::size_t>> children(h);
  for (std::size_t i = 1; i < h; ++i) children[static_cast<std::size_t>(parents[i])].push_back(i);

  BodyModel m;
  m.parents.assign(parents.begin(), parents.end());
  m.template_vertices = Tensor({n_vertices, 3});
  std::vector<Vec3> verts(n_vertices);
  // Up to three vertices hug each joint; the rest scatter around random bones.
  for (std::size_t v = 0; v < n_vertices; ++v) {
    Vec3 base;
    double radius;
    if (v < per_joint * h) {
      base = kRestJoints[v / per_joint];
      radius = 0.01;
    } else {
      const std::size_t child = 1 + rng.index(h - 1);
      const Vec3& a = kRestJoints[static_cast<std::size_t>(parents[child])];
      const Vec3& b = kRestJoints[child];
      const double t = rng.uniform();
      for (int i = 0; i < 3; ++i) base[i] = a[i] + t * (b[i] - a[i]);
      radius = 0.04;
    }
    for (int i = 0; i < 3; ++i) {
      verts[v][i] = base[i] + radius * rng.normal();
      m.template_vertices(v, i) = verts[v][i];
    }
  }

  // Skinning: softmax of negative distance to each joint's outgoing bones.
  m.skin_weights = Tensor({n_vertices, h});
  for (std::size_t v = 0; v < n_vertices; ++v) {
    std::vector<double> logits(h);
    for (std::size_t j = 0; j < h; ++j) {
      double d = children[j].empty() ? distance(verts[v], kRestJoints[j]) : 1e9;
      for (auto c : children[j]) d = std::min(d, distance_to_segment(verts[v], kRestJoints[j], kRestJoints[c]));
      logits[j] = -d / 0.02;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (std::size_t j = 0; j < h; ++j) m.skin_weights(v, j) = logits[j] / z;
  }

  m.joint_regressor = Tensor({h, n_vertices});
  constexpr double kSigma = 0.03;
  for (std::size_t j = 0; j < h; ++j) {
    double z = 0.0;
    for (std::size_t v = 0; v < n_vertices; ++v) {
      const double d = distance(verts[v], kRestJoints[j]);
      z += (m.joint_regressor(j, v) = std::exp(-0.5 * d * d / (kSigma * kSigma)));
    }
    for (std::size_t v = 0; v < n_vertices; ++v) m.joint_regressor(j, v) /= z;
  }

  // Shape directions: random per-joint displacements carried to vertices by W.
  m.shape_basis = Tensor({n_vertices, 3, kShapeDims});
  for (std::size_t k = 0; k < kShapeDims; ++k) {
    std::vector<Vec3> dj(h);
    for (auto& d : dj)
      for (auto& x : d) x = 0.02 * rng.normal();
    for (std::size_t v = 0; v < n_vertices; ++v)
      for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < h; ++j) s += m.skin_weights(v, j) * dj[j][i];
        m.shape_basis[(v * 3 + static_cast<std::size_t>(i)) * kShapeDims + k] = s;
      }
  }
  m.validate();
  return m;
}

void store_body_model(const BodyModel& model, Container& c, const std::string& prefix) {
  c.put(prefix + "template", model.template_vertices);
  c.put(prefix + "shape_basis", model.shape_basis);
  c.put(prefix + "joint_regressor", model.joint_regressor);
  c.put(prefix + "skin_weights", model.skin_weights);
  c.put_i32(prefix + "parents", {model.parents.begin(), model.parents.end()});
}

BodyModel read_body_model(const Container& c, const std::string& prefix) {
  BodyModel m;
  m.template_vertices = c.tensor(prefix + "template");
  m.shape_basis = c.tensor(prefix + "shape_basis");
  m.joint_regressor = c.tensor(prefix + "joint_regressor");
  m.skin_weights = c.tensor(prefix + "skin_weights");
  const auto p = c.i32(prefix + "parents");
  m.parents.assign(p.begin(), p.end());
  m.validate();
  return m;
}

void save_model(const BodyModel& model, const std::filesystem::path& path) {
  model.validate();
  Container c;
  store_body_model(model, c);
  c.save(path);
}

BodyModel load_model(const std::filesystem::path& path) { return read_body_model(Container::load(path)); }

}  // namespace smpler
