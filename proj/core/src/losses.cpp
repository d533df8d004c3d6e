#include "smpler/losses.hpp"

#include "smpler/errors.hpp"
#include "smpler/ops.hpp"

namespace smpler {

namespace {

void require_shape(const Var& a, const Tensor& b, const char* what) {
  if (a.value().size() != b.size() || a.rows() != b.rows()) {
    throw ShapeError(std::string(what) + ": prediction " + shape_string(a.shape()) + " vs ground truth " +
                     shape_string(b.shape()));
  }
}

void require_rotations(const Tensor& r, const char* what) {
  for (std::size_t i = 0; i < r.rows(); ++i) {
    if (!is_rotation(Rotation::from_row_major(r.row(i)), 1e-9)) {
      throw InvariantError("every rotation is in SO(3)", std::string(what) + " row " + std::to_string(i));
    }
  }
}

}  // namespace

GroundTruth GroundTruth::from_params(const BodyModel& model, const SmplParams& params) {
  params.validate();
  GroundTruth gt;
  gt.vertices = smpl_forward(model, params);
  gt.joints3d = regress_joints(model, gt.vertices);
  gt.joints2d = project_weak_perspective(gt.joints3d, params.camera);
  gt.rotations = params.rotations;
  return gt;
}

Prediction predict(const BodyModel& model, const Var& rotations, const Var& beta, const Var& camera) {
  Prediction p;
  p.rotations = rotations;
  p.vertices = smpl_forward(model, rotations, beta);
  p.joints3d = regress_joints(model, p.vertices);
  p.joints2d = project_weak_perspective(p.joints3d, camera);
  return p;
}

Var loss_basic(const Var& y, const Tensor& y_hat, const Var& j, const Tensor& j_hat, const Var& j2, const Tensor& j2_hat,
               const LossWeights& w) {
  w.validate();
  require_shape(y, y_hat, "loss_basic vertices");
  require_shape(j, j_hat, "loss_basic joints");
  require_shape(j2, j2_hat, "loss_basic 2d joints");
  const Var ly = mean(abs(sub(y, Var::constant(y_hat.reshaped(y.shape())))));
  const Var lj = mean(square(sub(j, Var::constant(j_hat.reshaped(j.shape())))));
  const Var l2 = mean(square(sub(j2, Var::constant(j2_hat.reshaped(j2.shape())))));
  return add(add(scale(ly, w.vertices), scale(lj, w.joints3d)), scale(l2, w.joints2d));
}

Var loss_rotation(const Var& r, const Tensor& r_hat, double w_r) {
  if (!(w_r >= 0.0)) throw InvariantError("loss weights are nonnegative", "w_R");
  if (r.cols() != 9) throw ShapeError("loss_rotation expects H x 9 rotations");
  require_shape(r, r_hat, "loss_rotation");
  require_rotations(r.value(), "prediction");
  require_rotations(r_hat, "ground truth");
  const double h = static_cast<double>(r.rows());
  return scale(sum(abs(sub(r, Var::constant(r_hat.reshaped(r.shape()))))), w_r / h);
}

Var total_loss(const Prediction& p, const GroundTruth& gt, const LossWeights& w) {
  return add(loss_basic(p.vertices, gt.vertices, p.joints3d, gt.joints3d, p.joints2d, gt.joints2d, w),
             loss_rotation(p.rotations, gt.rotations, w.rotation));
}

}  // namespace smpler
