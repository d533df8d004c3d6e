#pragma once

#include "smpler/autodiff.hpp"
#include "smpler/body_model.hpp"
#include "smpler/config.hpp"

namespace smpler {

/// Ground-truth mesh, joints and rotations of one sample.
struct GroundTruth {
  Tensor vertices;   // N x 3
  Tensor joints3d;   // H x 3
  Tensor joints2d;   // H x 2
  Tensor rotations;  // H x 9

  static GroundTruth from_params(const BodyModel& model, const SmplParams& params);
};

/// Differentiable mesh, joints and projections of an estimate.
struct Prediction {
  Var vertices;
  Var joints3d;
  Var joints2d;
  Var rotations;
};

/// smpl_forward -> regress_joints -> project_weak_perspective.
Prediction predict(const BodyModel& model, const Var& rotations, const Var& beta, const Var& camera);

/// w_Y mean|Y - Y^| + w_J mean (J - J^)^2 + w_2D mean (j - j^)^2, means over all elements.
Var loss_basic(const Var& y, const Tensor& y_hat, const Var& j, const Tensor& j_hat, const Var& j2, const Tensor& j2_hat,
               const LossWeights& w);

/// (w_R / H) sum_i ||R_i - R^_i||_1 over the 9 entries. Both sides must be rotations.
Var loss_rotation(const Var& r, const Tensor& r_hat, double w_r);

Var total_loss(const Prediction& p, const GroundTruth& gt, const LossWeights& w);

}  // namespace smpler
