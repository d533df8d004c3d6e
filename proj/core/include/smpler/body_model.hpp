#pragma once

// SMPL-style parametric body: shape blendshapes plus linear blend skinning
// along a kinematic tree, a linear joint regressor and weak-perspective
// projection. Pose-dependent blendshapes are not modelled.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smpler/autodiff.hpp"
#include "smpler/container.hpp"
#include "smpler/geometry.hpp"

namespace smpler {

inline constexpr std::size_t kSmplJoints = 24;
inline constexpr std::size_t kShapeDims = 10;

/// Parent index per joint of the 24-joint SMPL rig (root = -1).
const std::array<int, kSmplJoints>& smpl_parents();

struct BodyModel {
  Tensor template_vertices;  // N x 3, meters
  Tensor shape_basis;        // N x 3 x 10
  Tensor joint_regressor;    // H x N, rows sum to 1
  Tensor skin_weights;       // N x H, rows sum to 1
  std::vector<int> parents;  // H entries, parents[0] == -1

  std::size_t num_vertices() const { return template_vertices.rows(); }
  std::size_t num_joints() const { return parents.size(); }

  /// Throws InvariantError naming the first violated invariant.
  void validate() const;
  /// Joints ordered so that every parent precedes its children.
  std::vector<std::size_t> kinematic_order() const;
  /// M (template + shape_basis . beta) for a 1 x 10 beta.
  Tensor rest_joints(const Tensor& beta) const;

  friend bool operator==(const BodyModel&, const BodyModel&) = default;
};

/// Target pose/shape/camera. rotations is H x 9 (row-major 3x3 per joint),
/// beta is 1 x 10, camera is 1 x 3 holding (s, t_x, t_y) with s > 0.
struct SmplParams {
  Tensor rotations;
  Tensor beta;
  Tensor camera;

  static SmplParams identity(std::size_t joints = kSmplJoints);
  Rotation rotation(std::size_t joint) const;
  void set_rotation(std::size_t joint, const Rotation& r);
  void validate(double tol = 1e-9) const;
};

/// Posed vertices (N x 3) for H x 9 rotations and a 1 x 10 shape vector.
Var smpl_forward(const BodyModel& model, const Var& rotations, const Var& beta);
Tensor smpl_forward(const BodyModel& model, const SmplParams& params);

/// J = M Y.
Var regress_joints(const BodyModel& model, const Var& mesh);
Tensor regress_joints(const BodyModel& model, const Tensor& mesh);

/// s * (J.xy + (t_x, t_y)) per joint; camera is 1 x 3.
Var project_weak_perspective(const Var& joints, const Var& camera);
Tensor project_weak_perspective(const Tensor& joints, const Tensor& camera);

/// Deterministic stand-in for the SMPL asset: stick-figure skeleton on the
/// SMPL parent tree with vertices scattered around the bones.
BodyModel synthesize_toy_model(std::uint64_t seed, std::size_t n_vertices = 600);

void store_body_model(const BodyModel& model, Container& c, const std::string& prefix = "");
/// Reads and validates; throws InvariantError on violations.
BodyModel read_body_model(const Container& c, const std::string& prefix = "");

void save_model(const BodyModel& model, const std::filesystem::path& path);
BodyModel load_model(const std::filesystem::path& path);

}  // namespace smpler
