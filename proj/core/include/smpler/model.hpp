#pragma once

// Hierarchical estimator: toy backbone -> initial estimate P^0 and target T^0
// -> B refinement blocks of U units, each block ending in a fusion step that
// applies Gram-Schmidt rotation residuals by left multiplication.

#include <filesystem>
#include <vector>

#include "smpler/attention.hpp"
#include "smpler/body_model.hpp"
#include "smpler/config.hpp"
#include "smpler/losses.hpp"

namespace smpler {

/// Fixed strided linear filters with tanh: a 4x4 patch embedding for scale 1,
/// then 2x2 stride-2 merges for every further scale.
struct Backbone {
  std::vector<Tensor> weights;  // [0]: 48 x d, then 4d x d
  std::vector<Tensor> biases;   // 1 x d each

  static Backbone create(const SmplerConfig& c, std::uint64_t seed);
  /// image is (s*s) x 3, row-major pixels, s = 4 h_1.
  FeaturePyramid run(const Tensor& image, const SmplerConfig& c) const;
};

/// Differentiable estimate: H x 9 rotations, 1 x 10 beta, 1 x 3 camera before
/// the softplus on the scale channel.
struct EstimateVars {
  Var rotations;
  Var beta;
  Var camera_raw;

  Var camera() const;
  SmplParams values() const;
};

struct BlockWeights {
  Var condition;  // 229 x (H+2) d
  std::vector<UnitLayers> units;
  Var fuse_rotation;  // d x 6, shared by the H rotation rows
  Var fuse_beta;      // d x 10
  Var fuse_camera;    // d x 3
};

struct ForwardOptions {
  bool capture_traces = false;
  /// Per-block joint coordinates to use instead of the regressed ones. Since the
  /// coordinates are detached, pinning them gives the function the tape differentiates.
  std::vector<Tensor> fixed_joints_2d;
};

struct ForwardResult {
  FeaturePyramid pyramid;
  std::vector<EstimateVars> states;    // P^0 ... P^B
  std::vector<SmplParams> estimates;   // values of states
  std::vector<Tensor> joints_2d;       // block b input joints, from P^{b-1}
  std::vector<Var> targets;            // T^0 ... T^B
  std::vector<std::vector<UnitTrace>> traces;  // [block][unit] when captured
};

class SmplerModel {
 public:
  SmplerConfig config;
  BodyModel body;
  Backbone backbone;

  Var phi1;          // (h_1 w_1) x d
  Var eta_tilde;     // (r+1)^2 x 1
  Var target_pe;     // (H+2) x d
  Var init_w1, init_b1, init_w2, init_b2;
  Var target_linear;  // 229 x (H+2) d
  std::vector<BlockWeights> blocks;

  static SmplerModel create(const SmplerConfig& config, std::uint64_t seed);

  /// Every trainable tensor under its checkpoint name.
  void visit_parameters(const ParamVisitor& fn);
  std::vector<Var> parameters();

  /// Deterministic input image of the configured size.
  Tensor make_input(std::uint64_t seed) const;

  PositionalEncodings encodings() const;
  EstimateVars init_estimate(const FeaturePyramid& pyramid) const;
  Var init_target(const FeaturePyramid& pyramid, const EstimateVars& p) const;
  /// 2D joints of an estimate via the body model, without gradient.
  Tensor regress_2d(const EstimateVars& p) const;
  EstimateVars fusion(const Var& target, const EstimateVars& p, const BlockWeights& w) const;
  ForwardResult forward(const Tensor& image, const ForwardOptions& opt = {}) const;

  /// Loss of the final estimate (plus every intermediate one when configured).
  Var loss(const ForwardResult& r, const GroundTruth& gt) const;

  Container to_container();
  static SmplerModel from_container(const Container& c);
  void save(const std::filesystem::path& path);
  static SmplerModel load(const std::filesystem::path& path);
};

/// Adds N(0, stddev^2) noise to every trainable tensor (layer-norm gains around 1 included).
void perturb_parameters(SmplerModel& model, std::uint64_t seed, double stddev);

/// Length of the flattened estimate fed to the linear target maps (H 9 + 10 + 3).
std::size_t flat_param_width(std::size_t joints);
Var flatten_estimate(const EstimateVars& p);

}  // namespace smpler
