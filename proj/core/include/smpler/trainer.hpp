#pragma once

#include <cstdint>
#include <vector>

#include "smpler/metrics.hpp"
#include "smpler/model.hpp"

namespace smpler {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Var> params, AdamOptions opt);
  /// Applies one update from the parameters' current gradients, then clears them.
  void step();
  std::size_t steps() const { return t_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  AdamOptions opt_;
  std::size_t t_ = 0;
};

struct Sample {
  Tensor image;
  SmplParams params;
  GroundTruth truth;
};

/// Known parameters drawn from `seed`: axis-angle rotations with norm up to
/// max_angle, small shape and camera offsets, and a random input image.
Sample make_synthetic_sample(const SmplerModel& model, std::uint64_t seed, double max_angle = 0.5);

struct OverfitResult {
  std::vector<double> losses;  // losses[k] is the loss before update k + 1
  MetricReport initial;
  MetricReport final;
};

MetricReport sample_metrics(const SmplerModel& model, const Sample& s);

/// Full-batch training on `samples`. Throws DivergenceError with the step index
/// if the loss stops being finite.
OverfitResult train_overfit(SmplerModel& model, const std::vector<Sample>& samples, std::size_t steps,
                            const AdamOptions& opt = {});

}  // namespace smpler
