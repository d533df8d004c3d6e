#include "smpler/trainer.hpp"

#include <cmath>

#include "smpler/errors.hpp"
#include "smpler/geometry.hpp"
#include "smpler/ops.hpp"
#include "smpler/rng.hpp"

namespace smpler {

Adam::Adam(std::vector<Var> params, AdamOptions opt) : params_(std::move(params)), opt_(opt) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (!p.has_grad()) continue;
    const Tensor& g = p.grad();
    Tensor& w = p.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
      v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
      w[k] -= opt_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps);
    }
    p.zero_grad();
  }
}

Sample make_synthetic_sample(const SmplerModel& model, std::uint64_t seed, double max_angle) {
  Rng rng(seed);
  Sample s;
  s.image = model.make_input(rng.next());
  s.params = SmplParams::identity(model.config.joints);
  for (std::size_t j = 0; j < model.config.joints; ++j) {
    Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    const double angle = max_angle * rng.uniform();
    for (auto& a : axis) a *= angle / n;
    s.params.set_rotation(j, rodrigues_exp(axis));
  }
  for (std::size_t k = 0; k < kShapeDims; ++k) s.params.beta[k] = rng.uniform(-1.0, 1.0);
  s.params.camera[0] = rng.uniform(0.8, 1.2);
  s.params.camera[1] = rng.uniform(-0.1, 0.1);
  s.params.camera[2] = rng.uniform(-0.1, 0.1);
  s.truth = GroundTruth::from_params(model.body, s.params);
  return s;
}

MetricReport sample_metrics(const SmplerModel& model, const Sample& s) {
  NoGradScope ng;
  const ForwardResult r = model.forward(s.image);
  const SmplParams& p = r.estimates.back();
  const Tensor mesh = smpl_forward(model.body, p);
  return evaluate_metrics(regress_joints(model.body, mesh), s.truth.joints3d, mesh, s.truth.vertices, p.rotations,
                          s.truth.rotations);
}

OverfitResult train_overfit(SmplerModel& model, const std::vector<Sample>& samples, std::size_t steps,
                            const AdamOptions& opt) {
  if (samples.empty()) throw InvariantError("at least one training sample", "");
  OverfitResult out;
  try {
    out.initial = sample_metrics(model, samples.front());
  } catch (const NumericDomainError&) {
    throw DivergenceError(0);
  }
  Adam adam(model.parameters(), opt);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (std::size_t step = 0; step <= steps; ++step) {
    double total = 0.0;
    try {
      Tape tape;
      TapeScope scope(tape);
      for (const auto& s : samples) {
        const Var l = scale(model.loss(model.forward(s.image), s.truth), inv_n);
        total += l.item();
        if (step < steps) tape.backward(l);
        tape.clear();
      }
    } catch (const NumericDomainError&) {
      throw DivergenceError(step);
    } catch (const InvariantError&) {
      // After step 0 the inputs are known good, so a broken invariant means the updates blew up.
      if (step == 0) throw;
      throw DivergenceError(step);
    }
    if (!std::isfinite(total)) throw DivergenceError(step);
    out.losses.push_back(total);
    if (step < steps) adam.step();
  }
  out.final = sample_metrics(model, samples.front());
  return out;
}

}  // namespace smpler
