// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
// Every tolerance and time limit below is fixed here, not read from the environment.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "scene.hpp"
#include "smpler/attention.hpp"
#include "smpler/bench.hpp"
#include "smpler/body_model.hpp"
#include "smpler/geometry.hpp"
#include "smpler/gradcheck_suite.hpp"
#include "smpler/metrics.hpp"
#include "smpler/model.hpp"
#include "smpler/ops.hpp"
#include "smpler/trainer.hpp"

using namespace smpler;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Collects failed checks; the first few messages end up on the result line.
struct Checker {
  Outcome out;
  int failures = 0;
  void require(bool cond, const std::string& what) {
    if (cond) return;
    out.ok = false;
    if (++failures <= 3) out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) {
    if (out.ok) out.detail += (out.detail.empty() ? "" : "; ") + s;
  }
};

std::string format(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string g(double v) { return format("%.3g", v); }

Var C(Tensor t) { return Var::constant(std::move(t)); }

double max_row_sum_error(const Tensor& w) {
  double worst = 0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0;
    for (double v : w.row(i)) {
      if (v < 0) return 1.0;
      s += v;
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

Rotation uniform_rotation(Rng& rng) {
  // normalized Gaussian quaternion
  double q[4];
  double n = 0;
  for (double& v : q) {
    v = rng.normal();
    n += v * v;
  }
  n = std::sqrt(n);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Rotation r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  return r;
}

// Best residual of x -> s x R + t for a fixed R, with s >= 0 and t optimal.
double residual_for_rotation(const Tensor& x, const Tensor& y, const Rotation& r) {
  const std::size_t n = x.rows();
  double mx[3] = {0, 0, 0}, my[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) {
      mx[k] += x(i, k) / static_cast<double>(n);
      my[k] += y(i, k) / static_cast<double>(n);
    }
  double num = 0, den = 0;
  std::vector<std::array<double, 3>> xr(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      double v = 0;
      for (int k = 0; k < 3; ++k) v += (x(i, k) - mx[k]) * r(k, c);
      xr[i][c] = v;
      num += v * (y(i, c) - my[c]);
      den += v * v;
    }
  }
  const double s = std::max(0.0, num / den);
  double res = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      const double e = s * xr[i][c] - (y(i, c) - my[c]);
      res += e * e;
    }
  return res;
}

// ---- criteria ---------------------------------------------------------------

Outcome complexity() {
  Checker ck;
  const std::vector<std::size_t> sweep{256, 512, 1024, 2048, 4096};
  std::vector<CostReport> full, dec;
  for (std::size_t l : sweep) {
    BenchDims dims;
    dims.l_f = l;
    full.push_back(measure_attention(Variant::kFull, dims));
    dec.push_back(measure_attention(Variant::kDecoupled, dims));
  }
  const double sf = fit_scaling_exponent(full), sd = fit_scaling_exponent(dec);
  ck.require(std::abs(sf - 2.0) <= 0.1, "full slope " + g(sf));
  ck.require(std::abs(sd - 1.0) <= 0.1, "decoupled slope " + g(sd));

  BenchDims pyr;
  pyr.scale_tokens = {3136, 784, 196, 49};
  pyr.l_f = 3136 + 784 + 196 + 49;
  const CostReport f = measure_attention(Variant::kFull, pyr);
  const CostReport m = measure_attention(Variant::kMultiscale, pyr);
  const double ratio = static_cast<double>(f.flops) / static_cast<double>(m.flops);
  ck.require(ratio > 2.0, "pyramid ratio " + g(ratio));
  ck.note("slopes full " + g(sf) + " decoupled " + g(sd) + ", pyramid full/multiscale " + g(ratio));
  return ck.out;
}

Outcome gradients() {
  Checker ck;
  GradSuiteOptions opt;
  opt.preset = "tiny";
  const auto entries = run_gradcheck_suite(opt);
  ck.require(!entries.empty(), "empty suite");
  double worst = 0;
  for (const auto& e : entries) {
    worst = std::max(worst, e.max_rel_error);
    ck.require(e.checked > 0, e.name + " checked nothing");
    ck.require(e.max_rel_error < 1e-4, e.name + " rel error " + g(e.max_rel_error));
  }
  ck.note(format("%zu checks, worst rel error %.3g", entries.size(), worst));
  return ck.out;
}

Outcome so3_integrity() {
  Checker ck;
  Rng rng(1001);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    std::array<double, 6> a;
    for (auto& v : a) v = rng.normal();
    const Rotation r = gram_schmidt_so3(a);
    worst = std::max({worst, r.orthogonality_error(), std::abs(r.determinant() - 1.0)});
  }
  ck.require(worst < 1e-9, "gram-schmidt error " + g(worst));
  double worst_exp = 0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::hypot(axis[0], axis[1], axis[2]), angle = rng.uniform(0, kPi);
    for (auto& v : axis) v *= angle / n;
    const Rotation r = rodrigues_exp(axis);
    worst_exp = std::max({worst_exp, r.orthogonality_error(), std::abs(r.determinant() - 1.0)});
  }
  ck.require(worst_exp < 1e-9, "rodrigues error " + g(worst_exp));
  double worst_log = 0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::hypot(axis[0], axis[1], axis[2]), angle = rng.uniform(0.01, kPi - 0.01);
    for (auto& v : axis) v *= angle / n;
    const Vec3 back = so3_log(rodrigues_exp(axis));
    for (int k = 0; k < 3; ++k) worst_log = std::max(worst_log, std::abs(back[k] - axis[k]));
  }
  ck.require(worst_log < 1e-9, "log round trip " + g(worst_log));
  ck.note("orthogonality/det " + g(std::max(worst, worst_exp)) + ", round trip " + g(worst_log));
  return ck.out;
}

Outcome metric_oracles() {
  Checker ck;
  Rng rng(1002);
  double worst_pa = 0;
  for (int i = 0; i < 100; ++i) {
    const Tensor j = rng.normal_tensor({24, 3});
    const Similarity s{std::exp(rng.uniform(std::log(0.1), std::log(10.0))), uniform_rotation(rng),
                       {rng.normal(), rng.normal(), rng.normal()}};
    const Tensor jt = apply_similarity(s, j);
    worst_pa = std::max({worst_pa, pa_mpjpe(jt, j), pa_mpjpe(j, jt)});
  }
  ck.require(worst_pa < 1e-10, "pa-mpjpe under similarity " + g(worst_pa));

  int beaten = 0;
  for (int i = 0; i < 100; ++i) {
    const Tensor x = rng.normal_tensor({24, 3});
    const Similarity s{rng.uniform(0.5, 2.0), uniform_rotation(rng), {rng.normal(), rng.normal(), rng.normal()}};
    Tensor y = apply_similarity(s, x);
    for (double& v : y.values()) v += 0.3 * rng.normal();
    const double closed = sum_squared_residual(apply_similarity(procrustes_align(x, y), x), y);
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 10000; ++c) best = std::min(best, residual_for_rotation(x, y, uniform_rotation(rng)));
    if (closed > best * (1 + 1e-12) + 1e-12) ++beaten;
  }
  ck.require(beaten == 0, format("random search beat closed form on %d instances", beaten));

  double worst_mpre = 0;
  for (int i = 0; i < 100; ++i) {
    Tensor a({24, 9}), b({24, 9});
    double sum = 0;
    for (std::size_t k = 0; k < 24; ++k) {
      const Rotation ra = uniform_rotation(rng), rb = uniform_rotation(rng);
      std::copy(ra.m.begin(), ra.m.end(), a.row(k).begin());
      std::copy(rb.m.begin(), rb.m.end(), b.row(k).begin());
      sum += oracle::quaternion_angle_degrees((ra.transposed() * rb).m);
    }
    worst_mpre = std::max(worst_mpre, std::abs(mpre(a, b) - sum / 24));
  }
  ck.require(worst_mpre < 1e-9, "mpre vs quaternion oracle " + g(worst_mpre));

  Tensor a({24, 9}), b({24, 9});
  for (std::size_t k = 0; k < 24; ++k) {
    const Rotation base = uniform_rotation(rng);
    const double c = kPi / 2 / std::sqrt(3.0);  // quarter turn about (1, -1, 1)
    const Rotation turned = base * rodrigues_exp({c, -c, c});
    std::copy(base.m.begin(), base.m.end(), a.row(k).begin());
    std::copy(turned.m.begin(), turned.m.end(), b.row(k).begin());
  }
  const double ninety = mpre(a, b);
  ck.require(std::abs(ninety - 90.0) <= 1e-9, format("90 degree case gave %.17g", ninety));
  ck.note("pa-mpjpe " + g(worst_pa) + ", mpre " + g(worst_mpre) + ", 90 deg case off by " + g(std::abs(ninety - 90)));
  return ck.out;
}

Outcome architecture_identities() {
  Checker ck;
  const auto same_estimate = [](const ForwardResult& r) {
    const SmplParams& a = r.estimates.front();
    const SmplParams& b = r.estimates.back();
    return a.rotations == b.rotations && a.beta == b.beta && a.camera == b.camera;
  };
  {
    const SmplerModel m = SmplerModel::create(SmplerConfig::preset("default"), 0);
    ck.require(same_estimate(m.forward(m.make_input(1))), "fresh default model changed its estimate");
  }
  {
    SmplerModel m = SmplerModel::create(SmplerConfig::preset("toy"), 1);
    perturb_parameters(m, 2, 0.1);
    for (auto& b : m.blocks) {
      b.fuse_rotation = Var::parameter(Tensor(b.fuse_rotation.shape()));
      b.fuse_beta = Var::parameter(Tensor(b.fuse_beta.shape()));
      b.fuse_camera = Var::parameter(Tensor(b.fuse_camera.shape()));
    }
    ck.require(same_estimate(m.forward(m.make_input(3))), "perturbed model with zero fusion changed its estimate");
  }

  double worst_pe = 0, worst_rows = 0;
  int mismatched = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const oracle::Scene sc = oracle::make_scene(2000 + i, std::size_t{1} << (i / 3 % 3), 1 + i % 3, 2 + 2 * (i % 2));
    const Tensor ms = multiscale_attention(sc.t, sc.pyr, sc.enc, sc.layers.scales).value();
    UnitTrace ut;
    const Tensor co = combined_attention(sc.t, sc.pyr, sc.pe, sc.enc, sc.joints, sc.layers, &ut).value();
    for (std::size_t r = sc.h; r < sc.h + 2; ++r)
      for (std::size_t c = 0; c < sc.d; ++c)
        if (co(r, c) != ms(r, c)) ++mismatched;

    for (std::size_t k = 1; k < sc.s; ++k) {
      const Tensor direct = avg_pool2d_values(sc.pe.phi1.value(), sc.g1.h, sc.g1.w, std::size_t{1} << k);
      worst_pe = std::max(worst_pe, max_abs_diff(direct, sc.enc[k].value()));
    }

    for (const auto& s : ut.scales) worst_rows = std::max(worst_rows, max_row_sum_error(s.weights));
    for (const auto& j : ut.joints) worst_rows = std::max(worst_rows, max_row_sum_error(j.weights));

    Rng rng(3000 + i);
    UnitLayers u{sc.layers, oracle::random_layer(sc.d, sc.heads, rng)};
    UnitTrace unit;
    transformer_unit(sc.t, sc.pyr, sc.pe, sc.enc, sc.joints, u, {}, &unit);
    worst_rows = std::max(worst_rows, max_row_sum_error(unit.self.weights));

    AttentionTrace full, concat, cross, self;
    full.keep_heads = concat.keep_heads = cross.keep_heads = self.keep_heads = true;
    full_attention(sc.t, sc.pyr.scales[0], sc.layers.scales[0], &full);
    multiscale_concat(sc.t, sc.pyr, sc.enc, sc.layers.scales[0], &concat);
    const Var x = attend(sc.t, sc.pyr.scales[0], sc.pyr.scales[0], sc.layers.scales[0], {}, &cross);
    attend(x, x, x, u.self, {}, &self);
    for (const AttentionTrace* tr : {&full, &concat, &cross, &self}) {
      worst_rows = std::max(worst_rows, max_row_sum_error(tr->weights));
      for (const Tensor& h : tr->per_head) worst_rows = std::max(worst_rows, max_row_sum_error(h));
    }
  }
  ck.require(mismatched == 0, format("%d shape/camera entries differ from multi-scale", mismatched));
  ck.require(worst_pe <= 1e-12, "pooled encodings differ by " + g(worst_pe));
  ck.require(worst_rows <= 1e-12, "attention row sums off by " + g(worst_rows));
  ck.note("pooled encodings " + g(worst_pe) + ", row sums " + g(worst_rows));
  return ck.out;
}

Outcome oracle_equivalence() {
  Checker ck;
  double ms = 0, cc = 0, ja = 0, dec = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const oracle::Scene sc = oracle::make_scene(4000 + i, std::size_t{1} << (i / 3 % 3), 1 + i % 3, 2 + 2 * (i % 2));
    ms = std::max(ms, oracle::max_abs_diff(oracle::ms_oracle(sc),
                                           multiscale_attention(sc.t, sc.pyr, sc.enc, sc.layers.scales).value()));
    cc = std::max(cc, oracle::max_abs_diff(oracle::concat_oracle(sc),
                                           multiscale_concat(sc.t, sc.pyr, sc.enc, sc.layers.scales[0]).value()));
    const Tensor rows =
        joint_aware_rows(sc.t, sc.pyr.scales[0], sc.g1, sc.joints, sc.pe.eta_tilde, sc.r, sc.layers.joint).value();
    for (std::size_t j = 0; j < sc.h; ++j) {
      const oracle::Mat ref = oracle::ja_oracle(sc, j);
      const GridPoint p = joint_to_grid(sc.joints(j, 0), sc.joints(j, 1), sc.g1);
      const Tensor one = joint_aware_attention(slice_rows(sc.t, j, j + 1), sc.pyr.scales[0], sc.g1, p,
                                               sc.pe.eta_tilde, sc.r, sc.layers.joint)
                             .value();
      ja = std::max(ja, oracle::max_abs_diff(ref, one));
      for (std::size_t c = 0; c < sc.d; ++c) ja = std::max(ja, std::abs(ref[0][c] - rows(j, c)));
    }
    Rng rng(5000 + i);
    const AttentionLayer self = oracle::random_layer(sc.d, sc.heads, rng);
    const Var& f = sc.pyr.scales[0];
    const oracle::Mat fm = oracle::to_mat(f.value());
    const oracle::Mat x = oracle::attend(oracle::to_mat(sc.t.value()), fm, fm, sc.layers.scales[0]);
    dec = std::max(dec, oracle::max_abs_diff(oracle::attend(x, x, x, self),
                                             decoupled_attention(sc.t, f, sc.layers.scales[0], self).value()));
  }
  ck.require(ms <= 1e-12, "multiscale " + g(ms));
  ck.require(cc <= 1e-12, "concat " + g(cc));
  ck.require(ja <= 1e-12, "joint-aware " + g(ja));
  ck.require(dec <= 1e-12, "decoupled " + g(dec));
  ck.note("max diffs multiscale " + g(ms) + " concat " + g(cc) + " joint-aware " + g(ja) + " decoupled " + g(dec));
  return ck.out;
}

Outcome overfit() {
  Checker ck;
  const auto run = [] {
    SmplerModel m = SmplerModel::create(SmplerConfig::preset("toy"), 0);
    const Sample s = make_synthetic_sample(m, 1);
    return train_overfit(m, {s}, 300, AdamOptions{1e-3});
  };
  const OverfitResult a = run(), b = run();
  ck.require(a.losses == b.losses, "loss curves differ between identical runs");
  const double ratio = a.losses.back() / a.losses.front();
  ck.require(ratio <= 0.1, "final/initial loss " + g(ratio));
  ck.require(a.final.mpjpe < a.initial.mpjpe, "mpjpe did not drop");
  ck.require(a.final.mpre < a.initial.mpre, "mpre did not drop");
  ck.note("loss ratio " + g(ratio) + ", mpjpe " + g(a.initial.mpjpe) + " -> " + g(a.final.mpjpe) + ", mpre " +
          g(a.initial.mpre) + " -> " + g(a.final.mpre));
  return ck.out;
}

Outcome body_model() {
  Checker ck;
  const BodyModel m = synthesize_toy_model(0, 600);
  ck.require(smpl_forward(m, SmplParams::identity()) == m.template_vertices, "identity pose moved the template");

  Rng rng(1008);
  const auto random_params = [&rng] {
    SmplParams p = SmplParams::identity();
    for (std::size_t j = 0; j < kSmplJoints; ++j)
      p.set_rotation(j, rodrigues_exp({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}));
    for (std::size_t k = 0; k < kShapeDims; ++k) p.beta[k] = rng.uniform(-1, 1);
    return p;
  };
  double eq = 0, lin = 0;
  for (int k = 0; k < 20; ++k) {
    const SmplParams p = random_params();
    const Tensor y = smpl_forward(m, p);
    const Rotation q = uniform_rotation(rng);
    SmplParams p2 = p;
    p2.set_rotation(0, q * p.rotation(0));
    const Tensor y2 = smpl_forward(m, p2);
    const Tensor j = m.rest_joints(p.beta);
    for (std::size_t v = 0; v < m.num_vertices(); ++v) {
      const Vec3 r = q.apply({y(v, 0) - j(0, 0), y(v, 1) - j(0, 1), y(v, 2) - j(0, 2)});
      for (std::size_t i = 0; i < 3; ++i) eq = std::max(eq, std::abs(y2(v, i) - (r[i] + j(0, i))));
    }

    SmplParams a = p, b = p, ab = p, zero = p;
    for (std::size_t s = 0; s < kShapeDims; ++s) {
      a.beta[s] = rng.uniform(-1, 1);
      b.beta[s] = rng.uniform(-1, 1);
      ab.beta[s] = a.beta[s] + b.beta[s];
      zero.beta[s] = 0;
    }
    const Tensor fa = smpl_forward(m, a), fb = smpl_forward(m, b), fab = smpl_forward(m, ab), f0 = smpl_forward(m, zero);
    for (std::size_t i = 0; i < fa.size(); ++i) lin = std::max(lin, std::abs(fa[i] + fb[i] - f0[i] - fab[i]));
  }
  ck.require(eq <= 1e-10, "equivariance " + g(eq));
  ck.require(lin <= 1e-10, "shape linearity " + g(lin));
  ck.note("equivariance " + g(eq) + ", shape linearity " + g(lin));
  return ck.out;
}

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "complexity scaling", 120, complexity},
      {2, "gradient suite", 60, gradients},
      {3, "SO(3) integrity", 0, so3_integrity},
      {4, "metric oracles", 0, metric_oracles},
      {5, "architecture identities", 0, architecture_identities},
      {6, "oracle equivalence", 0, oracle_equivalence},
      {7, "overfit", 300, overfit},
      {8, "body model", 0, body_model},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit_s > 0 && secs > c.time_limit_s) {
      o.ok = false;
      o.detail += format("; took %.1f s, limit %.0f s", secs, c.time_limit_s);
    }
    if (!o.ok) ++failed;
    std::printf("%s criterion %d (%s) [%.1f s]: %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
