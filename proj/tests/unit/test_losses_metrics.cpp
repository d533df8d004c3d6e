#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "smpler/errors.hpp"
#include "smpler/geometry.hpp"
#include "smpler/losses.hpp"
#include "smpler/metrics.hpp"

using namespace smpler;

namespace {

Var C(Tensor t) { return Var::constant(std::move(t)); }

Tensor random_rotations(Rng& rng, std::size_t h) {
  Tensor r({h, 9});
  for (std::size_t i = 0; i < h; ++i) {
    const Rotation q = rodrigues_exp({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    std::copy(q.m.begin(), q.m.end(), r.row(i).begin());
  }
  return r;
}

Tensor identity_rotations(std::size_t h) { return SmplParams::identity(h).rotations; }

}  // namespace

// ---- losses ----------------------------------------------------------------

TEST(LossBasic, ExactPredictionIsZero) {
  Rng rng(90);
  const Tensor y = rng.normal_tensor({50, 3}), j = rng.normal_tensor({24, 3}), j2 = rng.normal_tensor({24, 2});
  EXPECT_EQ(loss_basic(C(y), y, C(j), j, C(j2), j2, {}).item(), 0.0);
}

TEST(LossBasic, UnitVertexOffset) {
  Rng rng(91);
  const Tensor y = rng.normal_tensor({50, 3}), j = rng.normal_tensor({24, 3}), j2 = rng.normal_tensor({24, 2});
  Tensor y1 = y;
  for (auto& v : y1.values()) v += 1.0;
  // Inputs near 1 do not represent +1 exactly after rounding; allow the resulting drift.
  EXPECT_NEAR(loss_basic(C(y1), y, C(j), j, C(j2), j2, {}).item(), 100.0, 1e-12);
}

TEST(LossBasic, MatchesThreeTermFormula) {
  Rng rng(92);
  const Tensor y = rng.normal_tensor({50, 3}), yh = rng.normal_tensor({50, 3});
  const Tensor j = rng.normal_tensor({24, 3}), jh = rng.normal_tensor({24, 3});
  const Tensor p = rng.normal_tensor({24, 2}), ph = rng.normal_tensor({24, 2});
  const LossWeights w{3.0, 7.0, 11.0, 0.0};
  double l1 = 0, l2 = 0, l3 = 0;
  for (std::size_t i = 0; i < y.size(); ++i) l1 += std::abs(y[i] - yh[i]);
  for (std::size_t i = 0; i < j.size(); ++i) l2 += (j[i] - jh[i]) * (j[i] - jh[i]);
  for (std::size_t i = 0; i < p.size(); ++i) l3 += (p[i] - ph[i]) * (p[i] - ph[i]);
  const double expect = 3.0 * l1 / 150.0 + 7.0 * l2 / 72.0 + 11.0 * l3 / 48.0;
  EXPECT_NEAR(loss_basic(C(y), yh, C(j), jh, C(p), ph, w).item(), expect, 1e-12);
}

TEST(LossBasic, ShapeMismatchThrows) {
  EXPECT_THROW(loss_basic(C(Tensor({5, 3})), Tensor({4, 3}), C(Tensor({2, 3})), Tensor({2, 3}), C(Tensor({2, 2})),
                          Tensor({2, 2}), {}),
               ShapeError);
}

TEST(LossRotation, IdenticalIsZero) {
  Rng rng(93);
  const Tensor r = random_rotations(rng, 24);
  EXPECT_EQ(loss_rotation(C(r), r, 50.0).item(), 0.0);
}

TEST(LossRotation, OneQuarterTurn) {
  Tensor r = identity_rotations(24);
  const Rotation rz = Rotation::about_z(std::numbers::pi / 2);
  std::copy(rz.m.begin(), rz.m.end(), r.row(3).begin());
  // I - Rz(90) has four unit entries: (1,1,0 / -1,1,0 / 0,0,0).
  EXPECT_NEAR(loss_rotation(C(r), identity_rotations(24), 50.0).item(), 50.0 / 24.0 * 4.0, 1e-12);
}

TEST(LossRotation, MatchesDirectSum) {
  Rng rng(94);
  const Tensor a = random_rotations(rng, 24), b = random_rotations(rng, 24);
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  EXPECT_NEAR(loss_rotation(C(a), b, 50.0).item(), 50.0 / 24.0 * s, 1e-12);
}

TEST(LossRotation, NonRotationInputRejected) {
  Tensor bad = identity_rotations(24);
  bad(0, 0) = 2.0;
  EXPECT_THROW(loss_rotation(C(bad), identity_rotations(24), 50.0), InvariantError);
  EXPECT_THROW(loss_rotation(C(identity_rotations(24)), bad, 50.0), InvariantError);
}

TEST(TotalLoss, SumOfTermsAndZeroCase) {
  const BodyModel m = synthesize_toy_model(1, 100);
  Rng rng(95);
  SmplParams truth = SmplParams::identity();
  truth.rotations = random_rotations(rng, 24);
  truth.camera = Tensor::from_rows({{1.1, 0.05, -0.02}});
  const GroundTruth gt = GroundTruth::from_params(m, truth);
  const Prediction exact = predict(m, C(truth.rotations), C(truth.beta), C(truth.camera));
  EXPECT_NEAR(total_loss(exact, gt, {}).item(), 0.0, 1e-12);

  SmplParams guess = truth;
  guess.rotations = random_rotations(rng, 24);
  for (std::size_t k = 0; k < kShapeDims; ++k) guess.beta[k] = rng.uniform(-1, 1);
  const Prediction p = predict(m, C(guess.rotations), C(guess.beta), C(guess.camera));
  const LossWeights w;
  const double basic = loss_basic(p.vertices, gt.vertices, p.joints3d, gt.joints3d, p.joints2d, gt.joints2d, w).item();
  const double rot = loss_rotation(p.rotations, gt.rotations, w.rotation).item();
  EXPECT_NEAR(total_loss(p, gt, w).item(), basic + rot, 1e-12);

  // matching rotations: only the basic term remains
  SmplParams shape_only = truth;
  shape_only.beta[0] = 0.5;
  const Prediction q = predict(m, C(shape_only.rotations), C(shape_only.beta), C(shape_only.camera));
  EXPECT_EQ(total_loss(q, gt, w).item(),
            loss_basic(q.vertices, gt.vertices, q.joints3d, gt.joints3d, q.joints2d, gt.joints2d, w).item());
}

TEST(LossWeights, DefaultsAndValidation) {
  const LossWeights w;
  EXPECT_EQ(w.vertices, 100.0);
  EXPECT_EQ(w.joints3d, 1000.0);
  EXPECT_EQ(w.joints2d, 100.0);
  EXPECT_EQ(w.rotation, 50.0);
  EXPECT_THROW((LossWeights{-1, 0, 0, 0}.validate()), InvariantError);
}

// ---- metrics ---------------------------------------------------------------

TEST(Mpjpe, ZeroAndTranslation) {
  Rng rng(96);
  const Tensor j = rng.normal_tensor({24, 3});
  EXPECT_EQ(mpjpe(j, j), 0.0);
  Tensor moved = j;
  for (std::size_t i = 0; i < 24; ++i) moved(i, 0) += 10.0;
  EXPECT_NEAR(mpjpe(moved, j), 10.0, 1e-12);
}

TEST(Mpjpe, MatchesPerJointNorms) {
  Rng rng(97);
  const Tensor a = rng.normal_tensor({24, 3}), b = rng.normal_tensor({24, 3});
  double s = 0;
  for (std::size_t i = 0; i < 24; ++i) {
    double d2 = 0;
    for (std::size_t k = 0; k < 3; ++k) d2 += (a(i, k) - b(i, k)) * (a(i, k) - b(i, k));
    s += std::sqrt(d2);
  }
  EXPECT_NEAR(mpjpe(a, b), s / 24, 1e-12);
  EXPECT_THROW(mpjpe(a, Tensor({23, 3})), ShapeError);
}

TEST(PaMpjpe, SimilarityInvariant) {
  Rng rng(98);
  const Tensor j = rng.normal_tensor({24, 3});
  const Similarity s{2.0, rodrigues_exp({0.4, -1.0, 0.2}), {1, -2, 3}};
  const Tensor jh = apply_similarity(s, j);
  EXPECT_LT(pa_mpjpe(j, jh), 1e-10);
  EXPECT_EQ(pa_mpjpe(j, j) < 1e-12, true);
  EXPECT_GT(mpjpe(j, jh), 0.0);
}

TEST(PaMpjpe, InvariantToTransformsOfEitherArgument) {
  Rng rng(99);
  const Tensor a = rng.normal_tensor({24, 3}), b = rng.normal_tensor({24, 3});
  const Similarity s{0.7, rodrigues_exp({1.0, 0.3, -0.2}), {0.5, 0.1, 2}};
  EXPECT_NEAR(pa_mpjpe(apply_similarity(s, a), b), pa_mpjpe(a, b), 1e-9);
  // transforming the target scales the aligned residual with it
  const Similarity rigid{1.0, s.rotation, s.translation};
  EXPECT_NEAR(pa_mpjpe(a, apply_similarity(rigid, b)), pa_mpjpe(a, b), 1e-9);
}

TEST(PaMpjpe, AlignmentNeverIncreasesSquaredResidual) {
  Rng rng(100);
  for (int k = 0; k < 20; ++k) {
    const Tensor a = rng.normal_tensor({24, 3}), b = rng.normal_tensor({24, 3});
    EXPECT_LE(sum_squared_residual(apply_similarity(procrustes_align(a, b), a), b), sum_squared_residual(a, b) + 1e-12);
  }
}

TEST(Mpve, ZeroOffsetAndFormula) {
  Rng rng(101);
  const Tensor y = rng.normal_tensor({60, 3});
  EXPECT_EQ(mpve(y, y), 0.0);
  Tensor moved = y;
  for (std::size_t i = 0; i < 60; ++i) moved(i, 2) += 5.0;
  EXPECT_NEAR(mpve(moved, y), 5.0, 1e-12);
  const Tensor z = rng.normal_tensor({60, 3});
  double s = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    double d2 = 0;
    for (std::size_t k = 0; k < 3; ++k) d2 += (z(i, k) - y(i, k)) * (z(i, k) - y(i, k));
    s += std::sqrt(d2);
  }
  EXPECT_NEAR(mpve(z, y), s / 60, 1e-12);
}

TEST(RigidInvariance, MpjpeAndMpveUnderJointTransform) {
  Rng rng(102);
  const Tensor a = rng.normal_tensor({24, 3}), b = rng.normal_tensor({24, 3});
  const Similarity rigid{1.0, rodrigues_exp({0.2, 0.9, -0.4}), {3, 0, -1}};
  EXPECT_NEAR(mpjpe(apply_similarity(rigid, a), apply_similarity(rigid, b)), mpjpe(a, b), 1e-12);
  EXPECT_NEAR(mpve(apply_similarity(rigid, a), apply_similarity(rigid, b)), mpve(a, b), 1e-12);
}

TEST(Mpre, IdentityAndQuarterTurn) {
  Rng rng(103);
  const Tensor r = random_rotations(rng, 24);
  EXPECT_LT(mpre(r, r), 1e-6);
  Tensor q({24, 9});
  const Rotation rz = Rotation::about_z(std::numbers::pi / 2);
  for (std::size_t i = 0; i < 24; ++i) std::copy(rz.m.begin(), rz.m.end(), q.row(i).begin());
  EXPECT_NEAR(mpre(q, identity_rotations(24)), 90.0, 1e-9);
}

TEST(Mpre, QuaternionOracleAndSymmetry) {
  Rng rng(104);
  const Tensor a = random_rotations(rng, 24), b = random_rotations(rng, 24);
  double s = 0;
  for (std::size_t i = 0; i < 24; ++i) {
    const Rotation ra = Rotation::from_row_major(a.row(i)), rb = Rotation::from_row_major(b.row(i));
    s += oracle::quaternion_angle_degrees((ra * rb.transposed()).m);
  }
  EXPECT_NEAR(mpre(a, b), s / 24, 1e-9);
  EXPECT_NEAR(mpre(a, b), mpre(b, a), 1e-12);
  EXPECT_GE(mpre(a, b), 0.0);
  EXPECT_LE(mpre(a, b), 180.0);
}

TEST(Mpre, NonRotationRejected) {
  Tensor bad = identity_rotations(24);
  bad(2, 4) = 0.5;
  EXPECT_THROW(mpre(bad, identity_rotations(24)), InvariantError);
}

TEST(KlDiffuseness, UniformOneHotAndDirectSum) {
  const std::vector<double> u(8, 0.125);
  EXPECT_NEAR(attention_kl_diffuseness(u), 0.0, 1e-15);
  std::vector<double> one(8, 0.0);
  one[3] = 1.0;
  EXPECT_NEAR(attention_kl_diffuseness(one), std::log(8.0), 1e-15);
  Rng rng(105);
  std::vector<double> p(10);
  double z = 0;
  for (auto& v : p) z += (v = rng.uniform());
  for (auto& v : p) v /= z;
  double s = 0;
  for (double v : p) s += v * std::log(v * 10);
  EXPECT_NEAR(attention_kl_diffuseness(p), s, 1e-12);
}

TEST(KlDiffuseness, NonDistributionRejected) {
  EXPECT_THROW(attention_kl_diffuseness(std::vector<double>{0.5, 0.6}), InvariantError);
  EXPECT_THROW(attention_kl_diffuseness(std::vector<double>{-0.1, 1.1}), InvariantError);
}
