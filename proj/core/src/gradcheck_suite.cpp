#include "smpler/gradcheck_suite.hpp"

#include <functional>

#include "smpler/attention.hpp"
#include "smpler/errors.hpp"
#include "smpler/geometry.hpp"
#include "smpler/gradcheck.hpp"
#include "smpler/losses.hpp"
#include "smpler/model.hpp"
#include "smpler/ops.hpp"
#include "smpler/rng.hpp"
#include "smpler/trainer.hpp"

namespace smpler {

namespace {

struct Check {
  std::string name;
  std::function<GradCheckResult()> run;
};

class Suite {
 public:
  Suite(const GradSuiteOptions& o) : opt_(o), rng_(o.seed), probes_(o.preset == "tiny" ? 3 : 8) {}

  Var leaf(Shape s, double lo = -1.0, double hi = 1.0) { return Var::parameter(rng_.uniform_tensor(std::move(s), lo, hi)); }
  // Entries bounded away from zero, for kinks at 0.
  Var leaf_away_from_zero(Shape s) {
    Tensor t = rng_.uniform_tensor(std::move(s), 0.3, 1.0);
    for (auto& x : t.values()) x *= rng_.uniform() < 0.5 ? -1.0 : 1.0;
    return Var::parameter(std::move(t));
  }
  // Random linear functional so no gradient component is structurally zero.
  std::function<Var(const Var&)> probe(Shape s) {
    const Var c = Var::constant(rng_.uniform_tensor(std::move(s), 0.5, 1.5));
    return [c](const Var& y) { return sum(mul(y, c)); };
  }
  AttentionLayer layer(std::size_t d, std::size_t heads) {
    AttentionLayer l = AttentionLayer::create(d, heads, rng_);
    l.visit("", [&](const std::string&, Var& v) {
      for (auto& x : v.mutable_value().values()) x += 0.3 * rng_.normal();
    });
    return l;
  }

  GradCheckResult check(const std::function<Var()>& f, std::vector<Var> leaves, std::size_t per_leaf = 0) {
    return grad_check_leaves(f, std::move(leaves), opt_.eps, per_leaf ? per_leaf : probes_);
  }

  Rng& rng() { return rng_; }
  std::size_t probes() const { return probes_; }

 private:
  GradSuiteOptions opt_;
  Rng rng_;
  std::size_t probes_;
};

std::vector<Check> build_checks(Suite& s) {
  std::vector<Check> c;
  auto unary = [&](const std::string& name, std::function<Var(const Var&)> op, double lo, double hi) {
    c.push_back({name, [&s, op, lo, hi] {
                   Var x = s.leaf({3, 4}, lo, hi);
                   auto p = s.probe({3, 4});
                   return s.check([=] { return p(op(x)); }, {x});
                 }});
  };
  unary("gelu", [](const Var& x) { return gelu(x); }, -2, 2);
  unary("softplus", [](const Var& x) { return softplus(x); }, -2, 2);
  unary("tanh", [](const Var& x) { return tanh(x); }, -2, 2);
  unary("square", [](const Var& x) { return square(x); }, -2, 2);
  unary("sqrt", [](const Var& x) { return sqrt(x); }, 0.5, 2);
  unary("scale", [](const Var& x) { return scale(x, -1.7); }, -2, 2);
  unary("add_scalar", [](const Var& x) { return square(add_scalar(x, 0.3)); }, -2, 2);
  unary("transpose", [](const Var& x) { return square(reshape(transpose(x), {3, 4})); }, -2, 2);
  unary("reshape", [](const Var& x) { return reshape(square(reshape(x, {2, 6})), {3, 4}); }, -2, 2);
  unary("softmax_rows", [](const Var& x) { return softmax_rows(x); }, -2, 2);
  c.push_back({"abs", [&s] {
                 Var x = s.leaf_away_from_zero({3, 4});
                 auto p = s.probe({3, 4});
                 return s.check([=] { return p(abs(x)); }, {x});
               }});

  auto binary = [&](const std::string& name, std::function<Var(const Var&, const Var&)> op, double blo, double bhi) {
    c.push_back({name, [&s, op, blo, bhi] {
                   Var a = s.leaf({3, 4}), b = s.leaf({3, 4}, blo, bhi);
                   auto p = s.probe({3, 4});
                   return s.check([=] { return p(op(a, b)); }, {a, b});
                 }});
  };
  binary("add", [](const Var& a, const Var& b) { return square(add(a, b)); }, -1, 1);
  binary("sub", [](const Var& a, const Var& b) { return square(sub(a, b)); }, -1, 1);
  binary("mul", [](const Var& a, const Var& b) { return mul(a, b); }, -1, 1);
  binary("div", [](const Var& a, const Var& b) { return div(a, b); }, 0.5, 2);

  c.push_back({"add_row", [&s] {
                 Var a = s.leaf({3, 4}), r = s.leaf({1, 4});
                 auto p = s.probe({3, 4});
                 return s.check([=] { return p(square(add_row(a, r))); }, {a, r});
               }});
  c.push_back({"mul_col", [&s] {
                 Var a = s.leaf({3, 4}), col = s.leaf({3, 1});
                 auto p = s.probe({3, 4});
                 return s.check([=] { return p(mul_col(a, col)); }, {a, col});
               }});
  c.push_back({"matmul", [&s] {
                 Var a = s.leaf({3, 4}), b = s.leaf({4, 5});
                 auto p = s.probe({3, 5});
                 return s.check([=] { return p(square(matmul(a, b))); }, {a, b});
               }});
  c.push_back({"matmul_nt", [&s] {
                 Var a = s.leaf({3, 4}), b = s.leaf({5, 4});
                 auto p = s.probe({3, 5});
                 return s.check([=] { return p(square(matmul_nt(a, b, 0.7))); }, {a, b});
               }});
  c.push_back({"slice_rows", [&s] {
                 Var a = s.leaf({5, 3});
                 auto p = s.probe({2, 3});
                 return s.check([=] { return p(square(slice_rows(a, 1, 3))); }, {a});
               }});
  c.push_back({"slice_cols", [&s] {
                 Var a = s.leaf({3, 5});
                 auto p = s.probe({3, 2});
                 return s.check([=] { return p(square(slice_cols(a, 2, 4))); }, {a});
               }});
  c.push_back({"concat_rows", [&s] {
                 Var a = s.leaf({2, 3}), b = s.leaf({3, 3});
                 auto p = s.probe({5, 3});
                 return s.check([=] { return p(square(concat_rows({a, b}))); }, {a, b});
               }});
  c.push_back({"concat_cols", [&s] {
                 Var a = s.leaf({3, 2}), b = s.leaf({3, 1});
                 auto p = s.probe({3, 3});
                 return s.check([=] { return p(square(concat_cols({a, b}))); }, {a, b});
               }});
  c.push_back({"row_sum", [&s] {
                 Var a = s.leaf({3, 4});
                 auto p = s.probe({3, 1});
                 return s.check([=] { return p(square(row_sum(a))); }, {a});
               }});
  c.push_back({"mean_rows", [&s] {
                 Var a = s.leaf({3, 4});
                 auto p = s.probe({1, 4});
                 return s.check([=] { return p(square(mean_rows(a))); }, {a});
               }});
  c.push_back({"sum", [&s] {
                 Var a = s.leaf({3, 4});
                 return s.check([=] { return square(sum(a)); }, {a});
               }});
  c.push_back({"mean", [&s] {
                 Var a = s.leaf({3, 4});
                 return s.check([=] { return square(mean(a)); }, {a});
               }});
  c.push_back({"layer_norm", [&s] {
                 Var x = s.leaf({3, 6}, -2, 2), g = s.leaf({1, 6}, 0.5, 1.5), b = s.leaf({1, 6});
                 auto p = s.probe({3, 6});
                 return s.check([=] { return p(square(layer_norm(x, g, b))); }, {x, g, b});
               }});
  c.push_back({"mat3_mul_rows", [&s] {
                 Var a = s.leaf({4, 9}), b = s.leaf({4, 9});
                 auto p = s.probe({4, 9});
                 return s.check([=] { return p(square(mat3_mul_rows(a, b))); }, {a, b});
               }});
  c.push_back({"affine_rows", [&s] {
                 Var t = s.leaf({4, 12}), v = s.leaf({4, 3});
                 auto p = s.probe({4, 3});
                 return s.check([=] { return p(square(affine_rows(t, v))); }, {t, v});
               }});
  c.push_back({"avg_pool2d", [&s] {
                 Var g = s.leaf({16, 2});
                 auto p = s.probe({4, 2});
                 return s.check([=] { return p(square(avg_pool2d(g, 4, 4, 2))); }, {g});
               }});
  c.push_back({"bilinear_sample", [&s] {
                 Var g = s.leaf({12, 2});
                 std::vector<GridPoint> pts;
                 for (int i = 0; i < 5; ++i) pts.push_back({s.rng().uniform(0.1, 2.9), s.rng().uniform(0.1, 3.9)});
                 auto p = s.probe({5, 2});
                 return s.check([=] { return p(square(bilinear_sample(g, 3, 4, pts))); }, {g});
               }});
  c.push_back({"gram_schmidt_rows", [&s] {
                 Var a = s.leaf({3, 6});
                 auto p = s.probe({3, 9});
                 return s.check([=] { return p(gram_schmidt_rows(a)); }, {a});
               }});

  // Body model.
  auto body = std::make_shared<BodyModel>(synthesize_toy_model(3, 72));
  c.push_back({"smpl_forward.beta", [&s, body] {
                 Var beta = s.leaf({1, kShapeDims}, -2, 2);
                 Tensor rot({kSmplJoints, 9});
                 for (std::size_t j = 0; j < kSmplJoints; ++j) {
                   const Rotation r = rodrigues_exp({s.rng().normal() * 0.4, s.rng().normal() * 0.4, s.rng().normal() * 0.4});
                   std::copy(r.m.begin(), r.m.end(), rot.row(j).begin());
                 }
                 const Var rv = Var::constant(rot);
                 auto p = s.probe({body->num_vertices(), 3});
                 return s.check([=] { return p(square(smpl_forward(*body, rv, beta))); }, {beta});
               }});
  c.push_back({"smpl_forward.rotation6d", [&s, body] {
                 Tensor codes = s.rng().uniform_tensor({kSmplJoints, 6}, -0.3, 0.3);
                 for (std::size_t j = 0; j < kSmplJoints; ++j) {
                   codes(j, 0) += 1.0;
                   codes(j, 4) += 1.0;
                 }
                 Var a = Var::parameter(codes);
                 const Var beta = Var::constant(s.rng().uniform_tensor({1, kShapeDims}, -1, 1));
                 auto p = s.probe({body->num_vertices(), 3});
                 return s.check([=] { return p(smpl_forward(*body, gram_schmidt_rows(a), beta)); }, {a});
               }});
  c.push_back({"project_weak_perspective", [&s, body] {
                 Var j = s.leaf({kSmplJoints, 3});
                 Var cam = Var::parameter(Tensor::from_rows({{1.3, 0.2, -0.1}}));
                 auto p = s.probe({kSmplJoints, 2});
                 return s.check([=] { return p(square(project_weak_perspective(j, cam))); }, {j, cam});
               }});

  // Attention variants at toy width.
  constexpr std::size_t d = 8, heads = 2;
  c.push_back({"attend", [&s] {
                 Var q = s.leaf({3, d}), k = s.leaf({5, d}), v = s.leaf({5, d}), bias = s.leaf({3, 5});
                 auto l = std::make_shared<AttentionLayer>(s.layer(d, heads));
                 std::vector<Var> leaves{q, k, v, bias};
                 l->visit("", [&](const std::string&, Var& w) { leaves.push_back(w); });
                 auto p = s.probe({3, d});
                 return s.check([=] { return p(attend(q, k, v, *l, bias)); }, leaves);
               }});
  c.push_back({"full_attention", [&s] {
                 Var t = s.leaf({3, d}), f = s.leaf({6, d});
                 auto l = std::make_shared<AttentionLayer>(s.layer(d, heads));
                 auto p = s.probe({9, d});
                 return s.check([=] { return p(full_attention(t, f, *l)); }, {t, f, l->wq, l->wk});
               }});
  c.push_back({"decoupled_attention", [&s] {
                 Var t = s.leaf({3, d}), f = s.leaf({6, d});
                 auto a = std::make_shared<AttentionLayer>(s.layer(d, heads));
                 auto b = std::make_shared<AttentionLayer>(s.layer(d, heads));
                 auto p = s.probe({3, d});
                 return s.check([=] { return p(decoupled_attention(t, f, *a, *b)); }, {t, f, a->wv, b->wq});
               }});
  c.push_back({"multiscale_attention", [&s] {
                 Var t = s.leaf({3, d}), phi = s.leaf({16, d}), f1 = s.leaf({16, d}), f2 = s.leaf({4, d});
                 auto layers = std::make_shared<std::vector<AttentionLayer>>();
                 layers->push_back(s.layer(d, heads));
                 layers->push_back(s.layer(d, heads));
                 auto p = s.probe({3, d});
                 return s.check(
                     [=] {
                       FeaturePyramid pyr{{f1, f2}, {{4, 4}, {2, 2}}};
                       return p(multiscale_attention(t, pyr, pooled_positional_encodings(phi, {4, 4}, 2), *layers));
                     },
                     {t, phi, f1, f2, (*layers)[1].wk});
               }});
  c.push_back({"multiscale_concat", [&s] {
                 Var t = s.leaf({3, d}), phi = s.leaf({16, d}), f1 = s.leaf({16, d}), f2 = s.leaf({4, d});
                 auto l = std::make_shared<AttentionLayer>(s.layer(d, heads));
                 auto p = s.probe({3, d});
                 return s.check(
                     [=] {
                       FeaturePyramid pyr{{f1, f2}, {{4, 4}, {2, 2}}};
                       return p(multiscale_concat(t, pyr, pooled_positional_encodings(phi, {4, 4}, 2), *l));
                     },
                     {t, phi, f1, f2});
               }});
  c.push_back({"joint_aware_attention", [&s] {
                 Var t = s.leaf({1, d}), f1 = s.leaf({16, d}), eta = s.leaf({9, 1});
                 auto l = std::make_shared<AttentionLayer>(s.layer(d, heads));
                 const GridPoint j{1.37, 2.21};
                 auto p = s.probe({1, d});
                 return s.check([=] { return p(joint_aware_attention(t, f1, {4, 4}, j, eta, 2, *l)); }, {t, f1, eta, l->wq});
               }});
  c.push_back({"transformer_unit", [&s] {
                 constexpr std::size_t h = 4;
                 Var t = s.leaf({h + 2, d}), f1 = s.leaf({16, d}), f2 = s.leaf({4, d}), phi = s.leaf({16, d}),
                     eta = s.leaf({9, 1}), tpe = s.leaf({h + 2, d});
                 auto unit = std::make_shared<UnitLayers>();
                 unit->cross.scales = {s.layer(d, heads), s.layer(d, heads)};
                 unit->cross.joint = s.layer(d, heads);
                 unit->self = s.layer(d, heads);
                 const Tensor joints = s.rng().uniform_tensor({h, 2}, -0.9, 0.9);
                 auto p = s.probe({h + 2, d});
                 return s.check(
                     [=] {
                       FeaturePyramid pyr{{f1, f2}, {{4, 4}, {2, 2}}};
                       PositionalEncodings pe{phi, {4, 4}, eta, 2};
                       return p(transformer_unit(t, pyr, pe, pooled_positional_encodings(phi, {4, 4}, 2), joints, *unit, tpe));
                     },
                     {t, f1, f2, phi, eta, tpe});
               }});

  // Model pieces and losses on the tiny configuration.
  const SmplerConfig tiny = SmplerConfig::preset("tiny");
  c.push_back({"init_target", [&s, tiny] {
                 auto m = std::make_shared<SmplerModel>(SmplerModel::create(tiny, 11));
                 perturb_parameters(*m, 12, 0.1);
                 FeaturePyramid pyr = m->backbone.run(m->make_input(13), tiny);
                 Var fs = Var::parameter(pyr.scales.back().value());
                 Var codes = Var::parameter(s.rng().uniform_tensor({tiny.joints, 6}, -1, 1));
                 Var beta = s.leaf({1, kShapeDims});
                 Var cam = s.leaf({1, 3});
                 auto p = s.probe({tiny.joints + 2, tiny.d});
                 return s.check(
                     [=] {
                       FeaturePyramid q = pyr;
                       q.scales.back() = fs;
                       EstimateVars e{gram_schmidt_rows(codes), beta, cam};
                       return p(m->init_target(q, e));
                     },
                     {fs, codes, beta, cam, m->target_linear});
               }});
  c.push_back({"loss_basic", [&s] {
                 Var y = s.leaf({10, 3}), j = s.leaf({4, 3}), j2 = s.leaf({4, 2});
                 const Tensor yh = s.rng().uniform_tensor({10, 3}, 2, 3);  // keeps |y - yh| away from 0
                 const Tensor jh = s.rng().uniform_tensor({4, 3}, -1, 1);
                 const Tensor j2h = s.rng().uniform_tensor({4, 2}, -1, 1);
                 return s.check([=] { return loss_basic(y, yh, j, jh, j2, j2h, LossWeights{}); }, {y, j, j2});
               }});
  c.push_back({"loss_rotation", [&s] {
                 Var codes = s.leaf({4, 6});
                 Tensor target({4, 9});
                 for (std::size_t i = 0; i < 4; ++i) {
                   const Rotation r = rodrigues_exp({s.rng().normal(), s.rng().normal(), s.rng().normal()});
                   std::copy(r.m.begin(), r.m.end(), target.row(i).begin());
                 }
                 return s.check([=] { return loss_rotation(gram_schmidt_rows(codes), target, 50.0); }, {codes});
               }});
  c.push_back({"end_to_end", [&s, tiny] {
                 auto m = std::make_shared<SmplerModel>(SmplerModel::create(tiny, 21));
                 perturb_parameters(*m, 22, 0.1);
                 auto sample = std::make_shared<Sample>(make_synthetic_sample(*m, 23, 0.6));
                 ForwardOptions fo;
                 {
                   NoGradScope ng;
                   fo.fixed_joints_2d = m->forward(sample->image).joints_2d;
                 }
                 return s.check([=] { return m->loss(m->forward(sample->image, fo), sample->truth); }, m->parameters());
               }});
  return c;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(const GradSuiteOptions& opt) {
  if (opt.preset != "default" && opt.preset != "tiny") throw InvariantError("known gradcheck preset", opt.preset);
  Suite suite(opt);
  struct Reset {
    ~Reset() { set_gradient_corruption(""); }
  } reset;
  set_gradient_corruption(opt.corrupt_op);
  std::vector<GradCheckEntry> out;
  for (auto& check : build_checks(suite)) {
    GradCheckEntry e;
    e.name = check.name;
    const GradCheckResult r = check.run();
    e.max_rel_error = r.max_rel_error;
    e.checked = r.checked;
    e.passed = r.max_rel_error < opt.tolerance;
    out.push_back(e);
  }
  return out;
}

}  // namespace smpler
