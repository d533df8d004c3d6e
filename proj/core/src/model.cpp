#include "smpler/model.hpp"

#include <cmath>
#include <numbers>

#include "smpler/errors.hpp"
#include "smpler/geometry.hpp"
#include "smpler/ops.hpp"
#include "smpler/rng.hpp"

namespace smpler {

namespace {

Var uniform_param(Rng& rng, std::size_t rows, std::size_t cols) {
  const double b = 1.0 / std::sqrt(static_cast<double>(rows));
  return Var::parameter(rng.uniform_tensor({rows, cols}, -b, b));
}

Var zeros_param(std::size_t rows, std::size_t cols) { return Var::parameter(Tensor({rows, cols})); }

// softplus(x) = 1 at x = ln(e - 1)
const double kUnitScaleRaw = std::log(std::numbers::e - 1.0);

Tensor estimate_offset(std::size_t joints) {
  Tensor t({1, 6 * joints + 13});
  for (std::size_t j = 0; j < joints; ++j) {
    t[6 * j] = 1.0;
    t[6 * j + 4] = 1.0;
  }
  t[6 * joints + 10] = kUnitScaleRaw;
  return t;
}

Tensor gather_blocks(const Tensor& src, std::size_t src_w, std::size_t out_h, std::size_t out_w, std::size_t k) {
  const std::size_t c = src.cols();
  Tensor out({out_h * out_w, k * k * c});
  for (std::size_t i = 0; i < out_h; ++i)
    for (std::size_t j = 0; j < out_w; ++j) {
      double* o = out.data() + (i * out_w + j) * k * k * c;
      for (std::size_t dy = 0; dy < k; ++dy)
        for (std::size_t dx = 0; dx < k; ++dx) {
          auto in = src.row((i * k + dy) * src_w + j * k + dx);
          std::copy(in.begin(), in.end(), o + (dy * k + dx) * c);
        }
    }
  return out;
}

Tensor tanh_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul_values(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) = std::tanh(y(i, j) + b[j]);
  return y;
}

void read_param(const Container& c, const std::string& name, Var& v) {
  Tensor t = c.tensor(name);
  if (t.shape() != v.shape()) {
    throw InvariantError("checkpoint tensor '" + name + "' has shape " + shape_string(v.shape()),
                         shape_string(t.shape()));
  }
  require_finite(t, "checkpoint tensor");
  v = Var::parameter(std::move(t));
}

}  // namespace

Backbone Backbone::create(const SmplerConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Backbone b;
  for (std::size_t i = 0; i < c.scales; ++i) {
    const std::size_t fan_in = i == 0 ? 48 : 4 * c.d;
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    b.weights.push_back(rng.uniform_tensor({fan_in, c.d}, -bound, bound));
    b.biases.push_back(rng.uniform_tensor({1, c.d}, -0.5, 0.5));
  }
  return b;
}

FeaturePyramid Backbone::run(const Tensor& image, const SmplerConfig& c) const {
  const std::size_t s = c.image_size();
  if (image.rank() != 2 || image.rows() != s * s || image.cols() != 3) {
    throw ShapeError("backbone expects a (" + std::to_string(s) + "*" + std::to_string(s) + ") x 3 image, got " +
                     shape_string(image.shape()));
  }
  require_finite(image, "backbone input");
  if (weights.size() != c.scales) throw InvariantError("one backbone stage per scale", "");
  FeaturePyramid p;
  p.grids = c.grids();
  Tensor x = tanh_affine(gather_blocks(image, s, c.grid, c.grid, 4), weights[0], biases[0]);
  p.scales.push_back(Var::constant(x));
  for (std::size_t i = 1; i < c.scales; ++i) {
    x = tanh_affine(gather_blocks(x, p.grids[i - 1].w, p.grids[i].h, p.grids[i].w, 2), weights[i], biases[i]);
    p.scales.push_back(Var::constant(x));
  }
  return p;
}

Var EstimateVars::camera() const {
  return concat_cols({softplus(slice_cols(camera_raw, 0, 1)), slice_cols(camera_raw, 1, 3)});
}

SmplParams EstimateVars::values() const {
  SmplParams p;
  p.rotations = rotations.value();
  p.beta = beta.value().reshaped({1, kShapeDims});
  NoGradScope ng;
  p.camera = camera().value();
  return p;
}

std::size_t flat_param_width(std::size_t joints) { return 9 * joints + kShapeDims + 3; }

Var flatten_estimate(const EstimateVars& p) {
  const std::size_t h = p.rotations.rows();
  return concat_cols({reshape(p.rotations, {1, 9 * h}), reshape(p.beta, {1, kShapeDims}), p.camera()});
}

SmplerModel SmplerModel::create(const SmplerConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  SmplerModel m;
  m.config = config;
  m.body = synthesize_toy_model(config.body_seed, config.n_vertices);
  m.backbone = Backbone::create(config, rng.next());
  const std::size_t d = config.d, h = config.joints, rows = h + 2;
  const std::size_t flat = flat_param_width(h);
  m.phi1 = zeros_param(config.grid * config.grid, d);
  m.eta_tilde = zeros_param((config.r + 1) * (config.r + 1), 1);
  m.target_pe = zeros_param(rows, d);
  m.init_w1 = uniform_param(rng, d, d);
  m.init_b1 = zeros_param(1, d);
  m.init_w2 = zeros_param(d, 6 * h + 13);
  m.init_b2 = Var::parameter(estimate_offset(h));
  m.target_linear = uniform_param(rng, flat, rows * d);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    BlockWeights w;
    w.condition = uniform_param(rng, flat, rows * d);
    for (std::size_t u = 0; u < config.units; ++u) {
      UnitLayers unit;
      for (std::size_t s = 0; s < config.scales; ++s) unit.cross.scales.push_back(AttentionLayer::create(d, config.heads, rng));
      unit.cross.joint = AttentionLayer::create(d, config.heads, rng);
      unit.self = AttentionLayer::create(d, config.heads, rng);
      w.units.push_back(std::move(unit));
    }
    w.fuse_rotation = zeros_param(d, 6);
    w.fuse_beta = zeros_param(d, kShapeDims);
    w.fuse_camera = zeros_param(d, 3);
    m.blocks.push_back(std::move(w));
  }
  return m;
}

void SmplerModel::visit_parameters(const ParamVisitor& fn) {
  fn("phi1", phi1);
  fn("eta_tilde", eta_tilde);
  fn("target_pe", target_pe);
  fn("init.W1", init_w1);
  fn("init.b1", init_b1);
  fn("init.W2", init_w2);
  fn("init.b2", init_b2);
  fn("target.linear", target_linear);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "block." + std::to_string(b) + ".";
    fn(p + "condition", blocks[b].condition);
    for (std::size_t u = 0; u < blocks[b].units.size(); ++u) {
      blocks[b].units[u].visit(p + "unit." + std::to_string(u) + ".", fn);
    }
    fn(p + "fuse.rotation", blocks[b].fuse_rotation);
    fn(p + "fuse.beta", blocks[b].fuse_beta);
    fn(p + "fuse.camera", blocks[b].fuse_camera);
  }
}

std::vector<Var> SmplerModel::parameters() {
  std::vector<Var> out;
  visit_parameters([&](const std::string&, Var& v) { out.push_back(v); });
  return out;
}

Tensor SmplerModel::make_input(std::uint64_t seed) const {
  Rng rng(seed);
  const std::size_t s = config.image_size();
  return rng.uniform_tensor({s * s, 3}, 0.0, 1.0);
}

PositionalEncodings SmplerModel::encodings() const {
  return {phi1, GridShape{config.grid, config.grid}, eta_tilde, config.r};
}

EstimateVars SmplerModel::init_estimate(const FeaturePyramid& pyramid) const {
  if (pyramid.size() == 0) throw InvariantError("pyramid has S >= 1 scales", "");
  const std::size_t h = config.joints;
  const Var pooled = mean_rows(pyramid.scales.back());
  const Var hidden = gelu(add_row(matmul(pooled, init_w1), init_b1));
  const Var out = add_row(matmul(hidden, init_w2), init_b2);
  EstimateVars p;
  p.rotations = gram_schmidt_rows(reshape(slice_cols(out, 0, 6 * h), {h, 6}));
  p.beta = slice_cols(out, 6 * h, 6 * h + kShapeDims);
  p.camera_raw = slice_cols(out, 6 * h + kShapeDims, 6 * h + kShapeDims + 3);
  return p;
}

Var SmplerModel::init_target(const FeaturePyramid& pyramid, const EstimateVars& p) const {
  const Var pooled = mean_rows(pyramid.scales.back());
  const Var lin = reshape(matmul(flatten_estimate(p), target_linear), {config.joints + 2, config.d});
  return add_row(lin, pooled);
}

Tensor SmplerModel::regress_2d(const EstimateVars& p) const {
  NoGradScope ng;
  const Tensor mesh = smpl_forward(body, Var::constant(p.rotations.value()), Var::constant(p.beta.value())).value();
  return project_weak_perspective(regress_joints(body, mesh), p.camera().value());
}

EstimateVars SmplerModel::fusion(const Var& target, const EstimateVars& p, const BlockWeights& w) const {
  const std::size_t h = config.joints;
  if (target.rows() != h + 2 || target.cols() != config.d) throw ShapeError("fusion: target must be (H+2) x d");
  static const std::array<double, 6> kIdentityCode{1, 0, 0, 0, 1, 0};
  const Var offset = Var::constant(Tensor::row_vector(kIdentityCode));
  const Var codes = add_row(matmul(slice_rows(target, 0, h), w.fuse_rotation), offset);
  EstimateVars out;
  out.rotations = mat3_mul_rows(gram_schmidt_rows(codes), p.rotations);
  out.beta = add(p.beta, matmul(slice_rows(target, h, h + 1), w.fuse_beta));
  out.camera_raw = add(p.camera_raw, matmul(slice_rows(target, h + 1, h + 2), w.fuse_camera));
  return out;
}

ForwardResult SmplerModel::forward(const Tensor& image, const ForwardOptions& opt) const {
  ForwardResult r;
  r.pyramid = backbone.run(image, config);
  r.pyramid.validate();
  const PositionalEncodings pe = encodings();
  const std::vector<Var> enc = pooled_positional_encodings(phi1, pe.grid1, config.scales);

  EstimateVars p = init_estimate(r.pyramid);
  Var t = init_target(r.pyramid, p);
  r.states.push_back(p);
  r.targets.push_back(t);
  for (const auto& block : blocks) {
    const std::size_t bi = r.joints_2d.size();
    const Tensor joints = bi < opt.fixed_joints_2d.size() ? opt.fixed_joints_2d[bi] : regress_2d(p);
    r.joints_2d.push_back(joints);
    t = add(t, reshape(matmul(flatten_estimate(p), block.condition), {config.joints + 2, config.d}));
    std::vector<UnitTrace> traces(opt.capture_traces ? block.units.size() : 0);
    for (std::size_t u = 0; u < block.units.size(); ++u) {
      t = transformer_unit(t, r.pyramid, pe, enc, joints, block.units[u], target_pe,
                           opt.capture_traces ? &traces[u] : nullptr);
    }
    p = fusion(t, p, block);
    r.states.push_back(p);
    r.targets.push_back(t);
    r.traces.push_back(std::move(traces));
  }
  for (const auto& s : r.states) r.estimates.push_back(s.values());
  return r;
}

Var SmplerModel::loss(const ForwardResult& r, const GroundTruth& gt) const {
  const std::size_t last = r.states.size() - 1;
  const std::size_t first = config.intermediate_supervision ? 1 : last;
  Var total;
  for (std::size_t b = first; b <= last; ++b) {
    const auto& s = r.states[b];
    const Var l = total_loss(predict(body, s.rotations, s.beta, s.camera()), gt, config.loss);
    total = total ? add(total, l) : l;
  }
  return total;
}

Container SmplerModel::to_container() {
  Container c;
  c.put_i64("config.blocks", static_cast<std::int64_t>(config.blocks));
  c.put_i64("config.units", static_cast<std::int64_t>(config.units));
  c.put_i64("config.heads", static_cast<std::int64_t>(config.heads));
  c.put_i64("config.d", static_cast<std::int64_t>(config.d));
  c.put_i64("config.scales", static_cast<std::int64_t>(config.scales));
  c.put_i64("config.r", static_cast<std::int64_t>(config.r));
  c.put_i64("config.joints", static_cast<std::int64_t>(config.joints));
  c.put_i64("config.grid", static_cast<std::int64_t>(config.grid));
  c.put_i64("config.n_vertices", static_cast<std::int64_t>(config.n_vertices));
  c.put_i64("config.body_seed", static_cast<std::int64_t>(config.body_seed));
  c.put_i64("config.intermediate_supervision", config.intermediate_supervision ? 1 : 0);
  c.put_f64("config.w_Y", config.loss.vertices);
  c.put_f64("config.w_J", config.loss.joints3d);
  c.put_f64("config.w_2D", config.loss.joints2d);
  c.put_f64("config.w_R", config.loss.rotation);
  store_body_model(body, c, "body.");
  for (std::size_t i = 0; i < backbone.weights.size(); ++i) {
    c.put("backbone." + std::to_string(i) + ".W", backbone.weights[i]);
    c.put("backbone." + std::to_string(i) + ".b", backbone.biases[i]);
  }
  visit_parameters([&](const std::string& name, Var& v) { c.put(name, v.value()); });
  return c;
}

SmplerModel SmplerModel::from_container(const Container& c) {
  auto count = [&](const char* key) {
    const std::int64_t v = c.i64(std::string("config.") + key);
    if (v < 0) throw InvariantError(std::string("config.") + key + " >= 0", std::to_string(v));
    return static_cast<std::size_t>(v);
  };
  SmplerConfig cfg;
  cfg.blocks = count("blocks");
  cfg.units = count("units");
  cfg.heads = count("heads");
  cfg.d = count("d");
  cfg.scales = count("scales");
  cfg.r = count("r");
  cfg.joints = count("joints");
  cfg.grid = count("grid");
  cfg.n_vertices = count("n_vertices");
  cfg.body_seed = count("body_seed");
  cfg.intermediate_supervision = count("intermediate_supervision") != 0;
  cfg.loss.vertices = c.f64("config.w_Y");
  cfg.loss.joints3d = c.f64("config.w_J");
  cfg.loss.joints2d = c.f64("config.w_2D");
  cfg.loss.rotation = c.f64("config.w_R");
  cfg.validate();

  SmplerModel m = create(cfg, 0);
  m.body = read_body_model(c, "body.");
  if (m.body.num_joints() != cfg.joints) throw InvariantError("body model has H joints", "");
  for (std::size_t i = 0; i < cfg.scales; ++i) {
    const Tensor w = c.tensor("backbone." + std::to_string(i) + ".W");
    const Tensor b = c.tensor("backbone." + std::to_string(i) + ".b");
    if (w.shape() != m.backbone.weights[i].shape() || b.shape() != m.backbone.biases[i].shape()) {
      throw InvariantError("backbone stage shapes match the config", "stage " + std::to_string(i));
    }
    m.backbone.weights[i] = w;
    m.backbone.biases[i] = b;
  }
  m.visit_parameters([&](const std::string& name, Var& v) { read_param(c, name, v); });
  return m;
}

void perturb_parameters(SmplerModel& model, std::uint64_t seed, double stddev) {
  Rng rng(seed);
  model.visit_parameters([&](const std::string&, Var& v) {
    for (auto& x : v.mutable_value().values()) x += stddev * rng.normal();
  });
}

void SmplerModel::save(const std::filesystem::path& path) { to_container().save(path); }

SmplerModel SmplerModel::load(const std::filesystem::path& path) { return from_container(Container::load(path)); }

}  // namespace smpler
