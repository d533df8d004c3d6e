#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "smpler/bench.hpp"
#include "smpler/config.hpp"
#include "smpler/container.hpp"
#include "smpler/errors.hpp"
#include "smpler/geometry.hpp"
#include "smpler/gradcheck_suite.hpp"
#include "smpler/instrument.hpp"
#include "smpler/metrics.hpp"
#include "smpler/model.hpp"
#include "smpler/trainer.hpp"

#ifndef SMPLER_VERSION
#define SMPLER_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace smpler::cli {
namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::size_t parse_size(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s.front() == '-') throw ParseError("expected a non-negative integer, got '" + s + "'", 0);
  return static_cast<std::size_t>(v);
}

// Values shared by every subcommand, plus what goes into the run manifest.
struct Run {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_file;
  std::string out_dir;
  double memory_budget_mb = 0.0;
  std::optional<SmplerConfig> config;
  std::map<std::string, std::string> inputs;
  std::vector<std::string> outputs;
  std::ostream* out = nullptr;

  std::size_t budget_bytes() const {
    if (memory_budget_mb <= 0.0) return std::numeric_limits<std::size_t>::max();
    return static_cast<std::size_t>(memory_budget_mb * 1024.0 * 1024.0);
  }

  fs::path path(const std::string& name) {
    if (out_dir.empty()) throw InvariantError("--out directory given", command);
    fs::create_directories(out_dir);
    outputs.push_back(name);
    return fs::path(out_dir) / name;
  }

  void write_text(const std::string& name, const std::string& text) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw Error("cannot write " + name);
    f << text;
  }

  SmplerConfig load_config(const std::string& preset) {
    SmplerConfig c = SmplerConfig::preset(preset);
    if (!config_file.empty()) {
      std::ifstream f(config_file, std::ios::binary);
      if (!f) throw ParseError("cannot read config file " + config_file, 0);
      std::ostringstream ss;
      ss << f.rdbuf();
      c = apply_config(c, parse_key_values(ss.str()));
      inputs["config"] = config_file;
    }
    c.validate();
    config = c;
    return c;
  }
};

void write_manifest(const Run& r, int exit_code, double seconds) {
  if (r.out_dir.empty()) return;
  nlohmann::ordered_json j;
  j["command"] = r.command;
  j["version"] = SMPLER_VERSION;
  j["seed"] = r.seed;
  j["config"] = nlohmann::ordered_json::object();
  if (r.config) {
    for (const auto& [k, v] : config_snapshot(*r.config)) j["config"][k] = v;
  }
  j["inputs"] = r.inputs;
  j["outputs"] = r.outputs;
  j["exit_code"] = exit_code;
  j["wall_time_s"] = seconds;
  fs::create_directories(r.out_dir);
  std::ofstream f(fs::path(r.out_dir) / "manifest.json");
  f << j.dump(2) << '\n';
}

Tensor load_image(Run& run, const SmplerModel& m, const std::string& input, std::optional<std::uint64_t> input_seed) {
  if (!input.empty()) {
    run.inputs["input"] = input;
    return Container::load(input).tensor("image");
  }
  const std::uint64_t s = input_seed.value_or(run.seed);
  run.inputs["input_seed"] = std::to_string(s);
  return m.make_input(s);
}

// ---- forward ----------------------------------------------------------------

struct ForwardArgs {
  std::string model;
  std::string input;
  std::optional<std::uint64_t> input_seed;
};

Container estimate_container(const SmplerModel& m, const SmplParams& p) {
  Container c;
  c.put("rotations", p.rotations);
  Tensor aa({p.rotations.rows(), 3});
  for (std::size_t i = 0; i < p.rotations.rows(); ++i) {
    const Vec3 v = so3_log(p.rotation(i));
    for (std::size_t k = 0; k < 3; ++k) aa(i, k) = v[k];
  }
  c.put("axis_angle", aa);
  c.put("beta", p.beta);
  c.put("camera", p.camera);
  const Tensor mesh = smpl_forward(m.body, p);
  const Tensor joints = regress_joints(m.body, mesh);
  c.put("vertices", mesh);
  c.put("joints3d", joints);
  c.put("joints2d", project_weak_perspective(joints, p.camera));
  return c;
}

int cmd_forward(Run& run, const ForwardArgs& a) {
  run.inputs["model"] = a.model;
  const SmplerModel m = SmplerModel::load(a.model);
  run.config = m.config;
  const Tensor image = load_image(run, m, a.input, a.input_seed);
  ForwardOptions fo;
  fo.capture_traces = true;
  NoGradScope ng;
  MemoryScope mem(run.budget_bytes());
  const ForwardResult r = m.forward(image, fo);
  for (std::size_t b = 0; b < r.estimates.size(); ++b) {
    estimate_container(m, r.estimates[b]).save(run.path("estimate_" + std::to_string(b) + ".bin"));
  }
  Container att;
  for (std::size_t b = 0; b < r.traces.size(); ++b) {
    for (std::size_t u = 0; u < r.traces[b].size(); ++u) {
      const std::string p = "block." + std::to_string(b) + ".unit." + std::to_string(u) + ".";
      const UnitTrace& t = r.traces[b][u];
      for (std::size_t i = 0; i < t.scales.size(); ++i) att.put(p + "scale." + std::to_string(i), t.scales[i].weights);
      for (std::size_t j = 0; j < t.joints.size(); ++j) att.put(p + "joint." + std::to_string(j), t.joints[j].weights);
      att.put(p + "self", t.self.weights);
    }
  }
  for (std::size_t b = 0; b < r.joints_2d.size(); ++b) att.put("block." + std::to_string(b) + ".joints_2d", r.joints_2d[b]);
  att.save(run.path("attention.bin"));
  *run.out << "estimates " << r.estimates.size() << " written to " << run.out_dir << '\n';
  return kOk;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
  std::string variants = "full,decoupled";
  std::string sweep = "256,512,1024,2048,4096";
  std::string pyramid;
  std::size_t l_t = 26;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t scales = 4;
  std::size_t trials = 1;
};

int cmd_bench(Run& run, const BenchArgs& a) {
  std::vector<Variant> variants;
  for (const auto& v : split(a.variants, ',')) {
    try {
      variants.push_back(parse_variant(v));
    } catch (const InvariantError&) {
      throw ParseError("unknown variant '" + v + "'", 0);
    }
  }
  std::vector<std::size_t> sweep;
  for (const auto& s : split(a.sweep, ',')) sweep.push_back(parse_size(s));
  if (variants.empty()) throw ParseError("no variants given", 0);
  run.inputs["variants"] = a.variants;
  run.inputs["sweep"] = a.sweep;

  std::ostringstream costs;
  write_cost_csv_header(costs);
  std::map<Variant, std::vector<CostReport>> reports;
  for (Variant v : variants) {
    for (std::size_t lf : sweep) {
      BenchDims dims;
      dims.l_f = lf;
      dims.l_t = a.l_t;
      dims.d = a.d;
      dims.heads = a.heads;
      dims.scales = a.scales;
      const CostReport r = measure_attention(v, dims, a.trials, run.seed, run.budget_bytes());
      write_cost_csv_row(costs, r);
      reports[v].push_back(r);
    }
  }
  run.write_text("costs.csv", costs.str());

  std::ostringstream loglog;
  loglog << "# log(l_f)";
  for (Variant v : variants) loglog << ' ' << "log(core_" << variant_name(v) << ")";
  loglog << '\n';
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    loglog << num(std::log(static_cast<double>(std::max<std::size_t>(sweep[i], 1))));
    for (Variant v : variants) {
      const CostReport& r = reports[v][i];
      const double y = r.core_flops > r.core_offset ? std::log(static_cast<double>(r.core_flops - r.core_offset)) : NAN;
      loglog << ' ' << num(y);
    }
    loglog << '\n';
  }
  run.write_text("loglog.dat", loglog.str());

  std::ostringstream slopes;
  slopes << "variant,slope,points,l_f_min,l_f_max\n";
  for (Variant v : variants) {
    const double s = fit_scaling_exponent(reports[v]);
    const auto [lo, hi] = std::minmax_element(sweep.begin(), sweep.end());
    slopes << variant_name(v) << ',' << num(s) << ',' << sweep.size() << ',' << *lo << ',' << *hi << '\n';
    *run.out << "slope " << variant_name(v) << ' ' << num(s) << '\n';
  }
  run.write_text("slopes.csv", slopes.str());

  if (!a.pyramid.empty()) {
    BenchDims dims;
    for (const auto& s : split(a.pyramid, ',')) dims.scale_tokens.push_back(parse_size(s));
    dims.scales = dims.scale_tokens.size();
    for (auto n : dims.scale_tokens) dims.l_f += n;
    dims.l_t = a.l_t;
    dims.d = a.d;
    dims.heads = a.heads;
    std::ostringstream pyr;
    write_cost_csv_header(pyr);
    const CostReport full = measure_attention(Variant::kFull, dims, a.trials, run.seed, run.budget_bytes());
    const CostReport ms = measure_attention(Variant::kMultiscale, dims, a.trials, run.seed, run.budget_bytes());
    write_cost_csv_row(pyr, full);
    write_cost_csv_row(pyr, ms);
    run.write_text("pyramid.csv", pyr.str());
    *run.out << "pyramid full/multiscale " << num(static_cast<double>(full.flops) / static_cast<double>(ms.flops)) << '\n';
  }
  return kOk;
}

// ---- metrics ----------------------------------------------------------------

int cmd_metrics(Run& run, const std::string& pred_path, const std::string& gt_path) {
  run.inputs["pred"] = pred_path;
  run.inputs["gt"] = gt_path;
  const Container pred = Container::load(pred_path), gt = Container::load(gt_path);
  const MetricReport m =
      evaluate_metrics(pred.tensor("joints3d"), gt.tensor("joints3d"), pred.tensor("vertices"), gt.tensor("vertices"),
                       pred.tensor("rotations"), gt.tensor("rotations"));
  std::ostringstream kv, csv;
  kv << "mpjpe = " << num(m.mpjpe) << "\npa_mpjpe = " << num(m.pa_mpjpe) << "\nmpve = " << num(m.mpve)
     << "\nmpre = " << num(m.mpre) << '\n';
  csv << "mpjpe,pa_mpjpe,mpve,mpre\n"
      << num(m.mpjpe) << ',' << num(m.pa_mpjpe) << ',' << num(m.mpve) << ',' << num(m.mpre) << '\n';
  *run.out << kv.str();
  if (!run.out_dir.empty()) {
    run.write_text("metrics.txt", kv.str());
    run.write_text("metrics.csv", csv.str());
  }
  return kOk;
}

// ---- gradcheck --------------------------------------------------------------

int cmd_gradcheck(Run& run, const GradSuiteOptions& o, std::ostream& err) {
  run.inputs["preset"] = o.preset;
  if (!o.corrupt_op.empty()) run.inputs["corrupt_op"] = o.corrupt_op;
  const auto entries = run_gradcheck_suite(o);
  std::ostringstream csv;
  csv << "op,max_rel_error,checked,passed\n";
  std::vector<std::string> failed;
  for (const auto& e : entries) {
    *run.out << e.name << ' ' << num(e.max_rel_error) << ' ' << (e.passed ? "ok" : "FAIL") << '\n';
    csv << e.name << ',' << num(e.max_rel_error) << ',' << e.checked << ',' << (e.passed ? 1 : 0) << '\n';
    if (!e.passed) failed.push_back(e.name);
  }
  if (!run.out_dir.empty()) run.write_text("gradcheck.csv", csv.str());
  if (!failed.empty()) {
    std::string list;
    for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
    err << "gradient check failed: " << list << '\n';
    return kGradcheckFailed;
  }
  return kOk;
}

// ---- overfit ----------------------------------------------------------------

struct OverfitArgs {
  std::string preset = "toy";
  std::size_t samples = 1;
  std::size_t steps = 300;
  double lr = 1e-3;
  double max_angle = 0.5;
  bool save_model = false;
};

std::string metric_lines(const std::string& prefix, const MetricReport& m) {
  return prefix + "mpjpe = " + num(m.mpjpe) + "\n" + prefix + "pa_mpjpe = " + num(m.pa_mpjpe) + "\n" + prefix +
         "mpve = " + num(m.mpve) + "\n" + prefix + "mpre = " + num(m.mpre) + "\n";
}

int cmd_overfit(Run& run, const OverfitArgs& a, std::ostream& err) {
  const SmplerConfig c = run.load_config(a.preset);
  if (a.samples == 0) throw InvariantError("at least one training sample", "--samples 0");
  SmplerModel model = SmplerModel::create(c, run.seed);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < a.samples; ++i) samples.push_back(make_synthetic_sample(model, run.seed + 1 + i, a.max_angle));
  run.inputs["samples"] = std::to_string(a.samples);
  run.inputs["steps"] = std::to_string(a.steps);
  run.inputs["lr"] = num(a.lr);

  const OverfitResult r = train_overfit(model, samples, a.steps, AdamOptions{a.lr});
  std::ostringstream curve;
  curve << "step,loss\n";
  for (std::size_t k = 0; k < r.losses.size(); ++k) curve << k << ',' << num(r.losses[k]) << '\n';
  run.write_text("loss_curve.csv", curve.str());
  const double ratio = r.losses.back() / r.losses.front();
  run.write_text("final_metrics.txt", "initial_loss = " + num(r.losses.front()) + "\nfinal_loss = " +
                                          num(r.losses.back()) + "\nratio = " + num(ratio) + "\n" +
                                          metric_lines("initial_", r.initial) + metric_lines("final_", r.final));
  if (a.save_model) model.save(run.path("model.bin"));
  *run.out << "loss " << num(r.losses.front()) << " -> " << num(r.losses.back()) << " (ratio " << num(ratio) << ")\n";
  if (a.steps == 0) {
    err << "no training performed\n";
    return kNoTraining;
  }
  if (!(ratio <= 0.1)) {
    err << "final loss is " << num(ratio) << " of initial, above 0.1\n";
    return kFailure;
  }
  return kOk;
}

// ---- attnviz ----------------------------------------------------------------

struct AttnvizArgs {
  std::string model;
  std::string input;
  std::optional<std::uint64_t> input_seed;
  std::size_t joint = 1;
  std::optional<std::size_t> block;
};

std::string graymap(const std::vector<double>& w, std::size_t rows, std::size_t cols) {
  const double hi = w.empty() ? 0.0 : *std::max_element(w.begin(), w.end());
  std::ostringstream os;
  os << "P2\n" << cols << ' ' << rows << "\n255\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = hi > 0 ? w[i * cols + j] / hi : 0.0;
      os << (j ? " " : "") << static_cast<int>(std::lround(255.0 * v));
    }
    os << '\n';
  }
  return os.str();
}

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  const auto s = t.row(r);
  return {s.begin(), s.end()};
}

int cmd_attnviz(Run& run, const AttnvizArgs& a) {
  run.inputs["model"] = a.model;
  const SmplerModel m = SmplerModel::load(a.model);
  run.config = m.config;
  const std::size_t h = m.config.joints;
  if (a.joint < 1 || a.joint > h) {
    throw InvariantError("joint index in 1..H", std::to_string(a.joint));
  }
  const std::size_t block = a.block.value_or(m.config.blocks - 1);
  if (block >= m.config.blocks) throw InvariantError("block index in 0..B-1", std::to_string(block));
  const Tensor image = load_image(run, m, a.input, a.input_seed);
  run.inputs["joint"] = std::to_string(a.joint);
  run.inputs["block"] = std::to_string(block);
  ForwardOptions fo;
  fo.capture_traces = true;
  NoGradScope ng;
  MemoryScope mem(run.budget_bytes());
  const ForwardResult r = m.forward(image, fo);
  const UnitTrace& t = r.traces[block].back();
  const std::size_t q = a.joint - 1;

  Container maps;
  std::ostringstream kl;
  kl << "map,tokens,kl\n";
  const auto emit = [&](const std::string& name, const std::vector<double>& w, std::size_t rows, std::size_t cols) {
    run.write_text(name + ".pgm", graymap(w, rows, cols));
    maps.put(name, Tensor({rows, cols}, w));
    kl << name << ',' << w.size() << ',' << num(attention_kl_diffuseness(w)) << '\n';
  };
  const auto grids = m.config.grids();
  for (std::size_t i = 0; i < t.scales.size(); ++i) {
    emit("scale_" + std::to_string(i + 1), row_of(t.scales[i].weights, q), grids[i].h, grids[i].w);
  }
  emit("joint_patch", row_of(t.joints[q].weights, 0), m.config.r, m.config.r);
  emit("self_row", row_of(t.self.weights, q), 1, t.self.weights.cols());
  maps.save(run.path("maps.bin"));
  run.write_text("kl.csv", kl.str());
  *run.out << kl.str();
  return kOk;
}

// ---- init -------------------------------------------------------------------

int cmd_init(Run& run, const std::string& preset) {
  const SmplerConfig c = run.load_config(preset);
  SmplerModel m = SmplerModel::create(c, run.seed);
  const fs::path p = run.path("model.bin");
  m.save(p);
  *run.out << p.string() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical body-mesh estimator: inference, benchmarks, metrics and training checks", "smpler"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SMPLER_VERSION);

  Run r;
  r.out = &out;
  app.add_option("--seed", r.seed, "Random seed")->capture_default_str();
  app.add_option("--config", r.config_file, "key = value configuration file");
  app.add_option("--out", r.out_dir, "Output directory");
  app.add_option("--memory-budget-mb", r.memory_budget_mb, "Cap on live tensor memory (0 = unlimited)");

  auto* forward = app.add_subcommand("forward", "Run the estimator and write every intermediate estimate");
  ForwardArgs fa;
  forward->add_option("--model", fa.model, "Checkpoint file")->required();
  forward->add_option("--input", fa.input, "Container file with an 'image' tensor");
  forward->add_option("--input-seed", fa.input_seed, "Seed of a generated input image (default --seed)");

  auto* bench = app.add_subcommand("bench", "Count attention costs over a sweep of feature lengths");
  BenchArgs ba;
  bench->add_option("--variants", ba.variants, "Comma list of full, decoupled, multiscale, concat")->capture_default_str();
  bench->add_option("--sweep", ba.sweep, "Comma list of l_F values")->capture_default_str();
  bench->add_option("--pyramid", ba.pyramid, "Comma list of per-scale token counts to compare full vs multiscale");
  bench->add_option("--l-t", ba.l_t, "Target length")->capture_default_str();
  bench->add_option("--d", ba.d, "Width")->capture_default_str();
  bench->add_option("--heads", ba.heads, "Heads")->capture_default_str();
  bench->add_option("--scales", ba.scales, "Pyramid scales for the multi-scale variants")->capture_default_str();
  bench->add_option("--trials", ba.trials, "Timed repetitions per point")->capture_default_str();

  auto* metrics = app.add_subcommand("metrics", "Compare a predicted mesh and joints to ground truth");
  std::string pred, gt;
  metrics->add_option("--pred", pred, "Container with joints3d, vertices, rotations")->required();
  metrics->add_option("--gt", gt, "Container with joints3d, vertices, rotations")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of every differentiable op");
  GradSuiteOptions go;
  gradcheck->add_option("--preset", go.preset, "default or tiny")->capture_default_str();
  gradcheck->add_option("--corrupt-op", go.corrupt_op, "Corrupt one op's backward (harness self-test)");

  auto* overfit = app.add_subcommand("overfit", "Fit synthetic samples and report the loss curve");
  OverfitArgs oa;
  overfit->add_option("--preset", oa.preset, "Config preset")->capture_default_str();
  overfit->add_option("--samples", oa.samples, "Number of synthetic samples")->capture_default_str();
  overfit->add_option("--steps", oa.steps, "Optimizer steps")->capture_default_str();
  overfit->add_option("--lr", oa.lr, "Learning rate")->capture_default_str();
  overfit->add_option("--max-angle", oa.max_angle, "Largest joint rotation angle of the samples")->capture_default_str();
  overfit->add_flag("--save-model", oa.save_model, "Also write the trained checkpoint");

  auto* attnviz = app.add_subcommand("attnviz", "Write one joint's attention maps as graymaps");
  AttnvizArgs va;
  attnviz->add_option("--model", va.model, "Checkpoint file")->required();
  attnviz->add_option("--input", va.input, "Container file with an 'image' tensor");
  attnviz->add_option("--input-seed", va.input_seed, "Seed of a generated input image (default --seed)");
  attnviz->add_option("--joint", va.joint, "Joint index, 1..H")->required();
  attnviz->add_option("--block", va.block, "Block index, 0..B-1 (default last)");

  auto* init = app.add_subcommand("init", "Write a freshly initialized checkpoint");
  std::string init_preset = "default";
  init->add_option("--preset", init_preset, "Config preset")->capture_default_str();

  for (auto* s : {forward, bench, metrics, gradcheck, overfit, attnviz, init}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << SMPLER_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << one_line(e.what()) << '\n';
    return kParse;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int code = kFailure;
  r.command = app.get_subcommands().front()->get_name();
  try {
    if (forward->parsed()) code = cmd_forward(r, fa);
    else if (bench->parsed()) code = cmd_bench(r, ba);
    else if (metrics->parsed()) code = cmd_metrics(r, pred, gt);
    else if (gradcheck->parsed()) code = cmd_gradcheck(r, go, err);
    else if (overfit->parsed()) code = cmd_overfit(r, oa, err);
    else if (attnviz->parsed()) code = cmd_attnviz(r, va);
    else if (init->parsed()) code = cmd_init(r, init_preset);
  } catch (const ParseError& e) {
    err << one_line(e.what()) << '\n';
    code = kParse;
  } catch (const MemoryBudgetError& e) {
    err << one_line(e.what()) << '\n';
    code = kMemoryBudget;
  } catch (const InsufficientPointsError& e) {
    err << one_line(e.what()) << '\n';
    code = kInsufficientPoints;
  } catch (const DivergenceError& e) {
    err << one_line(e.what()) << '\n';
    code = kDivergence;
  } catch (const InvariantError& e) {
    err << one_line(e.what()) << '\n';
    code = kInvariant;
  } catch (const ShapeError& e) {
    err << "invariant violated: " << one_line(e.what()) << '\n';
    code = kInvariant;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    code = kFailure;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    write_manifest(r, code, secs);
  } catch (const std::exception&) {
    // the command's own outcome is what matters
  }
  return code;
}

}  // namespace smpler::cli
