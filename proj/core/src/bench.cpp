#include "smpler/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "smpler/attention.hpp"
#include "smpler/errors.hpp"
#include "smpler/ops.hpp"
#include "smpler/rng.hpp"

namespace smpler {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kDecoupled: return "decoupled";
    case Variant::kMultiscale: return "multiscale";
    case Variant::kConcat: return "concat";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "decoupled") return Variant::kDecoupled;
  if (name == "multiscale") return Variant::kMultiscale;
  if (name == "concat") return Variant::kConcat;
  throw InvariantError("known attention variant", name);
}

std::vector<std::size_t> BenchDims::tokens_per_scale() const {
  if (!scale_tokens.empty()) return scale_tokens;
  std::vector<std::size_t> out;
  std::size_t n = l_f;
  for (std::size_t i = 0; i < scales; ++i, n /= 4) out.push_back(l_f == 0 ? 0 : std::max<std::size_t>(n, 1));
  return out;
}

AttendCost attend_cost(std::size_t l_q, std::size_t l_k, std::size_t d, std::size_t heads) {
  const std::uint64_t q = l_q, k = l_k, dd = d, h = heads;
  AttendCost c;
  c.projection = dd * dd * (2 * q + 2 * k);
  c.interaction = 2 * q * k * dd;
  c.softmax = 8 * h * q * k;
  c.mlp = 8 * q * dd * dd;
  return c;
}

namespace {

AttendCost& operator+=(AttendCost& a, const AttendCost& b) {
  a.projection += b.projection;
  a.interaction += b.interaction;
  a.softmax += b.softmax;
  a.mlp += b.mlp;
  return a;
}

std::vector<std::size_t> nonzero(const std::vector<std::size_t>& v) {
  std::vector<std::size_t> out;
  for (auto x : v)
    if (x > 0) out.push_back(x);
  return out;
}

}  // namespace

AttendCost analytic_cost(Variant v, const BenchDims& dims) {
  if (dims.l_t == 0 || dims.d == 0 || dims.heads == 0) throw InvariantError("positive dimensions", "");
  const std::size_t lt = dims.l_t, d = dims.d, h = dims.heads;
  AttendCost c;
  switch (v) {
    case Variant::kFull:
      c = attend_cost(lt + dims.l_f, lt + dims.l_f, d, h);
      break;
    case Variant::kDecoupled:
      if (dims.l_f > 0) c += attend_cost(lt, dims.l_f, d, h);
      c += attend_cost(lt, lt, d, h);
      break;
    case Variant::kMultiscale:
      for (auto n : nonzero(dims.tokens_per_scale())) c += attend_cost(lt, n, d, h);
      c += attend_cost(lt, lt, d, h);
      break;
    case Variant::kConcat: {
      std::size_t total = 0;
      for (auto n : dims.tokens_per_scale()) total += n;
      if (total > 0) c += attend_cost(lt, total, d, h);
      c += attend_cost(lt, lt, d, h);
      break;
    }
  }
  return c;
}

std::uint64_t analytic_flops(Variant v, const BenchDims& dims) { return analytic_cost(v, dims).total(); }

CostReport measure_attention(Variant v, const BenchDims& dims, std::size_t trials, std::uint64_t seed,
                             std::size_t memory_budget_bytes) {
  if (trials == 0) trials = 1;
  Rng rng(seed);
  const std::size_t d = dims.d, h = dims.heads;
  const auto tokens = nonzero(dims.tokens_per_scale());

  // Layers and inputs come before the budgeted region.
  std::vector<AttentionLayer> cross;
  const std::size_t n_cross = v == Variant::kMultiscale ? tokens.size() : 1;
  for (std::size_t i = 0; i < n_cross; ++i) cross.push_back(AttentionLayer::create(d, h, rng));
  const AttentionLayer self = AttentionLayer::create(d, h, rng);
  const Var t = Var::constant(rng.normal_tensor({dims.l_t, d}));
  std::vector<Var> feats;
  if (v == Variant::kFull || v == Variant::kDecoupled) {
    if (dims.l_f > 0) feats.push_back(Var::constant(rng.normal_tensor({dims.l_f, d})));
  } else {
    for (auto n : tokens) feats.push_back(Var::constant(rng.normal_tensor({n, d})));
  }

  auto run = [&]() {
    switch (v) {
      case Variant::kFull:
        return full_attention(t, feats.empty() ? Var{} : feats.front(), self);
      case Variant::kDecoupled:
        return decoupled_attention(t, feats.empty() ? Var{} : feats.front(), cross.front(), self);
      case Variant::kMultiscale: {
        if (feats.empty()) return attend(t, t, t, self);
        FeaturePyramid pyr;
        pyr.scales = feats;
        std::vector<Var> enc;
        for (const auto& f : feats) enc.push_back(Var::constant(Tensor(f.shape())));
        const Var x = multiscale_attention(t, pyr, enc, cross);
        return attend(x, x, x, self);
      }
      case Variant::kConcat: {
        if (feats.empty()) return attend(t, t, t, self);
        const Var keys = feats.size() == 1 ? feats.front() : concat_rows(feats);
        const Var x = attend(t, keys, keys, cross.front());
        return attend(x, x, x, self);
      }
    }
    throw InvariantError("known attention variant", "");
  };

  CostReport rep;
  rep.variant = variant_name(v);
  rep.l_f = dims.l_f;
  rep.l_t = dims.l_t;
  rep.d = d;
  rep.heads = h;
  rep.trials = trials;
  BenchDims zero = dims;
  zero.l_f = 0;
  zero.scale_tokens.clear();
  rep.core_offset = analytic_cost(v, zero).core();

  std::vector<double> times;
  NoGradScope ng;
  for (std::size_t k = 0; k < trials; ++k) {
    CostCollector collector;
    CollectorScope cs(collector);
    MemoryScope ms(memory_budget_bytes);
    const auto t0 = std::chrono::steady_clock::now();
    { const Var out = run(); }
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    if (k == 0) {
      const auto& c = collector.counters();
      rep.flops = c.total_flops();
      rep.core_flops = c.core_flops();
      rep.key_bytes = c.key_bytes;
      rep.key_vectors = c.key_vectors;
      rep.peak_bytes = ms.peak_bytes();
    }
  }
  double mean = 0.0;
  for (double x : times) mean += x;
  mean /= static_cast<double>(times.size());
  double var = 0.0;
  for (double x : times) var += (x - mean) * (x - mean);
  rep.wall_ns_mean = mean;
  rep.wall_ns_stddev = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1)) : 0.0;
  return rep;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InsufficientPointsError("insufficient points for fit");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw NumericDomainError("loglog_slope: non-positive value");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0)) throw InsufficientPointsError("insufficient points for fit");
  return (n * sxy - sx * sy) / den;
}

double fit_scaling_exponent(const std::vector<CostReport>& reports) {
  if (reports.size() < 4) throw InsufficientPointsError("insufficient points for fit");
  std::size_t lo = reports.front().l_f, hi = lo;
  std::vector<double> x, y;
  for (const auto& r : reports) {
    lo = std::min(lo, r.l_f);
    hi = std::max(hi, r.l_f);
    if (r.core_flops <= r.core_offset) throw InsufficientPointsError("sweep point without l_F-dependent cost");
    x.push_back(static_cast<double>(r.l_f));
    y.push_back(static_cast<double>(r.core_flops - r.core_offset));
  }
  if (lo == 0 || hi < 8 * lo) throw InsufficientPointsError("insufficient points for fit: sweep spans less than 8x");
  return loglog_slope(x, y);
}

void write_cost_csv_header(std::ostream& os) {
  os << "variant,l_f,l_t,d,heads,flops,core_flops,core_offset,key_vectors,key_bytes,peak_bytes,trials,wall_ns_mean,"
        "wall_ns_stddev\n";
}

void write_cost_csv_row(std::ostream& os, const CostReport& r) {
  char buf[64];
  os << r.variant << ',' << r.l_f << ',' << r.l_t << ',' << r.d << ',' << r.heads << ',' << r.flops << ','
     << r.core_flops << ',' << r.core_offset << ',' << r.key_vectors << ',' << r.key_bytes << ',' << r.peak_bytes << ','
     << r.trials << ',';
  std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.wall_ns_mean, r.wall_ns_stddev);
  os << buf << '\n';
}

}  // namespace smpler
