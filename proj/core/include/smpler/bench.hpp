#pragma once

// Cost accounting for the attention variants: closed-form flop counts,
// instrumented measurements, and log-log scaling fits.

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace smpler {

enum class Variant { kFull, kDecoupled, kMultiscale, kConcat };

std::string variant_name(Variant v);
/// "full", "decoupled", "multiscale" or "concat"; throws InvariantError otherwise.
Variant parse_variant(const std::string& name);

struct BenchDims {
  std::size_t l_f = 0;
  std::size_t l_t = 26;
  std::size_t d = 64;
  std::size_t heads = 4;
  /// Feature token count per scale for the multi-scale variants. Empty means
  /// the pyramid l_F, l_F/4, ... over `scales` scales (at least one token each).
  std::vector<std::size_t> scale_tokens;
  std::size_t scales = 4;

  std::vector<std::size_t> tokens_per_scale() const;
};

/// Flops of one attend call with l_q queries and l_k keys, split as counted.
struct AttendCost {
  std::uint64_t projection = 0;
  std::uint64_t interaction = 0;
  std::uint64_t softmax = 0;
  std::uint64_t mlp = 0;
  std::uint64_t total() const { return projection + interaction + softmax + mlp; }
  std::uint64_t core() const { return interaction + softmax; }
};

AttendCost attend_cost(std::size_t l_q, std::size_t l_k, std::size_t d, std::size_t heads);

/// Closed-form count of every term the instrumentation records.
/// full: attend(l_T + l_F, l_T + l_F); decoupled: attend(l_T, l_F) + attend(l_T, l_T);
/// multiscale: sum_i attend(l_T, l_F_i) + attend(l_T, l_T); concat: attend(l_T, sum_i l_F_i) + attend(l_T, l_T).
/// Stages with no feature tokens are skipped.
AttendCost analytic_cost(Variant v, const BenchDims& dims);
std::uint64_t analytic_flops(Variant v, const BenchDims& dims);

struct CostReport {
  std::string variant;
  std::size_t l_f = 0;
  std::size_t l_t = 0;
  std::size_t d = 0;
  std::size_t heads = 0;
  std::uint64_t flops = 0;
  std::uint64_t core_flops = 0;
  /// core_flops of the same variant at l_F = 0 (the l_F-independent part).
  std::uint64_t core_offset = 0;
  std::uint64_t key_bytes = 0;
  std::uint64_t key_vectors = 0;
  std::size_t peak_bytes = 0;
  double wall_ns_mean = 0.0;
  double wall_ns_stddev = 0.0;
  std::size_t trials = 0;
};

/// Runs `trials` instrumented forwards on random inputs. Counters come from the
/// first trial; wall time is informational. Throws MemoryBudgetError if live
/// tensor bytes exceed `memory_budget_bytes`.
CostReport measure_attention(Variant v, const BenchDims& dims, std::size_t trials = 1, std::uint64_t seed = 0,
                             std::size_t memory_budget_bytes = std::numeric_limits<std::size_t>::max());

/// Least-squares slope of log(core_flops - core_offset) against log(l_F).
/// Needs >= 4 points spanning >= 8x in l_F (InsufficientPointsError otherwise).
double fit_scaling_exponent(const std::vector<CostReport>& reports);

/// Plain least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void write_cost_csv_header(std::ostream& os);
void write_cost_csv_row(std::ostream& os, const CostReport& r);

}  // namespace smpler
