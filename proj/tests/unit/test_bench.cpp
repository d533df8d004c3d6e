#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "smpler/bench.hpp"
#include "smpler/errors.hpp"
#include "smpler/rng.hpp"

using namespace smpler;

namespace {

// Multiply-adds of one attend call, enumerated per matmul as a naive loop
// nest would execute them. exp and the normalizing division cost 4 each.
std::uint64_t naive_attend_flops(std::uint64_t q, std::uint64_t k, std::uint64_t d, std::uint64_t heads) {
  const std::uint64_t dh = d / heads;
  std::uint64_t n = 0;
  n += q * d * d;  // Wq
  n += k * d * d;  // Wk
  n += k * d * d;  // Wv
  for (std::uint64_t h = 0; h < heads; ++h) {
    n += q * k * dh;     // logits
    n += q * k * 4 * 2;  // exp and divide
    n += q * k * dh;     // weighted values
  }
  n += q * d * d;           // Wo
  n += q * d * (4 * d) * 2;  // two MLP matmuls
  return n;
}

CostReport synthetic(std::size_t l_f, double flops) {
  CostReport r;
  r.l_f = l_f;
  r.core_flops = static_cast<std::uint64_t>(std::llround(flops)) + 1000;
  r.core_offset = 1000;
  return r;
}

}  // namespace

TEST(Variants, NamesRoundTrip) {
  for (Variant v : {Variant::kFull, Variant::kDecoupled, Variant::kMultiscale, Variant::kConcat}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_EQ(variant_name(Variant::kFull), "full");
  EXPECT_THROW(parse_variant("sparse"), InvariantError);
}

TEST(AnalyticFlops, AttendCostMatchesNaiveEnumeration) {
  Rng rng(60);
  for (int i = 0; i < 20; ++i) {
    const std::size_t heads = 1 + rng.index(4), d = heads * (1 + rng.index(16));
    const std::size_t q = 1 + rng.index(100), k = 1 + rng.index(300);
    EXPECT_EQ(attend_cost(q, k, d, heads).total(), naive_attend_flops(q, k, d, heads));
  }
}

TEST(AnalyticFlops, VariantCompositions) {
  BenchDims dims;
  dims.l_f = 512;
  const std::uint64_t lt = 26, d = 64, h = 4;
  EXPECT_EQ(analytic_flops(Variant::kFull, dims), naive_attend_flops(lt + 512, lt + 512, d, h));
  EXPECT_EQ(analytic_flops(Variant::kDecoupled, dims),
            naive_attend_flops(lt, 512, d, h) + naive_attend_flops(lt, lt, d, h));
  // pyramid 512, 128, 32, 8
  EXPECT_EQ(analytic_flops(Variant::kMultiscale, dims),
            naive_attend_flops(lt, 512, d, h) + naive_attend_flops(lt, 128, d, h) + naive_attend_flops(lt, 32, d, h) +
                naive_attend_flops(lt, 8, d, h) + naive_attend_flops(lt, lt, d, h));
  EXPECT_EQ(analytic_flops(Variant::kConcat, dims),
            naive_attend_flops(lt, 680, d, h) + naive_attend_flops(lt, lt, d, h));
}

TEST(AnalyticFlops, ZeroFeaturesReduceToSelfAttention) {
  BenchDims dims;
  dims.l_f = 0;
  const std::uint64_t self = naive_attend_flops(26, 26, 64, 4);
  for (Variant v : {Variant::kFull, Variant::kDecoupled, Variant::kMultiscale, Variant::kConcat}) {
    EXPECT_EQ(analytic_flops(v, dims), self) << variant_name(v);
  }
}

TEST(AnalyticFlops, DoublingRatios) {
  BenchDims a, b;
  a.l_f = 2048;
  b.l_f = 4096;
  const double dec = static_cast<double>(analytic_flops(Variant::kDecoupled, b)) /
                     static_cast<double>(analytic_flops(Variant::kDecoupled, a));
  const double full =
      static_cast<double>(analytic_flops(Variant::kFull, b)) / static_cast<double>(analytic_flops(Variant::kFull, a));
  EXPECT_GE(dec, 1.9);
  EXPECT_LE(dec, 2.1);
  EXPECT_GE(full, 3.6);
  EXPECT_LE(full, 4.4);
}

TEST(AnalyticFlops, NonPositiveDimensionsRejected) {
  BenchDims dims;
  dims.l_t = 0;
  EXPECT_THROW(analytic_flops(Variant::kFull, dims), InvariantError);
}

TEST(MeasureAttention, CountedEqualsAnalyticOnRandomDims) {
  Rng rng(61);
  const Variant all[] = {Variant::kFull, Variant::kDecoupled, Variant::kMultiscale, Variant::kConcat};
  for (int i = 0; i < 10; ++i) {
    BenchDims dims;
    dims.heads = 1 + rng.index(4);
    dims.d = dims.heads * (2 + rng.index(6));
    dims.l_t = 1 + rng.index(30);
    dims.l_f = rng.index(200);
    dims.scales = 1 + rng.index(4);
    for (Variant v : all) {
      const CostReport r = measure_attention(v, dims, 1, 100 + static_cast<std::uint64_t>(i));
      EXPECT_EQ(r.flops, analytic_flops(v, dims)) << variant_name(v) << " l_f=" << dims.l_f;
      EXPECT_EQ(r.core_flops, analytic_cost(v, dims).core());
    }
  }
}

TEST(MeasureAttention, KeyCountsFollowVariant) {
  BenchDims dims;
  dims.l_f = 64;
  dims.d = 16;
  const CostReport full = measure_attention(Variant::kFull, dims);
  const CostReport dec = measure_attention(Variant::kDecoupled, dims);
  EXPECT_EQ(full.key_vectors, 90u);
  EXPECT_EQ(dec.key_vectors, 64u + 26u);
  EXPECT_EQ(full.key_bytes, 90u * 16u * 8u);
  const CostReport ms = measure_attention(Variant::kMultiscale, dims);
  EXPECT_EQ(ms.key_vectors, 64u + 16u + 4u + 1u + 26u);
}

TEST(MeasureAttention, DeterministicCounts) {
  BenchDims dims;
  dims.l_f = 300;
  dims.d = 32;
  const CostReport a = measure_attention(Variant::kMultiscale, dims, 3, 5), b = measure_attention(Variant::kMultiscale, dims, 2, 9);
  EXPECT_EQ(a.flops, b.flops);
  EXPECT_EQ(a.core_flops, b.core_flops);
  EXPECT_EQ(a.key_bytes, b.key_bytes);
  EXPECT_EQ(a.peak_bytes, b.peak_bytes);
  EXPECT_EQ(a.trials, 3u);
  EXPECT_GE(a.wall_ns_stddev, 0.0);
}

TEST(MeasureAttention, MemoryBudgetSurfacesStructuredError) {
  BenchDims dims;
  dims.l_f = 2048;
  try {
    measure_attention(Variant::kFull, dims, 1, 0, 1 << 20);
    FAIL() << "expected MemoryBudgetError";
  } catch (const MemoryBudgetError& e) {
    EXPECT_NE(std::string(e.what()).find("budget"), std::string::npos);
  }
  // the same point fits in an ample budget
  EXPECT_NO_THROW(measure_attention(Variant::kDecoupled, dims, 1, 0, std::size_t{1} << 30));
}

TEST(MeasureAttention, PeakMemoryFullGrowsFasterThanDecoupled) {
  BenchDims a, b;
  a.l_f = 256;
  b.l_f = 1024;
  a.d = b.d = 16;
  const double full = static_cast<double>(measure_attention(Variant::kFull, b).peak_bytes) /
                      static_cast<double>(measure_attention(Variant::kFull, a).peak_bytes);
  const double dec = static_cast<double>(measure_attention(Variant::kDecoupled, b).peak_bytes) /
                     static_cast<double>(measure_attention(Variant::kDecoupled, a).peak_bytes);
  EXPECT_GT(full, 8.0);
  EXPECT_LT(dec, 5.0);
}

TEST(FitScaling, ExactPowerLaws) {
  std::vector<CostReport> cube, lin;
  for (std::size_t l : {256u, 512u, 1024u, 2048u, 4096u}) {
    cube.push_back(synthetic(l, 3.0 * std::pow(static_cast<double>(l), 3)));
    lin.push_back(synthetic(l, 77.0 * static_cast<double>(l)));
  }
  EXPECT_NEAR(fit_scaling_exponent(cube), 3.0, 1e-6);
  EXPECT_NEAR(fit_scaling_exponent(lin), 1.0, 1e-6);
}

TEST(FitScaling, InsufficientPoints) {
  std::vector<CostReport> r{synthetic(256, 1e6)};
  EXPECT_THROW(fit_scaling_exponent(r), InsufficientPointsError);
  r = {synthetic(256, 1), synthetic(512, 2), synthetic(1024, 4)};
  EXPECT_THROW(fit_scaling_exponent(r), InsufficientPointsError);
  // four points but only a 4x span
  r = {synthetic(256, 1), synthetic(512, 2), synthetic(768, 3), synthetic(1024, 4)};
  EXPECT_THROW(fit_scaling_exponent(r), InsufficientPointsError);
  try {
    fit_scaling_exponent({synthetic(256, 1)});
  } catch (const InsufficientPointsError& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient points for fit"), std::string::npos);
  }
}

TEST(FitScaling, LogLogSlopeOfExactPowers) {
  EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
  EXPECT_THROW(loglog_slope({1, 2}, {0, 1}), NumericDomainError);
}

TEST(FitScaling, MeasuredSweepsSmallScale) {
  std::vector<CostReport> full, dec;
  for (std::size_t l : {64u, 128u, 256u, 512u}) {
    BenchDims dims;
    dims.l_f = l;
    dims.d = 16;
    full.push_back(measure_attention(Variant::kFull, dims));
    dec.push_back(measure_attention(Variant::kDecoupled, dims));
  }
  EXPECT_NEAR(fit_scaling_exponent(dec), 1.0, 0.1);
  // full core minus its l_F = 0 part is proportional to l_F^2 + 2 l_T l_F
  std::vector<double> x, y;
  for (double l : {64.0, 128.0, 256.0, 512.0}) {
    x.push_back(l);
    y.push_back(l * l + 52.0 * l);
  }
  EXPECT_NEAR(fit_scaling_exponent(full), loglog_slope(x, y), 1e-12);
  EXPECT_LT(fit_scaling_exponent(full), 2.0);
}

TEST(CostCsv, StableColumnsAndRoundTripDigits) {
  std::ostringstream os;
  write_cost_csv_header(os);
  CostReport r;
  r.variant = "decoupled";
  r.l_f = 256;
  r.l_t = 26;
  r.d = 64;
  r.heads = 4;
  r.flops = 123456789;
  r.wall_ns_mean = 0.1;
  write_cost_csv_row(os, r);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header.rfind("variant,l_f,l_t,d,heads,flops", 0), 0u);
  EXPECT_EQ(row.rfind("decoupled,256,26,64,4,123456789,", 0), 0u);
  EXPECT_NE(row.find("0.10000000000000001"), std::string::npos);
  const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(commas(header), commas(row));
}
