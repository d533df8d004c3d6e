#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>

#include "smpler/errors.hpp"
#include "smpler/gradcheck_suite.hpp"

using namespace smpler;

namespace {

const GradCheckEntry& entry(const std::vector<GradCheckEntry>& all, const std::string& name) {
  const auto it = std::find_if(all.begin(), all.end(), [&](const auto& e) { return e.name == name; });
  if (it == all.end()) throw std::runtime_error("no entry " + name);
  return *it;
}

}  // namespace

TEST(GradSuite, TinyPresetPassesEverywhere) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto all = run_gradcheck_suite({"tiny"});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);
  ASSERT_GT(all.size(), 40u);
  for (const auto& e : all) {
    EXPECT_TRUE(e.passed) << e.name << " " << e.max_rel_error;
    EXPECT_GT(e.checked, 0u) << e.name;
  }
  for (const char* name : {"softmax_rows", "layer_norm", "gram_schmidt_rows", "bilinear_sample",
                           "joint_aware_attention", "multiscale_attention", "end_to_end"}) {
    EXPECT_NO_THROW(entry(all, name));
  }
}

TEST(GradSuite, CorruptedBackwardIsNamed) {
  GradSuiteOptions o;
  o.preset = "tiny";
  o.corrupt_op = "softplus";
  const auto all = run_gradcheck_suite(o);
  EXPECT_FALSE(entry(all, "softplus").passed);
  EXPECT_TRUE(entry(all, "add").passed);
  EXPECT_TRUE(entry(all, "matmul").passed);
  // the hook is cleared afterwards
  EXPECT_TRUE(entry(run_gradcheck_suite({"tiny"}), "softplus").passed);
}

TEST(GradSuite, UnknownPresetRejected) { EXPECT_THROW(run_gradcheck_suite({"huge"}), InvariantError); }
