#pragma once

// Random multi-scale attention instances and their naive references.

#include "oracles.hpp"
#include "smpler/attention.hpp"
#include "smpler/rng.hpp"

namespace oracle {

struct Scene {
  std::size_t d = 8, heads = 2, s = 2, r = 2, h = 24;
  smpler::GridShape g1{4, 4};
  smpler::Var t;
  smpler::FeaturePyramid pyr;
  std::vector<smpler::Var> enc;
  smpler::PositionalEncodings pe;
  smpler::CombinedLayers layers;
  smpler::Tensor joints;
};

inline Scene make_scene(std::uint64_t seed, std::size_t heads = 2, std::size_t s = 2, std::size_t r = 2) {
  smpler::Rng rng(seed);
  Scene sc;
  sc.heads = heads;
  sc.s = s;
  sc.r = r;
  sc.g1 = smpler::GridShape{std::size_t{4} << (s - 1), std::size_t{4} << (s - 1)};
  sc.t = smpler::Var::constant(rng.normal_tensor({sc.h + 2, sc.d}));
  smpler::GridShape g = sc.g1;
  for (std::size_t i = 0; i < s; ++i) {
    sc.pyr.scales.push_back(smpler::Var::constant(rng.normal_tensor({g.tokens(), sc.d})));
    sc.pyr.grids.push_back(g);
    g = smpler::GridShape{g.h / 2, g.w / 2};
  }
  const smpler::Var phi1 = smpler::Var::constant(rng.normal_tensor({sc.g1.tokens(), sc.d}, 0.3));
  sc.enc = smpler::pooled_positional_encodings(phi1, sc.g1, s);
  sc.pe = {phi1, sc.g1, smpler::Var::constant(rng.normal_tensor({(r + 1) * (r + 1), 1})), r};
  for (std::size_t i = 0; i < s; ++i) sc.layers.scales.push_back(random_layer(sc.d, heads, rng));
  sc.layers.joint = random_layer(sc.d, heads, rng);
  sc.joints = rng.uniform_tensor({sc.h, 2}, -1.1, 1.1);
  return sc;
}

inline Mat ms_oracle(const Scene& sc) {
  Mat acc;
  for (std::size_t i = 0; i < sc.s; ++i) {
    const Mat keys = add(to_mat(sc.pyr.scales[i].value()), to_mat(sc.enc[i].value()));
    const Mat h = attend(to_mat(sc.t.value()), keys, keys, sc.layers.scales[i]);
    acc = i == 0 ? h : add(acc, h);
  }
  return scale(acc, 1.0 / static_cast<double>(sc.s));
}

inline Mat concat_oracle(const Scene& sc) {
  std::vector<Mat> parts;
  for (std::size_t i = 0; i < sc.s; ++i) {
    parts.push_back(add(to_mat(sc.pyr.scales[i].value()), to_mat(sc.enc[i].value())));
  }
  const Mat keys = concat_rows(parts);
  return attend(to_mat(sc.t.value()), keys, keys, sc.layers.scales[0]);
}

inline Mat ja_oracle(const Scene& sc, std::size_t i) {
  const Mat t = to_mat(sc.t.value());
  const double row = (sc.joints(i, 1) + 1) * 0.5 * static_cast<double>(sc.g1.h - 1);
  const double col = (sc.joints(i, 0) + 1) * 0.5 * static_cast<double>(sc.g1.w - 1);
  return joint_aware({t[i]}, to_mat(sc.pyr.scales[0].value()), sc.g1.h, sc.g1.w, row, col,
                     to_mat(sc.pe.eta_tilde.value()), sc.r, sc.layers.joint);
}

}  // namespace oracle
