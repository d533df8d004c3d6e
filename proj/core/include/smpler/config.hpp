#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smpler/attention.hpp"

namespace smpler {

/// Loss weights w_Y, w_J, w_2D, w_R.
struct LossWeights {
  double vertices = 100.0;
  double joints3d = 1000.0;
  double joints2d = 100.0;
  double rotation = 50.0;
  void validate() const;
};

struct SmplerConfig {
  std::size_t blocks = 3;
  std::size_t units = 2;
  std::size_t heads = 4;
  std::size_t d = 64;
  std::size_t scales = 4;
  std::size_t r = 8;
  std::size_t joints = 24;
  std::size_t grid = 56;  // h_1 = w_1
  std::size_t n_vertices = 600;
  std::uint64_t body_seed = 0;
  bool intermediate_supervision = false;
  LossWeights loss;

  /// "default", "toy" or "tiny"; throws InvariantError for other names.
  static SmplerConfig preset(const std::string& name);
  void validate() const;
  std::vector<GridShape> grids() const;
  /// Side of the square input image the backbone expects (4 h_1).
  std::size_t image_size() const { return 4 * grid; }
};

/// Parses "key = value" lines ('#' starts a comment). Throws ParseError with the
/// byte offset of the offending line.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies recognized keys (blocks, units, heads, d, scales, r, joints, grid,
/// n_vertices, body_seed, intermediate_supervision, w_Y, w_J, w_2D, w_R, preset).
/// Unknown keys and malformed numbers throw ParseError.
SmplerConfig apply_config(SmplerConfig base, const std::map<std::string, std::string>& kv);

std::map<std::string, std::string> config_snapshot(const SmplerConfig& c);

}  // namespace smpler
