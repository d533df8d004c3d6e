#pragma once

// Attention layer and the target/feature attention variants built on it:
// full, decoupled, multi-scale (averaged and concatenated), joint-aware,
// their combination, and the transformer unit.

#include <functional>
#include <string>
#include <vector>

#include "smpler/autodiff.hpp"
#include "smpler/container.hpp"
#include "smpler/ops.hpp"
#include "smpler/rng.hpp"

namespace smpler {

struct AttentionOptions {
  bool layer_norm = true;
  bool mlp = true;
  bool residual = true;
};

using ParamVisitor = std::function<void(const std::string& name, Var& param)>;

/// Multi-head attention with pre-layer-norm, residual and a d -> 4d -> d GELU MLP.
/// Projections are d x d; head h uses columns [h d_head, (h+1) d_head).
struct AttentionLayer {
  std::size_t d = 0;
  std::size_t heads = 1;
  Var wq, wk, wv, wo;
  Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  Var mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  AttentionOptions options;

  /// Fan-in scaled uniform weights. W_q starts at zero so fresh layers attend uniformly.
  static AttentionLayer create(std::size_t d, std::size_t heads, Rng& rng);
  /// Identity projections, unit gains, zero MLP.
  static AttentionLayer identity(std::size_t d, std::size_t heads);

  std::size_t head_width() const { return d / heads; }
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void validate() const;
  void validate_dims() const;
};

/// Head-averaged attention weights of one attend call (l_Q x l_K).
struct AttentionTrace {
  Tensor weights;
  /// Per-head weights, filled when keep_heads is set.
  std::vector<Tensor> per_head;
  bool keep_heads = false;
};

/// softmax(Q W_q (K W_k)^T / sqrt(d_head) + bias) V W_v per head, heads concatenated
/// and projected by W_o, then the residual and MLP sub-layers. bias may be empty,
/// 1 x l_K (broadcast over queries) or l_Q x l_K, and is shared by all heads.
Var attend(const Var& q, const Var& k, const Var& v, const AttentionLayer& layer, const Var& bias = {},
           AttentionTrace* trace = nullptr);

/// Self-attention over the row concatenation T || F; returns all l_T + l_F rows.
Var full_attention(const Var& t, const Var& f, const AttentionLayer& layer, AttentionTrace* trace = nullptr);

/// Target-feature cross-attention followed by target self-attention.
Var decoupled_attention(const Var& t, const Var& f, const AttentionLayer& cross, const AttentionLayer& self);

struct GridShape {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t tokens() const { return h * w; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// S feature maps, each flattened to (h_i w_i) x d tokens; resolution halves per scale.
struct FeaturePyramid {
  std::vector<Var> scales;
  std::vector<GridShape> grids;

  std::size_t size() const { return scales.size(); }
  std::size_t total_tokens() const;
  void validate() const;
};

/// Learnable feature encoding phi_1 ((h_1 w_1) x d) and relative-position table
/// eta_tilde ((r+1)^2 x 1, row-major over an (r+1) x (r+1) grid).
struct PositionalEncodings {
  Var phi1;
  GridShape grid1;
  Var eta_tilde;
  std::size_t r = 0;
};

/// phi_i for i = 1..S by repeated stride-2 average pooling.
std::vector<Var> pooled_positional_encodings(const Var& phi1, GridShape grid1, std::size_t scales);

/// (1/S) sum_i attend(T, F_i + phi_i) with one layer per scale.
Var multiscale_attention(const Var& t, const FeaturePyramid& pyramid, const std::vector<Var>& encodings,
                         const std::vector<AttentionLayer>& layers, std::vector<AttentionTrace>* traces = nullptr);

/// attend(T, (F_1 + phi_1) || ... || (F_S + phi_S)) with a single layer.
Var multiscale_concat(const Var& t, const FeaturePyramid& pyramid, const std::vector<Var>& encodings,
                      const AttentionLayer& layer, AttentionTrace* trace = nullptr);

/// Continuous grid position of a normalized [-1,1] joint: col from x, row from y.
GridPoint joint_to_grid(double x, double y, GridShape grid);

/// The r x r integer cells used for a joint at continuous position c, row-major,
/// before border clamping: floor(c) - r/2 + 1 ... floor(c) + r/2 on each axis.
std::vector<GridPoint> joint_patch_cells(GridPoint c, std::size_t r);

/// Single-query attention of target row `t_row` (1 x d) over the r x r patch of
/// F_1 around the joint with relative-position bias sampled from eta_tilde.
Var joint_aware_attention(const Var& t_row, const Var& f1, GridShape grid1, GridPoint joint,
                          const Var& eta_tilde, std::size_t r, const AttentionLayer& layer,
                          AttentionTrace* trace = nullptr);

/// joint_aware_attention for the first H rows of T with joints_2d (H x 2,
/// normalized). Coordinates carry no gradient. Returns H x d.
Var joint_aware_rows(const Var& t, const Var& f1, GridShape grid1, const Tensor& joints_2d, const Var& eta_tilde,
                     std::size_t r, const AttentionLayer& layer, std::vector<AttentionTrace>* traces = nullptr);

/// Layers of the cross stage of one unit.
struct CombinedLayers {
  std::vector<AttentionLayer> scales;
  AttentionLayer joint;
};

struct UnitLayers {
  CombinedLayers cross;
  AttentionLayer self;
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct UnitTrace {
  std::vector<AttentionTrace> scales;  // per scale, (H+2) x l_{F_i}
  std::vector<AttentionTrace> joints;  // per joint, 1 x r^2
  AttentionTrace self;                 // (H+2) x (H+2)
};

/// Rows i < H: (joint-aware + multi-scale)/2; remaining rows: multi-scale only.
Var combined_attention(const Var& t, const FeaturePyramid& pyramid, const PositionalEncodings& pe,
                       const std::vector<Var>& encodings, const Tensor& joints_2d, const CombinedLayers& layers,
                       UnitTrace* trace = nullptr);

/// self-attention of the combined attention output; target_pe (if set) is added to T first.
Var transformer_unit(const Var& t, const FeaturePyramid& pyramid, const PositionalEncodings& pe,
                     const std::vector<Var>& encodings, const Tensor& joints_2d, const UnitLayers& layers,
                     const Var& target_pe = {}, UnitTrace* trace = nullptr);

}  // namespace smpler
