// SPDX-License-Identifier: Apache-2.0
//
// Reference full-precision feature-processing pipeline: per-center
// aggregation (element-wise feature difference), a small MLP stack with ReLU
// after every stage, and column-wise max reduction. This path is the numeric
// oracle the in-memory engine is checked against, and it defines the
// workload (shapes, counts) the simulator replays.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psim/geometry.hpp"

namespace psim::net {

struct StageShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const StageShape&) const = default;
};

struct LayerConfig {
  std::size_t in_feat_len = 0;
  std::size_t out_feat_len = 0;
  std::vector<StageShape> mlp;  // rows of stage i+1 must equal cols of stage i
  std::size_t k = 0;            // neighbor count
  std::size_t m = 0;            // center count
};

struct NetworkConfig {
  std::vector<LayerConfig> layers;
  std::string preset_id;  // empty for custom configs

  std::vector<geom::LayerSampling> sampling() const;
};

/// Built-in model presets "model0", "model1", "model2" (two set-abstraction
/// layers each; 512 then 128 centers, k = 16).
///
/// model0's second layer is published with a 129-long input feature vector
/// but a 128-row first MLP stage; no aggregation rule here produces the
/// extra column, so the preset uses 128. Passing extra_input_column = true
/// restores the 129-column variant by widening the first stage to 129 rows.
NetworkConfig preset(std::string_view id, bool extra_input_column = false);

struct Diagnostic {
  enum class Severity { warning, error };
  Severity severity = Severity::error;
  std::string message;
};

/// Checks every LayerConfig invariant plus cross-layer feature-length
/// consistency. Reports all violations instead of failing on the first.
std::vector<Diagnostic> validate_config(const NetworkConfig& cfg);

/// True when validate_config reports no error-severity diagnostics.
bool config_ok(const std::vector<Diagnostic>& diags);

struct StageWeights {
  MatD w;                    // rows x cols
  std::vector<double> bias;  // length cols
};

struct LayerWeights {
  std::vector<StageWeights> stages;
};

struct Weights {
  std::vector<LayerWeights> layers;
};

/// Deterministic weights: mt19937_64(seed), values uniform in [-1,1] drawn
/// layer by layer, stage by stage, row-major. Biases are zero.
Weights gen_weights(const NetworkConfig& cfg, std::uint64_t seed);

/// Textual weights container, round-trip exact (values serialized as C99
/// hex floats). Schema: header line, then per layer/stage a shape line
/// followed by "w ..." and "b ..." lines.
void save_weights(const std::filesystem::path& path, const Weights& w);
Weights load_weights(const std::filesystem::path& path);

/// Element-wise (neighbor - center). Lengths must match.
std::vector<double> aggregate_diff(std::span<const double> center_feat,
                                   std::span<const double> neighbor_feat);

/// Sequential (matvec + bias + ReLU) stages at full precision.
std::vector<double> mlp_forward_ref(const LayerWeights& weights, std::span<const double> x);

/// Column-wise maximum over one or more equal-length rows.
std::vector<double> reduce_max(const std::vector<std::vector<double>>& rows);

/// Zero-pad or truncate a feature vector to `len` (layer input sizing rule).
std::vector<double> resize_features(std::span<const double> f, std::size_t len);

/// Output feature vector of one center (by position among the layer's
/// centers): gather its neighbors from `parent_features`, aggregate, run the
/// MLP per neighbor, reduce by max. Both layer_forward_ref and schedule
/// replay go through this function, so any execution order that respects
/// data dependencies reproduces the reference output bit for bit.
std::vector<double> center_forward_ref(const std::vector<std::vector<double>>& parent_features,
                                       const geom::MappingLayer& mapping, std::size_t position,
                                       const LayerConfig& cfg, const LayerWeights& weights);

/// One set-abstraction layer: center_forward_ref for every center. Output
/// cloud carries the center coordinates and the new features.
geom::PointCloud layer_forward_ref(const geom::PointCloud& parent,
                                   const geom::MappingLayer& mapping, const LayerConfig& cfg,
                                   const LayerWeights& weights);

/// Folds layer_forward_ref over all layers.
geom::PointCloud network_forward_ref(const geom::PointCloud& input, const NetworkConfig& cfg,
                                     const Weights& weights, const geom::Mapping& mapping);

}  // namespace psim::net
