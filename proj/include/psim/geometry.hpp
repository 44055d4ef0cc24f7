// SPDX-License-Identifier: Apache-2.0
//
// Point-cloud representation, ingestion, farthest point sampling and top-k
// neighbor search: the point mapping stage that precedes feature processing.
// Everything here is pure and deterministic; ties are always broken toward
// the lowest index so that downstream schedules and traces are stable.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "psim/core.hpp"

namespace psim::geom {

struct PointCloud {
  std::vector<Vec3> coords;
  std::vector<std::vector<double>> features;
  std::size_t feat_len = 0;

  std::size_t size() const { return coords.size(); }
};

/// Throws std::invalid_argument if the cloud breaks a structural invariant
/// (empty, ragged feature rows, coords/features length mismatch).
void validate_cloud(const PointCloud& cloud);

enum class CloudFormat { xyz_ascii, off_ascii };
enum class SyntheticDist { uniform_cube, gaussian_clusters };

/// Load a point cloud from disk. xyz_ascii: one point per line, first three
/// whitespace-separated columns are coordinates, remaining columns auxiliary
/// features. off_ascii: standard OFF header, vertex lines only (faces
/// ignored). Point order is file order. Throws std::runtime_error with file
/// and line context on malformed input.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);

/// Deterministic synthetic cloud, features initialized to the coordinates.
///
/// uniform_cube: coordinates are three uniform01 draws per point.
/// gaussian_clusters: 8 cluster centers are drawn first (three uniform01
/// draws each), then per point one engine draw selects the cluster
/// (draw % 8) and two Box-Muller pairs (four uniform01 draws) supply three
/// normal offsets scaled by 0.08 and clamped to [0,1].
PointCloud gen_synthetic_cloud(std::uint64_t seed, std::size_t n, SyntheticDist dist);

/// Squared Euclidean distance. All ordering decisions in the artifact use
/// this; it is monotone in the true distance and avoids square roots.
inline double sq_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

struct SampledSet {
  std::vector<std::size_t> center_indices;  // indices into the parent cloud, selection order

  std::size_t size() const { return center_indices.size(); }
};

/// Farthest point sampling. result[0] == start; each following pick
/// maximizes the minimum squared distance to the already-selected set,
/// ties broken by lowest index.
SampledSet fps(const PointCloud& cloud, std::size_t m, std::size_t start);

struct NeighborTable {
  // neighbors[c] lists exactly k parent-cloud indices for center c, sorted
  // ascending by squared distance, ties by ascending index. The center's own
  // index is always present (distance zero is minimal).
  std::vector<std::vector<std::size_t>> neighbors;
  std::size_t k = 0;
};

/// Brute-force top-k nearest neighbors of each center within `cloud`.
/// O(n log n) per center; the clouds here are small enough that this is both
/// fast and trivially correct against a full-sort oracle.
NeighborTable knn(const PointCloud& cloud, const SampledSet& centers, std::size_t k);

/// Per-layer sampling sizes used to build a Mapping.
struct LayerSampling {
  std::size_t centers = 0;    // FPS output size m
  std::size_t neighbors = 0;  // k
};

struct FpsStart {
  enum class Kind { fixed_index, seeded_random };
  Kind kind = Kind::fixed_index;
  std::size_t index = 0;      // fixed_index: used for every layer
  std::uint64_t seed = 0;     // seeded_random: start = engine_draw % layer_n per layer
};

/// One layer of the data-dependency skeleton.
struct MappingLayer {
  SampledSet centers;         // indices into this layer's parent cloud
  NeighborTable neighbors;    // parent-cloud indices per center
  std::vector<Vec3> center_coords;  // coords of the sampled points (the next parent cloud)
  std::size_t parent_n = 0;
};

/// Per-layer (SampledSet, NeighborTable) pairs. Layer j's parent cloud is
/// layer j-1's output cloud; layer 1's parent is the network input.
struct Mapping {
  std::vector<MappingLayer> layers;
  std::size_t input_n = 0;

  std::size_t layer_count() const { return layers.size(); }

  /// Position of parent-cloud point `point` among layer `layer`'s centers
  /// (layer is 1-based). Throws std::out_of_range if not a center.
  std::size_t center_position(std::size_t layer, std::size_t point) const;

  /// True if `point` is a center of `layer` (1-based).
  bool is_center(std::size_t layer, std::size_t point) const;

 private:
  friend Mapping make_mapping(std::vector<MappingLayer> layers, std::size_t input_n);
  mutable std::vector<std::unordered_map<std::size_t, std::size_t>> position_cache_;
  void build_positions() const;
};

/// Assemble a Mapping from prebuilt layers (used by build_mapping and by
/// hand-constructed worked examples).
Mapping make_mapping(std::vector<MappingLayer> layers, std::size_t input_n);

/// Run fps + knn per layer; layer j+1's parent is the cloud formed by layer
/// j's centers. Deterministic given the start policy.
Mapping build_mapping(const PointCloud& input, const std::vector<LayerSampling>& layers,
                      const FpsStart& start = {});

}  // namespace psim::geom
