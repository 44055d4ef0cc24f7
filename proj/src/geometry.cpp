// SPDX-License-Identifier: Apache-2.0
#include "psim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace psim::geom {

void validate_cloud(const PointCloud& cloud) {
  if (cloud.coords.empty()) {
    throw std::invalid_argument("point cloud is empty");
  }
  if (cloud.coords.size() != cloud.features.size()) {
    throw std::invalid_argument("point cloud: coords/features length mismatch");
  }
  for (const auto& f : cloud.features) {
    if (f.size() != cloud.feat_len) {
      throw std::invalid_argument("point cloud: ragged feature vector");
    }
  }
}

namespace {

std::runtime_error parse_error(const std::filesystem::path& path, std::size_t line_no,
                               const std::string& what) {
  std::ostringstream os;
  os << path.string() << ":" << line_no << ": " << what;
  return std::runtime_error(os.str());
}

// Splits a line into doubles; returns false on blank/comment-only lines.
bool parse_columns(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::istringstream is(line);
  double v;
  while (is >> v) out.push_back(v);
  if (!is.eof()) return false;  // trailing garbage
  return true;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open point cloud file: " + path.string());
  }

  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> cols;

  auto append_point = [&](const std::vector<double>& c) {
    if (c.size() < 3) {
      throw parse_error(path, line_no, "expected at least 3 coordinate columns");
    }
    cloud.coords.push_back({c[0], c[1], c[2]});
    cloud.features.emplace_back(c.begin(), c.end());
  };

  if (format == CloudFormat::xyz_ascii) {
    std::size_t expect_cols = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      if (!parse_columns(line, cols) || cols.empty()) {
        throw parse_error(path, line_no, "malformed line");
      }
      if (expect_cols == 0) {
        expect_cols = cols.size();
      } else if (cols.size() != expect_cols) {
        throw parse_error(path, line_no, "wrong column count");
      }
      append_point(cols);
    }
    if (cloud.coords.empty()) {
      throw std::runtime_error("empty point cloud file: " + path.string());
    }
    cloud.feat_len = expect_cols;
    return cloud;
  }

  // off_ascii: "OFF" magic, then "nv nf ne", then nv vertex lines.
  std::size_t nv = 0;
  bool have_header = false;
  bool have_counts = false;
  while (!have_counts && std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      // Allow the single-line variant "OFF nv nf ne".
      if (line.rfind("OFF", 0) != 0) {
        throw parse_error(path, line_no, "missing OFF header");
      }
      std::string rest = line.substr(3);
      if (!rest.empty() && parse_columns(rest, cols) && cols.size() >= 3) {
        nv = static_cast<std::size_t>(cols[0]);
        have_counts = true;
      }
      have_header = true;
      continue;
    }
    if (!parse_columns(line, cols) || cols.size() < 3) {
      throw parse_error(path, line_no, "malformed OFF count line");
    }
    nv = static_cast<std::size_t>(cols[0]);
    have_counts = true;
  }
  if (!have_counts) {
    throw std::runtime_error("truncated OFF file: " + path.string());
  }
  if (nv == 0) {
    throw std::runtime_error("empty point cloud file: " + path.string());
  }
  while (cloud.coords.size() < nv && std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!parse_columns(line, cols)) {
      throw parse_error(path, line_no, "malformed vertex line");
    }
    append_point(cols);
    if (cloud.features.back().size() != cloud.features.front().size()) {
      throw parse_error(path, line_no, "wrong column count");
    }
  }
  if (cloud.coords.size() < nv) {
    throw std::runtime_error("truncated OFF file: " + path.string());
  }
  cloud.feat_len = cloud.features.front().size();
  return cloud;
}

PointCloud gen_synthetic_cloud(std::uint64_t seed, std::size_t n, SyntheticDist dist) {
  if (n == 0) {
    throw std::invalid_argument("gen_synthetic_cloud: n must be >= 1");
  }
  std::mt19937_64 rng(seed);
  PointCloud cloud;
  cloud.coords.reserve(n);
  cloud.features.reserve(n);
  cloud.feat_len = 3;

  auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };

  if (dist == SyntheticDist::uniform_cube) {
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 p{uniform01(rng), uniform01(rng), uniform01(rng)};
      cloud.coords.push_back(p);
      cloud.features.push_back({p[0], p[1], p[2]});
    }
    return cloud;
  }

  // gaussian_clusters, stream documented in the header.
  constexpr std::size_t kClusters = 8;
  constexpr double kSigma = 0.08;
  std::array<Vec3, kClusters> centers;
  for (auto& c : centers) {
    c = {uniform01(rng), uniform01(rng), uniform01(rng)};
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(rng() % kClusters);
    // Box-Muller pairs: (u1,u2) -> z0,z1 and (u3,u4) -> z2. log1p(-u) keeps
    // the argument away from log(0) since uniform01 lives in [0,1).
    const double u1 = uniform01(rng), u2 = uniform01(rng);
    const double u3 = uniform01(rng), u4 = uniform01(rng);
    const double r1 = std::sqrt(-2.0 * std::log1p(-u1));
    const double z0 = r1 * std::cos(2.0 * M_PI * u2);
    const double z1 = r1 * std::sin(2.0 * M_PI * u2);
    const double r2 = std::sqrt(-2.0 * std::log1p(-u3));
    const double z2 = r2 * std::cos(2.0 * M_PI * u4);
    Vec3 p{clamp01(centers[c][0] + kSigma * z0), clamp01(centers[c][1] + kSigma * z1),
           clamp01(centers[c][2] + kSigma * z2)};
    cloud.coords.push_back(p);
    cloud.features.push_back({p[0], p[1], p[2]});
  }
  return cloud;
}

SampledSet fps(const PointCloud& cloud, std::size_t m, std::size_t start) {
  const std::size_t n = cloud.size();
  if (n == 0) throw std::invalid_argument("fps: empty cloud");
  if (m < 1 || m > n) throw std::invalid_argument("fps: m out of range [1, n]");
  if (start >= n) throw std::invalid_argument("fps: start index out of range");

  SampledSet out;
  out.center_indices.reserve(m);
  std::vector<char> selected(n, 0);
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());

  std::size_t cur = start;
  out.center_indices.push_back(cur);
  selected[cur] = 1;

  for (std::size_t step = 1; step < m; ++step) {
    // Fold the newest center into the running min-distance field.
    for (std::size_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      const double d = sq_distance(cloud.coords[i], cloud.coords[cur]);
      if (d < min_sq[i]) min_sq[i] = d;
    }
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (selected[i]) continue;
      if (min_sq[i] > best_d) {  // strict: ties keep the lowest index
        best_d = min_sq[i];
        best = i;
      }
    }
    cur = best;
    out.center_indices.push_back(cur);
    selected[cur] = 1;
  }
  return out;
}

NeighborTable knn(const PointCloud& cloud, const SampledSet& centers, std::size_t k) {
  const std::size_t n = cloud.size();
  if (k < 1 || k > n) throw std::invalid_argument("knn: k out of range [1, n]");

  NeighborTable table;
  table.k = k;
  table.neighbors.reserve(centers.size());

  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t c : centers.center_indices) {
    if (c >= n) throw std::invalid_argument("knn: center index out of range");
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = {sq_distance(cloud.coords[i], cloud.coords[c]), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> row(k);
    for (std::size_t j = 0; j < k; ++j) row[j] = dist[j].second;
    table.neighbors.push_back(std::move(row));
  }
  return table;
}

void Mapping::build_positions() const {
  if (!position_cache_.empty()) return;
  position_cache_.resize(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& idx = layers[li].centers.center_indices;
    position_cache_[li].reserve(idx.size());
    for (std::size_t p = 0; p < idx.size(); ++p) {
      position_cache_[li].emplace(idx[p], p);
    }
  }
}

std::size_t Mapping::center_position(std::size_t layer, std::size_t point) const {
  build_positions();
  const auto& m = position_cache_.at(layer - 1);
  auto it = m.find(point);
  if (it == m.end()) {
    throw std::out_of_range("mapping: point is not a center of the layer");
  }
  return it->second;
}

bool Mapping::is_center(std::size_t layer, std::size_t point) const {
  build_positions();
  if (layer == 0 || layer > layers.size()) return false;
  const auto& m = position_cache_[layer - 1];
  return m.find(point) != m.end();
}

Mapping make_mapping(std::vector<MappingLayer> layers, std::size_t input_n) {
  Mapping m;
  m.layers = std::move(layers);
  m.input_n = input_n;
  std::size_t parent = input_n;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    auto& lay = m.layers[li];
    lay.parent_n = parent;
    if (lay.centers.size() != lay.neighbors.neighbors.size() ||
        lay.centers.size() != lay.center_coords.size()) {
      throw std::invalid_argument("make_mapping: inconsistent layer sizes");
    }
    for (std::size_t c : lay.centers.center_indices) {
      if (c >= parent) throw std::invalid_argument("make_mapping: center index out of range");
    }
    for (const auto& row : lay.neighbors.neighbors) {
      for (std::size_t j : row) {
        if (j >= parent) throw std::invalid_argument("make_mapping: neighbor index out of range");
      }
    }
    parent = lay.centers.size();
  }
  return m;
}

Mapping build_mapping(const PointCloud& input, const std::vector<LayerSampling>& layer_specs,
                      const FpsStart& start) {
  validate_cloud(input);
  std::mt19937_64 start_rng(start.seed);

  std::vector<MappingLayer> built;
  built.reserve(layer_specs.size());

  // Parent cloud for the mapping stage only needs coordinates.
  PointCloud parent;
  parent.coords = input.coords;
  parent.features.assign(input.size(), {});
  parent.feat_len = 0;

  for (const auto& spec : layer_specs) {
    std::size_t s = 0;
    if (start.kind == FpsStart::Kind::fixed_index) {
      s = start.index < parent.size() ? start.index : 0;
    } else {
      s = static_cast<std::size_t>(start_rng() % parent.size());
    }
    MappingLayer layer;
    layer.parent_n = parent.size();
    layer.centers = fps(parent, spec.centers, s);
    layer.neighbors = knn(parent, layer.centers, spec.neighbors);
    layer.center_coords.reserve(spec.centers);
    for (std::size_t c : layer.centers.center_indices) {
      layer.center_coords.push_back(parent.coords[c]);
    }

    PointCloud next;
    next.coords = layer.center_coords;
    next.features.assign(next.coords.size(), {});
    next.feat_len = 0;
    built.push_back(std::move(layer));
    parent = std::move(next);
  }
  return make_mapping(std::move(built), input.size());
}

}  // namespace psim::geom
