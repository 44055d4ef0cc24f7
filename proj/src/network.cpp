// SPDX-License-Identifier: Apache-2.0
#include "psim/network.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace psim::net {

std::vector<geom::LayerSampling> NetworkConfig::sampling() const {
  std::vector<geom::LayerSampling> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back({l.m, l.k});
  return out;
}

NetworkConfig preset(std::string_view id, bool extra_input_column) {
  auto layer = [](std::size_t in, std::size_t out, std::vector<StageShape> mlp, std::size_t k,
                  std::size_t m) {
    LayerConfig l;
    l.in_feat_len = in;
    l.out_feat_len = out;
    l.mlp = std::move(mlp);
    l.k = k;
    l.m = m;
    return l;
  };

  NetworkConfig cfg;
  cfg.preset_id = std::string(id);
  if (id == "model0") {
    cfg.layers = {
        layer(4, 128, {{4, 64}, {64, 64}, {64, 128}}, 16, 512),
        layer(128, 256, {{128, 128}, {128, 128}, {128, 256}}, 16, 128),
    };
    if (extra_input_column) {
      cfg.layers[1].in_feat_len = 129;
      cfg.layers[1].mlp[0].rows = 129;
    }
  } else if (id == "model1") {
    cfg.layers = {
        layer(8, 256, {{8, 128}, {128, 128}, {128, 256}}, 16, 512),
        layer(256, 512, {{256, 256}, {256, 256}, {256, 512}}, 16, 128),
    };
  } else if (id == "model2") {
    cfg.layers = {
        layer(16, 512, {{16, 256}, {256, 256}, {256, 512}}, 16, 512),
        layer(512, 1024, {{512, 512}, {512, 512}, {512, 1024}}, 16, 128),
    };
  } else {
    throw std::invalid_argument("unknown model preset: " + std::string(id));
  }
  return cfg;
}

std::vector<Diagnostic> validate_config(const NetworkConfig& cfg) {
  std::vector<Diagnostic> diags;
  auto error = [&](std::string msg) {
    diags.push_back({Diagnostic::Severity::error, std::move(msg)});
  };
  auto warning = [&](std::string msg) {
    diags.push_back({Diagnostic::Severity::warning, std::move(msg)});
  };

  if (cfg.layers.empty()) {
    error("config has no layers");
    return diags;
  }
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const auto& l = cfg.layers[li];
    std::ostringstream tag;
    tag << "layer " << (li + 1);
    if (l.mlp.empty()) {
      error(tag.str() + ": empty MLP");
      continue;
    }
    if (l.m == 0) error(tag.str() + ": zero centers");
    if (l.k == 0) error(tag.str() + ": zero neighbors");
    if (l.mlp.front().rows != l.in_feat_len) {
      std::ostringstream os;
      os << tag.str() << " stage 1: input rows " << l.mlp.front().rows
         << " != in_feat_len " << l.in_feat_len;
      error(os.str());
    }
    for (std::size_t si = 1; si < l.mlp.size(); ++si) {
      if (l.mlp[si - 1].cols != l.mlp[si].rows) {
        std::ostringstream os;
        os << "chain break at " << tag.str() << " stage " << (si + 1) << ": stage "
           << si << " output width " << l.mlp[si - 1].cols << " != stage " << (si + 1)
           << " input rows " << l.mlp[si].rows;
        error(os.str());
      }
    }
    if (l.mlp.back().cols != l.out_feat_len) {
      std::ostringstream os;
      os << tag.str() << " last stage: output width " << l.mlp.back().cols
         << " != out_feat_len " << l.out_feat_len;
      error(os.str());
    }
    if (li > 0) {
      const auto& prev = cfg.layers[li - 1];
      if (l.in_feat_len == prev.out_feat_len + 1) {
        std::ostringstream os;
        os << tag.str() << ": in_feat_len " << l.in_feat_len << " is one more than layer "
           << li << " out_feat_len " << prev.out_feat_len
           << "; the extra column is zero-filled";
        warning(os.str());
      } else if (l.in_feat_len != prev.out_feat_len) {
        std::ostringstream os;
        os << tag.str() << ": in_feat_len " << l.in_feat_len << " != layer " << li
           << " out_feat_len " << prev.out_feat_len;
        error(os.str());
      }
      if (l.m > prev.m) {
        error(tag.str() + ": more centers than the previous layer outputs");
      }
    }
  }
  return diags;
}

bool config_ok(const std::vector<Diagnostic>& diags) {
  return std::none_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Diagnostic::Severity::error;
  });
}

Weights gen_weights(const NetworkConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Weights w;
  w.layers.reserve(cfg.layers.size());
  for (const auto& l : cfg.layers) {
    LayerWeights lw;
    lw.stages.reserve(l.mlp.size());
    for (const auto& shape : l.mlp) {
      StageWeights sw;
      sw.w = MatD(shape.rows, shape.cols);
      for (auto& v : sw.w.data) v = uniform_in(rng, -1.0, 1.0);
      sw.bias.assign(shape.cols, 0.0);
      lw.stages.push_back(std::move(sw));
    }
    w.layers.push_back(std::move(lw));
  }
  return w;
}

namespace {

void write_hex_values(std::ostream& os, const char* tag, std::span<const double> vals) {
  os << tag;
  char buf[40];
  for (double v : vals) {
    std::snprintf(buf, sizeof(buf), " %a", v);
    os << buf;
  }
  os << "\n";
}

std::vector<double> read_hex_values(std::istringstream& is, std::size_t count,
                                    const char* expect_tag) {
  std::string tag;
  is >> tag;
  if (tag != expect_tag) {
    throw std::runtime_error("weights file: expected '" + std::string(expect_tag) +
                             "' line, got '" + tag + "'");
  }
  std::vector<double> out(count);
  std::string tok;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(is >> tok)) throw std::runtime_error("weights file: truncated value list");
    char* end = nullptr;
    out[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      throw std::runtime_error("weights file: bad value '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const Weights& w) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open weights file for writing: " + path.string());
  os << "psim-weights v1\n";
  os << "layers " << w.layers.size() << "\n";
  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const auto& lw = w.layers[li];
    os << "layer " << li << " stages " << lw.stages.size() << "\n";
    for (std::size_t si = 0; si < lw.stages.size(); ++si) {
      const auto& sw = lw.stages[si];
      os << "stage " << si << " rows " << sw.w.rows << " cols " << sw.w.cols << "\n";
      write_hex_values(os, "w", sw.w.data);
      write_hex_values(os, "b", sw.bias);
    }
  }
  if (!os) throw std::runtime_error("error writing weights file: " + path.string());
}

Weights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weights file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::istringstream is(buffer.str());

  std::string word, version;
  is >> word >> version;
  if (word != "psim-weights" || version != "v1") {
    throw std::runtime_error("weights file: bad header");
  }
  std::size_t n_layers = 0;
  is >> word >> n_layers;
  if (word != "layers") throw std::runtime_error("weights file: missing layer count");

  Weights w;
  w.layers.resize(n_layers);
  for (std::size_t li = 0; li < n_layers; ++li) {
    std::size_t idx = 0, n_stages = 0;
    is >> word >> idx;
    if (word != "layer" || idx != li) throw std::runtime_error("weights file: bad layer header");
    is >> word >> n_stages;
    if (word != "stages") throw std::runtime_error("weights file: bad layer header");
    w.layers[li].stages.resize(n_stages);
    for (std::size_t si = 0; si < n_stages; ++si) {
      std::size_t sidx = 0, rows = 0, cols = 0;
      is >> word >> sidx;
      if (word != "stage" || sidx != si) throw std::runtime_error("weights file: bad stage header");
      is >> word >> rows;
      if (word != "rows") throw std::runtime_error("weights file: bad stage header");
      is >> word >> cols;
      if (word != "cols") throw std::runtime_error("weights file: bad stage header");
      auto& sw = w.layers[li].stages[si];
      sw.w = MatD(rows, cols);
      sw.w.data = read_hex_values(is, rows * cols, "w");
      sw.bias = read_hex_values(is, cols, "b");
    }
  }
  return w;
}

std::vector<double> aggregate_diff(std::span<const double> center_feat,
                                   std::span<const double> neighbor_feat) {
  if (center_feat.size() != neighbor_feat.size()) {
    throw std::invalid_argument("aggregate_diff: length mismatch");
  }
  std::vector<double> out(center_feat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = neighbor_feat[i] - center_feat[i];
  return out;
}

std::vector<double> mlp_forward_ref(const LayerWeights& weights, std::span<const double> x) {
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& stage : weights.stages) {
    if (cur.size() != stage.w.rows) {
      throw std::invalid_argument("mlp_forward_ref: input length does not match stage rows");
    }
    std::vector<double> next(stage.bias);
    // y += x[r] * W[r,:], row by row; keeps the inner loop contiguous.
    for (std::size_t r = 0; r < stage.w.rows; ++r) {
      const double xr = cur[r];
      const double* wrow = &stage.w.data[r * stage.w.cols];
      for (std::size_t c = 0; c < stage.w.cols; ++c) next[c] += xr * wrow[c];
    }
    for (auto& v : next) v = v > 0.0 ? v : 0.0;
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> reduce_max(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("reduce_max: no rows");
  std::vector<double> out = rows.front();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != out.size()) {
      throw std::invalid_argument("reduce_max: ragged rows");
    }
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::max(out[c], rows[r][c]);
  }
  return out;
}

std::vector<double> resize_features(std::span<const double> f, std::size_t len) {
  std::vector<double> out(len, 0.0);
  const std::size_t copy = std::min(len, f.size());
  for (std::size_t i = 0; i < copy; ++i) out[i] = f[i];
  return out;
}

std::vector<double> center_forward_ref(const std::vector<std::vector<double>>& parent_features,
                                       const geom::MappingLayer& mapping, std::size_t position,
                                       const LayerConfig& cfg, const LayerWeights& weights) {
  const std::size_t center_idx = mapping.centers.center_indices[position];
  const auto center_feat = resize_features(parent_features[center_idx], cfg.in_feat_len);
  std::vector<std::vector<double>> mlp_rows;
  mlp_rows.reserve(mapping.neighbors.k);
  for (std::size_t j : mapping.neighbors.neighbors[position]) {
    const auto nb_feat = resize_features(parent_features[j], cfg.in_feat_len);
    const auto diff = aggregate_diff(center_feat, nb_feat);
    mlp_rows.push_back(mlp_forward_ref(weights, diff));
  }
  return reduce_max(mlp_rows);
}

geom::PointCloud layer_forward_ref(const geom::PointCloud& parent,
                                   const geom::MappingLayer& mapping, const LayerConfig& cfg,
                                   const LayerWeights& weights) {
  geom::PointCloud out;
  const std::size_t m = mapping.centers.size();
  out.coords = mapping.center_coords;
  out.features.reserve(m);
  out.feat_len = cfg.out_feat_len;
  for (std::size_t c = 0; c < m; ++c) {
    out.features.push_back(center_forward_ref(parent.features, mapping, c, cfg, weights));
  }
  return out;
}

geom::PointCloud network_forward_ref(const geom::PointCloud& input, const NetworkConfig& cfg,
                                     const Weights& weights, const geom::Mapping& mapping) {
  if (cfg.layers.size() != mapping.layer_count() || cfg.layers.size() != weights.layers.size()) {
    throw std::invalid_argument("network_forward_ref: config/mapping/weights layer mismatch");
  }
  geom::PointCloud cur = input;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    cur = layer_forward_ref(cur, mapping.layers[li], cfg.layers[li], weights.layers[li]);
  }
  return cur;
}

}  // namespace psim::net
