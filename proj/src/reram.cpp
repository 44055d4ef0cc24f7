// SPDX-License-Identifier: Apache-2.0
#include "psim/reram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psim::reram {

void QuantSpec::validate() const {
  if (bits_per_cell != 1 && bits_per_cell != 2 && bits_per_cell != 4) {
    throw std::invalid_argument("QuantSpec: bits_per_cell must be 1, 2 or 4");
  }
  if (weight_bits <= 0 || weight_bits % bits_per_cell != 0) {
    throw std::invalid_argument("QuantSpec: weight_bits must be divisible by bits_per_cell");
  }
  if (weight_bits > 16 || input_bits > 16 || input_bits <= 0) {
    throw std::invalid_argument("QuantSpec: bit widths out of supported range (1..16)");
  }
}

namespace {

std::int32_t round_clamp(double v, std::int32_t qmax) {
  const auto r = static_cast<std::int32_t>(std::llround(v));  // ties away from zero
  return std::clamp(r, -qmax, qmax);
}

}  // namespace

QuantizedMatrix quantize_matrix(const MatD& w, const QuantSpec& q) {
  q.validate();
  double max_abs = 0.0;
  for (double v : w.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize_matrix: non-finite entry");
    max_abs = std::max(max_abs, std::fabs(v));
  }
  QuantizedMatrix out;
  out.scale = max_abs > 0.0 ? max_abs / q.weight_qmax() : 1.0;
  out.levels = MatI(w.rows, w.cols);
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    out.levels.data[i] = round_clamp(w.data[i] / out.scale, q.weight_qmax());
  }
  return out;
}

QuantizedVector quantize_vector(std::span<const double> x, const QuantSpec& q) {
  q.validate();
  double max_abs = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize_vector: non-finite entry");
    max_abs = std::max(max_abs, std::fabs(v));
  }
  QuantizedVector out;
  out.scale = max_abs > 0.0 ? max_abs / q.input_qmax() : 1.0;
  out.q.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.q[i] = round_clamp(x[i] / out.scale, q.input_qmax());
  }
  return out;
}

std::vector<CrossbarArray> slice_weights(const MatI& wq, const QuantSpec& q) {
  q.validate();
  const std::int32_t offset = q.weight_offset();
  const std::int32_t lo = -offset, hi = offset - 1;
  for (std::int32_t v : wq.data) {
    if (v < lo || v > hi) throw std::invalid_argument("slice_weights: level out of range");
  }
  const int n_slices = q.weight_slices();
  const std::uint32_t mask = (1u << q.bits_per_cell) - 1u;

  std::vector<CrossbarArray> slices(static_cast<std::size_t>(n_slices));
  for (int s = 0; s < n_slices; ++s) {
    auto& arr = slices[static_cast<std::size_t>(s)];
    arr.rows = wq.rows;
    arr.cols = wq.cols;
    arr.slice_index = s;
    arr.cell_levels = Mat<std::uint8_t>(wq.rows, wq.cols);
  }
  for (std::size_t i = 0; i < wq.data.size(); ++i) {
    const auto u = static_cast<std::uint32_t>(wq.data[i] + offset);
    for (int s = 0; s < n_slices; ++s) {
      slices[static_cast<std::size_t>(s)].cell_levels.data[i] =
          static_cast<std::uint8_t>((u >> (s * q.bits_per_cell)) & mask);
    }
  }
  return slices;
}

MatI recombine_slices(const std::vector<CrossbarArray>& slices, const QuantSpec& q) {
  if (slices.empty()) throw std::invalid_argument("recombine_slices: no slices");
  MatI out(slices.front().rows, slices.front().cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    std::int64_t u = 0;
    for (const auto& s : slices) {
      u += static_cast<std::int64_t>(s.cell_levels.data[i])
           << (s.slice_index * q.bits_per_cell);
    }
    out.data[i] = static_cast<std::int32_t>(u - q.weight_offset());
  }
  return out;
}

std::vector<std::int64_t> crossbar_matvec_q(const std::vector<CrossbarArray>& slices,
                                            std::span<const std::int32_t> xq,
                                            const QuantSpec& q) {
  if (slices.empty()) throw std::invalid_argument("crossbar_matvec_q: no slices");
  const std::size_t rows = slices.front().rows;
  const std::size_t cols = slices.front().cols;
  if (xq.size() != rows) {
    throw std::invalid_argument("crossbar_matvec_q: input length does not match array rows");
  }
  const std::size_t n = xq.size();
  const std::int64_t w_off = q.weight_offset();
  const std::int64_t x_off = q.input_offset();

  // Offset-encode the input; bit planes are taken from the unsigned value.
  std::vector<std::uint32_t> ux(n);
  std::int64_t sum_ux = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t u = static_cast<std::int64_t>(xq[i]) + x_off;
    if (u < 0 || u >= (std::int64_t{1} << q.input_bits)) {
      throw std::invalid_argument("crossbar_matvec_q: input level out of range");
    }
    ux[i] = static_cast<std::uint32_t>(u);
    sum_ux += u;
  }

  // Bit-serial accumulation over input bit planes and weight slices:
  // acc[c] = sum_i u_w[i][c] * u_x[i].
  std::vector<std::int64_t> acc(cols, 0);
  for (int b = 0; b < q.input_bits; ++b) {
    for (const auto& sl : slices) {
      const int shift = b + sl.slice_index * q.bits_per_cell;
      for (std::size_t i = 0; i < n; ++i) {
        if (!((ux[i] >> b) & 1u)) continue;
        const std::uint8_t* row = &sl.cell_levels.data[i * cols];
        for (std::size_t c = 0; c < cols; ++c) {
          acc[c] += static_cast<std::int64_t>(row[c]) << shift;
        }
      }
    }
  }

  // Remove the offset terms: wq^T xq = sum u_w u_x - x_off * sum_i u_w
  //                                   - w_off * sum_i u_x + n * w_off * x_off.
  std::vector<std::int64_t> col_usum(cols, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& sl : slices) {
      const std::uint8_t* row = &sl.cell_levels.data[i * cols];
      const int shift = sl.slice_index * q.bits_per_cell;
      for (std::size_t c = 0; c < cols; ++c) {
        col_usum[c] += static_cast<std::int64_t>(row[c]) << shift;
      }
    }
  }
  const std::int64_t nn = static_cast<std::int64_t>(n);
  for (std::size_t c = 0; c < cols; ++c) {
    acc[c] -= x_off * col_usum[c];
    acc[c] -= w_off * sum_ux;
    acc[c] += nn * w_off * x_off;
  }
  return acc;
}

MatvecResult crossbar_matvec(const std::vector<CrossbarArray>& slices,
                             std::span<const double> x, const QuantSpec& q) {
  const auto xq = quantize_vector(x, q);
  MatvecResult out;
  out.acc = crossbar_matvec_q(slices, xq.q, q);
  out.input_scale = xq.scale;
  return out;
}

std::size_t ArrayAllocation::total_arrays() const {
  std::size_t total = 0;
  for (const auto& l : layers) {
    for (const auto& s : l) total += s.arrays;
  }
  return total;
}

std::size_t ArrayAllocation::ima_count() const {
  const std::size_t total = total_arrays();
  return (total + arrays_per_ima - 1) / arrays_per_ima;
}

double ArrayAllocation::utilization() const {
  double used = 0.0, allocated = 0.0;
  for (const auto& l : layers) {
    for (const auto& s : l) {
      used += static_cast<double>(s.rows * s.cols * s.slices * replication);
      allocated += static_cast<double>(s.arrays * array_dim * array_dim);
    }
  }
  return allocated > 0.0 ? used / allocated : 0.0;
}

nlohmann::json ArrayAllocation::summary() const {
  nlohmann::json j;
  j["array_dim"] = array_dim;
  j["arrays_per_ima"] = arrays_per_ima;
  j["replication"] = replication;
  j["total_arrays"] = total_arrays();
  j["ima_count"] = ima_count();
  j["utilization"] = utilization();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : l) {
      stages.push_back({{"rows", s.rows},
                        {"cols", s.cols},
                        {"row_tiles", s.row_tiles},
                        {"col_tiles", s.col_tiles},
                        {"slices", s.slices},
                        {"arrays", s.arrays}});
    }
    j["layers"].push_back(std::move(stages));
  }
  return j;
}

ArrayAllocation map_mlp(const net::NetworkConfig& cfg, const QuantSpec& q,
                        std::size_t array_dim, std::size_t arrays_per_ima,
                        std::size_t replication) {
  q.validate();
  if (array_dim == 0 || arrays_per_ima == 0 || replication == 0) {
    throw std::invalid_argument("map_mlp: zero geometry parameter");
  }
  ArrayAllocation alloc;
  alloc.array_dim = array_dim;
  alloc.arrays_per_ima = arrays_per_ima;
  alloc.replication = replication;
  for (const auto& layer : cfg.layers) {
    std::vector<StageAllocation> stages;
    for (const auto& shape : layer.mlp) {
      StageAllocation s;
      s.rows = shape.rows;
      s.cols = shape.cols;
      s.row_tiles = (shape.rows + array_dim - 1) / array_dim;
      s.col_tiles = (shape.cols + array_dim - 1) / array_dim;
      s.slices = static_cast<std::size_t>(q.weight_slices());
      s.arrays = s.row_tiles * s.col_tiles * s.slices * replication;
      stages.push_back(s);
    }
    alloc.layers.push_back(std::move(stages));
  }
  return alloc;
}

ReramMlp::ReramMlp(const net::NetworkConfig& cfg, const net::Weights& weights,
                   const QuantSpec& q, std::size_t array_dim, std::size_t arrays_per_ima,
                   std::size_t replication)
    : alloc_(map_mlp(cfg, q, array_dim, arrays_per_ima, replication)), quant_(q) {
  if (weights.layers.size() != cfg.layers.size()) {
    throw std::invalid_argument("ReramMlp: weights/config layer mismatch");
  }
  layers_.resize(weights.layers.size());
  for (std::size_t li = 0; li < weights.layers.size(); ++li) {
    const auto& lw = weights.layers[li];
    layers_[li].reserve(lw.stages.size());
    for (const auto& sw : lw.stages) {
      Stage stage;
      stage.rows = sw.w.rows;
      stage.cols = sw.w.cols;
      stage.bias = sw.bias;
      const auto wq = quantize_matrix(sw.w, q);
      stage.weight_scale = wq.scale;
      for (std::size_t r0 = 0; r0 < sw.w.rows; r0 += array_dim) {
        for (std::size_t c0 = 0; c0 < sw.w.cols; c0 += array_dim) {
          Tile tile;
          tile.row0 = r0;
          tile.col0 = c0;
          tile.rows = std::min(array_dim, sw.w.rows - r0);
          tile.cols = std::min(array_dim, sw.w.cols - c0);
          MatI sub(tile.rows, tile.cols);
          for (std::size_t r = 0; r < tile.rows; ++r) {
            for (std::size_t c = 0; c < tile.cols; ++c) {
              sub.at(r, c) = wq.levels.at(r0 + r, c0 + c);
            }
          }
          tile.slices = slice_weights(sub, q);
          stage.tiles.push_back(std::move(tile));
        }
      }
      layers_[li].push_back(std::move(stage));
    }
  }
}

std::vector<double> ReramMlp::forward(std::size_t layer, std::span<const double> x) const {
  if (layer >= layers_.size()) throw std::out_of_range("ReramMlp::forward: bad layer");
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& stage : layers_[layer]) {
    if (cur.size() != stage.rows) {
      throw std::invalid_argument("ReramMlp::forward: input length does not match stage rows");
    }
    // One activation quantization per stage; row tiles consume segments of
    // the same quantized vector so partial sums stay on a single scale.
    const auto xq = quantize_vector(cur, quant_);
    std::vector<std::int64_t> acc(stage.cols, 0);
    for (const auto& tile : stage.tiles) {
      std::span<const std::int32_t> seg(xq.q.data() + tile.row0, tile.rows);
      const auto part = crossbar_matvec_q(tile.slices, seg, quant_);
      for (std::size_t c = 0; c < tile.cols; ++c) acc[tile.col0 + c] += part[c];
    }
    const double scale = stage.weight_scale * xq.scale;
    std::vector<double> next(stage.cols);
    for (std::size_t c = 0; c < stage.cols; ++c) {
      const double v = static_cast<double>(acc[c]) * scale + stage.bias[c];
      next[c] = v > 0.0 ? v : 0.0;
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace psim::reram
