// SPDX-License-Identifier: Apache-2.0
//
// Functional model of the in-memory MLP engine: fixed-point quantization,
// bit-slicing of signed weights across low-precision cells, bit-serial input
// evaluation, and tiling of the model's MLP stages onto fixed-size crossbar
// arrays grouped into IMAs.
//
// The analog path is modeled as exact integer arithmetic: a crossbar
// evaluation returns precisely the dot product of the quantized operands.
// Signed weights use offset encoding (cells hold w + 2^(weight_bits-1));
// the offset contribution is closed-form and subtracted after accumulation,
// so slice recombination and matvec results are exact, not approximate.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "psim/network.hpp"

namespace psim::reram {

struct QuantSpec {
  int weight_bits = 8;
  int bits_per_cell = 2;  // one of 1, 2, 4
  int input_bits = 8;

  void validate() const;
  int weight_slices() const { return weight_bits / bits_per_cell; }
  std::int32_t weight_qmax() const { return (1 << (weight_bits - 1)) - 1; }
  std::int32_t weight_offset() const { return 1 << (weight_bits - 1); }
  std::int32_t input_qmax() const { return (1 << (input_bits - 1)) - 1; }
  std::int32_t input_offset() const { return 1 << (input_bits - 1); }
};

struct QuantizedMatrix {
  MatI levels;   // signed integers in [-qmax, qmax]
  double scale;  // dequantized value = level * scale
};

struct QuantizedVector {
  std::vector<std::int32_t> q;
  double scale;
};

/// Symmetric fixed-point quantization with per-matrix scale
/// max|w| / (2^(weight_bits-1) - 1); all-zero input uses scale 1.
/// Rounding is to nearest, ties away from zero.
QuantizedMatrix quantize_matrix(const MatD& w, const QuantSpec& q);

/// Same rule for activation vectors at input_bits.
QuantizedVector quantize_vector(std::span<const double> x, const QuantSpec& q);

/// One physical array worth of cells holding one bit-slice of an
/// offset-encoded weight tile.
struct CrossbarArray {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int slice_index = 0;  // 0 = least significant
  Mat<std::uint8_t> cell_levels;  // entries in [0, 2^bits_per_cell)
};

/// Bit-slice a signed integer matrix into weight_bits/bits_per_cell arrays.
/// Cells hold slices of wq + 2^(weight_bits-1); recombining the slices and
/// subtracting the offset reproduces wq exactly.
std::vector<CrossbarArray> slice_weights(const MatI& wq, const QuantSpec& q);

/// Inverse of slice_weights (test oracle and dump path).
MatI recombine_slices(const std::vector<CrossbarArray>& slices, const QuantSpec& q);

/// Bit-serial evaluation of one array-sized tile against an already
/// quantized signed input. For each input bit plane and each weight slice
/// the partial (bit-plane x slice) product is accumulated with shift
/// b + s*bits_per_cell; the offset terms are then removed. The result is
/// exactly wq^T * xq.
std::vector<std::int64_t> crossbar_matvec_q(const std::vector<CrossbarArray>& slices,
                                            std::span<const std::int32_t> xq,
                                            const QuantSpec& q);

struct MatvecResult {
  std::vector<std::int64_t> acc;  // wq^T * xq, exact
  double input_scale;
};

/// Quantizes x to input_bits then evaluates bit-serially.
MatvecResult crossbar_matvec(const std::vector<CrossbarArray>& slices,
                             std::span<const double> x, const QuantSpec& q);

struct StageAllocation {
  std::size_t rows = 0, cols = 0;
  std::size_t row_tiles = 0, col_tiles = 0;
  std::size_t slices = 0;
  std::size_t arrays = 0;  // row_tiles * col_tiles * slices * replication
};

struct ArrayAllocation {
  std::vector<std::vector<StageAllocation>> layers;  // [layer][stage]
  std::size_t array_dim = 128;
  std::size_t arrays_per_ima = 8;
  std::size_t replication = 1;

  std::size_t total_arrays() const;
  std::size_t ima_count() const;
  /// Fraction of allocated cell area holding weight bits.
  double utilization() const;
  nlohmann::json summary() const;
};

/// Tile every MLP stage of the config onto array_dim x array_dim crossbars,
/// one array per (row tile, col tile, weight slice) and per replica.
ArrayAllocation map_mlp(const net::NetworkConfig& cfg, const QuantSpec& q,
                        std::size_t array_dim = 128, std::size_t arrays_per_ima = 8,
                        std::size_t replication = 1);

/// MLP engine with weights programmed into tiled, sliced arrays. Immutable
/// after construction; concurrent forward() calls are safe.
class ReramMlp {
 public:
  ReramMlp(const net::NetworkConfig& cfg, const net::Weights& weights, const QuantSpec& q,
           std::size_t array_dim = 128, std::size_t arrays_per_ima = 8,
           std::size_t replication = 1);

  /// Per stage: quantize the activation, evaluate each column tile with
  /// partial-sum accumulation across row tiles, dequantize, add bias, ReLU.
  std::vector<double> forward(std::size_t layer, std::span<const double> x) const;

  const ArrayAllocation& allocation() const { return alloc_; }
  const QuantSpec& quant() const { return quant_; }

 private:
  struct Tile {
    std::size_t row0 = 0, col0 = 0;
    std::size_t rows = 0, cols = 0;
    std::vector<CrossbarArray> slices;
  };
  struct Stage {
    std::size_t rows = 0, cols = 0;
    double weight_scale = 1.0;
    std::vector<Tile> tiles;
    std::vector<double> bias;
  };
  std::vector<std::vector<Stage>> layers_;
  ArrayAllocation alloc_;
  QuantSpec quant_;
};

}  // namespace psim::reram
