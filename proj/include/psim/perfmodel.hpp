// SPDX-License-Identifier: Apache-2.0
//
// Analytic latency and energy estimation over traffic reports and compute
// counts. Absolute numbers depend on the calibration values in EnergyTable
// and HwConfig and are reported as "calibrated"; the asserted results are
// orderings and trends across variants and model presets.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "psim/memsim.hpp"
#include "psim/reram.hpp"

namespace psim::perf {

struct HwConfig {
  double clock_hz = 1e9;
  double dram_bw_bytes_per_s = 8e9;
  std::size_t crossbar_op_latency_cycles = 100;  // one stage invocation through an array
  std::size_t mac_rows = 32;
  std::size_t mac_cols = 32;
  std::size_t mac_pass_cycles = 32;  // one weight tile pass through the MAC array
  std::size_t replication = 1;
  enum class Overlap { max, sum };
  Overlap overlap = Overlap::max;  // compute/memory fully overlapped, or strictly serial

  void validate() const;  // throws std::invalid_argument on non-positive values
};

/// Workload sizes shared by latency and energy estimation. invocations is
/// the MLP invocation count of a layer (events * k: one pass per neighbor).
struct ComputeCounts {
  struct Stage {
    net::StageShape shape;
    std::size_t tiles = 0;   // crossbar tiles (array_dim grid)
    std::size_t slices = 0;  // weight bit slices
  };
  struct Layer {
    std::size_t events = 0;
    std::size_t invocations = 0;
    std::size_t in_feat_len = 0;
    std::size_t out_feat_len = 0;
    std::vector<Stage> stages;
  };
  std::vector<Layer> layers;

  std::uint64_t mac_ops() const;            // sum of invocations * rows * cols
  std::uint64_t crossbar_array_ops() const; // sum of invocations * tiles * slices
  std::uint64_t digital_ops() const;        // aggregation subs + max-reduce compares
};

ComputeCounts derive_compute_counts(const geom::Mapping& mapping, const net::NetworkConfig& cfg,
                                    const reram::QuantSpec& q = {},
                                    std::size_t array_dim = 128);

/// DRAM bytes at dram_bw, in cycles.
double memory_cycles(const mem::TrafficReport& traffic, const HwConfig& hw);

/// Crossbar invocations serialized per layer for in-memory variants (layers
/// pipeline under the coordinated schedules, so the layer-sequential
/// pointer1 sums over layers while coordinated ones take the slowest
/// layer); MAC tile passes summed for baseline_mac.
double compute_cycles(const ComputeCounts& counts, const HwConfig& hw, mem::Variant variant);

/// Total cycles: memory_cycles and compute_cycles combined per hw.overlap
/// (fully overlapped = max, serial = sum).
double latency_estimate(const mem::TrafficReport& traffic, const ComputeCounts& counts,
                        const HwConfig& hw, mem::Variant variant);

struct EnergyEntry {
  double value = 0.0;  // joules per unit
  std::string provenance;
};

/// Per-unit calibration energies. Values are user-supplied inputs, not
/// constants from any publication; each entry carries a provenance string.
struct EnergyTable {
  EnergyEntry dram_per_byte;
  EnergyEntry buffer_read_per_byte;
  EnergyEntry buffer_write_per_byte;
  EnergyEntry crossbar_per_op;  // one array activation
  EnergyEntry mac_per_op;       // one multiply-accumulate
  EnergyEntry digital_per_op;   // one aggregation/reduction element op

  static EnergyTable builtin_defaults();
  /// JSON file: {"dram_per_byte": {"value": ..., "provenance": "..."}, ...}.
  /// Missing keys or values are always errors; in strict mode a missing or
  /// empty provenance string is an error too.
  static EnergyTable load(const std::filesystem::path& path, bool strict);
};

struct EnergyBreakdown {
  double dram_j = 0.0;
  double buffer_j = 0.0;
  double compute_j = 0.0;   // crossbar or MAC engine
  double digital_j = 0.0;   // aggregation + reduction
  double total() const { return dram_j + buffer_j + compute_j + digital_j; }
};

EnergyBreakdown energy_estimate(const mem::TrafficReport& traffic, const ComputeCounts& counts,
                                const EnergyTable& table, mem::Variant variant);

struct SimResult {
  std::string workload;  // ties results of one comparison together
  mem::Variant variant = mem::Variant::baseline_mac;
  double cycles = 0.0;
  double memory_cycles = 0.0;
  double compute_cycles = 0.0;
  EnergyBreakdown energy;
  mem::TrafficReport traffic;
  // Filled by compare_variants:
  double speedup = 1.0;            // baseline cycles / this cycles
  double normalized_energy = 1.0;  // this energy / baseline energy
};

struct Comparison {
  std::vector<SimResult> rows;

  std::string csv() const;
  nlohmann::json to_json() const;
};

/// Computes ratios against the baseline_mac row (the first row if no
/// baseline is present). Throws std::invalid_argument if the results name
/// different workloads or the list is empty.
Comparison compare_variants(std::vector<SimResult> results);

}  // namespace psim::perf
