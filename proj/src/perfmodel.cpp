// SPDX-License-Identifier: Apache-2.0
#include "psim/perfmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace psim::perf {

void HwConfig::validate() const {
  const bool ok = clock_hz > 0.0 && dram_bw_bytes_per_s > 0.0 &&
                  crossbar_op_latency_cycles > 0 && mac_rows > 0 && mac_cols > 0 &&
                  mac_pass_cycles > 0 && replication > 0;
  if (!ok) throw std::invalid_argument("HwConfig: all parameters must be strictly positive");
}

std::uint64_t ComputeCounts::mac_ops() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) {
    for (const auto& s : l.stages) total += l.invocations * s.shape.rows * s.shape.cols;
  }
  return total;
}

std::uint64_t ComputeCounts::crossbar_array_ops() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) {
    for (const auto& s : l.stages) total += l.invocations * s.tiles * s.slices;
  }
  return total;
}

std::uint64_t ComputeCounts::digital_ops() const {
  std::uint64_t total = 0;
  for (const auto& l : layers) {
    total += l.invocations * (l.in_feat_len + l.out_feat_len);
  }
  return total;
}

ComputeCounts derive_compute_counts(const geom::Mapping& mapping, const net::NetworkConfig& cfg,
                                    const reram::QuantSpec& q, std::size_t array_dim) {
  if (mapping.layer_count() != cfg.layers.size()) {
    throw std::invalid_argument("derive_compute_counts: mapping/config layer mismatch");
  }
  q.validate();
  ComputeCounts counts;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const auto& lc = cfg.layers[li];
    ComputeCounts::Layer layer;
    layer.events = mapping.layers[li].centers.size();
    layer.invocations = layer.events * lc.k;
    layer.in_feat_len = lc.in_feat_len;
    layer.out_feat_len = lc.out_feat_len;
    for (const auto& shape : lc.mlp) {
      ComputeCounts::Stage s;
      s.shape = shape;
      s.tiles = ((shape.rows + array_dim - 1) / array_dim) *
                ((shape.cols + array_dim - 1) / array_dim);
      s.slices = static_cast<std::size_t>(q.weight_slices());
      layer.stages.push_back(s);
    }
    counts.layers.push_back(std::move(layer));
  }
  return counts;
}

double memory_cycles(const mem::TrafficReport& traffic, const HwConfig& hw) {
  hw.validate();
  return static_cast<double>(traffic.total_dram_bytes()) / hw.dram_bw_bytes_per_s * hw.clock_hz;
}

double compute_cycles(const ComputeCounts& counts, const HwConfig& hw, mem::Variant variant) {
  hw.validate();
  if (variant == mem::Variant::baseline_mac) {
    double total = 0.0;
    for (const auto& l : counts.layers) {
      for (const auto& s : l.stages) {
        const std::size_t tiles = ((s.shape.rows + hw.mac_rows - 1) / hw.mac_rows) *
                                  ((s.shape.cols + hw.mac_cols - 1) / hw.mac_cols);
        total += static_cast<double>(l.invocations) *
                 static_cast<double>(tiles * hw.mac_pass_cycles);
      }
    }
    return total;
  }
  // Each stage invocation occupies its arrays for one op latency; stages of
  // a layer pipeline, so a layer's makespan follows its invocation count.
  // The coordinated schedules interleave layers (slowest layer bounds the
  // run); the layer-sequential pointer1 sums them.
  double max_layer = 0.0;
  double sum_layers = 0.0;
  for (const auto& l : counts.layers) {
    const double serialized =
        std::ceil(static_cast<double>(l.invocations) / static_cast<double>(hw.replication)) *
        static_cast<double>(hw.crossbar_op_latency_cycles);
    max_layer = std::max(max_layer, serialized);
    sum_layers += serialized;
  }
  return variant == mem::Variant::pointer1 ? sum_layers : max_layer;
}

double latency_estimate(const mem::TrafficReport& traffic, const ComputeCounts& counts,
                        const HwConfig& hw, mem::Variant variant) {
  const double mem_cycles = memory_cycles(traffic, hw);
  const double comp_cycles = compute_cycles(counts, hw, variant);
  return hw.overlap == HwConfig::Overlap::max ? std::max(mem_cycles, comp_cycles)
                                              : mem_cycles + comp_cycles;
}

EnergyTable EnergyTable::builtin_defaults() {
  const char* tag = "builtin calibration default (order-of-magnitude estimate, see README)";
  EnergyTable t;
  t.dram_per_byte = {100e-12, tag};
  t.buffer_read_per_byte = {1e-12, tag};
  t.buffer_write_per_byte = {1e-12, tag};
  t.crossbar_per_op = {500e-12, tag};
  t.mac_per_op = {2e-12, tag};
  t.digital_per_op = {0.2e-12, tag};
  return t;
}

namespace {

EnergyEntry read_entry(const nlohmann::json& j, const char* key, bool strict) {
  if (!j.contains(key)) {
    throw std::runtime_error(std::string("energy table: missing entry '") + key + "'");
  }
  const auto& node = j.at(key);
  EnergyEntry e;
  if (node.is_number()) {
    e.value = node.get<double>();
  } else {
    if (!node.contains("value")) {
      throw std::runtime_error(std::string("energy table: entry '") + key + "' has no value");
    }
    e.value = node.at("value").get<double>();
    if (node.contains("provenance")) e.provenance = node.at("provenance").get<std::string>();
  }
  if (e.value < 0.0) {
    throw std::runtime_error(std::string("energy table: entry '") + key + "' is negative");
  }
  if (e.provenance.empty()) {
    if (strict) {
      throw std::runtime_error(std::string("energy table: entry '") + key +
                               "' lacks provenance (strict mode)");
    }
    e.provenance = "unspecified";
  }
  return e;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EnergyTable EnergyTable::load(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open energy table: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  EnergyTable t;
  t.dram_per_byte = read_entry(j, "dram_per_byte", strict);
  t.buffer_read_per_byte = read_entry(j, "buffer_read_per_byte", strict);
  t.buffer_write_per_byte = read_entry(j, "buffer_write_per_byte", strict);
  t.crossbar_per_op = read_entry(j, "crossbar_per_op", strict);
  t.mac_per_op = read_entry(j, "mac_per_op", strict);
  t.digital_per_op = read_entry(j, "digital_per_op", strict);
  return t;
}

EnergyBreakdown energy_estimate(const mem::TrafficReport& traffic, const ComputeCounts& counts,
                                const EnergyTable& table, mem::Variant variant) {
  EnergyBreakdown e;
  e.dram_j = static_cast<double>(traffic.total_dram_bytes()) * table.dram_per_byte.value;
  if (variant != mem::Variant::pointer1) {
    // Buffered variants: hits are buffer reads; every DRAM-fetched or
    // produced entry is also written into the buffer.
    e.buffer_j = static_cast<double>(traffic.buffer_hit_bytes) * table.buffer_read_per_byte.value +
                 static_cast<double>(traffic.feature_fetch_bytes + traffic.feature_write_bytes) *
                     table.buffer_write_per_byte.value;
  }
  if (variant == mem::Variant::baseline_mac) {
    e.compute_j = static_cast<double>(counts.mac_ops()) * table.mac_per_op.value;
  } else {
    e.compute_j = static_cast<double>(counts.crossbar_array_ops()) * table.crossbar_per_op.value;
  }
  e.digital_j = static_cast<double>(counts.digital_ops()) * table.digital_per_op.value;
  return e;
}

Comparison compare_variants(std::vector<SimResult> results) {
  if (results.empty()) throw std::invalid_argument("compare_variants: no results");
  for (const auto& r : results) {
    if (r.workload != results.front().workload) {
      throw std::invalid_argument("compare_variants: mismatched workloads: '" +
                                  results.front().workload + "' vs '" + r.workload + "'");
    }
  }
  const SimResult* base = &results.front();
  for (const auto& r : results) {
    if (r.variant == mem::Variant::baseline_mac) {
      base = &r;
      break;
    }
  }
  const double base_cycles = base->cycles;
  const double base_energy = base->energy.total();
  for (auto& r : results) {
    r.speedup = r.cycles > 0.0 ? base_cycles / r.cycles : 1.0;
    r.normalized_energy = base_energy > 0.0 ? r.energy.total() / base_energy : 1.0;
  }
  return Comparison{std::move(results)};
}

std::string Comparison::csv() const {
  std::ostringstream out;
  out << "variant,cycles,memory_cycles,compute_cycles,energy_j,dram_j,buffer_j,compute_j,"
         "digital_j,feature_fetch_bytes,feature_write_bytes,weight_fetch_bytes,"
         "buffer_hit_bytes,speedup_vs_baseline,normalized_energy\n";
  for (const auto& r : rows) {
    out << mem::to_string(r.variant) << ',' << fmt_double(r.cycles) << ','
        << fmt_double(r.memory_cycles) << ',' << fmt_double(r.compute_cycles) << ','
        << fmt_double(r.energy.total()) << ',' << fmt_double(r.energy.dram_j) << ','
        << fmt_double(r.energy.buffer_j) << ',' << fmt_double(r.energy.compute_j) << ','
        << fmt_double(r.energy.digital_j) << ',' << r.traffic.feature_fetch_bytes << ','
        << r.traffic.feature_write_bytes << ',' << r.traffic.weight_fetch_bytes << ','
        << r.traffic.buffer_hit_bytes << ',' << fmt_double(r.speedup) << ','
        << fmt_double(r.normalized_energy) << '\n';
  }
  return out.str();
}

nlohmann::json Comparison::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"workload", r.workload},
                 {"variant", mem::to_string(r.variant)},
                 {"cycles", r.cycles},
                 {"memory_cycles", r.memory_cycles},
                 {"compute_cycles", r.compute_cycles},
                 {"energy_j", r.energy.total()},
                 {"energy_breakdown",
                  {{"dram_j", r.energy.dram_j},
                   {"buffer_j", r.energy.buffer_j},
                   {"compute_j", r.energy.compute_j},
                   {"digital_j", r.energy.digital_j}}},
                 {"traffic", r.traffic.to_json()},
                 {"speedup_vs_baseline", r.speedup},
                 {"normalized_energy", r.normalized_energy}});
  }
  return j;
}

}  // namespace psim::perf
