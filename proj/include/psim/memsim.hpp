// SPDX-License-Identifier: Apache-2.0
//
// Trace-driven replay of a Schedule against an on-chip feature buffer and
// DRAM. Four system variants share this path:
//   baseline_mac: layer-order schedule, feature buffer, MAC engine that
//                 streams weights from DRAM (refetch model below);
//   pointer1:     in-memory engine only — no feature buffer, every
//                 dependency fetch goes to DRAM, weights are resident;
//   pointer12:    pointer1 plus the buffer and inter-layer coordination;
//   pointer:      pointer12 plus intra-layer reordering.
// The variant selects buffer presence and the weight-traffic model; the
// caller supplies the matching schedule.
//
// Buffer model: LRU over whole feature vectors keyed by (source layer,
// point id); the input cloud is source layer 0. Capacity is either
//   entries: each source layer gets its own LRU region of `capacity`
//            entries (the hit-rate-sweep view, where "512 entries" holds
//            exactly the 512 points a layer can produce), or
//   bytes:   one shared pool; each entry costs its feature-vector bytes
//            (the honest fixed-budget view, e.g. 9KB).
// Every produced feature vector is written back to DRAM once at production
// time, so write traffic is schedule-invariant. A miss on a previously
// produced entry therefore re-fetches it from DRAM.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "psim/network.hpp"
#include "psim/scheduler.hpp"

namespace psim::mem {

enum class Variant { baseline_mac, pointer1, pointer12, pointer };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);  // throws std::invalid_argument

struct BufferConfig {
  enum class Units { entries, bytes };
  Units units = Units::entries;
  std::size_t capacity = 512;
  std::size_t elem_bytes = 2;  // bytes per feature element (16-bit fixed point)
};

struct TraceRecord {
  enum class Cause { fetch, write, evict };
  std::size_t step = 0;   // index of the executing event in the schedule
  std::size_t layer = 0;  // the executing event
  std::size_t point = 0;
  std::size_t entry_layer = 0;  // the touched entry (source layer, point id)
  std::size_t entry_point = 0;
  bool hit = false;       // meaningful for fetch records
  std::size_t bytes = 0;  // DRAM bytes moved by this record
  Cause cause = Cause::fetch;
};

struct AccessTrace {
  std::vector<TraceRecord> records;
};

struct LayerHits {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;

  std::uint64_t accesses() const { return hits + misses; }
  double rate() const {
    return accesses() == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(accesses());
  }
};

struct TrafficReport {
  std::uint64_t feature_fetch_bytes = 0;
  std::uint64_t feature_write_bytes = 0;
  std::uint64_t weight_fetch_bytes = 0;
  std::uint64_t buffer_hit_bytes = 0;  // dependency bytes served on chip
  std::uint64_t compulsory_misses = 0;  // first touch of an input-cloud entry
  std::uint64_t non_compulsory_misses = 0;
  std::vector<LayerHits> per_layer;  // index 0 = accesses made by layer-1 events

  std::uint64_t total_dram_bytes() const {
    return feature_fetch_bytes + feature_write_bytes + weight_fetch_bytes;
  }
  nlohmann::json to_json() const;
};

/// Baseline weight traffic: per MLP stage, the full weight matrix is
/// fetched once if it fits in the weight buffer, otherwise once per event
/// of its layer (scaled by refetch_multiplier). The in-memory variants
/// fetch no weights at all.
struct WeightTrafficModel {
  std::size_t weight_buffer_bytes = 9216;
  double refetch_multiplier = 1.0;
};

struct SimParams {
  BufferConfig buffer;
  WeightTrafficModel weights;
};

/// Bytes of one stored feature vector from source layer `entry_layer`
/// (0 = input cloud, k >= 1 = layer k output).
std::size_t entry_bytes(const net::NetworkConfig& cfg, std::size_t entry_layer,
                        std::size_t elem_bytes);

/// Walks the schedule: per event, fetch its dependency entries (ascending
/// point id), then write the produced entry to DRAM and insert it into the
/// buffer. Throws std::invalid_argument on schedule/mapping mismatch.
std::pair<AccessTrace, TrafficReport> simulate(const sched::Schedule& schedule,
                                               const geom::Mapping& mapping,
                                               const net::NetworkConfig& cfg,
                                               const SimParams& params, Variant variant);

/// Smallest entries-mode capacity with zero non-compulsory misses for this
/// schedule, found by linear sweep (LRU inclusion makes the predicate
/// monotone in capacity).
std::size_t min_zero_miss_capacity(const sched::Schedule& schedule, const geom::Mapping& mapping,
                                   const net::NetworkConfig& cfg);

struct SweepPoint {
  std::size_t capacity = 0;
  std::vector<LayerHits> per_layer;
};

/// One buffered simulate call per capacity (entries mode by default).
std::vector<SweepPoint> hit_rate_sweep(const sched::Schedule& schedule,
                                       const geom::Mapping& mapping,
                                       const net::NetworkConfig& cfg,
                                       const std::vector<std::size_t>& capacities,
                                       BufferConfig::Units units = BufferConfig::Units::entries,
                                       std::size_t elem_bytes = 2);

/// CSV dump, columns: step,layer,point,entry_layer,entry_point,hit,bytes,cause.
std::string trace_csv(const AccessTrace& trace);

}  // namespace psim::mem
