// SPDX-License-Identifier: Apache-2.0
#include "psim/memsim.hpp"

#include <cmath>
#include <list>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace psim::mem {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::baseline_mac: return "baseline_mac";
    case Variant::pointer1: return "pointer1";
    case Variant::pointer12: return "pointer12";
    case Variant::pointer: return "pointer";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "baseline_mac") return Variant::baseline_mac;
  if (s == "pointer1") return Variant::pointer1;
  if (s == "pointer12") return Variant::pointer12;
  if (s == "pointer") return Variant::pointer;
  throw std::invalid_argument("unknown variant: " + std::string(s));
}

std::size_t entry_bytes(const net::NetworkConfig& cfg, std::size_t entry_layer,
                        std::size_t elem_bytes) {
  if (entry_layer > cfg.layers.size()) {
    throw std::out_of_range("entry_bytes: bad source layer");
  }
  const std::size_t feat_len = entry_layer == 0 ? cfg.layers.front().in_feat_len
                                                : cfg.layers[entry_layer - 1].out_feat_len;
  return feat_len * elem_bytes;
}

namespace {

// (source layer, point id) packed into one key; point counts here are tiny.
std::uint64_t entry_key(std::size_t layer, std::size_t point) {
  return (static_cast<std::uint64_t>(layer) << 48) | static_cast<std::uint64_t>(point);
}

// One LRU pool. In entries mode each pool holds `capacity` entries; in
// bytes mode a single pool holds `capacity` bytes of variable-size entries.
class LruPool {
 public:
  LruPool(BufferConfig::Units units, std::size_t capacity)
      : units_(units), capacity_(capacity) {}

  bool contains_and_touch(std::uint64_t key) {
    auto it = index_.find(key);
    if (it == index_.end()) return false;
    order_.splice(order_.end(), order_, it->second.pos);
    return true;
  }

  // Inserts the entry, appending one (layer, point) pair per eviction.
  void insert(std::uint64_t key, std::size_t bytes,
              std::vector<std::pair<std::size_t, std::size_t>>& evicted) {
    if (index_.contains(key)) return;
    if (units_ == BufferConfig::Units::bytes && bytes > capacity_) return;  // cannot reside
    const auto overflows = [&] {
      return units_ == BufferConfig::Units::entries ? index_.size() + 1 > capacity_
                                                    : used_bytes_ + bytes > capacity_;
    };
    while (overflows() && !order_.empty()) {
      const std::uint64_t victim = order_.front();
      order_.pop_front();
      auto vit = index_.find(victim);
      used_bytes_ -= vit->second.bytes;
      index_.erase(vit);
      evicted.emplace_back(victim >> 48, victim & ((std::uint64_t{1} << 48) - 1));
    }
    order_.push_back(key);
    index_[key] = {std::prev(order_.end()), bytes};
    used_bytes_ += bytes;
  }

 private:
  struct Slot {
    std::list<std::uint64_t>::iterator pos;
    std::size_t bytes = 0;
  };
  BufferConfig::Units units_;
  std::size_t capacity_;
  std::size_t used_bytes_ = 0;
  std::list<std::uint64_t> order_;  // front = least recently used
  std::unordered_map<std::uint64_t, Slot> index_;
};

class FeatureBuffer {
 public:
  FeatureBuffer(const BufferConfig& cfg, std::size_t source_layers) : cfg_(cfg) {
    if (cfg.capacity == 0) throw std::invalid_argument("buffer capacity must be >= 1");
    const std::size_t pools = cfg.units == BufferConfig::Units::entries ? source_layers : 1;
    pools_.reserve(pools);
    for (std::size_t i = 0; i < pools; ++i) pools_.emplace_back(cfg.units, cfg.capacity);
  }

  bool access(std::size_t layer, std::size_t point) {
    return pool(layer).contains_and_touch(entry_key(layer, point));
  }

  void insert(std::size_t layer, std::size_t point, std::size_t bytes,
              std::vector<std::pair<std::size_t, std::size_t>>& evicted) {
    pool(layer).insert(entry_key(layer, point), bytes, evicted);
  }

 private:
  LruPool& pool(std::size_t layer) { return pools_.size() == 1 ? pools_[0] : pools_[layer]; }
  BufferConfig cfg_;
  std::vector<LruPool> pools_;
};

}  // namespace

std::pair<AccessTrace, TrafficReport> simulate(const sched::Schedule& schedule,
                                               const geom::Mapping& mapping,
                                               const net::NetworkConfig& cfg,
                                               const SimParams& params, Variant variant) {
  const std::size_t layer_count = mapping.layer_count();
  if (cfg.layers.size() != layer_count) {
    throw std::invalid_argument("simulate: config/mapping layer mismatch");
  }
  const bool has_buffer = variant != Variant::pointer1;
  const std::size_t elem = params.buffer.elem_bytes;
  const sched::ReceptiveFields rf = sched::receptive_fields(mapping);

  AccessTrace trace;
  TrafficReport report;
  report.per_layer.assign(layer_count, {});

  FeatureBuffer buffer(params.buffer, layer_count + 1);
  std::unordered_set<std::uint64_t> touched_inputs;
  std::vector<std::pair<std::size_t, std::size_t>> evicted;

  auto record_evictions = [&](std::size_t step, const sched::ExecEvent& e) {
    for (const auto& [vl, vp] : evicted) {
      trace.records.push_back({step, e.layer, e.point, vl, vp, false, 0,
                               TraceRecord::Cause::evict});
    }
    evicted.clear();
  };

  for (std::size_t step = 0; step < schedule.events.size(); ++step) {
    const auto& e = schedule.events[step];
    if (e.layer < 1 || e.layer > layer_count || !mapping.is_center(e.layer, e.point)) {
      throw std::invalid_argument("simulate: event does not match the mapping: " +
                                  sched::event_token(e));
    }
    const std::size_t pos = mapping.center_position(e.layer, e.point);
    const std::size_t src_layer = e.layer - 1;
    const std::size_t dep_bytes = entry_bytes(cfg, src_layer, elem);
    auto& hits = report.per_layer[e.layer - 1];

    for (std::size_t dep : rf.of(e.layer, pos)) {
      const bool hit = has_buffer && buffer.access(src_layer, dep);
      if (hit) {
        ++hits.hits;
        report.buffer_hit_bytes += dep_bytes;
        trace.records.push_back({step, e.layer, e.point, src_layer, dep, true, 0,
                                 TraceRecord::Cause::fetch});
        continue;
      }
      ++hits.misses;
      report.feature_fetch_bytes += dep_bytes;
      if (src_layer == 0 && touched_inputs.insert(entry_key(0, dep)).second) {
        ++report.compulsory_misses;
      } else {
        ++report.non_compulsory_misses;
      }
      trace.records.push_back({step, e.layer, e.point, src_layer, dep, false, dep_bytes,
                               TraceRecord::Cause::fetch});
      if (has_buffer) {
        buffer.insert(src_layer, dep, dep_bytes, evicted);
        record_evictions(step, e);
      }
    }

    const std::size_t out_bytes = entry_bytes(cfg, e.layer, elem);
    report.feature_write_bytes += out_bytes;
    trace.records.push_back({step, e.layer, e.point, e.layer, e.point, false, out_bytes,
                             TraceRecord::Cause::write});
    if (has_buffer) {
      buffer.insert(e.layer, e.point, out_bytes, evicted);
      record_evictions(step, e);
    }
  }

  if (variant == Variant::baseline_mac) {
    for (std::size_t li = 0; li < layer_count; ++li) {
      const auto events = static_cast<double>(mapping.layers[li].centers.size());
      for (const auto& shape : cfg.layers[li].mlp) {
        const std::size_t stage_bytes = shape.rows * shape.cols * elem;
        double passes = 1.0;
        if (stage_bytes > params.weights.weight_buffer_bytes) {
          passes = std::max(1.0, std::round(events * params.weights.refetch_multiplier));
        }
        report.weight_fetch_bytes +=
            static_cast<std::uint64_t>(passes) * static_cast<std::uint64_t>(stage_bytes);
      }
    }
  }
  return {std::move(trace), std::move(report)};
}

std::size_t min_zero_miss_capacity(const sched::Schedule& schedule, const geom::Mapping& mapping,
                                   const net::NetworkConfig& cfg) {
  std::size_t bound = mapping.input_n;
  for (const auto& l : mapping.layers) bound = std::max(bound, l.centers.size());
  SimParams params;
  params.buffer.units = BufferConfig::Units::entries;
  for (std::size_t c = 1; c <= bound; ++c) {
    params.buffer.capacity = c;
    const auto [trace, report] = simulate(schedule, mapping, cfg, params, Variant::pointer12);
    if (report.non_compulsory_misses == 0) return c;
  }
  return bound;
}

std::vector<SweepPoint> hit_rate_sweep(const sched::Schedule& schedule,
                                       const geom::Mapping& mapping,
                                       const net::NetworkConfig& cfg,
                                       const std::vector<std::size_t>& capacities,
                                       BufferConfig::Units units, std::size_t elem_bytes) {
  if (capacities.empty()) throw std::invalid_argument("hit_rate_sweep: no capacities");
  std::vector<SweepPoint> out;
  out.reserve(capacities.size());
  SimParams params;
  params.buffer.units = units;
  params.buffer.elem_bytes = elem_bytes;
  for (std::size_t c : capacities) {
    params.buffer.capacity = c;
    const auto [trace, report] = simulate(schedule, mapping, cfg, params, Variant::pointer12);
    out.push_back({c, report.per_layer});
  }
  return out;
}

nlohmann::json TrafficReport::to_json() const {
  nlohmann::json j;
  j["feature_fetch_bytes"] = feature_fetch_bytes;
  j["feature_write_bytes"] = feature_write_bytes;
  j["weight_fetch_bytes"] = weight_fetch_bytes;
  j["buffer_hit_bytes"] = buffer_hit_bytes;
  j["compulsory_misses"] = compulsory_misses;
  j["non_compulsory_misses"] = non_compulsory_misses;
  j["total_dram_bytes"] = total_dram_bytes();
  j["per_layer"] = nlohmann::json::array();
  for (std::size_t li = 0; li < per_layer.size(); ++li) {
    j["per_layer"].push_back({{"layer", li + 1},
                              {"hits", per_layer[li].hits},
                              {"misses", per_layer[li].misses},
                              {"hit_rate", per_layer[li].rate()}});
  }
  return j;
}

std::string trace_csv(const AccessTrace& trace) {
  std::ostringstream out;
  out << "step,layer,point,entry_layer,entry_point,hit,bytes,cause\n";
  for (const auto& r : trace.records) {
    const char* cause = r.cause == TraceRecord::Cause::fetch   ? "fetch"
                        : r.cause == TraceRecord::Cause::write ? "write"
                                                               : "evict";
    out << r.step << ',' << r.layer << ',' << r.point << ',' << r.entry_layer << ','
        << r.entry_point << ',' << (r.hit ? 1 : 0) << ',' << r.bytes << ',' << cause << '\n';
  }
  return out.str();
}

}  // namespace psim::mem
