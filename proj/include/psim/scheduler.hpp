// SPDX-License-Identifier: Apache-2.0
//
// Execution-order generation. Three schedules matter:
//   - baseline: layer by layer, points in ascending index order;
//   - inter-layer coordinated: walk the last layer's order and emit each
//     point's receptive field recursively, so every event runs immediately
//     after the last of its dependencies;
//   - the coordinated schedule fed with an intra-layer reordered last layer
//     (greedy nearest-neighbor chain), which makes consecutive receptive
//     fields overlap.
//
// Event identity: ExecEvent::point is the index of the sampled point in the
// layer's parent cloud (for layer k >= 2 that index equals the position of
// the producing point in layer k-1's output). Printed tokens are 1-based:
// "E<point+1>_<layer>".
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "psim/geometry.hpp"
#include "psim/network.hpp"

namespace psim::sched {

struct ExecEvent {
  std::size_t layer = 0;  // 1-based
  std::size_t point = 0;  // index into that layer's parent cloud
  bool operator==(const ExecEvent&) const = default;
};

struct Schedule {
  std::vector<ExecEvent> events;

  /// Point ids per layer (index 0 = layer 1) in stream order.
  std::vector<std::vector<std::size_t>> per_layer_order() const;
};

/// One-level dependency sets, read off the neighbor tables. of(layer, pos)
/// lists the entries consumed by layer `layer`'s center at position `pos`,
/// sorted ascending: input-cloud indices for layer 1, layer-(k-1) point ids
/// for layer k >= 2.
struct ReceptiveFields {
  std::vector<std::vector<std::vector<std::size_t>>> deps;  // [layer-1][position]

  const std::vector<std::size_t>& of(std::size_t layer, std::size_t position) const {
    return deps.at(layer - 1).at(position);
  }
};

ReceptiveFields receptive_fields(const geom::Mapping& mapping);

/// All layer-1 events in ascending point index, then layer 2, and so on.
Schedule baseline_schedule(const geom::Mapping& mapping);

struct OrderStart {
  enum class Kind { lowest_index, seeded_random };
  Kind kind = Kind::lowest_index;
  std::uint64_t seed = 0;  // seeded_random: start position = floor(uniform01 * m)
};

/// Greedy nearest-neighbor chain over the last layer's sampled points:
/// each next point is the unvisited one closest to the current point
/// (squared distance, ties by lowest point id). Returns point ids in visit
/// order. Throws std::invalid_argument on an empty layer.
std::vector<std::size_t> intra_layer_order(const geom::MappingLayer& last,
                                           const OrderStart& start = {});

/// Coordinated schedule: for each last-layer point in `last_layer_order`,
/// recursively emit its not-yet-emitted dependencies (ascending point id)
/// and then the point itself. Shared dependencies are emitted at first
/// occurrence only. Events referenced by no receptive field are appended at
/// the end, layer by layer in ascending id order, so the schedule always
/// covers every event exactly once. Throws std::invalid_argument if
/// `last_layer_order` is not a permutation of the last layer's point ids.
Schedule inter_layer_coordinate(const geom::Mapping& mapping,
                                const std::vector<std::size_t>& last_layer_order);

/// Checks the Schedule invariants: every event names a valid center, each
/// center is executed exactly once, and every event appears after all of its
/// dependencies. Returns one message per violation (empty means valid).
std::vector<std::string> validate_schedule(const Schedule& s, const geom::Mapping& mapping);

std::string event_token(const ExecEvent& e);   // "E<point+1>_<layer>"
std::string stream_tokens(const Schedule& s);  // tokens joined by single spaces

/// One event per line, "L<layer> P<point>".
std::string dump_schedule(const Schedule& s);

/// {"events": [{"layer", "point"}...], "per_layer": [[ids...]...]}
nlohmann::json schedule_json(const Schedule& s);

/// Computes the network output by walking `schedule` event by event,
/// storing produced features and reading dependencies from that store.
/// Requires a dependency-respecting schedule; the result is bit-identical
/// to network_forward_ref for any such schedule.
geom::PointCloud replay_forward(const geom::PointCloud& input, const net::NetworkConfig& cfg,
                                const net::Weights& weights, const geom::Mapping& mapping,
                                const Schedule& schedule);

}  // namespace psim::sched
