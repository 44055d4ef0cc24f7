// SPDX-License-Identifier: Apache-2.0
#include "psim/scheduler.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace psim::sched {

std::vector<std::vector<std::size_t>> Schedule::per_layer_order() const {
  std::size_t layer_count = 0;
  for (const auto& e : events) layer_count = std::max(layer_count, e.layer);
  std::vector<std::vector<std::size_t>> order(layer_count);
  for (const auto& e : events) order[e.layer - 1].push_back(e.point);
  return order;
}

ReceptiveFields receptive_fields(const geom::Mapping& mapping) {
  ReceptiveFields rf;
  rf.deps.resize(mapping.layer_count());
  for (std::size_t li = 0; li < mapping.layer_count(); ++li) {
    const auto& layer = mapping.layers[li];
    rf.deps[li].resize(layer.centers.size());
    for (std::size_t pos = 0; pos < layer.centers.size(); ++pos) {
      auto& field = rf.deps[li][pos];
      field.reserve(layer.neighbors.k);
      for (std::size_t j : layer.neighbors.neighbors[pos]) {
        // j is an index into this layer's parent cloud; for deeper layers
        // that is the position of the producing center in layer li, whose
        // point id is its own parent-cloud index.
        field.push_back(li == 0 ? j : mapping.layers[li - 1].centers.center_indices[j]);
      }
      std::sort(field.begin(), field.end());
    }
  }
  return rf;
}

Schedule baseline_schedule(const geom::Mapping& mapping) {
  Schedule s;
  for (std::size_t li = 0; li < mapping.layer_count(); ++li) {
    auto ids = mapping.layers[li].centers.center_indices;
    std::sort(ids.begin(), ids.end());
    for (std::size_t id : ids) s.events.push_back({li + 1, id});
  }
  return s;
}

std::vector<std::size_t> intra_layer_order(const geom::MappingLayer& last,
                                           const OrderStart& start) {
  const std::size_t m = last.centers.size();
  if (m == 0) throw std::invalid_argument("intra_layer_order: empty layer");
  const auto& ids = last.centers.center_indices;

  std::size_t cur = 0;
  if (start.kind == OrderStart::Kind::lowest_index) {
    for (std::size_t p = 1; p < m; ++p) {
      if (ids[p] < ids[cur]) cur = p;
    }
  } else {
    std::mt19937_64 rng(start.seed);
    cur = std::min(m - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m)));
  }

  std::vector<char> visited(m, 0);
  std::vector<std::size_t> order;
  order.reserve(m);
  visited[cur] = 1;
  order.push_back(ids[cur]);
  for (std::size_t step = 1; step < m; ++step) {
    std::size_t best = m;
    double best_d = 0.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
      if (visited[cand]) continue;
      const double d = geom::sq_distance(last.center_coords[cur], last.center_coords[cand]);
      if (best == m || d < best_d || (d == best_d && ids[cand] < ids[best])) {
        best = cand;
        best_d = d;
      }
    }
    visited[best] = 1;
    order.push_back(ids[best]);
    cur = best;
  }
  return order;
}

Schedule inter_layer_coordinate(const geom::Mapping& mapping,
                                const std::vector<std::size_t>& last_layer_order) {
  const std::size_t layer_count = mapping.layer_count();
  if (layer_count == 0) throw std::invalid_argument("inter_layer_coordinate: empty mapping");
  const auto& last = mapping.layers[layer_count - 1];
  if (last_layer_order.size() != last.centers.size()) {
    throw std::invalid_argument("inter_layer_coordinate: order size mismatch");
  }
  {
    auto sorted_order = last_layer_order;
    std::sort(sorted_order.begin(), sorted_order.end());
    auto sorted_ids = last.centers.center_indices;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    if (sorted_order != sorted_ids) {
      throw std::invalid_argument(
          "inter_layer_coordinate: order is not a permutation of the last layer's points");
    }
  }

  const ReceptiveFields rf = receptive_fields(mapping);
  Schedule out;
  std::vector<std::vector<char>> emitted(layer_count);
  for (std::size_t li = 0; li < layer_count; ++li) {
    emitted[li].assign(mapping.layers[li].centers.size(), 0);
  }

  auto emit = [&](auto&& self, std::size_t layer, std::size_t pos) -> void {
    if (layer >= 2) {
      for (std::size_t dep : rf.of(layer, pos)) {
        const std::size_t dep_pos = mapping.center_position(layer - 1, dep);
        if (!emitted[layer - 2][dep_pos]) self(self, layer - 1, dep_pos);
      }
    }
    out.events.push_back({layer, mapping.layers[layer - 1].centers.center_indices[pos]});
    emitted[layer - 1][pos] = 1;
  };
  for (std::size_t id : last_layer_order) {
    const std::size_t pos = mapping.center_position(layer_count, id);
    if (!emitted[layer_count - 1][pos]) emit(emit, layer_count, pos);
  }

  // Events referenced by no receptive field still execute; append them per
  // layer in ascending id order, each after its own remaining dependencies.
  for (std::size_t layer = 1; layer <= layer_count; ++layer) {
    const auto& ids = mapping.layers[layer - 1].centers.center_indices;
    std::vector<std::size_t> pending;
    for (std::size_t pos = 0; pos < ids.size(); ++pos) {
      if (!emitted[layer - 1][pos]) pending.push_back(pos);
    }
    std::sort(pending.begin(), pending.end(),
              [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    for (std::size_t pos : pending) {
      if (!emitted[layer - 1][pos]) emit(emit, layer, pos);
    }
  }
  return out;
}

std::vector<std::string> validate_schedule(const Schedule& s, const geom::Mapping& mapping) {
  std::vector<std::string> violations;
  const std::size_t layer_count = mapping.layer_count();

  std::vector<std::vector<std::size_t>> exec_count(layer_count);
  std::vector<std::vector<char>> emitted(layer_count);
  for (std::size_t li = 0; li < layer_count; ++li) {
    exec_count[li].assign(mapping.layers[li].centers.size(), 0);
    emitted[li].assign(mapping.layers[li].centers.size(), 0);
  }

  const ReceptiveFields rf = receptive_fields(mapping);
  for (std::size_t step = 0; step < s.events.size(); ++step) {
    const auto& e = s.events[step];
    std::ostringstream at;
    at << "step " << step << ": " << event_token(e);
    if (e.layer < 1 || e.layer > layer_count) {
      violations.push_back(at.str() + " has an out-of-range layer");
      continue;
    }
    if (!mapping.is_center(e.layer, e.point)) {
      violations.push_back(at.str() + " is not a sampled point of that layer");
      continue;
    }
    const std::size_t pos = mapping.center_position(e.layer, e.point);
    ++exec_count[e.layer - 1][pos];
    if (e.layer >= 2) {
      for (std::size_t dep : rf.of(e.layer, pos)) {
        const std::size_t dep_pos = mapping.center_position(e.layer - 1, dep);
        if (!emitted[e.layer - 2][dep_pos]) {
          violations.push_back(at.str() + " before dependency " +
                               event_token({e.layer - 1, dep}));
        }
      }
    }
    emitted[e.layer - 1][pos] = 1;
  }

  for (std::size_t li = 0; li < layer_count; ++li) {
    for (std::size_t pos = 0; pos < exec_count[li].size(); ++pos) {
      const std::size_t n = exec_count[li][pos];
      if (n == 1) continue;
      const ExecEvent e{li + 1, mapping.layers[li].centers.center_indices[pos]};
      std::ostringstream msg;
      msg << event_token(e) << " executed " << n << " times";
      violations.push_back(msg.str());
    }
  }
  return violations;
}

std::string event_token(const ExecEvent& e) {
  std::ostringstream out;
  out << 'E' << e.point + 1 << '_' << e.layer;
  return out.str();
}

std::string stream_tokens(const Schedule& s) {
  std::ostringstream out;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    if (i > 0) out << ' ';
    out << event_token(s.events[i]);
  }
  return out.str();
}

std::string dump_schedule(const Schedule& s) {
  std::ostringstream out;
  for (const auto& e : s.events) out << 'L' << e.layer << " P" << e.point << '\n';
  return out.str();
}

nlohmann::json schedule_json(const Schedule& s) {
  nlohmann::json j;
  j["events"] = nlohmann::json::array();
  for (const auto& e : s.events) {
    j["events"].push_back(
        {{"layer", e.layer}, {"point", e.point}, {"token", event_token(e)}});
  }
  j["per_layer"] = s.per_layer_order();
  return j;
}

geom::PointCloud replay_forward(const geom::PointCloud& input, const net::NetworkConfig& cfg,
                                const net::Weights& weights, const geom::Mapping& mapping,
                                const Schedule& schedule) {
  const std::size_t layer_count = mapping.layer_count();
  if (cfg.layers.size() != layer_count || weights.layers.size() != layer_count) {
    throw std::invalid_argument("replay_forward: config/mapping/weights layer mismatch");
  }
  std::vector<std::vector<std::vector<double>>> produced(layer_count);
  for (std::size_t li = 0; li < layer_count; ++li) {
    produced[li].resize(mapping.layers[li].centers.size());
  }
  for (const auto& e : schedule.events) {
    const std::size_t li = e.layer - 1;
    const std::size_t pos = mapping.center_position(e.layer, e.point);
    const auto& parent = e.layer == 1 ? input.features : produced[li - 1];
    if (e.layer >= 2) {
      // The center's own parent feature is read alongside the neighbors.
      if (parent[e.point].empty()) {
        throw std::invalid_argument("replay_forward: " + event_token(e) +
                                    " executed before its own parent point");
      }
      for (std::size_t j : mapping.layers[li].neighbors.neighbors[pos]) {
        if (parent[j].empty()) {
          throw std::invalid_argument("replay_forward: " + event_token(e) +
                                      " executed before a dependency");
        }
      }
    }
    produced[li][pos] =
        net::center_forward_ref(parent, mapping.layers[li], pos, cfg.layers[li],
                                weights.layers[li]);
  }

  geom::PointCloud out;
  out.coords = mapping.layers[layer_count - 1].center_coords;
  out.features = std::move(produced[layer_count - 1]);
  out.feat_len = cfg.layers[layer_count - 1].out_feat_len;
  for (const auto& f : out.features) {
    if (f.empty()) throw std::invalid_argument("replay_forward: schedule left points unexecuted");
  }
  return out;
}

}  // namespace psim::sched
