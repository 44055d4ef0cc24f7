// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <functional>
#include <random>

#include "doctest.h"
#include "psim/experiment.hpp"
#include "psim/scheduler.hpp"

using namespace psim;
using namespace psim::sched;

namespace {

geom::PointCloud random_cloud(std::mt19937_64& rng, std::size_t n) {
  geom::PointCloud c;
  c.feat_len = 3;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p{uniform01(rng), uniform01(rng), uniform01(rng)};
    c.coords.push_back(p);
    c.features.push_back({p[0], p[1], p[2]});
  }
  return c;
}

geom::Mapping random_mapping(std::mt19937_64& rng, int layer_count) {
  const std::size_t n = 20 + rng() % 100;
  const auto cloud = random_cloud(rng, n);
  std::vector<geom::LayerSampling> layers;
  std::size_t avail = n;
  for (int li = 0; li < layer_count; ++li) {
    const std::size_t m = std::max<std::size_t>(2, avail / (2 + rng() % 3));
    const std::size_t k = 1 + rng() % std::min<std::size_t>(avail, 5);
    layers.push_back({m, k});
    avail = m;
  }
  geom::FpsStart start;
  start.kind = geom::FpsStart::Kind::seeded_random;
  start.seed = rng();
  return geom::build_mapping(cloud, layers, start);
}

// Independent recursive emitter: walk the last layer in the given order and
// emit each event's unemitted dependencies first, ascending.
std::vector<ExecEvent> emit_oracle(const geom::Mapping& mapping,
                                   const std::vector<std::size_t>& order) {
  const auto rf = receptive_fields(mapping);
  const std::size_t last = mapping.layer_count();
  std::vector<std::vector<char>> done(last);
  for (std::size_t li = 0; li < last; ++li) {
    done[li].assign(mapping.layers[li].centers.size(), 0);
  }
  std::vector<ExecEvent> out;
  std::function<void(std::size_t, std::size_t)> emit = [&](std::size_t layer, std::size_t pos) {
    if (done[layer - 1][pos]) return;
    if (layer >= 2) {
      for (std::size_t dep : rf.of(layer, pos)) {
        emit(layer - 1, mapping.center_position(layer - 1, dep));
      }
    }
    done[layer - 1][pos] = 1;
    out.push_back({layer, mapping.layers[layer - 1].centers.center_indices[pos]});
  };
  for (std::size_t id : order) emit(last, mapping.center_position(last, id));
  for (std::size_t layer = 1; layer <= last; ++layer) {
    const auto& ids = mapping.layers[layer - 1].centers.center_indices;
    std::vector<std::size_t> pending;
    for (std::size_t pos = 0; pos < ids.size(); ++pos) {
      if (!done[layer - 1][pos]) pending.push_back(pos);
    }
    std::sort(pending.begin(), pending.end(),
              [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    for (std::size_t pos : pending) emit(layer, pos);
  }
  return out;
}

// One-step greedy oracle for the reorder chain.
std::vector<std::size_t> greedy_oracle(const geom::MappingLayer& last) {
  const auto& ids = last.centers.center_indices;
  const std::size_t m = ids.size();
  std::size_t cur = static_cast<std::size_t>(
      std::min_element(ids.begin(), ids.end()) - ids.begin());
  std::vector<char> used(m, 0);
  used[cur] = 1;
  std::vector<std::size_t> order{ids[cur]};
  while (order.size() < m) {
    std::size_t best = m;
    for (std::size_t cand = 0; cand < m; ++cand) {
      if (used[cand]) continue;
      if (best == m) {
        best = cand;
        continue;
      }
      const double db = geom::sq_distance(last.center_coords[cur], last.center_coords[best]);
      const double dc = geom::sq_distance(last.center_coords[cur], last.center_coords[cand]);
      if (dc < db || (dc == db && ids[cand] < ids[best])) best = cand;
    }
    used[best] = 1;
    order.push_back(ids[best]);
    cur = best;
  }
  return order;
}

std::size_t total_events(const geom::Mapping& mapping) {
  std::size_t n = 0;
  for (const auto& l : mapping.layers) n += l.centers.size();
  return n;
}

}  // namespace

TEST_CASE("event tokens are point+1 underscore layer") {
  CHECK(event_token({1, 0}) == "E1_1");
  CHECK(event_token({2, 4}) == "E5_2");
  Schedule s;
  s.events = {{1, 0}, {2, 4}};
  CHECK(stream_tokens(s) == "E1_1 E5_2");
  CHECK(dump_schedule(s) == "L1 P0\nL2 P4\n");
}

TEST_CASE("receptive fields of the worked example") {
  const auto toy = exp::fig2_toy();
  const auto rf = receptive_fields(toy.mapping);
  CHECK(rf.of(2, 0) == std::vector<std::size_t>{0, 3, 6});
  CHECK(rf.of(2, 1) == std::vector<std::size_t>{1, 2, 5});
  CHECK(rf.of(2, 2) == std::vector<std::size_t>{3, 4, 6});
  // layer 1 fields are the neighbor lists themselves (here k=1, self)
  CHECK(rf.of(1, 4) == std::vector<std::size_t>{4});
}

TEST_CASE("baseline schedule runs layers in id order") {
  const auto toy = exp::fig2_toy();
  const auto s = baseline_schedule(toy.mapping);
  CHECK(stream_tokens(s) == "E1_1 E2_1 E3_1 E4_1 E5_1 E6_1 E7_1 E1_2 E3_2 E5_2");
  CHECK(validate_schedule(s, toy.mapping).empty());
}

TEST_CASE("coordinated schedule reproduces the worked example streams") {
  const auto toy = exp::fig2_toy();
  const auto coordinated = inter_layer_coordinate(toy.mapping, {0, 2, 4});
  CHECK(stream_tokens(coordinated) == "E1_1 E4_1 E7_1 E1_2 E2_1 E3_1 E6_1 E3_2 E5_1 E5_2");

  const auto order = intra_layer_order(toy.mapping.layers.back());
  CHECK(order == std::vector<std::size_t>{0, 4, 2});
  const auto reordered = inter_layer_coordinate(toy.mapping, order);
  CHECK(stream_tokens(reordered) == "E1_1 E4_1 E7_1 E1_2 E5_1 E5_2 E2_1 E3_1 E6_1 E3_2");

  CHECK(validate_schedule(coordinated, toy.mapping).empty());
  CHECK(validate_schedule(reordered, toy.mapping).empty());
}

TEST_CASE("coordinate rejects orders that are not last-layer permutations") {
  const auto toy = exp::fig2_toy();
  CHECK_THROWS_AS(inter_layer_coordinate(toy.mapping, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(inter_layer_coordinate(toy.mapping, {0, 2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(inter_layer_coordinate(toy.mapping, {0, 2, 5}), std::invalid_argument);
}

TEST_CASE("intra_layer_order matches the greedy oracle") {
  std::mt19937_64 rng(derive_seed(41, "greedy"));
  for (int iter = 0; iter < 300; ++iter) {
    const auto mapping = random_mapping(rng, 1 + iter % 2);
    const auto& last = mapping.layers.back();
    REQUIRE(intra_layer_order(last) == greedy_oracle(last));
  }
}

TEST_CASE("intra_layer_order seeded start is deterministic and covers all ids") {
  std::mt19937_64 rng(derive_seed(42, "seeded"));
  const auto mapping = random_mapping(rng, 2);
  OrderStart start;
  start.kind = OrderStart::Kind::seeded_random;
  start.seed = 777;
  const auto a = intra_layer_order(mapping.layers.back(), start);
  const auto b = intra_layer_order(mapping.layers.back(), start);
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  auto ids = mapping.layers.back().centers.center_indices;
  std::sort(ids.begin(), ids.end());
  CHECK(sorted == ids);
}

TEST_CASE("coordinated emission matches an independent recursive oracle") {
  std::mt19937_64 rng(derive_seed(43, "emit"));
  for (int iter = 0; iter < 200; ++iter) {
    const auto mapping = random_mapping(rng, 2 + iter % 2);
    auto order = mapping.layers.back().centers.center_indices;
    if (iter % 3 == 0) {
      std::sort(order.begin(), order.end());
    } else if (iter % 3 == 1) {
      order = intra_layer_order(mapping.layers.back());
    } else {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    const auto got = inter_layer_coordinate(mapping, order);
    REQUIRE(got.events == emit_oracle(mapping, order));
    REQUIRE(got.events.size() == total_events(mapping));
    REQUIRE(validate_schedule(got, mapping).empty());
  }
}

TEST_CASE("coordinated schedules preserve the requested last-layer order") {
  std::mt19937_64 rng(derive_seed(44, "projection"));
  for (int iter = 0; iter < 100; ++iter) {
    const auto mapping = random_mapping(rng, 2);
    auto order = mapping.layers.back().centers.center_indices;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    const auto s = inter_layer_coordinate(mapping, order);
    CHECK(s.per_layer_order()[mapping.layer_count() - 1] == order);
  }
}

TEST_CASE("validate_schedule pinpoints violations") {
  const auto toy = exp::fig2_toy();

  Schedule missing_dep;  // E1_2 before its dependency E4_1
  missing_dep.events = {{1, 0}, {1, 6}, {2, 0}};
  const auto v1 = validate_schedule(missing_dep, toy.mapping);
  REQUIRE_FALSE(v1.empty());
  bool found = false;
  for (const auto& msg : v1) {
    found |= msg.find("E1_2 before dependency E4_1") != std::string::npos;
  }
  CHECK(found);

  Schedule dup = baseline_schedule(toy.mapping);
  dup.events.push_back({1, 0});
  const auto v2 = validate_schedule(dup, toy.mapping);
  bool twice = false;
  for (const auto& msg : v2) twice |= msg.find("2 times") != std::string::npos;
  CHECK(twice);

  Schedule stranger;
  stranger.events = {{2, 1}};  // point 1 is not a layer-2 center
  CHECK_FALSE(validate_schedule(stranger, toy.mapping).empty());

  Schedule bad_layer;
  bad_layer.events = {{9, 0}};
  CHECK_FALSE(validate_schedule(bad_layer, toy.mapping).empty());
}

TEST_CASE("replay matches the reference forward pass bit for bit") {
  std::mt19937_64 rng(derive_seed(45, "replay"));
  net::NetworkConfig cfg;
  net::LayerConfig l1;
  l1.in_feat_len = 3;
  l1.out_feat_len = 6;
  l1.mlp = {{3, 6}};
  l1.k = 3;
  l1.m = 12;
  net::LayerConfig l2;
  l2.in_feat_len = 6;
  l2.out_feat_len = 4;
  l2.mlp = {{6, 4}};
  l2.k = 2;
  l2.m = 4;
  cfg.layers = {l1, l2};

  for (int iter = 0; iter < 20; ++iter) {
    const auto cloud = random_cloud(rng, 30);
    const auto mapping = geom::build_mapping(cloud, cfg.sampling());
    const auto weights = net::gen_weights(cfg, rng());
    const auto ref = net::network_forward_ref(cloud, cfg, weights, mapping);

    auto sorted_ids = mapping.layers.back().centers.center_indices;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    const Schedule schedules[] = {
        baseline_schedule(mapping),
        inter_layer_coordinate(mapping, sorted_ids),
        inter_layer_coordinate(mapping, intra_layer_order(mapping.layers.back())),
    };
    for (const auto& s : schedules) {
      const auto out = replay_forward(cloud, cfg, weights, mapping, s);
      REQUIRE(out.features == ref.features);
      REQUIRE(out.coords == ref.coords);
    }
  }
}

TEST_CASE("replay rejects schedules that break dependencies") {
  const auto toy = exp::fig2_toy();
  const auto weights = net::gen_weights(toy.cfg, 2);
  const auto cloud_in = toy.cloud;

  Schedule bad;  // consumer before producer
  bad.events = {{2, 0}, {1, 0}, {1, 3}, {1, 6}, {1, 1}, {1, 2}, {1, 5}, {1, 4}, {2, 2}, {2, 4}};
  CHECK_THROWS_AS(replay_forward(cloud_in, toy.cfg, weights, toy.mapping, bad),
                  std::invalid_argument);

  Schedule partial = baseline_schedule(toy.mapping);
  partial.events.pop_back();
  CHECK_THROWS_AS(replay_forward(cloud_in, toy.cfg, weights, toy.mapping, partial),
                  std::invalid_argument);
}

TEST_CASE("schedule_json carries tokens and event fields") {
  const auto toy = exp::fig2_toy();
  const auto s = baseline_schedule(toy.mapping);
  const auto j = schedule_json(s);
  REQUIRE(j["events"].is_array());
  REQUIRE(j["events"].size() == 10);
  CHECK(j["events"][0]["token"] == "E1_1");
  CHECK(j["events"][9]["layer"] == 2);
  CHECK(j["events"][9]["point"] == 4);
  REQUIRE(j["per_layer"].size() == 2);
  CHECK(j["per_layer"][1] == nlohmann::json::array({0, 2, 4}));
}
