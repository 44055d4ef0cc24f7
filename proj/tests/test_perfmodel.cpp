// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "psim/experiment.hpp"
#include "psim/perfmodel.hpp"

using namespace psim;
using namespace psim::perf;

namespace {

ComputeCounts model0_counts() {
  const auto cfg = net::preset("model0");
  const auto cloud = geom::gen_synthetic_cloud(1, 1024, geom::SyntheticDist::gaussian_clusters);
  const auto mapping = geom::build_mapping(cloud, cfg.sampling());
  return derive_compute_counts(mapping, cfg);
}

mem::TrafficReport traffic_with(std::uint64_t fetch, std::uint64_t write, std::uint64_t weight,
                                std::uint64_t hit) {
  mem::TrafficReport t;
  t.feature_fetch_bytes = fetch;
  t.feature_write_bytes = write;
  t.weight_fetch_bytes = weight;
  t.buffer_hit_bytes = hit;
  return t;
}

}  // namespace

TEST_CASE("compute counts follow events and neighbor fan-in") {
  const auto counts = model0_counts();
  REQUIRE(counts.layers.size() == 2);
  CHECK(counts.layers[0].events == 512);
  CHECK(counts.layers[0].invocations == 512 * 16);
  CHECK(counts.layers[1].events == 128);
  CHECK(counts.layers[1].invocations == 128 * 16);
  // stage tiling at 128x128 arrays, 4 slices at the default quant spec
  CHECK(counts.layers[0].stages[0].tiles == 1);
  CHECK(counts.layers[1].stages[2].tiles == 2);
  CHECK(counts.layers[0].stages[0].slices == 4);

  const std::uint64_t inv1 = 512 * 16, inv2 = 128 * 16;
  CHECK(counts.mac_ops() ==
        inv1 * (4 * 64 + 64 * 64 + 64 * 128) + inv2 * (128 * 128 + 128 * 128 + 128 * 256));
  CHECK(counts.crossbar_array_ops() == inv1 * (4 + 4 + 4) + inv2 * (4 + 4 + 8));
  CHECK(counts.digital_ops() == inv1 * (4 + 128) + inv2 * (128 + 256));
}

TEST_CASE("memory cycles scale bytes by bandwidth and clock") {
  HwConfig hw;  // 1 GHz, 8 GB/s
  CHECK(memory_cycles(traffic_with(8'000'000'000ULL, 0, 0, 0), hw) == doctest::Approx(1e9));
  CHECK(memory_cycles(traffic_with(0, 0, 0, 0), hw) == 0.0);
  CHECK(memory_cycles(traffic_with(400, 400, 200, 999), hw) == doctest::Approx(125.0));
  hw.clock_hz = 2e9;
  CHECK(memory_cycles(traffic_with(8'000'000'000ULL, 0, 0, 0), hw) == doctest::Approx(2e9));
}

TEST_CASE("compute cycles: crossbar layers pipeline, pointer1 serializes") {
  const auto counts = model0_counts();
  HwConfig hw;
  // slowest layer: 8192 invocations at 100 cycles
  CHECK(compute_cycles(counts, hw, mem::Variant::pointer12) == doctest::Approx(819200.0));
  CHECK(compute_cycles(counts, hw, mem::Variant::pointer) == doctest::Approx(819200.0));
  CHECK(compute_cycles(counts, hw, mem::Variant::pointer1) ==
        doctest::Approx(819200.0 + 204800.0));
  hw.replication = 4;
  CHECK(compute_cycles(counts, hw, mem::Variant::pointer12) == doctest::Approx(204800.0));
}

TEST_CASE("compute cycles: mac array tile passes") {
  const auto counts = model0_counts();
  HwConfig hw;  // 32x32 tiles, 32 cycles per pass
  // layer1: (1*2 + 2*2 + 2*4)=14 tiles; layer2: (4*4 + 4*4 + 4*8)=64 tiles
  const double expected = 512 * 16 * 14.0 * 32 + 128 * 16 * 64.0 * 32;
  CHECK(compute_cycles(counts, hw, mem::Variant::baseline_mac) == doctest::Approx(expected));
}

TEST_CASE("latency combines memory and compute per the overlap mode") {
  const auto counts = model0_counts();
  HwConfig hw;
  const auto traffic = traffic_with(1 << 20, 1 << 20, 0, 0);
  const double m = memory_cycles(traffic, hw);
  const double c = compute_cycles(counts, hw, mem::Variant::pointer12);
  CHECK(latency_estimate(traffic, counts, hw, mem::Variant::pointer12) ==
        doctest::Approx(std::max(m, c)));
  hw.overlap = HwConfig::Overlap::sum;
  CHECK(latency_estimate(traffic, counts, hw, mem::Variant::pointer12) ==
        doctest::Approx(m + c));
}

TEST_CASE("hw validation rejects non-positive parameters") {
  HwConfig hw;
  hw.clock_hz = 0;
  CHECK_THROWS_AS(hw.validate(), std::invalid_argument);
  hw = HwConfig{};
  hw.replication = 0;
  CHECK_THROWS_AS(hw.validate(), std::invalid_argument);
  CHECK_NOTHROW(HwConfig{}.validate());
}

TEST_CASE("builtin energy table is fully attributed") {
  const auto t = EnergyTable::builtin_defaults();
  for (const auto* e : {&t.dram_per_byte, &t.buffer_read_per_byte, &t.buffer_write_per_byte,
                        &t.crossbar_per_op, &t.mac_per_op, &t.digital_per_op}) {
    CHECK(e->value > 0.0);
    CHECK_FALSE(e->provenance.empty());
  }
  CHECK(t.dram_per_byte.value > t.buffer_read_per_byte.value);
}

TEST_CASE("energy table file loading") {
  const auto path = std::filesystem::temp_directory_path() / "psim_energy.json";

  SUBCASE("object entries with provenance") {
    std::ofstream(path) << R"({
      "dram_per_byte": {"value": 2e-10, "provenance": "measured"},
      "buffer_read_per_byte": {"value": 1e-12, "provenance": "measured"},
      "buffer_write_per_byte": {"value": 1e-12, "provenance": "measured"},
      "crossbar_per_op": {"value": 4e-10, "provenance": "measured"},
      "mac_per_op": {"value": 2e-12, "provenance": "measured"},
      "digital_per_op": {"value": 1e-13, "provenance": "measured"}
    })";
    const auto t = EnergyTable::load(path, true);
    CHECK(t.dram_per_byte.value == 2e-10);
    CHECK(t.crossbar_per_op.provenance == "measured");
  }
  SUBCASE("bare numbers pass only in non-strict mode") {
    std::ofstream(path) << R"({
      "dram_per_byte": 2e-10,
      "buffer_read_per_byte": 1e-12,
      "buffer_write_per_byte": 1e-12,
      "crossbar_per_op": 4e-10,
      "mac_per_op": 2e-12,
      "digital_per_op": 1e-13
    })";
    const auto t = EnergyTable::load(path, false);
    CHECK(t.dram_per_byte.provenance == "unspecified");
    CHECK_THROWS_AS(EnergyTable::load(path, true), std::runtime_error);
  }
  SUBCASE("missing or negative entries are always errors") {
    std::ofstream(path) << R"({"dram_per_byte": 2e-10})";
    CHECK_THROWS_AS(EnergyTable::load(path, false), std::runtime_error);
    std::ofstream(path) << R"({
      "dram_per_byte": -1e-10,
      "buffer_read_per_byte": 1e-12,
      "buffer_write_per_byte": 1e-12,
      "crossbar_per_op": 4e-10,
      "mac_per_op": 2e-12,
      "digital_per_op": 1e-13
    })";
    CHECK_THROWS_AS(EnergyTable::load(path, false), std::runtime_error);
  }
  std::filesystem::remove(path);
}

TEST_CASE("energy accounting is linear in the counters") {
  const auto counts = model0_counts();
  const auto table = EnergyTable::builtin_defaults();

  const auto zero = energy_estimate(traffic_with(0, 0, 0, 0), counts, table,
                                    mem::Variant::pointer1);
  CHECK(zero.dram_j == 0.0);
  CHECK(zero.buffer_j == 0.0);  // pointer1 has no buffer
  CHECK(zero.compute_j > 0.0);

  const auto a = energy_estimate(traffic_with(1000, 500, 0, 200), counts, table,
                                 mem::Variant::pointer12);
  const auto b = energy_estimate(traffic_with(2000, 1000, 0, 400), counts, table,
                                 mem::Variant::pointer12);
  CHECK(b.dram_j == doctest::Approx(2 * a.dram_j));
  CHECK(b.buffer_j == doctest::Approx(2 * a.buffer_j));
  CHECK(b.compute_j == a.compute_j);

  // buffer energy: hits read, fetches and writes fill
  const double expected_buffer = 200 * table.buffer_read_per_byte.value +
                                 (1000 + 500) * table.buffer_write_per_byte.value;
  CHECK(a.buffer_j == doctest::Approx(expected_buffer));

  const auto mac = energy_estimate(traffic_with(1000, 500, 800, 0), counts, table,
                                   mem::Variant::baseline_mac);
  CHECK(mac.compute_j ==
        doctest::Approx(static_cast<double>(counts.mac_ops()) * table.mac_per_op.value));
  const auto xbar = energy_estimate(traffic_with(1000, 500, 0, 0), counts, table,
                                    mem::Variant::pointer);
  CHECK(xbar.compute_j == doctest::Approx(static_cast<double>(counts.crossbar_array_ops()) *
                                          table.crossbar_per_op.value));
  CHECK(mac.dram_j > xbar.dram_j);  // weight bytes count toward dram
}

TEST_CASE("compare_variants normalizes against the baseline row") {
  SimResult base;
  base.workload = "w";
  base.variant = mem::Variant::baseline_mac;
  base.cycles = 1000;
  base.energy.dram_j = 10.0;
  SimResult faster;
  faster.workload = "w";
  faster.variant = mem::Variant::pointer;
  faster.cycles = 250;
  faster.energy.dram_j = 2.0;

  const auto cmp = compare_variants({faster, base});
  REQUIRE(cmp.rows.size() == 2);
  CHECK(cmp.rows[0].variant == mem::Variant::pointer);  // input order preserved
  CHECK(cmp.rows[0].speedup == doctest::Approx(4.0));
  CHECK(cmp.rows[0].normalized_energy == doctest::Approx(0.2));
  CHECK(cmp.rows[1].speedup == doctest::Approx(1.0));

  const auto csv = cmp.csv();
  CHECK(csv.rfind("variant,cycles,memory_cycles,compute_cycles,energy_j,dram_j,buffer_j,"
                  "compute_j,digital_j,feature_fetch_bytes,feature_write_bytes,"
                  "weight_fetch_bytes,buffer_hit_bytes,speedup_vs_baseline,normalized_energy\n",
                  0) == 0);
  const auto j = cmp.to_json();
  CHECK(j.is_array());
  CHECK(j.size() == 2);

  CHECK_THROWS_AS(compare_variants({}), std::invalid_argument);
  SimResult other = base;
  other.workload = "different";
  CHECK_THROWS_AS(compare_variants({base, other}), std::invalid_argument);
}

TEST_CASE("without a baseline row the first row anchors the ratios") {
  SimResult a;
  a.workload = "w";
  a.variant = mem::Variant::pointer12;
  a.cycles = 400;
  a.energy.dram_j = 4.0;
  SimResult b = a;
  b.variant = mem::Variant::pointer;
  b.cycles = 100;
  b.energy.dram_j = 1.0;
  const auto cmp = compare_variants({a, b});
  CHECK(cmp.rows[0].speedup == doctest::Approx(1.0));
  CHECK(cmp.rows[1].speedup == doctest::Approx(4.0));
  CHECK(cmp.rows[1].normalized_energy == doctest::Approx(0.25));
}
