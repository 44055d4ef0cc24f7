// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: config loading, workload materialization (cloud,
// mapping, schedules per variant), report emission, and the fig2 worked
// example. All randomness flows from one global seed through named
// sub-streams (cloud, weights, fps-start, sched-start) so every report can
// be regenerated bit-identically from its manifest.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "psim/memsim.hpp"
#include "psim/perfmodel.hpp"
#include "psim/scheduler.hpp"

namespace psim::exp {

inline constexpr std::string_view kArtifactName = "pointer-sim";
inline constexpr std::string_view kArtifactVersion = "0.1.0";

struct InputSpec {
  enum class Kind { synthetic, file };
  Kind kind = Kind::synthetic;
  std::size_t n = 1024;
  geom::SyntheticDist dist = geom::SyntheticDist::gaussian_clusters;
  std::filesystem::path path;  // file mode
  geom::CloudFormat format = geom::CloudFormat::xyz_ascii;
};

struct ExperimentConfig {
  std::string model = "model0";                 // preset id; ignored when custom_layers set
  bool extra_input_column = false;
  std::vector<net::LayerConfig> custom_layers;  // non-empty replaces the preset
  InputSpec input;
  std::vector<mem::Variant> variants{mem::Variant::baseline_mac, mem::Variant::pointer1,
                                     mem::Variant::pointer12, mem::Variant::pointer};
  mem::BufferConfig buffer{mem::BufferConfig::Units::bytes, 9216, 2};
  std::vector<std::size_t> sweep_capacities{32, 64, 128, 256, 512, 1024};
  mem::WeightTrafficModel weight_model;
  perf::HwConfig hw;
  reram::QuantSpec quant;
  std::filesystem::path energy_table_path;  // empty = builtin defaults
  bool strict_energy = false;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  bool emit_trace = false;
  geom::FpsStart fps_start;
  sched::OrderStart order_start;

  /// Accepts either a raw config object or a manifest (its "config" key is
  /// used). Throws std::runtime_error listing every problem found.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::filesystem::path& path);

  /// Fully resolved echo (defaults filled in), reusable as a config.
  nlohmann::json to_json() const;
};

/// Materialized inputs shared by run and sweep.
struct Workload {
  geom::PointCloud cloud;
  net::NetworkConfig net_cfg;
  geom::Mapping mapping;
  std::string id;
  std::uint64_t cloud_seed = 0;
  std::uint64_t weights_seed = 0;
  std::uint64_t fps_seed = 0;
  std::uint64_t sched_seed = 0;
};

Workload build_workload(const ExperimentConfig& cfg);

/// The schedule a variant executes: layer-order for baseline_mac/pointer1,
/// coordinated with ascending last-layer order for pointer12, coordinated
/// with the greedy chain order for pointer.
sched::Schedule schedule_for(mem::Variant v, const Workload& w, const sched::OrderStart& start);

struct RunOutputs {
  Workload workload;
  perf::Comparison comparison;
  std::vector<std::pair<mem::Variant, mem::AccessTrace>> traces;  // filled when emit_trace
};

/// Simulates every requested variant and assembles the comparison. No file
/// I/O. Honors POINTER_SIM_THREADS for the per-variant parallel loop.
RunOutputs run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  mem::Variant variant = mem::Variant::pointer12;
  std::size_t capacity = 0;
  std::vector<mem::LayerHits> per_layer;
  double speedup_vs_baseline = 0.0;
};

/// Entries-mode capacity sweep for pointer12 and pointer (the buffered,
/// coordinated variants); speedups are against baseline_mac at the
/// config's own buffer.
std::vector<SweepRow> sweep_buffer(const ExperimentConfig& cfg, const Workload& w);

std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Subcommand entry points; return process exit codes and report problems
/// on stderr.
int cmd_run(const std::filesystem::path& config_path);
int cmd_sweep_buffer(const std::filesystem::path& config_path,
                     const std::vector<std::size_t>& capacities_override);
int cmd_golden(std::string_view toy, std::ostream& out);
int cmd_validate_config(const std::filesystem::path& config_path);

/// The two-layer worked example: seven collinear-ish points, layer 1 keeps
/// all of them with self-neighborhoods, layer 2 samples P1, P3, P5 with
/// k = 3. Neighbor tables come from knn on the stated coordinates.
struct Fig2Toy {
  geom::PointCloud cloud;
  geom::Mapping mapping;
  net::NetworkConfig cfg;
};

Fig2Toy fig2_toy();

/// Full text of the fig2 walkthrough: the three schedules, the zero-miss
/// capacity of the reordered one, and per-event buffer timelines for all
/// three at that capacity.
std::string golden_fig2_text();

}  // namespace psim::exp
