// SPDX-License-Identifier: Apache-2.0
#include "psim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <list>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace psim::exp {

namespace {

// --- enum <-> string -------------------------------------------------------

template <typename T>
struct NamedValue {
  std::string_view name;
  T value;
};

constexpr NamedValue<mem::BufferConfig::Units> kUnits[] = {
    {"entries", mem::BufferConfig::Units::entries},
    {"bytes", mem::BufferConfig::Units::bytes},
};
constexpr NamedValue<geom::SyntheticDist> kDists[] = {
    {"uniform_cube", geom::SyntheticDist::uniform_cube},
    {"gaussian_clusters", geom::SyntheticDist::gaussian_clusters},
};
constexpr NamedValue<geom::CloudFormat> kFormats[] = {
    {"xyz_ascii", geom::CloudFormat::xyz_ascii},
    {"off_ascii", geom::CloudFormat::off_ascii},
};
constexpr NamedValue<perf::HwConfig::Overlap> kOverlaps[] = {
    {"max", perf::HwConfig::Overlap::max},
    {"sum", perf::HwConfig::Overlap::sum},
};
constexpr NamedValue<geom::FpsStart::Kind> kFpsKinds[] = {
    {"fixed_index", geom::FpsStart::Kind::fixed_index},
    {"seeded_random", geom::FpsStart::Kind::seeded_random},
};
constexpr NamedValue<sched::OrderStart::Kind> kOrderKinds[] = {
    {"lowest_index", sched::OrderStart::Kind::lowest_index},
    {"seeded_random", sched::OrderStart::Kind::seeded_random},
};

template <typename T, std::size_t N>
std::string_view name_of(const NamedValue<T> (&table)[N], T value) {
  for (const auto& nv : table) {
    if (nv.value == value) return nv.name;
  }
  return "?";
}

template <typename T, std::size_t N>
T value_of(const NamedValue<T> (&table)[N], std::string_view name, const char* what) {
  for (const auto& nv : table) {
    if (nv.name == name) return nv.value;
  }
  std::ostringstream msg;
  msg << "unknown " << what << " '" << name << "' (expected one of:";
  for (const auto& nv : table) msg << ' ' << nv.name;
  msg << ')';
  throw std::runtime_error(msg.str());
}

// --- config parsing --------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::vector<std::string>& errors) : errors_(errors) {}

  template <typename Fn>
  void field(const nlohmann::json& j, const char* key, Fn&& fn) {
    if (!j.contains(key)) return;
    try {
      fn(j.at(key));
    } catch (const std::exception& ex) {
      errors_.push_back(std::string(key) + ": " + ex.what());
    }
  }

  void error(std::string msg) { errors_.push_back(std::move(msg)); }

 private:
  std::vector<std::string>& errors_;
};

net::LayerConfig layer_from_json(const nlohmann::json& j) {
  net::LayerConfig l;
  l.in_feat_len = j.at("in_feat_len").get<std::size_t>();
  l.out_feat_len = j.at("out_feat_len").get<std::size_t>();
  l.k = j.at("k").get<std::size_t>();
  l.m = j.at("m").get<std::size_t>();
  for (const auto& shape : j.at("mlp")) {
    l.mlp.push_back({shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>()});
  }
  return l;
}

nlohmann::json layer_to_json(const net::LayerConfig& l) {
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : l.mlp) shapes.push_back({s.rows, s.cols});
  return {{"in_feat_len", l.in_feat_len},
          {"out_feat_len", l.out_feat_len},
          {"k", l.k},
          {"m", l.m},
          {"mlp", std::move(shapes)}};
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::ostringstream out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out << sep;
    out << parts[i];
  }
  return out.str();
}

// --- misc helpers ----------------------------------------------------------

std::size_t thread_budget(std::size_t tasks) {
  std::size_t n = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("POINTER_SIM_THREADS")) {
    char* end = nullptr;
    const unsigned long parsed = std::strtoul(env, &end, 10);
    if (end != env && parsed > 0) n = parsed;
  }
  return std::max<std::size_t>(1, std::min(n, tasks));
}

/// Runs fn(0..tasks-1), possibly on several threads; each task writes only
/// its own result slot, so results stay deterministic.
template <typename Fn>
void parallel_for(std::size_t tasks, Fn&& fn) {
  const std::size_t threads = thread_budget(tasks);
  if (threads <= 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string iso_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& root) {
  const nlohmann::json& j = root.contains("config") ? root.at("config") : root;
  std::vector<std::string> errors;
  Parser p(errors);
  ExperimentConfig cfg;

  p.field(j, "model", [&](const nlohmann::json& v) { cfg.model = v.get<std::string>(); });
  p.field(j, "extra_input_column",
          [&](const nlohmann::json& v) { cfg.extra_input_column = v.get<bool>(); });
  p.field(j, "layers", [&](const nlohmann::json& v) {
    cfg.custom_layers.clear();
    for (const auto& l : v) cfg.custom_layers.push_back(layer_from_json(l));
  });
  p.field(j, "input", [&](const nlohmann::json& v) {
    if (v.contains("synthetic")) {
      const auto& s = v.at("synthetic");
      cfg.input.kind = InputSpec::Kind::synthetic;
      if (s.contains("n")) cfg.input.n = s.at("n").get<std::size_t>();
      if (s.contains("dist")) {
        cfg.input.dist = value_of(kDists, s.at("dist").get<std::string>(), "distribution");
      }
    } else if (v.contains("file")) {
      cfg.input.kind = InputSpec::Kind::file;
      cfg.input.path = v.at("file").get<std::string>();
      if (v.contains("format")) {
        cfg.input.format = value_of(kFormats, v.at("format").get<std::string>(), "format");
      }
    } else {
      throw std::runtime_error("expected 'synthetic' or 'file'");
    }
  });
  p.field(j, "variants", [&](const nlohmann::json& v) {
    cfg.variants.clear();
    for (const auto& name : v) cfg.variants.push_back(mem::parse_variant(name.get<std::string>()));
  });
  p.field(j, "buffer", [&](const nlohmann::json& v) {
    if (v.contains("units")) {
      cfg.buffer.units = value_of(kUnits, v.at("units").get<std::string>(), "buffer units");
    }
    if (v.contains("capacity")) cfg.buffer.capacity = v.at("capacity").get<std::size_t>();
    if (v.contains("elem_bytes")) cfg.buffer.elem_bytes = v.at("elem_bytes").get<std::size_t>();
  });
  p.field(j, "sweep_capacities", [&](const nlohmann::json& v) {
    cfg.sweep_capacities = v.get<std::vector<std::size_t>>();
  });
  p.field(j, "weight_model", [&](const nlohmann::json& v) {
    if (v.contains("weight_buffer_bytes")) {
      cfg.weight_model.weight_buffer_bytes = v.at("weight_buffer_bytes").get<std::size_t>();
    }
    if (v.contains("refetch_multiplier")) {
      cfg.weight_model.refetch_multiplier = v.at("refetch_multiplier").get<double>();
    }
  });
  p.field(j, "hw", [&](const nlohmann::json& v) {
    auto& hw = cfg.hw;
    if (v.contains("clock_hz")) hw.clock_hz = v.at("clock_hz").get<double>();
    if (v.contains("dram_bw_bytes_per_s")) {
      hw.dram_bw_bytes_per_s = v.at("dram_bw_bytes_per_s").get<double>();
    }
    if (v.contains("crossbar_op_latency_cycles")) {
      hw.crossbar_op_latency_cycles = v.at("crossbar_op_latency_cycles").get<std::size_t>();
    }
    if (v.contains("mac_rows")) hw.mac_rows = v.at("mac_rows").get<std::size_t>();
    if (v.contains("mac_cols")) hw.mac_cols = v.at("mac_cols").get<std::size_t>();
    if (v.contains("mac_pass_cycles")) {
      hw.mac_pass_cycles = v.at("mac_pass_cycles").get<std::size_t>();
    }
    if (v.contains("replication")) hw.replication = v.at("replication").get<std::size_t>();
    if (v.contains("overlap")) {
      hw.overlap = value_of(kOverlaps, v.at("overlap").get<std::string>(), "overlap mode");
    }
  });
  p.field(j, "quant", [&](const nlohmann::json& v) {
    if (v.contains("weight_bits")) cfg.quant.weight_bits = v.at("weight_bits").get<int>();
    if (v.contains("bits_per_cell")) cfg.quant.bits_per_cell = v.at("bits_per_cell").get<int>();
    if (v.contains("input_bits")) cfg.quant.input_bits = v.at("input_bits").get<int>();
  });
  p.field(j, "energy_table", [&](const nlohmann::json& v) {
    if (!v.is_null()) cfg.energy_table_path = v.get<std::string>();
  });
  p.field(j, "strict_energy",
          [&](const nlohmann::json& v) { cfg.strict_energy = v.get<bool>(); });
  p.field(j, "out_dir", [&](const nlohmann::json& v) { cfg.out_dir = v.get<std::string>(); });
  p.field(j, "seed", [&](const nlohmann::json& v) { cfg.seed = v.get<std::uint64_t>(); });
  p.field(j, "emit_trace", [&](const nlohmann::json& v) { cfg.emit_trace = v.get<bool>(); });
  p.field(j, "fps_start", [&](const nlohmann::json& v) {
    cfg.fps_start.kind = value_of(kFpsKinds, v.at("kind").get<std::string>(), "fps start");
    if (v.contains("index")) cfg.fps_start.index = v.at("index").get<std::size_t>();
  });
  p.field(j, "order_start", [&](const nlohmann::json& v) {
    cfg.order_start.kind = value_of(kOrderKinds, v.at("kind").get<std::string>(), "order start");
  });

  // Cross-field validation.
  if (cfg.variants.empty()) p.error("variants: at least one variant is required");
  if (cfg.buffer.capacity == 0) p.error("buffer.capacity: must be >= 1");
  if (cfg.buffer.elem_bytes == 0) p.error("buffer.elem_bytes: must be >= 1");
  for (std::size_t c : cfg.sweep_capacities) {
    if (c == 0) p.error("sweep_capacities: capacities must be positive");
  }
  if (cfg.input.kind == InputSpec::Kind::synthetic && cfg.input.n == 0) {
    p.error("input.synthetic.n: must be >= 1");
  }
  if (cfg.custom_layers.empty() && cfg.model != "model0" && cfg.model != "model1" &&
      cfg.model != "model2") {
    p.error("model: unknown preset '" + cfg.model + "'");
  }
  try {
    cfg.quant.validate();
  } catch (const std::exception& ex) {
    p.error(std::string("quant: ") + ex.what());
  }
  try {
    cfg.hw.validate();
  } catch (const std::exception& ex) {
    p.error(std::string("hw: ") + ex.what());
  }

  if (!errors.empty()) {
    throw std::runtime_error("config invalid:\n  " + join(errors, "\n  "));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  return from_json(nlohmann::json::parse(in));
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["extra_input_column"] = extra_input_column;
  if (!custom_layers.empty()) {
    j["layers"] = nlohmann::json::array();
    for (const auto& l : custom_layers) j["layers"].push_back(layer_to_json(l));
  }
  if (input.kind == InputSpec::Kind::synthetic) {
    j["input"] = {{"synthetic",
                   {{"n", input.n}, {"dist", name_of(kDists, input.dist)}}}};
  } else {
    j["input"] = {{"file", input.path.string()},
                  {"format", name_of(kFormats, input.format)}};
  }
  j["variants"] = nlohmann::json::array();
  for (auto v : variants) j["variants"].push_back(mem::to_string(v));
  j["buffer"] = {{"units", name_of(kUnits, buffer.units)},
                 {"capacity", buffer.capacity},
                 {"elem_bytes", buffer.elem_bytes}};
  j["sweep_capacities"] = sweep_capacities;
  j["weight_model"] = {{"weight_buffer_bytes", weight_model.weight_buffer_bytes},
                       {"refetch_multiplier", weight_model.refetch_multiplier}};
  j["hw"] = {{"clock_hz", hw.clock_hz},
             {"dram_bw_bytes_per_s", hw.dram_bw_bytes_per_s},
             {"crossbar_op_latency_cycles", hw.crossbar_op_latency_cycles},
             {"mac_rows", hw.mac_rows},
             {"mac_cols", hw.mac_cols},
             {"mac_pass_cycles", hw.mac_pass_cycles},
             {"replication", hw.replication},
             {"overlap", name_of(kOverlaps, hw.overlap)}};
  j["quant"] = {{"weight_bits", quant.weight_bits},
                {"bits_per_cell", quant.bits_per_cell},
                {"input_bits", quant.input_bits}};
  if (energy_table_path.empty()) {
    j["energy_table"] = nullptr;
  } else {
    j["energy_table"] = energy_table_path.string();
  }
  j["strict_energy"] = strict_energy;
  j["out_dir"] = out_dir.string();
  j["seed"] = seed;
  j["emit_trace"] = emit_trace;
  j["fps_start"] = {{"kind", name_of(kFpsKinds, fps_start.kind)}, {"index", fps_start.index}};
  j["order_start"] = {{"kind", name_of(kOrderKinds, order_start.kind)}};
  return j;
}

Workload build_workload(const ExperimentConfig& cfg) {
  Workload w;
  w.cloud_seed = derive_seed(cfg.seed, "cloud");
  w.weights_seed = derive_seed(cfg.seed, "weights");
  w.fps_seed = derive_seed(cfg.seed, "fps-start");
  w.sched_seed = derive_seed(cfg.seed, "sched-start");

  std::ostringstream id;
  if (cfg.input.kind == InputSpec::Kind::synthetic) {
    w.cloud = geom::gen_synthetic_cloud(w.cloud_seed, cfg.input.n, cfg.input.dist);
    id << "synthetic(" << name_of(kDists, cfg.input.dist) << " n=" << cfg.input.n << ")";
  } else {
    w.cloud = geom::load_cloud(cfg.input.path, cfg.input.format);
    id << "file(" << cfg.input.path.string() << ")";
  }

  if (cfg.custom_layers.empty()) {
    w.net_cfg = net::preset(cfg.model, cfg.extra_input_column);
  } else {
    w.net_cfg.layers = cfg.custom_layers;
    w.net_cfg.preset_id = "custom";
  }
  const auto diags = net::validate_config(w.net_cfg);
  if (!net::config_ok(diags)) {
    std::vector<std::string> msgs;
    for (const auto& d : diags) {
      if (d.severity == net::Diagnostic::Severity::error) msgs.push_back(d.message);
    }
    throw std::runtime_error("network config invalid:\n  " + join(msgs, "\n  "));
  }

  const auto sampling = w.net_cfg.sampling();
  if (!sampling.empty() && sampling.front().centers > w.cloud.size()) {
    throw std::runtime_error("config invalid:\n  input provides " +
                             std::to_string(w.cloud.size()) + " points but layer 1 samples " +
                             std::to_string(sampling.front().centers) + " centers");
  }

  geom::FpsStart fps = cfg.fps_start;
  if (fps.kind == geom::FpsStart::Kind::seeded_random) fps.seed = w.fps_seed;
  w.mapping = geom::build_mapping(w.cloud, sampling, fps);

  w.id = w.net_cfg.preset_id + " " + id.str() + " seed=" + std::to_string(cfg.seed);
  return w;
}

sched::Schedule schedule_for(mem::Variant v, const Workload& w, const sched::OrderStart& start) {
  switch (v) {
    case mem::Variant::baseline_mac:
    case mem::Variant::pointer1:
      return sched::baseline_schedule(w.mapping);
    case mem::Variant::pointer12: {
      auto ids = w.mapping.layers.back().centers.center_indices;
      std::sort(ids.begin(), ids.end());
      return sched::inter_layer_coordinate(w.mapping, ids);
    }
    case mem::Variant::pointer:
      return sched::inter_layer_coordinate(
          w.mapping, sched::intra_layer_order(w.mapping.layers.back(), start));
  }
  throw std::invalid_argument("schedule_for: bad variant");
}

RunOutputs run_experiment(const ExperimentConfig& cfg) {
  RunOutputs out;
  out.workload = build_workload(cfg);
  const Workload& w = out.workload;

  const auto counts = perf::derive_compute_counts(w.mapping, w.net_cfg, cfg.quant);
  const auto energy_table = cfg.energy_table_path.empty()
                                ? perf::EnergyTable::builtin_defaults()
                                : perf::EnergyTable::load(cfg.energy_table_path,
                                                          cfg.strict_energy);
  sched::OrderStart order = cfg.order_start;
  if (order.kind == sched::OrderStart::Kind::seeded_random) order.seed = w.sched_seed;
  mem::SimParams params{cfg.buffer, cfg.weight_model};

  std::vector<perf::SimResult> results(cfg.variants.size());
  std::vector<mem::AccessTrace> traces(cfg.variants.size());
  parallel_for(cfg.variants.size(), [&](std::size_t i) {
    const mem::Variant v = cfg.variants[i];
    const auto schedule = schedule_for(v, w, order);
    auto [trace, traffic] = mem::simulate(schedule, w.mapping, w.net_cfg, params, v);
    perf::SimResult r;
    r.workload = w.id;
    r.variant = v;
    r.memory_cycles = perf::memory_cycles(traffic, cfg.hw);
    r.compute_cycles = perf::compute_cycles(counts, cfg.hw, v);
    r.cycles = perf::latency_estimate(traffic, counts, cfg.hw, v);
    r.energy = perf::energy_estimate(traffic, counts, energy_table, v);
    r.traffic = std::move(traffic);
    results[i] = std::move(r);
    if (cfg.emit_trace) traces[i] = std::move(trace);
  });

  out.comparison = perf::compare_variants(std::move(results));
  if (cfg.emit_trace) {
    for (std::size_t i = 0; i < cfg.variants.size(); ++i) {
      out.traces.emplace_back(cfg.variants[i], std::move(traces[i]));
    }
  }
  return out;
}

std::vector<SweepRow> sweep_buffer(const ExperimentConfig& cfg, const Workload& w) {
  if (cfg.sweep_capacities.empty()) {
    throw std::invalid_argument("sweep_buffer: no capacities");
  }
  const auto counts = perf::derive_compute_counts(w.mapping, w.net_cfg, cfg.quant);
  sched::OrderStart order = cfg.order_start;
  if (order.kind == sched::OrderStart::Kind::seeded_random) order.seed = w.sched_seed;

  const auto base_schedule = schedule_for(mem::Variant::baseline_mac, w, order);
  mem::SimParams base_params{cfg.buffer, cfg.weight_model};
  const auto [base_trace, base_traffic] =
      mem::simulate(base_schedule, w.mapping, w.net_cfg, base_params, mem::Variant::baseline_mac);
  const double base_cycles =
      perf::latency_estimate(base_traffic, counts, cfg.hw, mem::Variant::baseline_mac);

  const mem::Variant swept[] = {mem::Variant::pointer12, mem::Variant::pointer};
  std::vector<SweepRow> rows(2 * cfg.sweep_capacities.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const mem::Variant v = swept[i / cfg.sweep_capacities.size()];
    const std::size_t cap = cfg.sweep_capacities[i % cfg.sweep_capacities.size()];
    const auto schedule = schedule_for(v, w, order);
    mem::SimParams params{{mem::BufferConfig::Units::entries, cap, cfg.buffer.elem_bytes},
                          cfg.weight_model};
    const auto [trace, traffic] = mem::simulate(schedule, w.mapping, w.net_cfg, params, v);
    SweepRow row;
    row.variant = v;
    row.capacity = cap;
    row.per_layer = traffic.per_layer;
    row.speedup_vs_baseline =
        base_cycles / perf::latency_estimate(traffic, counts, cfg.hw, v);
    rows[i] = std::move(row);
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "variant,capacity_entries,layer,hits,misses,hit_rate,speedup_vs_baseline\n";
  for (const auto& row : rows) {
    for (std::size_t li = 0; li < row.per_layer.size(); ++li) {
      const auto& h = row.per_layer[li];
      out << mem::to_string(row.variant) << ',' << row.capacity << ',' << li + 1 << ','
          << h.hits << ',' << h.misses << ',' << fmt("%.17g", h.rate()) << ','
          << fmt("%.17g", row.speedup_vs_baseline) << '\n';
    }
  }
  return out.str();
}

namespace {

nlohmann::json make_manifest(const ExperimentConfig& cfg, const Workload& w,
                             const char* command, std::vector<std::string> outputs) {
  nlohmann::json m;
  m["artifact"] = kArtifactName;
  m["version"] = kArtifactVersion;
  m["command"] = command;
  m["wall_clock"] = iso_utc_now();
  m["workload"] = w.id;
  m["seeds"] = {{"global", cfg.seed},
                {"cloud", w.cloud_seed},
                {"weights", w.weights_seed},
                {"fps_start", w.fps_seed},
                {"sched_start", w.sched_seed}};
  m["outputs"] = std::move(outputs);
  m["config"] = cfg.to_json();
  return m;
}

void print_summary(std::ostream& os, const RunOutputs& out) {
  os << "workload: " << out.workload.id << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%-13s %14s %9s %12s %11s %10s %10s %10s\n", "variant",
                "cycles", "speedup", "energy_J", "norm_energy", "fetch_KB", "write_KB",
                "weight_KB");
  os << line;
  for (const auto& r : out.comparison.rows) {
    std::snprintf(line, sizeof line, "%-13s %14.0f %9.2f %12.4e %11.3f %10.1f %10.1f %10.1f\n",
                  std::string(mem::to_string(r.variant)).c_str(), r.cycles, r.speedup,
                  r.energy.total(), r.normalized_energy,
                  static_cast<double>(r.traffic.feature_fetch_bytes) / 1024.0,
                  static_cast<double>(r.traffic.feature_write_bytes) / 1024.0,
                  static_cast<double>(r.traffic.weight_fetch_bytes) / 1024.0);
    os << line;
  }
}

}  // namespace

int cmd_run(const std::filesystem::path& config_path) {
  try {
    const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    const RunOutputs out = run_experiment(cfg);

    std::filesystem::create_directories(cfg.out_dir);
    std::vector<std::string> files;
    write_text(cfg.out_dir / "comparison.csv", out.comparison.csv());
    files.push_back("comparison.csv");

    nlohmann::json traffic;
    traffic["workload"] = out.workload.id;
    for (const auto& r : out.comparison.rows) {
      traffic["variants"][std::string(mem::to_string(r.variant))] = r.traffic.to_json();
    }
    write_text(cfg.out_dir / "traffic.json", traffic.dump(2) + "\n");
    files.push_back("traffic.json");

    for (std::size_t i = 0; i < out.traces.size(); ++i) {
      const auto& [variant, trace] = out.traces[i];
      const std::string name = "trace_" + std::string(mem::to_string(variant)) + ".csv";
      const std::string csv = mem::trace_csv(trace);
      write_text(cfg.out_dir / name, csv);
      files.push_back(name);
      if (i == 0) {
        write_text(cfg.out_dir / "trace.csv", csv);
        files.push_back("trace.csv");
      }
    }

    const auto manifest = make_manifest(cfg, out.workload, "run", files);
    write_text(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
    print_summary(std::cout, out);
    std::cout << "reports written to " << cfg.out_dir.string() << '\n';
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
}

int cmd_sweep_buffer(const std::filesystem::path& config_path,
                     const std::vector<std::size_t>& capacities_override) {
  try {
    ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    if (!capacities_override.empty()) cfg.sweep_capacities = capacities_override;
    for (std::size_t c : cfg.sweep_capacities) {
      if (c == 0) throw std::runtime_error("capacities must be positive");
    }
    const Workload w = build_workload(cfg);
    const auto rows = sweep_buffer(cfg, w);

    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "hitrates.csv", sweep_csv(rows));
    const auto manifest = make_manifest(cfg, w, "sweep-buffer", {"hitrates.csv"});
    write_text(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");

    std::cout << "workload: " << w.id << '\n'
              << "swept " << cfg.sweep_capacities.size() << " capacities; hit-rate curves in "
              << (cfg.out_dir / "hitrates.csv").string() << '\n';
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
}

int cmd_validate_config(const std::filesystem::path& config_path) {
  try {
    const ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    net::NetworkConfig net_cfg;
    if (cfg.custom_layers.empty()) {
      net_cfg = net::preset(cfg.model, cfg.extra_input_column);
    } else {
      net_cfg.layers = cfg.custom_layers;
      net_cfg.preset_id = "custom";
    }
    const auto diags = net::validate_config(net_cfg);
    for (const auto& d : diags) {
      std::cout << (d.severity == net::Diagnostic::Severity::error ? "error: " : "warning: ")
                << d.message << '\n';
    }
    if (!net::config_ok(diags)) return 1;
    const auto alloc = reram::map_mlp(net_cfg, cfg.quant);
    std::cout << "config ok\n" << alloc.summary().dump(2) << '\n';
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
}

// --- fig2 worked example ---------------------------------------------------

Fig2Toy fig2_toy() {
  Fig2Toy toy;
  toy.cloud.coords = {{0, 0, 0}, {4, 0, 0}, {5, 0, 0}, {1, 0, 0},
                      {2, 0, 0}, {6, 0, 0}, {1, 1, 0}};
  toy.cloud.feat_len = 3;
  for (const auto& c : toy.cloud.coords) {
    toy.cloud.features.push_back({c[0], c[1], c[2]});
  }

  geom::MappingLayer l1;
  l1.centers.center_indices = {0, 1, 2, 3, 4, 5, 6};
  l1.neighbors = geom::knn(toy.cloud, l1.centers, 1);
  l1.center_coords = toy.cloud.coords;
  l1.parent_n = 7;

  geom::PointCloud mid;  // layer 1's output cloud: same seven positions
  mid.coords = toy.cloud.coords;
  mid.features = toy.cloud.features;
  mid.feat_len = 3;

  geom::MappingLayer l2;
  l2.centers.center_indices = {0, 2, 4};  // P1, P3, P5
  l2.neighbors = geom::knn(mid, l2.centers, 3);
  for (std::size_t id : l2.centers.center_indices) l2.center_coords.push_back(mid.coords[id]);
  l2.parent_n = 7;

  toy.mapping = geom::make_mapping({std::move(l1), std::move(l2)}, 7);

  net::LayerConfig c1;
  c1.in_feat_len = 3;
  c1.out_feat_len = 4;
  c1.mlp = {{3, 4}};
  c1.k = 1;
  c1.m = 7;
  net::LayerConfig c2;
  c2.in_feat_len = 4;
  c2.out_feat_len = 4;
  c2.mlp = {{4, 4}};
  c2.k = 3;
  c2.m = 3;
  toy.cfg.layers = {c1, c2};
  toy.cfg.preset_id = "fig2";
  return toy;
}

namespace {

std::string entry_label(std::size_t entry_layer, std::size_t entry_point) {
  std::ostringstream out;
  out << (entry_layer == 0 ? 'P' : 'F') << entry_point + 1;
  return out.str();
}

/// Renders one event per line: the accesses it made and the buffer contents
/// (produced-entry regions, least recently used first) after it completed.
std::string timeline_text(const sched::Schedule& schedule, const mem::AccessTrace& trace,
                          std::size_t layer_count) {
  // Reconstruct region contents by replaying the trace records.
  std::vector<std::list<std::pair<std::size_t, std::size_t>>> regions(layer_count + 1);
  auto touch = [&](std::size_t layer, std::size_t point) {
    auto& r = regions[layer];
    for (auto it = r.begin(); it != r.end(); ++it) {
      if (*it == std::make_pair(layer, point)) {
        r.splice(r.end(), r, it);
        return;
      }
    }
    r.emplace_back(layer, point);
  };
  auto drop = [&](std::size_t layer, std::size_t point) {
    regions[layer].remove(std::make_pair(layer, point));
  };

  std::ostringstream out;
  std::size_t next_record = 0;
  for (std::size_t step = 0; step < schedule.events.size(); ++step) {
    std::ostringstream accesses;
    while (next_record < trace.records.size() && trace.records[next_record].step == step) {
      const auto& r = trace.records[next_record++];
      switch (r.cause) {
        case mem::TraceRecord::Cause::fetch:
          if (!accesses.str().empty()) accesses << ' ';
          accesses << entry_label(r.entry_layer, r.entry_point) << ':'
                   << (r.hit ? "hit" : "miss");
          touch(r.entry_layer, r.entry_point);
          break;
        case mem::TraceRecord::Cause::write:
          touch(r.entry_layer, r.entry_point);
          break;
        case mem::TraceRecord::Cause::evict:
          drop(r.entry_layer, r.entry_point);
          break;
      }
    }
    out << "  " << sched::event_token(schedule.events[step]) << " | " << accesses.str()
        << " |";
    for (std::size_t layer = 1; layer <= layer_count; ++layer) {
      if (regions[layer].empty()) continue;
      out << " L" << layer << '[';
      bool first = true;
      for (const auto& [el, ep] : regions[layer]) {
        if (!first) out << ' ';
        out << entry_label(el, ep);
        first = false;
      }
      out << ']';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string golden_fig2_text() {
  const Fig2Toy toy = fig2_toy();
  const auto& mapping = toy.mapping;

  const auto baseline = sched::baseline_schedule(mapping);
  auto index_order = mapping.layers.back().centers.center_indices;
  std::sort(index_order.begin(), index_order.end());
  const auto coordinated = sched::inter_layer_coordinate(mapping, index_order);
  const auto reordered =
      sched::inter_layer_coordinate(mapping, sched::intra_layer_order(mapping.layers.back()));

  const std::size_t cstar = mem::min_zero_miss_capacity(reordered, mapping, toy.cfg);

  std::ostringstream out;
  out << "fig2 worked example\n";
  out << "points:";
  for (std::size_t i = 0; i < toy.cloud.coords.size(); ++i) {
    const auto& c = toy.cloud.coords[i];
    out << " P" << i + 1 << '(' << c[0] << ',' << c[1] << ',' << c[2] << ')';
  }
  out << "\nlayer 1: all seven points, k=1 (self)\n";
  out << "layer 2: centers P1 P3 P5, k=3\n";

  const auto rf = sched::receptive_fields(mapping);
  out << "receptive fields:";
  for (std::size_t pos = 0; pos < mapping.layers[1].centers.size(); ++pos) {
    const std::size_t id = mapping.layers[1].centers.center_indices[pos];
    out << ' ' << sched::event_token({2, id}) << "<-{";
    const auto& field = rf.of(2, pos);
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (i > 0) out << ' ';
      out << sched::event_token({1, field[i]});
    }
    out << '}';
  }
  out << '\n';

  out << "baseline: " << sched::stream_tokens(baseline) << '\n';
  out << "coordinated: " << sched::stream_tokens(coordinated) << '\n';
  out << "reordered: " << sched::stream_tokens(reordered) << '\n';
  out << "zero-miss capacity (reordered): " << cstar << " entries\n";

  mem::SimParams params;
  params.buffer.units = mem::BufferConfig::Units::entries;
  params.buffer.capacity = cstar;
  const struct {
    const char* title;
    const sched::Schedule* schedule;
  } cases[] = {{"(a) baseline", &baseline},
               {"(b) coordinated", &coordinated},
               {"(c) reordered", &reordered}};
  for (const auto& c : cases) {
    const auto [trace, report] =
        mem::simulate(*c.schedule, mapping, toy.cfg, params, mem::Variant::pointer12);
    out << '\n'
        << "timeline " << c.title << " @ " << cstar
        << "-entry buffer, non-compulsory misses: " << report.non_compulsory_misses << '\n';
    out << timeline_text(*c.schedule, trace, mapping.layer_count());
  }
  return out.str();
}

int cmd_golden(std::string_view toy, std::ostream& out) {
  if (toy != "fig2") {
    std::cerr << "error: unknown toy '" << toy << "' (available: fig2)\n";
    return 2;
  }
  out << golden_fig2_text();
  return 0;
}

}  // namespace psim::exp
