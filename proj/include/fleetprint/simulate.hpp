#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "fleetprint/detail/rng.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

inline std::vector<NodeId> default_nodes() {
  return {{"digi-a", NodeRole::Master}, {"digi-b", NodeRole::Slave}};
}

struct SimConfig {
  AppLabel app = AppLabel::CadoNfs;
  double duration = 600.0;
  double sample_period = 5.0;
  std::vector<NodeId> nodes = default_nodes();
  double noise_std_fraction = 0.05;
  std::uint64_t seed = 0;
};

inline void validate_config(const SimConfig& config) {
  if (!(config.sample_period > 0.0))
    throw InvalidConfig("sample_period must be positive");
  if (!(config.duration >= 2.0 * config.sample_period))
    throw InvalidConfig("duration must be at least twice the sample period");
  if (!(config.noise_std_fraction >= 0.0 && config.noise_std_fraction < 1.0))
    throw InvalidConfig("noise_std_fraction must be in [0, 1)");
  if (config.nodes.empty()) throw InvalidConfig("node list is empty");
  int masters = 0;
  for (const NodeId& n : config.nodes)
    if (n.role == NodeRole::Master) ++masters;
  if (masters != 1) throw InvalidConfig("exactly one master node is required");
}

// Accepts both the canonical label ("MCNP6") and the flag spelling
// ("mcnp6") used by config files and the CLI.
inline std::optional<AppLabel> app_from_token(std::string_view token) {
  if (auto app = app_from_name(token)) return app;
  if (token == "cado_nfs") return AppLabel::CadoNfs;
  if (token == "mcnp6") return AppLabel::Mcnp6;
  if (token == "openfoam") return AppLabel::OpenFoam;
  return std::nullopt;
}

// Key=value config file; '#' starts a comment. Keys: app, duration,
// sample_period, noise_std_fraction, seed, nodes (comma-separated names,
// first is the master).
inline SimConfig load_sim_config(std::istream& in) {
  SimConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const char* ws = " \t\r";
      s.erase(0, s.find_first_not_of(ws));
      const auto last = s.find_last_not_of(ws);
      s.erase(last == std::string::npos ? 0 : last + 1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "app") {
      auto app = app_from_token(value);
      if (!app) throw ParseError(line_no, "unknown app '" + value + "'");
      config.app = *app;
    } else if (key == "duration") {
      config.duration = std::stod(value);
    } else if (key == "sample_period") {
      config.sample_period = std::stod(value);
    } else if (key == "noise_std_fraction") {
      config.noise_std_fraction = std::stod(value);
    } else if (key == "seed") {
      config.seed = std::stoull(value);
    } else if (key == "nodes") {
      std::vector<NodeId> nodes;
      std::stringstream ss(value);
      std::string name;
      while (std::getline(ss, name, ',')) {
        name = trim(name);
        if (name.empty()) continue;
        nodes.push_back({name, nodes.empty() ? NodeRole::Master : NodeRole::Slave});
      }
      if (nodes.empty()) throw ParseError(line_no, "empty node list");
      config.nodes = std::move(nodes);
    } else {
      throw ParseError(line_no, "unknown key '" + key + "'");
    }
  }
  return config;
}

// ---------------------------------------------------------------------------
// Signatures
// ---------------------------------------------------------------------------

// A localized bump in the deterministic signal. Times and widths are
// fractions of the run duration so signatures scale with it.
struct PhaseEvent {
  double time_fraction = 0.0;
  double magnitude = 0.0;
  double width_fraction = 0.05;
};

// Piecewise description of one (node role, meter) series.
struct MeterProcess {
  double baseline = 0.0;
  double trend_slope = 0.0;          // per second
  double burst_amplitude = 0.0;      // added on top of baseline during a burst
  double burst_period = 0.0;         // seconds; 0 disables bursts
  double burst_duty = 0.5;           // fraction of the period spent bursting
  double startup_spike = 0.0;        // added during the first bucket only
  std::vector<PhaseEvent> phase_events;
};

// Peak level reached during a burst window.
inline double burst_peak(const MeterProcess& p) {
  return p.baseline + p.burst_amplitude;
}

// Deterministic per-role, per-meter processes for one application.
struct SignatureSpec {
  std::array<std::array<MeterProcess, kMeterCount>, 2> process;

  MeterProcess& at(NodeRole role, MeterId meter) {
    return process[role == NodeRole::Master ? 0 : 1][static_cast<int>(meter)];
  }
  const MeterProcess& at(NodeRole role, MeterId meter) const {
    return process[role == NodeRole::Master ? 0 : 1][static_cast<int>(meter)];
  }
};

// Noise-free signal level at time t for a run of the given duration.
inline double signature_value(const MeterProcess& p, double t, double duration,
                              double sample_period) {
  double v = p.baseline + p.trend_slope * t;
  if (p.burst_amplitude > 0.0 && p.burst_period > 0.0) {
    const double phase = std::fmod(t, p.burst_period) / p.burst_period;
    if (phase < p.burst_duty) v += p.burst_amplitude;
  }
  for (const PhaseEvent& e : p.phase_events) {
    const double center = e.time_fraction * duration;
    const double sigma = e.width_fraction * duration;
    const double z = (t - center) / sigma;
    v += e.magnitude * std::exp(-0.5 * z * z);
  }
  if (t < sample_period) v += p.startup_spike;
  return v;
}

// The magnitudes below are free parameters tuned so the three classes stay
// separable at the default noise level; only the anchors noted inline are
// fixed behaviors (CPU plateau, linear memory trend, 2.5 MB/s network peak,
// master-only CADO-NFS activity with its late linear-algebra spike).
inline SignatureSpec signature_for(AppLabel app) {
  using M = MeterId;
  SignatureSpec s;
  auto& master = s.process[0];
  auto& slave = s.process[1];
  auto set = [](std::array<MeterProcess, kMeterCount>& row, M m, MeterProcess p) {
    row[static_cast<int>(m)] = std::move(p);
  };

  switch (app) {
    case AppLabel::Mcnp6: {
      // CPU pinned near 100% on both nodes; memory grows linearly while
      // particle histories accumulate, faster on the master.
      set(master, M::CpuUtil, {.baseline = 96.0});
      set(slave, M::CpuUtil, {.baseline = 94.0});
      set(master, M::MemoryUsage, {.baseline = 2048.0, .trend_slope = 8.0});
      set(slave, M::MemoryUsage, {.baseline = 1024.0, .trend_slope = 2.0});
      // In-core code: reads stay near zero after the input is loaded.
      set(master, M::DiskReadBytes, {.baseline = 1.0e3, .startup_spike = 5.0e7});
      set(slave, M::DiskReadBytes, {.baseline = 1.0e3, .startup_spike = 2.5e7});
      set(master, M::DiskReadRequests, {.baseline = 2.0, .startup_spike = 300.0});
      set(slave, M::DiskReadRequests, {.baseline = 2.0, .startup_spike = 150.0});
      // Modest checkpoint writes at fixed steps.
      set(master, M::DiskWriteBytes,
          {.baseline = 2.0e5, .burst_amplitude = 2.5e6, .burst_period = 60.0,
           .burst_duty = 0.2});
      set(slave, M::DiskWriteBytes,
          {.baseline = 5.0e4, .burst_amplitude = 1.0e6, .burst_period = 60.0,
           .burst_duty = 0.2});
      set(master, M::DiskWriteRequests,
          {.baseline = 20.0, .burst_amplitude = 80.0, .burst_period = 60.0,
           .burst_duty = 0.2});
      set(slave, M::DiskWriteRequests,
          {.baseline = 5.0, .burst_amplitude = 30.0, .burst_period = 60.0,
           .burst_duty = 0.2});
      // Sustained, symmetric statistics exchange.
      for (M m : {M::NetInBytes, M::NetOutBytes}) {
        set(master, m, {.baseline = 1.1e6});
        set(slave, m, {.baseline = 1.1e6});
      }
      for (M m : {M::NetInPackets, M::NetOutPackets}) {
        set(master, m, {.baseline = 1100.0});
        set(slave, m, {.baseline = 1100.0});
      }
      break;
    }
    case AppLabel::OpenFoam: {
      // High CPU on both nodes without load balancing, so the slave lags.
      set(master, M::CpuUtil, {.baseline = 93.0});
      set(slave, M::CpuUtil, {.baseline = 76.0});
      set(master, M::MemoryUsage, {.baseline = 3072.0, .trend_slope = 0.5});
      set(slave, M::MemoryUsage, {.baseline = 2560.0, .trend_slope = 0.3});
      set(master, M::DiskReadBytes, {.baseline = 8.0e2, .startup_spike = 1.5e7});
      set(slave, M::DiskReadBytes, {.baseline = 8.0e2, .startup_spike = 8.0e6});
      set(master, M::DiskReadRequests, {.baseline = 1.5, .startup_spike = 120.0});
      set(slave, M::DiskReadRequests, {.baseline = 1.5, .startup_spike = 60.0});
      // Solution output lands on the master's shared partition.
      set(master, M::DiskWriteBytes,
          {.baseline = 3.0e5, .burst_amplitude = 2.0e6, .burst_period = 30.0,
           .burst_duty = 0.3});
      set(slave, M::DiskWriteBytes, {.baseline = 1.0e4});
      set(master, M::DiskWriteRequests,
          {.baseline = 25.0, .burst_amplitude = 60.0, .burst_period = 30.0,
           .burst_duty = 0.3});
      set(slave, M::DiskWriteRequests, {.baseline = 2.0});
      // Boundary exchange each iteration: bursts peaking at 2.5 MB/s.
      for (M m : {M::NetInBytes, M::NetOutBytes}) {
        set(master, m,
            {.baseline = 2.0e5, .burst_amplitude = 2.3e6, .burst_period = 20.0,
             .burst_duty = 0.4});
        set(slave, m,
            {.baseline = 2.0e5, .burst_amplitude = 2.3e6, .burst_period = 20.0,
             .burst_duty = 0.4});
      }
      for (M m : {M::NetInPackets, M::NetOutPackets}) {
        set(master, m,
            {.baseline = 250.0, .burst_amplitude = 2050.0, .burst_period = 20.0,
             .burst_duty = 0.4});
        set(slave, m,
            {.baseline = 250.0, .burst_amplitude = 2050.0, .burst_period = 20.0,
             .burst_duty = 0.4});
      }
      break;
    }
    case AppLabel::CadoNfs: {
      // Multithreaded factorization on the master only; the slave idles.
      // Four phases: polynomial selection, sieving, the linear-algebra
      // spike at 60% of the run, and the square root step.
      set(master, M::CpuUtil,
          {.baseline = 48.0,
           .phase_events = {{0.125, 22.0, 0.06},
                            {0.375, 30.0, 0.10},
                            {0.60, 50.0, 0.025},
                            {0.875, 18.0, 0.05}}});
      set(slave, M::CpuUtil, {.baseline = 2.0});
      set(master, M::MemoryUsage,
          {.baseline = 2800.0, .trend_slope = 0.4,
           .phase_events = {{0.60, 1800.0, 0.04}}});
      set(slave, M::MemoryUsage, {.baseline = 900.0});
      set(master, M::DiskReadBytes, {.baseline = 1.2e3, .startup_spike = 1.0e7});
      set(slave, M::DiskReadBytes, {.baseline = 100.0});
      set(master, M::DiskReadRequests, {.baseline = 2.0, .startup_spike = 100.0});
      set(slave, M::DiskReadRequests, {.baseline = 0.5});
      set(master, M::DiskWriteBytes,
          {.baseline = 1.5e5, .burst_amplitude = 8.0e5, .burst_period = 45.0,
           .burst_duty = 0.3});
      set(slave, M::DiskWriteBytes, {.baseline = 200.0});
      set(master, M::DiskWriteRequests,
          {.baseline = 15.0, .burst_amplitude = 40.0, .burst_period = 45.0,
           .burst_duty = 0.3});
      set(slave, M::DiskWriteRequests, {.baseline = 0.5});
      // No MPI traffic; only NFS housekeeping.
      for (M m : {M::NetInBytes, M::NetOutBytes}) {
        set(master, m, {.baseline = 2.0e4});
        set(slave, m, {.baseline = 2.0e4});
      }
      for (M m : {M::NetInPackets, M::NetOutPackets}) {
        set(master, m, {.baseline = 30.0});
        set(slave, m, {.baseline = 30.0});
      }
      break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Run generation
// ---------------------------------------------------------------------------

// Derives an independent per-run seed from (base seed, app, run index).
inline std::uint64_t run_seed(std::uint64_t base_seed, AppLabel app, int index) {
  const std::uint64_t tag =
      (static_cast<std::uint64_t>(app) << 32) ^ static_cast<std::uint64_t>(index);
  return base_seed ^ detail::mix64(tag ^ 0x517cc1b727220a95ULL);
}

// Emits duration / sample_period samples per (node, meter): the signature
// value plus multiplicative Gaussian noise, clamped to the meter's unit
// range. Fully reproducible from config.seed.
inline TelemetryRun simulate_run(const SimConfig& config,
                                 std::string run_id = "") {
  validate_config(config);

  TelemetryRun run;
  run.label = config.app;
  run.nodes = config.nodes;
  run.sample_period = config.sample_period;
  run.seed = config.seed;
  run.run_id = run_id.empty()
                   ? std::string(app_name(config.app)) + "-s" +
                         std::to_string(config.seed)
                   : std::move(run_id);

  const SignatureSpec spec = signature_for(config.app);
  const auto steps = static_cast<std::size_t>(
      std::floor(config.duration / config.sample_period + 1e-9));
  detail::Rng rng(detail::mix64(config.seed));

  run.samples.reserve(steps * config.nodes.size() * kMeterCount);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * config.sample_period;
    for (const NodeId& node : config.nodes) {
      for (MeterId meter : kMeterOrder) {
        const MeterProcess& p = spec.at(node.role, meter);
        const double signal =
            signature_value(p, t, config.duration, config.sample_period);
        const double noisy =
            signal * (1.0 + config.noise_std_fraction * rng.next_gaussian());
        const double value = std::clamp(noisy, 0.0, meter_max(meter));
        run.samples.push_back({t, node.name, meter, value});
      }
    }
  }
  return run;
}

// n_runs_per_app runs per application, class-major in canonical order.
// Run i of app a uses seed run_seed(base_seed, a, i), so corpora built from
// different base seeds share no runs.
inline std::vector<TelemetryRun> generate_corpus(int n_runs_per_app,
                                                 std::uint64_t base_seed,
                                                 SimConfig base = SimConfig{}) {
  if (n_runs_per_app < 1) throw InvalidConfig("n_runs_per_app must be >= 1");
  std::vector<TelemetryRun> runs;
  runs.reserve(static_cast<std::size_t>(n_runs_per_app) * kClassCount);
  for (AppLabel app : kClassOrder) {
    for (int i = 0; i < n_runs_per_app; ++i) {
      SimConfig config = base;
      config.app = app;
      config.seed = run_seed(base_seed, app, i);
      std::string id = std::string(app_name(app)) + "-r" + std::to_string(i) +
                       "-s" + std::to_string(base_seed);
      runs.push_back(simulate_run(config, std::move(id)));
    }
  }
  return runs;
}

}  // namespace fleetprint
