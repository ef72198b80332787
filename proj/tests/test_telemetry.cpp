#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "fleetprint/simulate.hpp"
#include "fleetprint/telemetry.hpp"

using namespace fleetprint;

namespace {

TelemetryRun two_node_run() {
  TelemetryRun run;
  run.label = AppLabel::Mcnp6;
  run.run_id = "r1";
  run.nodes = default_nodes();
  return run;
}

// One sample per (node, meter) at the given timestamp.
void add_full_bucket(TelemetryRun& run, double t, double value = 1.0) {
  for (const NodeId& node : run.nodes) {
    for (MeterId m : kMeterOrder) {
      run.samples.push_back({t, node.name, m, value});
    }
  }
}

}  // namespace

TEST_CASE("meter catalogue") {
  REQUIRE(kMeterOrder.size() == 10);
  REQUIRE(meter_name(kMeterOrder[0]) == "cpu_util");
  REQUIRE(meter_name(kMeterOrder[9]) == "memory_usage");
  REQUIRE(meter_from_name("net_out_packets") == MeterId::NetOutPackets);
  REQUIRE_FALSE(meter_from_name("cpu_uti").has_value());
  for (MeterId m : kMeterOrder) {
    REQUIRE(meter_category(m) == MeterCategory::Gauge);
    REQUIRE(meter_from_name(meter_name(m)) == m);
  }
  REQUIRE(meter_unit(MeterId::CpuUtil) == "percent");
  REQUIRE(meter_unit(MeterId::MemoryUsage) == "MB");
  REQUIRE(meter_unit(MeterId::DiskWriteRequests) == "requests/s");
}

TEST_CASE("app labels canonical order") {
  REQUIRE(kClassOrder[0] == AppLabel::CadoNfs);
  REQUIRE(kClassOrder[1] == AppLabel::Mcnp6);
  REQUIRE(kClassOrder[2] == AppLabel::OpenFoam);
  REQUIRE(app_from_name("MCNP6") == AppLabel::Mcnp6);
  REQUIRE_FALSE(app_from_name("mcnp6").has_value());
}

TEST_CASE("align_timesteps on an empty run yields no buckets") {
  const Alignment aligned = align_timesteps(two_node_run());
  REQUIRE(aligned.buckets.empty());
  REQUIRE(aligned.dropped_buckets == 0);
}

TEST_CASE("align_timesteps minimal complete bucket") {
  TelemetryRun run = two_node_run();
  add_full_bucket(run, 0.0);
  const Alignment aligned = align_timesteps(run);
  REQUIRE(aligned.buckets.size() == 1);
  REQUIRE(aligned.buckets[0].index == 0);
  REQUIRE(aligned.node_order ==
          std::vector<std::string>{"digi-a", "digi-b"});
}

TEST_CASE("a 60 second run at 5 second period has 12 buckets") {
  TelemetryRun run = two_node_run();
  for (int k = 0; k < 12; ++k) add_full_bucket(run, 5.0 * k);
  const Alignment aligned = align_timesteps(run);
  REQUIRE(aligned.buckets.size() == 12);
  for (int k = 0; k < 12; ++k) REQUIRE(aligned.buckets[k].index == k);
}

TEST_CASE("incomplete buckets are dropped and counted") {
  TelemetryRun run = two_node_run();
  add_full_bucket(run, 0.0);
  run.samples.push_back({5.0, "digi-a", MeterId::CpuUtil, 50.0});
  const Alignment aligned = align_timesteps(run);
  REQUIRE(aligned.buckets.size() == 1);
  REQUIRE(aligned.dropped_buckets == 1);
}

TEST_CASE("latest sample wins within a bucket cell") {
  TelemetryRun run = two_node_run();
  add_full_bucket(run, 0.0);
  run.samples.push_back({3.0, "digi-a", MeterId::CpuUtil, 70.0});
  run.samples.push_back({2.0, "digi-a", MeterId::CpuUtil, 30.0});
  const Alignment aligned = align_timesteps(run);
  REQUIRE(aligned.buckets.size() == 1);
  REQUIRE(aligned.buckets[0].values[0][0] == 70.0);
}

TEST_CASE("validate_run rejects broken runs") {
  TelemetryRun run = two_node_run();
  run.nodes[1].role = NodeRole::Master;
  REQUIRE_THROWS_AS(align_timesteps(run), InvalidRun);

  run = two_node_run();
  run.samples.push_back({0.0, "digi-z", MeterId::CpuUtil, 1.0});
  REQUIRE_THROWS_AS(align_timesteps(run), InvalidRun);

  run = two_node_run();
  run.samples.push_back({0.0, "digi-a", MeterId::CpuUtil, 150.0});
  REQUIRE_THROWS_AS(align_timesteps(run), InvalidRun);

  run = two_node_run();
  run.sample_period = 0.0;
  REQUIRE_THROWS_AS(align_timesteps(run), InvalidRun);
}

TEST_CASE("featurize produces node-major rows with the master block first") {
  TelemetryRun run = two_node_run();
  for (const NodeId& node : run.nodes) {
    for (MeterId m : kMeterOrder) {
      const double v =
          node.name == "digi-a" && m == MeterId::CpuUtil ? 97.0 : 0.0;
      run.samples.push_back({0.0, node.name, m, v});
    }
  }
  const Dataset data = featurize(run);
  REQUIRE(data.rows.size() == 1);
  REQUIRE(data.width() == 20);
  REQUIRE(data.feature_names[0] == "digi-a.cpu_util");
  REQUIRE(data.feature_names[10] == "digi-b.cpu_util");
  REQUIRE(data.rows[0].values[0] == 97.0);
  for (std::size_t j = 1; j < 20; ++j) REQUIRE(data.rows[0].values[j] == 0.0);
  REQUIRE(data.rows[0].label == AppLabel::Mcnp6);
}

TEST_CASE("featurize keeps the master block first even when listed last") {
  TelemetryRun run;
  run.label = AppLabel::CadoNfs;
  run.run_id = "swap";
  run.nodes = {{"digi-b", NodeRole::Slave}, {"digi-a", NodeRole::Master}};
  for (const NodeId& node : run.nodes) {
    for (MeterId m : kMeterOrder) {
      run.samples.push_back({0.0, node.name, m, node.name == "digi-a" ? 2.0 : 1.0});
    }
  }
  const Dataset data = featurize(run);
  REQUIRE(data.feature_names[0] == "digi-a.cpu_util");
  REQUIRE(data.rows[0].values[0] == 2.0);
  REQUIRE(data.rows[0].values[10] == 1.0);
}

TEST_CASE("featurize of 12 complete buckets gives 12 x 20") {
  TelemetryRun run = two_node_run();
  for (int k = 0; k < 12; ++k) add_full_bucket(run, 5.0 * k, 1.0 + k);
  const Dataset data = featurize(run);
  REQUIRE(data.rows.size() == 12);
  for (const FeatureRow& r : data.rows) REQUIRE(r.values.size() == 20);
}

TEST_CASE("featurize throws EmptyRun when no bucket completes") {
  TelemetryRun run = two_node_run();
  run.samples.push_back({0.0, "digi-a", MeterId::CpuUtil, 1.0});
  REQUIRE_THROWS_AS(featurize(run), EmptyRun);
  REQUIRE_THROWS_AS(featurize(two_node_run()), EmptyRun);
}

TEST_CASE("featurize is deterministic and names are stable across runs") {
  SimConfig config;
  config.app = AppLabel::OpenFoam;
  config.duration = 120.0;
  config.seed = 11;
  const TelemetryRun run = simulate_run(config);
  const Dataset a = featurize(run);
  const Dataset b = featurize(run);
  REQUIRE(a.feature_names == b.feature_names);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    REQUIRE(a.rows[i].values == b.rows[i].values);
  }
  config.seed = 12;
  const Dataset c = featurize(simulate_run(config));
  REQUIRE(a.feature_names == c.feature_names);
  REQUIRE(a.rows.size() == align_timesteps(run).buckets.size());
}

TEST_CASE("simulated MCNP6 master memory is non-decreasing up to noise") {
  SimConfig config;
  config.app = AppLabel::Mcnp6;
  config.seed = 3;
  const Dataset data = featurize(simulate_run(config));
  std::size_t column = 0;
  for (std::size_t j = 0; j < data.feature_names.size(); ++j) {
    if (data.feature_names[j] == "digi-a.memory_usage") column = j;
  }
  REQUIRE(data.feature_names[column] == "digi-a.memory_usage");
  // Multiplicative noise can dent the trend locally; 5 sigma on adjacent
  // samples bounds the dip.
  for (std::size_t i = 0; i + 1 < data.rows.size(); ++i) {
    const double prev = data.rows[i].values[column];
    const double next = data.rows[i + 1].values[column];
    const double tolerance =
        5.0 * config.noise_std_fraction * std::sqrt(2.0) * std::max(prev, next);
    REQUIRE(next >= prev - tolerance);
  }
  REQUIRE(data.rows.back().values[column] > data.rows.front().values[column]);
}

TEST_CASE("scaler maps a constant column to zero") {
  Dataset data;
  data.feature_names = {"f"};
  for (double v : {5.0, 5.0, 5.0}) {
    data.rows.push_back({{v}, AppLabel::CadoNfs});
  }
  const Scaler s = fit_scaler(data);
  REQUIRE(s.mean[0] == 5.0);
  REQUIRE(s.stddev[0] == 0.0);
  const Dataset scaled = apply_scaler(s, data);
  for (const FeatureRow& r : scaled.rows) REQUIRE(r.values[0] == 0.0);
}

TEST_CASE("scaler on [0, 2] gives mean 1, std 1, scaled [-1, 1]") {
  Dataset data;
  data.feature_names = {"f"};
  data.rows.push_back({{0.0}, AppLabel::CadoNfs});
  data.rows.push_back({{2.0}, AppLabel::CadoNfs});
  const Scaler s = fit_scaler(data);
  REQUIRE(s.mean[0] == 1.0);
  REQUIRE(s.stddev[0] == 1.0);
  const Dataset scaled = apply_scaler(s, data);
  REQUIRE(scaled.rows[0].values[0] == -1.0);
  REQUIRE(scaled.rows[1].values[0] == 1.0);
}

TEST_CASE("standardized training data has mean 0 and unit or mapped std") {
  const auto runs = generate_corpus(2, 5, [] {
    SimConfig config;
    config.duration = 150.0;
    return config;
  }());
  const Dataset raw = featurize_corpus(runs);
  const Scaler s = fit_scaler(raw);
  const Dataset scaled = apply_scaler(s, raw);
  const Scaler check = fit_scaler(scaled);
  for (std::size_t j = 0; j < check.mean.size(); ++j) {
    REQUIRE(std::abs(check.mean[j]) <= 1e-9);
    if (s.stddev[j] == 0.0) {
      REQUIRE(check.stddev[j] == 0.0);
    } else {
      REQUIRE(std::abs(check.stddev[j] - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("apply_scaler rejects mismatched widths") {
  Dataset data;
  data.feature_names = {"a", "b"};
  data.rows.push_back({{1.0, 2.0}, AppLabel::CadoNfs});
  const Scaler s = fit_scaler(data);
  Dataset narrow;
  narrow.feature_names = {"a"};
  narrow.rows.push_back({{1.0}, AppLabel::CadoNfs});
  REQUIRE_THROWS_AS(apply_scaler(s, narrow), DimensionMismatch);
  REQUIRE_THROWS_AS(fit_scaler(Dataset{}), EmptyDataset);
}
