#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fleetprint/errors.hpp"

namespace fleetprint {

// ---------------------------------------------------------------------------
// Meters
// ---------------------------------------------------------------------------

// The ten per-node gauge meters, in canonical order. Feature vectors,
// CSV sorting and completeness checks all use this order.
enum class MeterId : int {
  CpuUtil = 0,
  DiskReadBytes,
  DiskReadRequests,
  DiskWriteBytes,
  DiskWriteRequests,
  NetInBytes,
  NetInPackets,
  NetOutBytes,
  NetOutPackets,
  MemoryUsage,
};

inline constexpr int kMeterCount = 10;

inline constexpr std::array<MeterId, kMeterCount> kMeterOrder = {
    MeterId::CpuUtil,          MeterId::DiskReadBytes, MeterId::DiskReadRequests,
    MeterId::DiskWriteBytes,   MeterId::DiskWriteRequests,
    MeterId::NetInBytes,       MeterId::NetInPackets,  MeterId::NetOutBytes,
    MeterId::NetOutPackets,    MeterId::MemoryUsage,
};

constexpr std::string_view meter_name(MeterId m) {
  switch (m) {
    case MeterId::CpuUtil: return "cpu_util";
    case MeterId::DiskReadBytes: return "disk_read_bytes";
    case MeterId::DiskReadRequests: return "disk_read_requests";
    case MeterId::DiskWriteBytes: return "disk_write_bytes";
    case MeterId::DiskWriteRequests: return "disk_write_requests";
    case MeterId::NetInBytes: return "net_in_bytes";
    case MeterId::NetInPackets: return "net_in_packets";
    case MeterId::NetOutBytes: return "net_out_bytes";
    case MeterId::NetOutPackets: return "net_out_packets";
    case MeterId::MemoryUsage: return "memory_usage";
  }
  return "";
}

inline std::optional<MeterId> meter_from_name(std::string_view name) {
  for (MeterId m : kMeterOrder) {
    if (meter_name(m) == name) return m;
  }
  return std::nullopt;
}

enum class MeterCategory { Cumulative, Delta, Gauge };

// Every meter in this toolkit is sampled as a discrete gauge.
constexpr MeterCategory meter_category(MeterId) { return MeterCategory::Gauge; }

constexpr std::string_view meter_unit(MeterId m) {
  switch (m) {
    case MeterId::CpuUtil: return "percent";
    case MeterId::DiskReadBytes:
    case MeterId::DiskWriteBytes:
    case MeterId::NetInBytes:
    case MeterId::NetOutBytes: return "B/s";
    case MeterId::DiskReadRequests:
    case MeterId::DiskWriteRequests: return "requests/s";
    case MeterId::NetInPackets:
    case MeterId::NetOutPackets: return "packets/s";
    case MeterId::MemoryUsage: return "MB";
  }
  return "";
}

// Upper bound of the meter's unit; only CPU utilization is bounded.
constexpr double meter_max(MeterId m) {
  return m == MeterId::CpuUtil ? 100.0 : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Nodes, samples, labels, runs
// ---------------------------------------------------------------------------

enum class NodeRole { Master, Slave };

struct NodeId {
  std::string name;
  NodeRole role = NodeRole::Slave;

  friend bool operator==(const NodeId&, const NodeId&) = default;
};

// One timestamped reading of one meter on one node. `timestamp` is seconds
// since run start.
struct MeterSample {
  double timestamp = 0.0;
  std::string node;
  MeterId meter = MeterId::CpuUtil;
  double value = 0.0;

  friend bool operator==(const MeterSample&, const MeterSample&) = default;
};

enum class AppLabel : int { CadoNfs = 0, Mcnp6 = 1, OpenFoam = 2 };

inline constexpr int kClassCount = 3;

inline constexpr std::array<AppLabel, kClassCount> kClassOrder = {
    AppLabel::CadoNfs, AppLabel::Mcnp6, AppLabel::OpenFoam};

constexpr std::string_view app_name(AppLabel a) {
  switch (a) {
    case AppLabel::CadoNfs: return "CADO_NFS";
    case AppLabel::Mcnp6: return "MCNP6";
    case AppLabel::OpenFoam: return "OPENFOAM";
  }
  return "";
}

inline std::optional<AppLabel> app_from_name(std::string_view name) {
  for (AppLabel a : kClassOrder) {
    if (app_name(a) == name) return a;
  }
  return std::nullopt;
}

// A labeled, multi-node collection of meter time series for one execution.
// `seed` is generation provenance and does not participate in equality.
struct TelemetryRun {
  AppLabel label = AppLabel::CadoNfs;
  std::vector<NodeId> nodes;
  std::vector<MeterSample> samples;
  double sample_period = 5.0;
  std::string run_id;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const TelemetryRun& a, const TelemetryRun& b) {
    return a.label == b.label && a.nodes == b.nodes && a.samples == b.samples &&
           a.sample_period == b.sample_period && a.run_id == b.run_id;
  }
};

inline void validate_run(const TelemetryRun& run) {
  if (run.nodes.empty()) throw InvalidRun("run '" + run.run_id + "' has no nodes");
  if (!(run.sample_period > 0.0))
    throw InvalidRun("run '" + run.run_id + "' has non-positive sample period");
  int masters = 0;
  for (const NodeId& n : run.nodes) {
    if (n.role == NodeRole::Master) ++masters;
  }
  if (masters != 1)
    throw InvalidRun("run '" + run.run_id + "' must have exactly one master node");
  for (const MeterSample& s : run.samples) {
    if (!(s.timestamp >= 0.0))
      throw InvalidRun("run '" + run.run_id + "' has a negative sample timestamp");
    if (!(s.value >= 0.0) || s.value > meter_max(s.meter))
      throw InvalidRun("run '" + run.run_id + "' has an out-of-range value for " +
                       std::string(meter_name(s.meter)));
    bool known = std::any_of(run.nodes.begin(), run.nodes.end(),
                             [&](const NodeId& n) { return n.name == s.node; });
    if (!known)
      throw InvalidRun("run '" + run.run_id + "' has a sample for unknown node '" +
                       s.node + "'");
  }
}

// Node positions in feature order: the master block first, then the
// remaining nodes in `nodes` order.
inline std::vector<std::size_t> feature_node_order(const TelemetryRun& run) {
  std::vector<std::size_t> order;
  order.reserve(run.nodes.size());
  for (std::size_t i = 0; i < run.nodes.size(); ++i) {
    if (run.nodes[i].role == NodeRole::Master) order.push_back(i);
  }
  for (std::size_t i = 0; i < run.nodes.size(); ++i) {
    if (run.nodes[i].role != NodeRole::Master) order.push_back(i);
  }
  return order;
}

// ---------------------------------------------------------------------------
// Timestep alignment
// ---------------------------------------------------------------------------

// One sample-period bucket with every node x meter cell filled.
// `values[p][m]` uses feature node order p and canonical meter order m.
struct AlignedBucket {
  std::int64_t index = 0;
  std::vector<std::array<double, kMeterCount>> values;
};

struct Alignment {
  std::vector<AlignedBucket> buckets;   // complete buckets, ascending index
  std::size_t dropped_buckets = 0;      // buckets observed but incomplete
  std::vector<std::string> node_order;  // node names, master first
};

// Assigns every sample to bucket floor(timestamp / sample_period). Within a
// bucket the latest sample per (node, meter) wins; ties on timestamp go to
// the later sample in sequence order. Only buckets complete across all nodes
// and all ten meters are kept.
inline Alignment align_timesteps(const TelemetryRun& run) {
  validate_run(run);

  Alignment out;
  const std::vector<std::size_t> order = feature_node_order(run);
  std::map<std::string, std::size_t> node_pos;
  for (std::size_t p = 0; p < order.size(); ++p) {
    out.node_order.push_back(run.nodes[order[p]].name);
    node_pos[run.nodes[order[p]].name] = p;
  }

  struct Cell {
    double timestamp = -1.0;
    double value = 0.0;
    bool set = false;
  };
  std::map<std::int64_t, std::vector<std::array<Cell, kMeterCount>>> acc;

  for (const MeterSample& s : run.samples) {
    const auto bucket =
        static_cast<std::int64_t>(std::floor(s.timestamp / run.sample_period));
    auto [it, inserted] = acc.try_emplace(bucket);
    if (inserted) it->second.resize(run.nodes.size());
    Cell& cell = it->second[node_pos.at(s.node)][static_cast<int>(s.meter)];
    if (!cell.set || s.timestamp >= cell.timestamp) {
      cell = {s.timestamp, s.value, true};
    }
  }

  for (const auto& [index, cells] : acc) {
    bool complete = true;
    for (const auto& per_node : cells) {
      for (const Cell& c : per_node) {
        if (!c.set) {
          complete = false;
          break;
        }
      }
      if (!complete) break;
    }
    if (!complete) {
      ++out.dropped_buckets;
      continue;
    }
    AlignedBucket bucket;
    bucket.index = index;
    bucket.values.resize(cells.size());
    for (std::size_t p = 0; p < cells.size(); ++p) {
      for (int m = 0; m < kMeterCount; ++m) {
        bucket.values[p][m] = cells[p][m].value;
      }
    }
    out.buckets.push_back(std::move(bucket));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature rows and datasets
// ---------------------------------------------------------------------------

// One aligned timestep flattened node-major; the label is absent only for
// rows assembled from unlabeled stream records.
struct FeatureRow {
  std::vector<double> values;
  std::optional<AppLabel> label;
};

struct Dataset {
  std::vector<FeatureRow> rows;
  std::vector<std::string> feature_names;

  std::size_t width() const { return feature_names.size(); }

  bool fully_labeled() const {
    return std::all_of(rows.begin(), rows.end(),
                       [](const FeatureRow& r) { return r.label.has_value(); });
  }
};

inline std::vector<std::string> feature_names_for(
    const std::vector<std::string>& node_order) {
  std::vector<std::string> names;
  names.reserve(node_order.size() * kMeterCount);
  for (const std::string& node : node_order) {
    for (MeterId m : kMeterOrder) {
      names.push_back(node + "." + std::string(meter_name(m)));
    }
  }
  return names;
}

// Labels of a fully labeled dataset, in row order.
inline std::vector<AppLabel> labels_of(const Dataset& data) {
  std::vector<AppLabel> labels;
  labels.reserve(data.rows.size());
  for (const FeatureRow& r : data.rows) {
    if (!r.label) throw EmptyDataset("dataset contains unlabeled rows");
    labels.push_back(*r.label);
  }
  return labels;
}

// One feature row per complete bucket, node-major with the master block
// first, meters in canonical order. Feature names follow "<node>.<meter>".
inline Dataset featurize(const TelemetryRun& run) {
  const Alignment aligned = align_timesteps(run);
  if (aligned.buckets.empty())
    throw EmptyRun("run '" + run.run_id + "' has no complete bucket");

  Dataset data;
  data.feature_names = feature_names_for(aligned.node_order);
  data.rows.reserve(aligned.buckets.size());
  for (const AlignedBucket& bucket : aligned.buckets) {
    FeatureRow row;
    row.label = run.label;
    row.values.reserve(data.feature_names.size());
    for (const auto& per_node : bucket.values) {
      row.values.insert(row.values.end(), per_node.begin(), per_node.end());
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

// Featurizes each run and concatenates the rows. All runs must produce the
// same feature names.
inline Dataset featurize_corpus(const std::vector<TelemetryRun>& runs) {
  Dataset out;
  for (const TelemetryRun& run : runs) {
    Dataset d = featurize(run);
    if (out.feature_names.empty()) {
      out.feature_names = d.feature_names;
    } else if (out.feature_names != d.feature_names) {
      throw DimensionMismatch("run '" + run.run_id +
                              "' has mismatched feature names");
    }
    for (FeatureRow& r : d.rows) out.rows.push_back(std::move(r));
  }
  if (out.rows.empty()) throw EmptyRun("corpus produced no feature rows");
  return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

// Per-feature mean and population standard deviation.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

inline Scaler fit_scaler(const Dataset& data) {
  if (data.rows.empty()) throw EmptyDataset("cannot fit a scaler on an empty dataset");
  const std::size_t width = data.width();
  Scaler s;
  s.mean.assign(width, 0.0);
  s.stddev.assign(width, 0.0);
  const double n = static_cast<double>(data.rows.size());
  for (const FeatureRow& r : data.rows) {
    if (r.values.size() != width)
      throw DimensionMismatch("row width does not match feature names");
    for (std::size_t j = 0; j < width; ++j) s.mean[j] += r.values[j];
  }
  for (std::size_t j = 0; j < width; ++j) s.mean[j] /= n;
  for (const FeatureRow& r : data.rows) {
    for (std::size_t j = 0; j < width; ++j) {
      const double d = r.values[j] - s.mean[j];
      s.stddev[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < width; ++j) s.stddev[j] = std::sqrt(s.stddev[j] / n);
  return s;
}

// (x - mean) / std per feature; zero-variance features map to 0.
inline Dataset apply_scaler(const Scaler& s, const Dataset& data) {
  if (s.mean.size() != data.width())
    throw DimensionMismatch("scaler width " + std::to_string(s.mean.size()) +
                            " does not match dataset width " +
                            std::to_string(data.width()));
  Dataset out = data;
  for (FeatureRow& r : out.rows) {
    if (r.values.size() != s.mean.size())
      throw DimensionMismatch("row width does not match scaler");
    for (std::size_t j = 0; j < r.values.size(); ++j) {
      r.values[j] = s.stddev[j] == 0.0
                        ? 0.0
                        : (r.values[j] - s.mean[j]) / s.stddev[j];
    }
  }
  return out;
}

}  // namespace fleetprint
