#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

inline constexpr std::string_view kCsvHeader =
    "run_id,label,timestamp,node,meter,value";

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

namespace detail {

inline std::optional<double> parse_double(std::string_view field) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

// One parsed record line; the label is optional on streams.
struct RawRecord {
  std::string run_id;
  std::optional<AppLabel> label;
  double timestamp = 0.0;
  std::string node;
  MeterId meter = MeterId::CpuUtil;
  double value = 0.0;
};

inline RawRecord parse_record(std::string_view line, std::size_t line_no,
                              bool allow_empty_label) {
  const auto fields = split_fields(line);
  if (fields.size() != 6)
    throw ParseError(line_no, "expected 6 fields, got " +
                                  std::to_string(fields.size()));
  RawRecord rec;
  rec.run_id = std::string(fields[0]);
  if (rec.run_id.empty()) throw ParseError(line_no, "empty run_id");
  if (fields[1].empty()) {
    if (!allow_empty_label) throw ParseError(line_no, "missing label");
  } else {
    const auto label = app_from_name(fields[1]);
    if (!label)
      throw ParseError(line_no, "unknown label '" + std::string(fields[1]) + "'");
    rec.label = *label;
  }
  const auto ts = parse_double(fields[2]);
  if (!ts || *ts < 0.0) throw ParseError(line_no, "bad timestamp");
  rec.timestamp = *ts;
  rec.node = std::string(fields[3]);
  if (rec.node.empty()) throw ParseError(line_no, "empty node name");
  const auto meter = meter_from_name(fields[4]);
  if (!meter)
    throw ParseError(line_no, "unknown meter '" + std::string(fields[4]) + "'");
  rec.meter = *meter;
  const auto value = parse_double(fields[5]);
  if (!value || *value < 0.0) throw ParseError(line_no, "negative or bad value");
  if (*value > meter_max(*meter))
    throw ParseError(line_no, "value exceeds the meter's unit range");
  rec.value = *value;
  return rec;
}

// Master inference used when roles are not serialized: the node named
// "digi-a" if present, otherwise the first node in appearance order.
inline std::vector<NodeId> infer_roles(const std::vector<std::string>& names) {
  std::size_t master = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "digi-a") {
      master = i;
      break;
    }
  }
  std::vector<NodeId> nodes;
  nodes.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    nodes.push_back({names[i], i == master ? NodeRole::Master : NodeRole::Slave});
  }
  return nodes;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV writing
// ---------------------------------------------------------------------------

// Long-format CSV: one record per sample, grouped by run in corpus order,
// records within a run sorted by (timestamp, node feature order, meter).
// Returns the number of bytes written.
inline std::uint64_t write_csv(const std::vector<TelemetryRun>& runs,
                               std::ostream& out) {
  std::uint64_t bytes = 0;
  auto emit = [&](std::string_view text) {
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    bytes += text.size();
  };
  emit(kCsvHeader);
  emit("\n");

  std::map<std::string, int> seen_ids;
  for (const TelemetryRun& run : runs) {
    validate_run(run);
    if (++seen_ids[run.run_id] > 1)
      throw InvalidRun("duplicate run_id '" + run.run_id + "' in corpus");
    if (run.run_id.find(',') != std::string::npos ||
        run.run_id.find('\n') != std::string::npos)
      throw InvalidRun("run_id may not contain commas or newlines");
    for (const NodeId& n : run.nodes) {
      if (n.name.find(',') != std::string::npos ||
          n.name.find('\n') != std::string::npos)
        throw InvalidRun("node names may not contain commas or newlines");
    }

    std::map<std::string, std::size_t> node_pos;
    const auto order = feature_node_order(run);
    for (std::size_t p = 0; p < order.size(); ++p) {
      node_pos[run.nodes[order[p]].name] = p;
    }
    std::vector<const MeterSample*> sorted;
    sorted.reserve(run.samples.size());
    for (const MeterSample& s : run.samples) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](const MeterSample* a, const MeterSample* b) {
                       if (a->timestamp != b->timestamp)
                         return a->timestamp < b->timestamp;
                       if (node_pos.at(a->node) != node_pos.at(b->node))
                         return node_pos.at(a->node) < node_pos.at(b->node);
                       return static_cast<int>(a->meter) < static_cast<int>(b->meter);
                     });
    for (const MeterSample* s : sorted) {
      emit(run.run_id);
      emit(",");
      emit(app_name(run.label));
      emit(",");
      emit(format_double(s->timestamp));
      emit(",");
      emit(s->node);
      emit(",");
      emit(meter_name(s->meter));
      emit(",");
      emit(format_double(s->value));
      emit("\n");
    }
  }
  if (!out) throw IoError("failed to write CSV stream");
  return bytes;
}

inline std::uint64_t write_csv_file(const std::vector<TelemetryRun>& runs,
                                    const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::uint64_t bytes = write_csv(runs, out);
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
  return bytes;
}

// ---------------------------------------------------------------------------
// CSV reading
// ---------------------------------------------------------------------------

// Groups records by run_id (appearance order), infers node roles, and
// infers the sample period as the smallest positive timestamp gap.
inline std::vector<TelemetryRun> read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw ParseError(1, "unexpected header '" + line + "'");

  struct RunAcc {
    AppLabel label = AppLabel::CadoNfs;
    std::vector<std::string> node_names;  // appearance order
    std::vector<MeterSample> samples;
  };
  std::vector<std::string> run_order;
  std::map<std::string, RunAcc> accs;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    detail::RawRecord rec =
        detail::parse_record(line, line_no, /*allow_empty_label=*/false);
    auto [it, inserted] = accs.try_emplace(rec.run_id);
    RunAcc& acc = it->second;
    if (inserted) {
      run_order.push_back(rec.run_id);
      acc.label = *rec.label;
    } else if (acc.label != *rec.label) {
      throw ParseError(line_no, "inconsistent label within run '" + rec.run_id +
                                    "'");
    }
    if (std::find(acc.node_names.begin(), acc.node_names.end(), rec.node) ==
        acc.node_names.end()) {
      acc.node_names.push_back(rec.node);
    }
    acc.samples.push_back({rec.timestamp, rec.node, rec.meter, rec.value});
  }

  std::vector<TelemetryRun> runs;
  runs.reserve(run_order.size());
  for (const std::string& id : run_order) {
    RunAcc& acc = accs.at(id);
    TelemetryRun run;
    run.run_id = id;
    run.label = acc.label;
    run.nodes = detail::infer_roles(acc.node_names);
    run.samples = std::move(acc.samples);

    std::vector<double> times;
    times.reserve(run.samples.size());
    for (const MeterSample& s : run.samples) times.push_back(s.timestamp);
    std::sort(times.begin(), times.end());
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double gap = times[i] - times[i - 1];
      if (gap > 0.0) min_gap = std::min(min_gap, gap);
    }
    run.sample_period = std::isfinite(min_gap) ? min_gap : 5.0;
    runs.push_back(std::move(run));
  }
  return runs;
}

inline std::vector<TelemetryRun> read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_csv(in);
}

// ---------------------------------------------------------------------------
// Stream subscription
// ---------------------------------------------------------------------------

// A sliding window of the most recent complete feature rows of one run.
struct StreamWindow {
  std::string run_id;
  std::int64_t bucket_index = 0;
  Dataset window;
};

// Incremental bucket assembly over newline-delimited records, mirroring
// align_timesteps. A bucket is finalized when a record of the same run
// arrives for a later bucket, or at end of stream; it is yielded only if
// complete across all nodes seen for the run and all ten meters.
//
// A parse error is thrown for the offending line only; the subscriber
// stays usable and the next call resumes with the following line.
class StreamSubscriber {
 public:
  StreamSubscriber(std::istream& in, std::size_t window,
                   double sample_period = 5.0)
      : in_(in), window_(window), period_(sample_period) {
    if (window_ < 1) throw InvalidConfig("window must be >= 1");
    if (!(period_ > 0.0)) throw InvalidConfig("sample period must be positive");
  }

  // Next window event, or nullopt when the stream is exhausted.
  std::optional<StreamWindow> next() {
    while (ready_.empty()) {
      std::string line;
      if (!std::getline(in_, line)) {
        if (!flushed_) {
          flush_all();
          flushed_ = true;
          continue;
        }
        return std::nullopt;
      }
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line_no_ == 1 && line == kCsvHeader) continue;
      ingest_record(
          detail::parse_record(line, line_no_, /*allow_empty_label=*/true));
    }
    StreamWindow event = std::move(ready_.front());
    ready_.pop_front();
    return event;
  }

  std::size_t dropped_buckets() const { return dropped_; }
  std::size_t late_records() const { return late_; }
  std::size_t current_line() const { return line_no_; }

 private:
  struct Cell {
    double timestamp = -1.0;
    double value = 0.0;
    bool set = false;
  };
  using BucketCells = std::map<std::string, std::array<Cell, kMeterCount>>;

  struct RunState {
    std::vector<std::string> nodes_seen;  // appearance order
    std::optional<AppLabel> label;
    bool frozen = false;
    std::vector<std::string> node_order;  // fixed at first finalized bucket
    std::vector<std::string> feature_names;
    std::map<std::int64_t, BucketCells> pending;
    std::int64_t finalized_up_to = std::numeric_limits<std::int64_t>::min();
    std::deque<FeatureRow> window_rows;
  };

  void ingest_record(const detail::RawRecord& rec) {
    auto [it, inserted] = runs_.try_emplace(rec.run_id);
    RunState& state = it->second;
    if (inserted) run_order_.push_back(rec.run_id);
    if (rec.label) {
      if (state.label && *state.label != *rec.label)
        throw ParseError(line_no_, "inconsistent label within run '" +
                                       rec.run_id + "'");
      state.label = rec.label;
    }

    const auto bucket =
        static_cast<std::int64_t>(std::floor(rec.timestamp / period_));
    if (bucket <= state.finalized_up_to) {
      ++late_;
      return;
    }
    if (std::find(state.nodes_seen.begin(), state.nodes_seen.end(), rec.node) ==
        state.nodes_seen.end()) {
      state.nodes_seen.push_back(rec.node);
    }
    // Advancing to a later bucket finalizes everything before it.
    while (!state.pending.empty() && state.pending.begin()->first < bucket) {
      finalize_bucket(rec.run_id, state, state.pending.begin()->first);
    }
    if (state.finalized_up_to < bucket - 1) state.finalized_up_to = bucket - 1;

    Cell& cell = state.pending[bucket][rec.node][static_cast<int>(rec.meter)];
    if (!cell.set || rec.timestamp >= cell.timestamp) {
      cell = {rec.timestamp, rec.value, true};
    }
  }

  void finalize_bucket(const std::string& run_id, RunState& state,
                       std::int64_t index) {
    BucketCells cells = std::move(state.pending.at(index));
    state.pending.erase(index);
    state.finalized_up_to = std::max(state.finalized_up_to, index);

    const std::vector<std::string>& expected =
        state.frozen ? state.node_order : state.nodes_seen;
    bool complete = true;
    for (const std::string& node : expected) {
      auto it = cells.find(node);
      if (it == cells.end()) {
        complete = false;
        break;
      }
      for (const Cell& c : it->second) {
        if (!c.set) {
          complete = false;
          break;
        }
      }
      if (!complete) break;
    }
    if (!complete) {
      ++dropped_;
      return;
    }

    if (!state.frozen) {
      std::vector<NodeId> nodes = detail::infer_roles(state.nodes_seen);
      state.node_order.clear();
      for (const NodeId& n : nodes)
        if (n.role == NodeRole::Master) state.node_order.push_back(n.name);
      for (const NodeId& n : nodes)
        if (n.role != NodeRole::Master) state.node_order.push_back(n.name);
      state.feature_names = feature_names_for(state.node_order);
      state.frozen = true;
    }

    FeatureRow row;
    row.label = state.label;
    row.values.reserve(state.feature_names.size());
    for (const std::string& node : state.node_order) {
      for (const Cell& c : cells.at(node)) row.values.push_back(c.value);
    }
    state.window_rows.push_back(std::move(row));
    while (state.window_rows.size() > window_) state.window_rows.pop_front();

    StreamWindow event;
    event.run_id = run_id;
    event.bucket_index = index;
    event.window.feature_names = state.feature_names;
    event.window.rows.assign(state.window_rows.begin(), state.window_rows.end());
    ready_.push_back(std::move(event));
  }

  void flush_all() {
    for (const std::string& id : run_order_) {
      RunState& state = runs_.at(id);
      while (!state.pending.empty()) {
        finalize_bucket(id, state, state.pending.begin()->first);
      }
    }
  }

  std::istream& in_;
  std::size_t window_;
  double period_;
  std::size_t line_no_ = 0;
  bool flushed_ = false;
  std::size_t dropped_ = 0;
  std::size_t late_ = 0;
  std::vector<std::string> run_order_;
  std::map<std::string, RunState> runs_;
  std::deque<StreamWindow> ready_;
};

inline StreamSubscriber subscribe_stream(std::istream& in, std::size_t window,
                                         double sample_period = 5.0) {
  return StreamSubscriber(in, window, sample_period);
}

}  // namespace fleetprint
