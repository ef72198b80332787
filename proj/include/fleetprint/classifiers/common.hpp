#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

using ProbaTriple = std::array<double, kClassCount>;

namespace detail {

// Row-major copy of a dataset's values; labels must all be present.
struct TrainMatrix {
  std::vector<double> values;  // n * width
  std::vector<AppLabel> labels;
  std::size_t n = 0;
  std::size_t width = 0;

  const double* row(std::size_t i) const { return values.data() + i * width; }
};

inline TrainMatrix to_train_matrix(const Dataset& data) {
  if (data.rows.empty()) throw EmptyDataset("training data is empty");
  TrainMatrix m;
  m.n = data.rows.size();
  m.width = data.width();
  m.values.reserve(m.n * m.width);
  m.labels.reserve(m.n);
  for (const FeatureRow& r : data.rows) {
    if (r.values.size() != m.width)
      throw DimensionMismatch("row width does not match feature names");
    if (!r.label) throw EmptyDataset("training data contains unlabeled rows");
    m.values.insert(m.values.end(), r.values.begin(), r.values.end());
    m.labels.push_back(*r.label);
  }
  return m;
}

inline void require_width(const Dataset& data, std::size_t width) {
  if (data.width() != width)
    throw DimensionMismatch("expected " + std::to_string(width) +
                            " features, got " + std::to_string(data.width()));
  for (const FeatureRow& r : data.rows) {
    if (r.values.size() != width)
      throw DimensionMismatch("row width does not match feature names");
  }
}

inline std::size_t count_classes(const std::vector<AppLabel>& labels) {
  std::array<bool, kClassCount> present{};
  for (AppLabel l : labels) present[static_cast<int>(l)] = true;
  std::size_t count = 0;
  for (bool p : present) count += p ? 1 : 0;
  return count;
}

// Argmax with ties resolved in canonical class order.
inline AppLabel argmax_label(const ProbaTriple& scores) {
  int best = 0;
  for (int c = 1; c < kClassCount; ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return static_cast<AppLabel>(best);
}

inline double squared_distance(const double* a, const double* b,
                               std::size_t width) {
  double sum = 0.0;
  for (std::size_t j = 0; j < width; ++j) {
    const double d = a[j] - b[j];
    sum += d * d;
  }
  return sum;
}

inline double dot(const double* a, const double* b, std::size_t width) {
  double sum = 0.0;
  for (std::size_t j = 0; j < width; ++j) sum += a[j] * b[j];
  return sum;
}

}  // namespace detail
}  // namespace fleetprint
