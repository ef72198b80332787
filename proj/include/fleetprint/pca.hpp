#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

namespace detail {

struct EigenResult {
  std::vector<double> values;               // descending
  std::vector<std::vector<double>> vectors; // vectors[i] pairs with values[i]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Rotations sweep
// (p, q) pairs in row order until the off-diagonal Frobenius norm falls
// below 1e-12 relative to the input norm. Eigenpairs are returned in
// descending eigenvalue order with a fixed sign convention: the largest-
// magnitude coordinate of each vector is positive.
inline EigenResult jacobi_eigen_symmetric(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  double norm0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) norm0 += a[i][j] * a[i][j];
  }
  norm0 = std::sqrt(norm0);
  const double threshold = 1e-12 * std::max(1.0, norm0);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a[i][j] * a[i][j];
    }
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        const double app = a[p][p];
        const double aqq = a[q][q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x][x] > a[y][y];
  });

  EigenResult result;
  result.values.reserve(n);
  result.vectors.reserve(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t col = order[rank];
    result.values.push_back(a[col][col]);
    std::vector<double> vec(n);
    for (std::size_t k = 0; k < n; ++k) vec[k] = v[k][col];
    std::size_t peak = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (std::abs(vec[k]) > std::abs(vec[peak])) peak = k;
    }
    if (vec[peak] < 0.0) {
      for (double& x : vec) x = -x;
    }
    result.vectors.push_back(std::move(vec));
  }
  return result;
}

}  // namespace detail

// Principal component model: centering mean, orthonormal component
// directions sorted by explained variance, and the per-component share of
// total variance.
struct PcaModel {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;
  std::vector<double> explained_variance;        // eigenvalues, descending
  std::vector<double> explained_variance_ratio;  // eigenvalue / total variance

  std::size_t width() const { return mean.size(); }
  std::size_t n_components() const { return components.size(); }
};

// Fits PCA on the dataset's covariance (population normalization) via the
// deterministic Jacobi solver. The data is centered by its own mean.
inline PcaModel pca_fit(const Dataset& data, std::size_t n_components = 3) {
  const std::size_t n = data.rows.size();
  const std::size_t width = data.width();
  if (n < 2) throw InsufficientRows("pca requires at least two rows");
  if (n_components < 1) throw NComponentsTooLarge("n_components must be >= 1");
  if (n_components > std::min(n - 1, width))
    throw NComponentsTooLarge("n_components exceeds min(rows - 1, features)");

  PcaModel model;
  model.mean.assign(width, 0.0);
  for (const FeatureRow& r : data.rows) {
    if (r.values.size() != width)
      throw DimensionMismatch("row width does not match feature names");
    for (std::size_t j = 0; j < width; ++j) model.mean[j] += r.values[j];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  std::vector<std::vector<double>> cov(width, std::vector<double>(width, 0.0));
  std::vector<double> centered(width);
  for (const FeatureRow& r : data.rows) {
    for (std::size_t j = 0; j < width; ++j) centered[j] = r.values[j] - model.mean[j];
    for (std::size_t i = 0; i < width; ++i) {
      const double ci = centered[i];
      if (ci == 0.0) continue;
      for (std::size_t j = i; j < width; ++j) {
        cov[i][j] += ci * centered[j];
      }
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    for (std::size_t j = i; j < width; ++j) {
      cov[i][j] /= static_cast<double>(n);
      cov[j][i] = cov[i][j];
    }
  }

  detail::EigenResult eigen = detail::jacobi_eigen_symmetric(std::move(cov));
  double total = 0.0;
  for (double& v : eigen.values) {
    if (v < 0.0) v = 0.0;  // numerical noise on rank-deficient data
    total += v;
  }
  for (std::size_t i = 0; i < n_components; ++i) {
    model.components.push_back(std::move(eigen.vectors[i]));
    model.explained_variance.push_back(eigen.values[i]);
    model.explained_variance_ratio.push_back(
        total > 0.0 ? eigen.values[i] / total : 0.0);
  }
  return model;
}

// Projects each centered row onto the retained components.
inline std::vector<std::vector<double>> pca_transform(const PcaModel& model,
                                                      const Dataset& data) {
  if (data.width() != model.width())
    throw DimensionMismatch("dataset width does not match the pca model");
  std::vector<std::vector<double>> scores;
  scores.reserve(data.rows.size());
  for (const FeatureRow& r : data.rows) {
    if (r.values.size() != model.width())
      throw DimensionMismatch("row width does not match the pca model");
    std::vector<double> row_scores;
    row_scores.reserve(model.components.size());
    for (const std::vector<double>& component : model.components) {
      double score = 0.0;
      for (std::size_t j = 0; j < model.width(); ++j) {
        score += (r.values[j] - model.mean[j]) * component[j];
      }
      row_scores.push_back(score);
    }
    scores.push_back(std::move(row_scores));
  }
  return scores;
}

// Appends the first n_augment component scores as extra columns named
// "pca.1", "pca.2", ... The original columns are untouched. The model must
// be the one fit on the training set.
inline Dataset augment(const PcaModel& model, const Dataset& data,
                       std::size_t n_augment = 2) {
  if (n_augment > model.n_components())
    throw NComponentsTooLarge("n_augment exceeds the retained components");
  if (n_augment == 0) return data;
  const auto scores = pca_transform(model, data);

  Dataset out = data;
  for (std::size_t k = 0; k < n_augment; ++k) {
    out.feature_names.push_back("pca." + std::to_string(k + 1));
  }
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    for (std::size_t k = 0; k < n_augment; ++k) {
      out.rows[i].values.push_back(scores[i][k]);
    }
  }
  return out;
}

}  // namespace fleetprint
