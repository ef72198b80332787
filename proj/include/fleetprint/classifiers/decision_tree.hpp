#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "fleetprint/classifiers/common.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

struct DtParams {
  int max_depth = 10;

  friend bool operator==(const DtParams&, const DtParams&) = default;
};

// CART-style classification tree: greedy binary splits minimizing weighted
// Gini impurity. Candidate thresholds are midpoints between consecutive
// distinct sorted feature values; score ties resolve to the lowest feature
// index, then the lowest threshold. A node splits while it is impure, has
// at least two samples, depth remains, and some feature still varies.
class DecisionTreeModel {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::array<double, kClassCount> class_counts{};
  };

  DecisionTreeModel() = default;

  static DecisionTreeModel fit(const DtParams& params, const Dataset& train) {
    if (params.max_depth < 1) throw InvalidParams("max_depth must be >= 1");
    const detail::TrainMatrix m = detail::to_train_matrix(train);

    DecisionTreeModel model;
    model.params_ = params;
    model.width_ = m.width;
    std::vector<std::size_t> indices(m.n);
    std::iota(indices.begin(), indices.end(), 0);
    model.build(m, indices, 0);
    return model;
  }

  std::vector<AppLabel> predict(const Dataset& rows) const {
    detail::require_width(rows, width_);
    std::vector<AppLabel> out;
    out.reserve(rows.rows.size());
    for (const FeatureRow& r : rows.rows) {
      out.push_back(detail::argmax_label(leaf_distribution(r.values.data())));
    }
    return out;
  }

  std::vector<ProbaTriple> predict_proba(const Dataset& rows) const {
    detail::require_width(rows, width_);
    std::vector<ProbaTriple> out;
    out.reserve(rows.rows.size());
    for (const FeatureRow& r : rows.rows) {
      out.push_back(leaf_distribution(r.values.data()));
    }
    return out;
  }

  const DtParams& params() const { return params_; }
  std::size_t width() const { return width_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Longest root-to-leaf path in split count.
  int depth() const { return nodes_.empty() ? 0 : depth_below(0); }

  friend bool operator==(const DecisionTreeModel& a, const DecisionTreeModel& b) {
    if (a.params_ != b.params_ || a.width_ != b.width_ ||
        a.nodes_.size() != b.nodes_.size())
      return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const Node& x = a.nodes_[i];
      const Node& y = b.nodes_[i];
      if (x.feature != y.feature || x.threshold != y.threshold ||
          x.left != y.left || x.right != y.right ||
          x.class_counts != y.class_counts)
        return false;
    }
    return true;
  }

  // Internal representation accessors for persistence.
  void restore(DtParams params, std::size_t width, std::vector<Node> nodes) {
    params_ = params;
    width_ = width;
    nodes_ = std::move(nodes);
  }

 private:
  ProbaTriple leaf_distribution(const double* row) const {
    std::int32_t at = 0;
    while (nodes_[static_cast<std::size_t>(at)].feature >= 0) {
      const Node& node = nodes_[static_cast<std::size_t>(at)];
      at = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    const auto& counts = nodes_[static_cast<std::size_t>(at)].class_counts;
    const double total = counts[0] + counts[1] + counts[2];
    ProbaTriple p{};
    for (int c = 0; c < kClassCount; ++c) p[c] = counts[c] / total;
    return p;
  }

  int depth_below(std::int32_t at) const {
    const Node& node = nodes_[static_cast<std::size_t>(at)];
    if (node.feature < 0) return 0;
    return 1 + std::max(depth_below(node.left), depth_below(node.right));
  }

  static double gini(const std::array<double, kClassCount>& counts, double total) {
    double g = 1.0;
    for (double c : counts) {
      const double p = c / total;
      g -= p * p;
    }
    return g;
  }

  std::int32_t build(const detail::TrainMatrix& m,
                     std::vector<std::size_t>& indices, int depth) {
    Node node;
    for (std::size_t i : indices) {
      node.class_counts[static_cast<int>(m.labels[i])] += 1.0;
    }
    const double total = static_cast<double>(indices.size());
    const bool pure =
        std::count_if(node.class_counts.begin(), node.class_counts.end(),
                      [](double c) { return c > 0.0; }) <= 1;

    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (pure || indices.size() < 2 || depth >= params_.max_depth) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = std::numeric_limits<double>::infinity();

    std::vector<std::pair<double, AppLabel>> column(indices.size());
    for (std::size_t f = 0; f < m.width; ++f) {
      for (std::size_t i = 0; i < indices.size(); ++i) {
        column[i] = {m.row(indices[i])[f], m.labels[indices[i]]};
      }
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::array<double, kClassCount> left_counts{};
      double left_total = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_counts[static_cast<int>(column[i].second)] += 1.0;
        left_total += 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const double right_total = total - left_total;
        std::array<double, kClassCount> right_counts{};
        for (int c = 0; c < kClassCount; ++c) {
          right_counts[c] = node.class_counts[c] - left_counts[c];
        }
        const double score = (left_total * gini(left_counts, left_total) +
                              right_total * gini(right_counts, right_total)) /
                             total;
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = column[i].first +
                           (column[i + 1].first - column[i].first) / 2.0;
        }
      }
    }
    if (best_feature < 0) return id;  // every feature is constant here

    std::vector<std::size_t> left_idx;
    std::vector<std::size_t> right_idx;
    for (std::size_t i : indices) {
      if (m.row(i)[best_feature] <= best_threshold) {
        left_idx.push_back(i);
      } else {
        right_idx.push_back(i);
      }
    }
    nodes_[static_cast<std::size_t>(id)].feature = best_feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best_threshold;
    const std::int32_t left = build(m, left_idx, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    const std::int32_t right = build(m, right_idx, depth + 1);
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  DtParams params_;
  std::size_t width_ = 0;
  std::vector<Node> nodes_;
};

}  // namespace fleetprint
