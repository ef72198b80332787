#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "fleetprint/classifiers/common.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

enum class KnnWeights { Uniform, Distance };
enum class KnnIndex { Brute, KdTree, BallTree };

constexpr std::string_view knn_weights_name(KnnWeights w) {
  return w == KnnWeights::Uniform ? "uniform" : "distance";
}

inline std::optional<KnnWeights> knn_weights_from_name(std::string_view name) {
  if (name == "uniform") return KnnWeights::Uniform;
  if (name == "distance") return KnnWeights::Distance;
  return std::nullopt;
}

constexpr std::string_view knn_index_name(KnnIndex index) {
  switch (index) {
    case KnnIndex::Brute: return "brute";
    case KnnIndex::KdTree: return "kd_tree";
    case KnnIndex::BallTree: return "ball_tree";
  }
  return "";
}

inline std::optional<KnnIndex> knn_index_from_name(std::string_view name) {
  if (name == "brute") return KnnIndex::Brute;
  if (name == "kd_tree") return KnnIndex::KdTree;
  if (name == "ball_tree") return KnnIndex::BallTree;
  return std::nullopt;
}

struct KnnParams {
  int n_neighbors = 5;
  KnnWeights weights = KnnWeights::Uniform;
  KnnIndex index = KnnIndex::BallTree;

  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

namespace detail {

// Bounded k-best collector over (squared distance, training index), worst
// element on top. Distance ties prefer the lower index, so every backend
// returns the same neighbor set even on degenerate data.
class KBest {
 public:
  explicit KBest(std::size_t k) : k_(k) {}

  static bool worse(const std::pair<double, std::size_t>& a,
                    const std::pair<double, std::size_t>& b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  }

  void push(double d2, std::size_t index) {
    if (heap_.size() < k_) {
      heap_.emplace_back(d2, index);
      std::push_heap(heap_.begin(), heap_.end(), worse);
      return;
    }
    if (worse({d2, index}, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), worse);
      heap_.back() = {d2, index};
      std::push_heap(heap_.begin(), heap_.end(), worse);
    }
  }

  bool full() const { return heap_.size() == k_; }
  double worst_d2() const { return heap_.front().first; }

  std::vector<Neighbor> sorted() && {
    std::sort(heap_.begin(), heap_.end(), worse);
    std::vector<Neighbor> out;
    out.reserve(heap_.size());
    for (const auto& [d2, index] : heap_) {
      out.push_back({index, std::sqrt(d2)});
    }
    return out;
  }

 private:
  std::size_t k_;
  std::vector<std::pair<double, std::size_t>> heap_;
};

}  // namespace detail

// k-nearest-neighbor classifier over the stored (standardized) training
// matrix. All three backends perform exact search; KdTree splits at the
// median of the widest-spread dimension, BallTree additionally keeps
// centroid/radius bounds per node. Leaf size is 16.
class KnnModel {
 public:
  static constexpr std::size_t kLeafSize = 16;

  static KnnModel fit(const KnnParams& params, const Dataset& train) {
    if (params.n_neighbors < 1) throw InvalidParams("n_neighbors must be >= 1");
    detail::TrainMatrix m = detail::to_train_matrix(train);
    if (static_cast<std::size_t>(params.n_neighbors) > m.n)
      throw InvalidParams("n_neighbors exceeds the training size");

    KnnModel model;
    model.params_ = params;
    model.width_ = m.width;
    model.n_ = m.n;
    model.data_ = std::move(m.values);
    model.labels_ = std::move(m.labels);
    model.build_index();
    return model;
  }

  std::vector<AppLabel> predict(const Dataset& rows) const {
    const auto probas = predict_proba(rows);
    std::vector<AppLabel> out;
    out.reserve(probas.size());
    for (const ProbaTriple& p : probas) out.push_back(detail::argmax_label(p));
    return out;
  }

  std::vector<ProbaTriple> predict_proba(const Dataset& rows) const {
    detail::require_width(rows, width_);
    std::vector<ProbaTriple> out;
    out.reserve(rows.rows.size());
    for (const FeatureRow& r : rows.rows) {
      out.push_back(vote(query(r.values.data(),
                               static_cast<std::size_t>(params_.n_neighbors))));
    }
    return out;
  }

  // k nearest neighbors by Euclidean distance via the configured index,
  // ascending distance, ties on the lower training index.
  std::vector<Neighbor> query(const double* row, std::size_t k) const {
    if (k > n_) throw InvalidParams("k exceeds the training size");
    detail::KBest best(k);
    switch (params_.index) {
      case KnnIndex::Brute:
        brute_search(row, best);
        break;
      case KnnIndex::KdTree:
        kd_search(0, row, best);
        break;
      case KnnIndex::BallTree:
        ball_search(0, row, best);
        break;
    }
    return std::move(best).sorted();
  }

  // Exact linear scan, independent of any tree structure.
  std::vector<Neighbor> query_bruteforce(const double* row, std::size_t k) const {
    if (k > n_) throw InvalidParams("k exceeds the training size");
    detail::KBest best(k);
    brute_search(row, best);
    return std::move(best).sorted();
  }

  const KnnParams& params() const { return params_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return n_; }
  const std::vector<double>& data() const { return data_; }
  const std::vector<AppLabel>& labels() const { return labels_; }

  // Rebuilds a model from persisted training data; the index is
  // reconstructed deterministically.
  void restore(KnnParams params, std::size_t width, std::vector<double> data,
               std::vector<AppLabel> labels) {
    params_ = params;
    width_ = width;
    labels_ = std::move(labels);
    data_ = std::move(data);
    n_ = labels_.size();
    if (data_.size() != n_ * width_)
      throw FormatError("knn data size does not match labels and width");
    build_index();
  }

 private:
  struct TreeNode {
    int dim = -1;  // -1 marks a leaf
    double plane = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    double radius = 0.0;  // BallTree only
  };

  const double* point(std::size_t i) const { return data_.data() + i * width_; }

  ProbaTriple vote(const std::vector<Neighbor>& neighbors) const {
    ProbaTriple weights{};
    if (params_.weights == KnnWeights::Uniform) {
      for (const Neighbor& nb : neighbors) {
        weights[static_cast<int>(labels_[nb.index])] += 1.0;
      }
    } else {
      // Exact matches short-circuit 1/d weighting.
      const bool exact = std::any_of(
          neighbors.begin(), neighbors.end(),
          [](const Neighbor& nb) { return nb.distance == 0.0; });
      for (const Neighbor& nb : neighbors) {
        if (exact) {
          if (nb.distance == 0.0)
            weights[static_cast<int>(labels_[nb.index])] += 1.0;
        } else {
          weights[static_cast<int>(labels_[nb.index])] += 1.0 / nb.distance;
        }
      }
    }
    const double total = weights[0] + weights[1] + weights[2];
    ProbaTriple p{};
    for (int c = 0; c < kClassCount; ++c) p[c] = weights[c] / total;
    return p;
  }

  void brute_search(const double* q, detail::KBest& best) const {
    for (std::size_t i = 0; i < n_; ++i) {
      best.push(detail::squared_distance(q, point(i), width_), i);
    }
  }

  void build_index() {
    nodes_.clear();
    centroids_.clear();
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (params_.index == KnnIndex::Brute || n_ == 0) return;
    const bool ball = params_.index == KnnIndex::BallTree;
    build_node(0, n_, ball);
  }

  std::int32_t build_node(std::size_t begin, std::size_t end, bool ball) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_[id].begin = static_cast<std::uint32_t>(begin);
    nodes_[id].end = static_cast<std::uint32_t>(end);

    if (ball) {
      std::vector<double> centroid(width_, 0.0);
      for (std::size_t i = begin; i < end; ++i) {
        const double* p = point(order_[i]);
        for (std::size_t j = 0; j < width_; ++j) centroid[j] += p[j];
      }
      const double count = static_cast<double>(end - begin);
      for (double& c : centroid) c /= count;
      double radius2 = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        radius2 = std::max(radius2, detail::squared_distance(
                                        centroid.data(), point(order_[i]), width_));
      }
      nodes_[id].radius = std::sqrt(radius2);
      centroids_.insert(centroids_.end(), centroid.begin(), centroid.end());
    }

    if (end - begin <= kLeafSize) return id;

    // Widest-spread dimension; ties go to the lowest index.
    int split_dim = -1;
    double best_spread = 0.0;
    for (std::size_t j = 0; j < width_; ++j) {
      double lo = point(order_[begin])[j];
      double hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        const double v = point(order_[i])[j];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        split_dim = static_cast<int>(j);
      }
    }
    if (split_dim < 0) return id;  // all points identical

    std::sort(order_.begin() + static_cast<std::ptrdiff_t>(begin),
              order_.begin() + static_cast<std::ptrdiff_t>(end),
              [&](std::size_t a, std::size_t b) {
                const double va = point(a)[split_dim];
                const double vb = point(b)[split_dim];
                return va != vb ? va < vb : a < b;
              });
    const std::size_t mid = begin + (end - begin) / 2;
    const double lo = point(order_[mid - 1])[split_dim];
    const double hi = point(order_[mid])[split_dim];

    nodes_[id].dim = split_dim;
    nodes_[id].plane = lo + (hi - lo) / 2.0;
    const std::int32_t left = build_node(begin, mid, ball);
    nodes_[id].left = left;
    const std::int32_t right = build_node(mid, end, ball);
    nodes_[id].right = right;
    return id;
  }

  void kd_search(std::int32_t at, const double* q, detail::KBest& best) const {
    const TreeNode& node = nodes_[static_cast<std::size_t>(at)];
    if (node.dim < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::size_t p = order_[i];
        best.push(detail::squared_distance(q, point(p), width_), p);
      }
      return;
    }
    const double diff = q[node.dim] - node.plane;
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;
    kd_search(near, q, best);
    // The far side is explored on boundary ties so index tie-breaks stay
    // identical to brute force.
    if (!best.full() || diff * diff <= best.worst_d2()) {
      kd_search(far, q, best);
    }
  }

  void ball_search(std::int32_t at, const double* q, detail::KBest& best) const {
    const TreeNode& node = nodes_[static_cast<std::size_t>(at)];
    const double dist_c = std::sqrt(detail::squared_distance(
        q, centroids_.data() + static_cast<std::size_t>(at) * width_, width_));
    const double lower = std::max(0.0, dist_c - node.radius);
    // The sqrt round trips can inflate the bound by a few ulps; the slack
    // keeps exact distance ties explored so index tie-breaks match brute
    // force.
    if (best.full() &&
        lower * lower > best.worst_d2() * (1.0 + 1e-9) + 1e-12) {
      return;
    }
    if (node.dim < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::size_t p = order_[i];
        best.push(detail::squared_distance(q, point(p), width_), p);
      }
      return;
    }
    const double diff = q[node.dim] - node.plane;
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;
    ball_search(near, q, best);
    ball_search(far, q, best);
  }

  KnnParams params_;
  std::size_t width_ = 0;
  std::size_t n_ = 0;
  std::vector<double> data_;
  std::vector<AppLabel> labels_;
  std::vector<std::size_t> order_;
  std::vector<TreeNode> nodes_;
  std::vector<double> centroids_;  // BallTree: one centroid per node
};

// Oracle query used to validate the tree backends: exact k smallest
// Euclidean distances, ties broken by the lower training index.
inline std::vector<Neighbor> knn_query_bruteforce(const KnnModel& model,
                                                  const std::vector<double>& row,
                                                  std::size_t k) {
  if (row.size() != model.width())
    throw DimensionMismatch("query width does not match the model");
  return model.query_bruteforce(row.data(), k);
}

}  // namespace fleetprint
