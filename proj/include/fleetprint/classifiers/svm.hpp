#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fleetprint/classifiers/common.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

enum class SvmKernel { Linear, Rbf };

constexpr std::string_view svm_kernel_name(SvmKernel k) {
  return k == SvmKernel::Linear ? "linear" : "rbf";
}

inline std::optional<SvmKernel> svm_kernel_from_name(std::string_view name) {
  if (name == "linear") return SvmKernel::Linear;
  if (name == "rbf") return SvmKernel::Rbf;
  return std::nullopt;
}

struct SvmParams {
  SvmKernel kernel = SvmKernel::Linear;
  double gamma = 1e-3;  // ignored under the linear kernel
  double c = 1000.0;

  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

namespace detail {

// Sequential minimal optimization for one soft-margin binary problem,
// after Platt (1999) with the random second-choice scans replaced by a
// fixed start offset so training is deterministic. The decision function
// is f(x) = sum_i alpha_i y_i k(x_i, x) + b with 0 <= alpha <= C.
class SmoSolver {
 public:
  static constexpr double kTol = 1e-3;   // KKT violation tolerance
  static constexpr double kEps = 1e-6;   // minimum useful alpha step
  static constexpr std::size_t kMaxCachedRows = 4500;

  SmoSolver(const TrainMatrix& data, const std::vector<double>& y,
            SvmKernel kernel, double gamma, double c)
      : data_(data), y_(y), kernel_(kernel), gamma_(gamma), c_(c), n_(data.n) {
    alpha_.assign(n_, 0.0);
    errors_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) errors_[i] = -y_[i];
    if (n_ <= kMaxCachedRows) {
      cache_.assign(n_ * n_, 0.0);
      cached_.assign(n_, false);
    }
  }

  void solve() {
    std::size_t changed = 0;
    bool examine_all = true;
    std::size_t passes = 0;
    const std::size_t max_passes = 2000;
    while ((changed > 0 || examine_all) && passes < max_passes) {
      changed = 0;
      if (examine_all) {
        for (std::size_t i = 0; i < n_; ++i) changed += examine(i);
      } else {
        for (std::size_t i = 0; i < n_; ++i) {
          if (is_free(i)) changed += examine(i);
        }
      }
      if (examine_all) {
        examine_all = false;
      } else if (changed == 0) {
        examine_all = true;
      }
      ++passes;
    }
  }

  const std::vector<double>& alphas() const { return alpha_; }
  double bias() const { return bias_; }

 private:
  bool is_free(std::size_t i) const { return alpha_[i] > 0.0 && alpha_[i] < c_; }

  double kernel_value(std::size_t i, std::size_t j) const {
    if (kernel_ == SvmKernel::Linear) {
      return dot(data_.row(i), data_.row(j), data_.width);
    }
    return std::exp(-gamma_ * squared_distance(data_.row(i), data_.row(j),
                                               data_.width));
  }

  // Returns the cached Gram row, computing it on first use.
  const double* kernel_row(std::size_t i) {
    if (cache_.empty()) {
      scratch_.resize(n_);
      for (std::size_t j = 0; j < n_; ++j) scratch_[j] = kernel_value(i, j);
      return scratch_.data();
    }
    if (!cached_[i]) {
      double* row = cache_.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) row[j] = kernel_value(i, j);
      cached_[i] = true;
    }
    return cache_.data() + i * n_;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double alpha1 = alpha_[i1];
    const double alpha2 = alpha_[i2];
    const double y1 = y_[i1];
    const double y2 = y_[i2];
    const double e1 = errors_[i1];
    const double e2 = errors_[i2];
    const double s = y1 * y2;

    double low, high;
    if (y1 != y2) {
      low = std::max(0.0, alpha2 - alpha1);
      high = std::min(c_, c_ + alpha2 - alpha1);
    } else {
      low = std::max(0.0, alpha1 + alpha2 - c_);
      high = std::min(c_, alpha1 + alpha2);
    }
    if (low >= high) return false;

    const double k11 = kernel_value(i1, i1);
    const double k12 = kernel_value(i1, i2);
    const double k22 = kernel_value(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;

    double a2;
    if (eta > 0.0) {
      a2 = alpha2 + y2 * (e1 - e2) / eta;
      a2 = std::clamp(a2, low, high);
    } else {
      // Flat direction: evaluate the dual objective at both ends.
      // y*(E - b) recovers y * sum_j alpha_j y_j k(x_j, x) - 1.
      const double f1 = y1 * (e1 - bias_) - alpha1 * k11 - s * alpha2 * k12;
      const double f2 = y2 * (e2 - bias_) - s * alpha1 * k12 - alpha2 * k22;
      const double l1 = alpha1 + s * (alpha2 - low);
      const double h1 = alpha1 + s * (alpha2 - high);
      const double obj_low = l1 * f1 + low * f2 + 0.5 * l1 * l1 * k11 +
                             0.5 * low * low * k22 + s * low * l1 * k12;
      const double obj_high = h1 * f1 + high * f2 + 0.5 * h1 * h1 * k11 +
                              0.5 * high * high * k22 + s * high * h1 * k12;
      if (obj_low < obj_high - kEps) {
        a2 = low;
      } else if (obj_low > obj_high + kEps) {
        a2 = high;
      } else {
        a2 = alpha2;
      }
    }
    if (a2 < 1e-8 * c_) a2 = 0.0;
    if (a2 > c_ * (1.0 - 1e-8)) a2 = c_;
    if (std::abs(a2 - alpha2) < kEps * (a2 + alpha2 + kEps)) return false;

    double a1 = alpha1 + s * (alpha2 - a2);
    if (a1 < 1e-8 * c_) a1 = 0.0;
    if (a1 > c_ * (1.0 - 1e-8)) a1 = c_;

    const double d1 = y1 * (a1 - alpha1);
    const double d2 = y2 * (a2 - alpha2);
    const double b1 = bias_ - (e1 + d1 * k11 + d2 * k12);
    const double b2 = bias_ - (e2 + d1 * k12 + d2 * k22);
    double new_bias;
    if (a1 > 0.0 && a1 < c_) {
      new_bias = b1;
    } else if (a2 > 0.0 && a2 < c_) {
      new_bias = b2;
    } else {
      new_bias = (b1 + b2) / 2.0;
    }

    const double* row1 = kernel_row(i1);
    std::vector<double> row1_copy;
    if (cache_.empty()) {
      // Without a Gram cache the scratch row is reused; keep a copy.
      row1_copy.assign(row1, row1 + n_);
      row1 = row1_copy.data();
    }
    const double* row2 = kernel_row(i2);
    const double bias_delta = new_bias - bias_;
    for (std::size_t i = 0; i < n_; ++i) {
      errors_[i] += d1 * row1[i] + d2 * row2[i] + bias_delta;
    }
    alpha_[i1] = a1;
    alpha_[i2] = a2;
    bias_ = new_bias;
    return true;
  }

  std::size_t examine(std::size_t i2) {
    const double y2 = y_[i2];
    const double alpha2 = alpha_[i2];
    const double r2 = errors_[i2] * y2;
    const bool violates = (r2 < -kTol && alpha2 < c_) || (r2 > kTol && alpha2 > 0.0);
    if (!violates) return 0;

    // Best |E1 - E2| among free multipliers; ties go to the lower index.
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!is_free(i)) continue;
      const double gap = std::abs(errors_[i] - errors_[i2]);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best < n_ && take_step(best, i2)) return 1;

    for (std::size_t off = 0; off < n_; ++off) {
      const std::size_t i1 = (i2 + 1 + off) % n_;
      if (is_free(i1) && take_step(i1, i2)) return 1;
    }
    for (std::size_t off = 0; off < n_; ++off) {
      const std::size_t i1 = (i2 + 1 + off) % n_;
      if (take_step(i1, i2)) return 1;
    }
    return 0;
  }

  const TrainMatrix& data_;
  const std::vector<double>& y_;
  SvmKernel kernel_;
  double gamma_;
  double c_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> errors_;
  double bias_ = 0.0;
  std::vector<double> cache_;  // full Gram when n is small enough
  std::vector<bool> cached_;
  std::vector<double> scratch_;
};

}  // namespace detail

// One-vs-rest support vector classifier. Each binary problem is solved by
// deterministic SMO; multiclass decisions take the argmax of the per-class
// decision values.
class SvmModel {
 public:
  struct Binary {
    bool present = false;                      // class had training rows
    std::vector<double> coef;                  // alpha_i * y_i per support vector
    std::vector<std::vector<double>> support;  // support vector rows
    double bias = 0.0;
  };

  static SvmModel fit(const SvmParams& params, const Dataset& train) {
    if (!(params.c > 0.0)) throw InvalidParams("c must be positive");
    if (params.kernel == SvmKernel::Rbf && !(params.gamma > 0.0))
      throw InvalidParams("gamma must be positive for the RBF kernel");
    const detail::TrainMatrix m = detail::to_train_matrix(train);
    if (detail::count_classes(m.labels) < 2)
      throw DegenerateData("svm requires at least two classes");

    SvmModel model;
    model.params_ = params;
    model.width_ = m.width;
    std::vector<double> y(m.n);
    for (int c = 0; c < kClassCount; ++c) {
      bool any_positive = false;
      for (std::size_t i = 0; i < m.n; ++i) {
        y[i] = static_cast<int>(m.labels[i]) == c ? 1.0 : -1.0;
        any_positive |= y[i] > 0.0;
      }
      Binary& binary = model.binaries_[c];
      if (!any_positive) continue;
      binary.present = true;

      detail::SmoSolver solver(m, y, params.kernel, params.gamma, params.c);
      solver.solve();
      binary.bias = solver.bias();
      const std::vector<double>& alpha = solver.alphas();
      for (std::size_t i = 0; i < m.n; ++i) {
        if (alpha[i] > 1e-10) {
          binary.coef.push_back(alpha[i] * y[i]);
          binary.support.emplace_back(m.row(i), m.row(i) + m.width);
        }
      }
    }
    return model;
  }

  // Per-class one-vs-rest decision values (not probabilities).
  ProbaTriple decision_values(const double* row) const {
    ProbaTriple out{};
    for (int c = 0; c < kClassCount; ++c) {
      const Binary& binary = binaries_[c];
      if (!binary.present) {
        out[c] = -1e30;
        continue;
      }
      double f = binary.bias;
      for (std::size_t j = 0; j < binary.coef.size(); ++j) {
        f += binary.coef[j] * kernel(binary.support[j].data(), row);
      }
      out[c] = f;
    }
    return out;
  }

  std::vector<AppLabel> predict(const Dataset& rows) const {
    detail::require_width(rows, width_);
    std::vector<AppLabel> out;
    out.reserve(rows.rows.size());
    for (const FeatureRow& r : rows.rows) {
      out.push_back(detail::argmax_label(decision_values(r.values.data())));
    }
    return out;
  }

  std::vector<ProbaTriple> predict_proba(const Dataset& rows) const {
    detail::require_width(rows, width_);
    std::vector<ProbaTriple> out;
    out.reserve(rows.rows.size());
    for (const FeatureRow& r : rows.rows) {
      out.push_back(softmax(decision_values(r.values.data())));
    }
    return out;
  }

  const SvmParams& params() const { return params_; }
  std::size_t width() const { return width_; }
  const std::array<Binary, kClassCount>& binaries() const { return binaries_; }

  void restore(SvmParams params, std::size_t width,
               std::array<Binary, kClassCount> binaries) {
    params_ = params;
    width_ = width;
    binaries_ = std::move(binaries);
  }

 private:
  double kernel(const double* a, const double* b) const {
    if (params_.kernel == SvmKernel::Linear) {
      return detail::dot(a, b, width_);
    }
    return std::exp(-params_.gamma * detail::squared_distance(a, b, width_));
  }

  static ProbaTriple softmax(const ProbaTriple& values) {
    const double peak = *std::max_element(values.begin(), values.end());
    ProbaTriple p{};
    double total = 0.0;
    for (int c = 0; c < kClassCount; ++c) {
      p[c] = std::exp(values[c] - peak);
      total += p[c];
    }
    for (int c = 0; c < kClassCount; ++c) p[c] /= total;
    return p;
  }

  SvmParams params_;
  std::size_t width_ = 0;
  std::array<Binary, kClassCount> binaries_;
};

}  // namespace fleetprint
