#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "fleetprint/classifiers/common.hpp"
#include "fleetprint/detail/rng.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

struct MlpParams {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.01;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Multilayer perceptron with fixed hidden sizes 16-8-4: sigmoid on the
// first two hidden layers, identity on the third, softmax output over the
// three classes. Trained with plain SGD on the cross-entropy loss; the
// epoch with the best held-out loss is kept.
class MlpModel {
 public:
  static constexpr std::array<int, 3> kHiddenSizes = {16, 8, 4};
  static constexpr int kLayerCount = 4;  // three hidden + output

  // Glorot-uniform initialization of an untrained network.
  static MlpModel initialize(std::size_t width, std::uint64_t seed) {
    MlpModel model;
    model.width_ = width;
    detail::Rng rng(detail::mix64(seed ^ 0x6d6c705f696e6974ULL));
    const auto sizes = layer_sizes(width);
    for (int l = 0; l < kLayerCount; ++l) {
      const std::size_t fan_in = sizes[l];
      const std::size_t fan_out = sizes[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::vector<double> w(fan_in * fan_out);
      for (double& v : w) v = rng.next_uniform(-limit, limit);
      model.weights_[l] = std::move(w);
      model.biases_[l].assign(fan_out, 0.0);
    }
    return model;
  }

  static MlpModel fit(const MlpParams& params, const Dataset& train,
                      std::uint64_t seed) {
    if (params.epochs < 1) throw InvalidParams("epochs must be >= 1");
    if (params.batch_size < 1) throw InvalidParams("batch_size must be >= 1");
    if (!(params.learning_rate > 0.0))
      throw InvalidParams("learning_rate must be positive");
    const detail::TrainMatrix m = detail::to_train_matrix(train);
    if (detail::count_classes(m.labels) < 2)
      throw DegenerateData("mlp requires at least two classes");

    MlpModel model = initialize(m.width, seed);
    model.params_ = params;

    // Carve a stratified tenth out of the training rows to pick the best
    // epoch; tiny datasets are monitored on the training loss instead.
    detail::Rng rng(detail::mix64(seed ^ 0x6d6c705f666974ULL));
    std::array<std::vector<std::size_t>, kClassCount> per_class;
    for (std::size_t i = 0; i < m.n; ++i) {
      per_class[static_cast<int>(m.labels[i])].push_back(i);
    }
    std::vector<std::size_t> holdout;
    std::vector<std::size_t> learn;
    for (auto& indices : per_class) {
      rng.shuffle(indices);
      const std::size_t take = indices.size() / 10;
      for (std::size_t i = 0; i < indices.size(); ++i) {
        (i < take ? holdout : learn).push_back(indices[i]);
      }
    }
    std::sort(learn.begin(), learn.end());
    std::sort(holdout.begin(), holdout.end());
    const bool monitor_holdout = !holdout.empty();

    auto monitor_loss = [&] {
      return model.loss_over(m, monitor_holdout ? holdout : learn);
    };

    double best_loss = monitor_loss();
    std::array<std::vector<double>, kLayerCount> best_weights = model.weights_;
    std::array<std::vector<double>, kLayerCount> best_biases = model.biases_;

    const auto batch = static_cast<std::size_t>(params.batch_size);
    std::vector<std::size_t> order = learn;
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t stop = std::min(order.size(), start + batch);
        model.step(m, order, start, stop, params.learning_rate);
      }
      const double loss = monitor_loss();
      if (loss < best_loss) {
        best_loss = loss;
        best_weights = model.weights_;
        best_biases = model.biases_;
      }
    }
    model.weights_ = std::move(best_weights);
    model.biases_ = std::move(best_biases);
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
      Forward f;
      forward(r.values.data(), f);
      out.push_back(f.proba);
    }
    return out;
  }

  // Mean cross-entropy over a labeled dataset.
  double loss(const Dataset& rows) const {
    const detail::TrainMatrix m = detail::to_train_matrix(rows);
    detail::require_width(rows, width_);
    std::vector<std::size_t> all(m.n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return loss_over(m, all);
  }

  // Analytic gradient of the mean cross-entropy, flattened in parameter
  // order (W1, b1, W2, b2, ...). Matches parameters().
  std::vector<double> loss_gradient(const Dataset& rows) const {
    const detail::TrainMatrix m = detail::to_train_matrix(rows);
    detail::require_width(rows, width_);
    std::array<std::vector<double>, kLayerCount> grad_w;
    std::array<std::vector<double>, kLayerCount> grad_b;
    for (int l = 0; l < kLayerCount; ++l) {
      grad_w[l].assign(weights_[l].size(), 0.0);
      grad_b[l].assign(biases_[l].size(), 0.0);
    }
    std::vector<std::size_t> all(m.n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    accumulate_gradients(m, all, 0, m.n, grad_w, grad_b);
    std::vector<double> flat;
    for (int l = 0; l < kLayerCount; ++l) {
      flat.insert(flat.end(), grad_w[l].begin(), grad_w[l].end());
      flat.insert(flat.end(), grad_b[l].begin(), grad_b[l].end());
    }
    return flat;
  }

  std::vector<double> parameters() const {
    std::vector<double> flat;
    for (int l = 0; l < kLayerCount; ++l) {
      flat.insert(flat.end(), weights_[l].begin(), weights_[l].end());
      flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
    }
    return flat;
  }

  void set_parameters(const std::vector<double>& flat) {
    std::size_t at = 0;
    for (int l = 0; l < kLayerCount; ++l) {
      for (double& v : weights_[l]) v = flat.at(at++);
      for (double& v : biases_[l]) v = flat.at(at++);
    }
    if (at != flat.size()) throw DimensionMismatch("parameter vector size");
  }

  // One SGD step on the given rows at the given rate.
  void sgd_step(const Dataset& batch, double learning_rate) {
    const detail::TrainMatrix m = detail::to_train_matrix(batch);
    detail::require_width(batch, width_);
    std::vector<std::size_t> all(m.n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    step(m, all, 0, m.n, learning_rate);
  }

  // (fan_in, fan_out) per weight matrix, input to output.
  std::vector<std::pair<int, int>> weight_shapes() const {
    const auto sizes = layer_sizes(width_);
    std::vector<std::pair<int, int>> shapes;
    for (int l = 0; l < kLayerCount; ++l) {
      shapes.emplace_back(sizes[l], sizes[l + 1]);
    }
    return shapes;
  }

  const MlpParams& params() const { return params_; }
  std::size_t width() const { return width_; }
  const std::array<std::vector<double>, kLayerCount>& weights() const {
    return weights_;
  }
  const std::array<std::vector<double>, kLayerCount>& biases() const {
    return biases_;
  }

  void restore(MlpParams params, std::size_t width,
               std::array<std::vector<double>, kLayerCount> weights,
               std::array<std::vector<double>, kLayerCount> biases) {
    params_ = params;
    width_ = width;
    weights_ = std::move(weights);
    biases_ = std::move(biases);
    const auto sizes = layer_sizes(width_);
    for (int l = 0; l < kLayerCount; ++l) {
      if (weights_[l].size() != sizes[l] * sizes[l + 1] ||
          biases_[l].size() != sizes[l + 1])
        throw FormatError("mlp weight shapes do not match the architecture");
    }
  }

 private:
  static std::array<std::size_t, kLayerCount + 1> layer_sizes(std::size_t width) {
    return {width, static_cast<std::size_t>(kHiddenSizes[0]),
            static_cast<std::size_t>(kHiddenSizes[1]),
            static_cast<std::size_t>(kHiddenSizes[2]),
            static_cast<std::size_t>(kClassCount)};
  }

  static double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
  }

  struct Forward {
    std::array<std::vector<double>, kLayerCount> activations;  // post-activation
    ProbaTriple proba{};
    double log_sum_exp = 0.0;
    std::array<double, kClassCount> logits{};
  };

  void forward(const double* x, Forward& f) const {
    const double* in = x;
    std::size_t in_size = width_;
    for (int l = 0; l < kLayerCount; ++l) {
      const std::size_t out_size = biases_[l].size();
      std::vector<double>& out = f.activations[l];
      out.assign(biases_[l].begin(), biases_[l].end());
      const std::vector<double>& w = weights_[l];
      for (std::size_t i = 0; i < in_size; ++i) {
        const double v = in[i];
        if (v == 0.0) continue;
        const double* row = w.data() + i * out_size;
        for (std::size_t j = 0; j < out_size; ++j) out[j] += v * row[j];
      }
      if (l == 0 || l == 1) {
        for (double& v : out) v = sigmoid(v);
      }
      // Third hidden layer keeps the identity activation; the output layer
      // feeds softmax below.
      in = out.data();
      in_size = out_size;
    }
    const std::vector<double>& z = f.activations[kLayerCount - 1];
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (int c = 0; c < kClassCount; ++c) {
      f.logits[c] = z[c];
      f.proba[c] = std::exp(z[c] - peak);
      total += f.proba[c];
    }
    for (int c = 0; c < kClassCount; ++c) f.proba[c] /= total;
    f.log_sum_exp = peak + std::log(total);
  }

  double loss_over(const detail::TrainMatrix& m,
                   const std::vector<std::size_t>& indices) const {
    double total = 0.0;
    Forward f;
    for (std::size_t i : indices) {
      forward(m.row(i), f);
      total += f.log_sum_exp - f.logits[static_cast<int>(m.labels[i])];
    }
    return total / static_cast<double>(indices.size());
  }

  void accumulate_gradients(const detail::TrainMatrix& m,
                            const std::vector<std::size_t>& order,
                            std::size_t start, std::size_t stop,
                            std::array<std::vector<double>, kLayerCount>& grad_w,
                            std::array<std::vector<double>, kLayerCount>& grad_b) const {
    const double scale = 1.0 / static_cast<double>(stop - start);
    Forward f;
    std::array<std::vector<double>, kLayerCount> delta;
    for (std::size_t at = start; at < stop; ++at) {
      const std::size_t i = order[at];
      const double* x = m.row(i);
      forward(x, f);

      delta[kLayerCount - 1].assign(f.proba.begin(), f.proba.end());
      delta[kLayerCount - 1][static_cast<int>(m.labels[i])] -= 1.0;

      for (int l = kLayerCount - 2; l >= 0; --l) {
        const std::size_t out_size = biases_[l].size();
        const std::size_t next_size = biases_[l + 1].size();
        delta[l].assign(out_size, 0.0);
        const std::vector<double>& w_next = weights_[l + 1];
        for (std::size_t j = 0; j < out_size; ++j) {
          double sum = 0.0;
          const double* row = w_next.data() + j * next_size;
          for (std::size_t k = 0; k < next_size; ++k) {
            sum += row[k] * delta[l + 1][k];
          }
          if (l == 0 || l == 1) {
            const double a = f.activations[l][j];
            sum *= a * (1.0 - a);
          }
          delta[l][j] = sum;
        }
      }

      for (int l = 0; l < kLayerCount; ++l) {
        const double* in = l == 0 ? x : f.activations[l - 1].data();
        const std::size_t in_size = l == 0 ? width_ : biases_[l - 1].size();
        const std::size_t out_size = biases_[l].size();
        for (std::size_t a = 0; a < in_size; ++a) {
          const double v = in[a] * scale;
          if (v == 0.0) continue;
          double* row = grad_w[l].data() + a * out_size;
          for (std::size_t j = 0; j < out_size; ++j) {
            row[j] += v * delta[l][j];
          }
        }
        for (std::size_t j = 0; j < out_size; ++j) {
          grad_b[l][j] += scale * delta[l][j];
        }
      }
    }
  }

  void step(const detail::TrainMatrix& m, const std::vector<std::size_t>& order,
            std::size_t start, std::size_t stop, double learning_rate) {
    std::array<std::vector<double>, kLayerCount> grad_w;
    std::array<std::vector<double>, kLayerCount> grad_b;
    for (int l = 0; l < kLayerCount; ++l) {
      grad_w[l].assign(weights_[l].size(), 0.0);
      grad_b[l].assign(biases_[l].size(), 0.0);
    }
    accumulate_gradients(m, order, start, stop, grad_w, grad_b);
    for (int l = 0; l < kLayerCount; ++l) {
      for (std::size_t i = 0; i < weights_[l].size(); ++i) {
        weights_[l][i] -= learning_rate * grad_w[l][i];
      }
      for (std::size_t i = 0; i < biases_[l].size(); ++i) {
        biases_[l][i] -= learning_rate * grad_b[l][i];
      }
    }
  }

  MlpParams params_;
  std::size_t width_ = 0;
  std::array<std::vector<double>, kLayerCount> weights_;  // row-major in x out
  std::array<std::vector<double>, kLayerCount> biases_;
};

}  // namespace fleetprint
