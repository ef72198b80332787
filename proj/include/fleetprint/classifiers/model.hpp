#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fleetprint/classifiers/common.hpp"
#include "fleetprint/classifiers/decision_tree.hpp"
#include "fleetprint/classifiers/knn.hpp"
#include "fleetprint/classifiers/mlp.hpp"
#include "fleetprint/classifiers/svm.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

enum class ClassifierKind { Dt, Knn, Svm, Mlp };

// Trims trailing zeros from a numeric flag value ("1000", "0.001").
inline std::string format_param(double v) {
  std::string s = std::to_string(v);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

constexpr std::string_view classifier_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Dt: return "dt";
    case ClassifierKind::Knn: return "knn";
    case ClassifierKind::Svm: return "svm";
    case ClassifierKind::Mlp: return "mlp";
  }
  return "";
}

inline std::optional<ClassifierKind> classifier_from_name(std::string_view name) {
  for (ClassifierKind k : {ClassifierKind::Dt, ClassifierKind::Knn,
                           ClassifierKind::Svm, ClassifierKind::Mlp}) {
    if (classifier_name(k) == name) return k;
  }
  return std::nullopt;
}

using HyperParams = std::variant<DtParams, KnnParams, SvmParams, MlpParams>;

inline ClassifierKind kind_of(const HyperParams& params) {
  return static_cast<ClassifierKind>(params.index());
}

// Tuned parameters each classifier ships with.
inline HyperParams default_params(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::Dt: return DtParams{};
    case ClassifierKind::Knn: return KnnParams{};
    case ClassifierKind::Svm: return SvmParams{};
    case ClassifierKind::Mlp: return MlpParams{};
  }
  throw InvalidParams("unknown classifier kind");
}

// Immutable fitted classifier; predict never mutates.
using TrainedModel =
    std::variant<DecisionTreeModel, KnnModel, SvmModel, MlpModel>;

inline TrainedModel fit(const HyperParams& params, const Dataset& train,
                        std::uint64_t seed = 0) {
  return std::visit(
      [&](const auto& p) -> TrainedModel {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DtParams>) {
          return DecisionTreeModel::fit(p, train);
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          return KnnModel::fit(p, train);
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          return SvmModel::fit(p, train);
        } else {
          return MlpModel::fit(p, train, seed);
        }
      },
      params);
}

inline std::vector<AppLabel> predict(const TrainedModel& model,
                                     const Dataset& rows) {
  return std::visit([&](const auto& m) { return m.predict(rows); }, model);
}

inline std::vector<ProbaTriple> predict_proba(const TrainedModel& model,
                                              const Dataset& rows) {
  return std::visit([&](const auto& m) { return m.predict_proba(rows); }, model);
}

inline std::size_t model_width(const TrainedModel& model) {
  return std::visit([](const auto& m) { return m.width(); }, model);
}

inline ClassifierKind model_kind(const TrainedModel& model) {
  return static_cast<ClassifierKind>(model.index());
}

inline HyperParams model_params(const TrainedModel& model) {
  return std::visit([](const auto& m) -> HyperParams { return m.params(); },
                    model);
}

// Single-line rendering used by reports and the CLI.
inline std::string params_text(const HyperParams& params) {
  return std::visit(
      [](const auto& p) -> std::string {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DtParams>) {
          return "max_depth=" + std::to_string(p.max_depth);
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          return "n_neighbors=" + std::to_string(p.n_neighbors) +
                 " weights=" + std::string(knn_weights_name(p.weights)) +
                 " index=" + std::string(knn_index_name(p.index));
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          std::string text = "kernel=" + std::string(svm_kernel_name(p.kernel));
          if (p.kernel == SvmKernel::Rbf) {
            text += " gamma=" + format_param(p.gamma);
          }
          return text + " c=" + format_param(p.c);
        } else {
          return "epochs=" + std::to_string(p.epochs) +
                 " batch_size=" + std::to_string(p.batch_size) +
                 " learning_rate=" + format_param(p.learning_rate);
        }
      },
      params);
}

}  // namespace fleetprint
