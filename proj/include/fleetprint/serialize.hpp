#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fleetprint/classifiers/model.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/eval.hpp"
#include "fleetprint/pca.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

inline json params_to_json(const HyperParams& params) {
  return std::visit(
      [](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DtParams>) {
          return json{{"max_depth", p.max_depth}};
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          return json{{"n_neighbors", p.n_neighbors},
                      {"weights", std::string(knn_weights_name(p.weights))},
                      {"index", std::string(knn_index_name(p.index))}};
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          return json{{"kernel", std::string(svm_kernel_name(p.kernel))},
                      {"gamma", p.gamma},
                      {"c", p.c}};
        } else {
          return json{{"epochs", p.epochs},
                      {"batch_size", p.batch_size},
                      {"learning_rate", p.learning_rate}};
        }
      },
      params);
}

inline HyperParams params_from_json(ClassifierKind kind, const json& j) {
  switch (kind) {
    case ClassifierKind::Dt:
      return DtParams{j.at("max_depth").get<int>()};
    case ClassifierKind::Knn: {
      const auto weights =
          knn_weights_from_name(j.at("weights").get<std::string>());
      const auto index = knn_index_from_name(j.at("index").get<std::string>());
      if (!weights || !index) throw FormatError("unknown knn weights or index");
      return KnnParams{j.at("n_neighbors").get<int>(), *weights, *index};
    }
    case ClassifierKind::Svm: {
      const auto kernel =
          svm_kernel_from_name(j.at("kernel").get<std::string>());
      if (!kernel) throw FormatError("unknown svm kernel");
      return SvmParams{*kernel, j.at("gamma").get<double>(),
                       j.at("c").get<double>()};
    }
    case ClassifierKind::Mlp:
      return MlpParams{j.at("epochs").get<int>(), j.at("batch_size").get<int>(),
                       j.at("learning_rate").get<double>()};
  }
  throw FormatError("unknown classifier kind");
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

inline json model_to_json(const TrainedModel& model) {
  json j;
  j["kind"] = std::string(classifier_name(model_kind(model)));
  j["params"] = params_to_json(model_params(model));
  j["width"] = model_width(model);
  return std::visit(
      [&](const auto& m) -> json {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, DecisionTreeModel>) {
          json nodes = json::array();
          for (const auto& node : m.nodes()) {
            nodes.push_back({{"feature", node.feature},
                             {"threshold", node.threshold},
                             {"left", node.left},
                             {"right", node.right},
                             {"counts", node.class_counts}});
          }
          j["nodes"] = std::move(nodes);
        } else if constexpr (std::is_same_v<M, KnnModel>) {
          j["data"] = m.data();
          json labels = json::array();
          for (AppLabel l : m.labels()) labels.push_back(static_cast<int>(l));
          j["labels"] = std::move(labels);
        } else if constexpr (std::is_same_v<M, SvmModel>) {
          json binaries = json::array();
          for (const auto& b : m.binaries()) {
            binaries.push_back({{"present", b.present},
                                {"bias", b.bias},
                                {"coef", b.coef},
                                {"support", b.support}});
          }
          j["binaries"] = std::move(binaries);
        } else {
          j["weights"] = m.weights();
          j["biases"] = m.biases();
        }
        return j;
      },
      model);
}

inline TrainedModel model_from_json(const json& j) {
  const auto kind = classifier_from_name(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("unknown classifier kind");
  const HyperParams params = params_from_json(*kind, j.at("params"));
  const auto width = j.at("width").get<std::size_t>();
  switch (*kind) {
    case ClassifierKind::Dt: {
      std::vector<DecisionTreeModel::Node> nodes;
      for (const json& n : j.at("nodes")) {
        DecisionTreeModel::Node node;
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<std::int32_t>();
        node.right = n.at("right").get<std::int32_t>();
        node.class_counts = n.at("counts").get<std::array<double, kClassCount>>();
        nodes.push_back(node);
      }
      DecisionTreeModel model;
      model.restore(std::get<DtParams>(params), width, std::move(nodes));
      return model;
    }
    case ClassifierKind::Knn: {
      std::vector<AppLabel> labels;
      for (const json& l : j.at("labels")) {
        labels.push_back(static_cast<AppLabel>(l.get<int>()));
      }
      KnnModel model;
      model.restore(std::get<KnnParams>(params), width,
                    j.at("data").get<std::vector<double>>(), std::move(labels));
      return model;
    }
    case ClassifierKind::Svm: {
      std::array<SvmModel::Binary, kClassCount> binaries;
      std::size_t at = 0;
      for (const json& b : j.at("binaries")) {
        if (at >= binaries.size()) throw FormatError("too many svm binaries");
        binaries[at].present = b.at("present").get<bool>();
        binaries[at].bias = b.at("bias").get<double>();
        binaries[at].coef = b.at("coef").get<std::vector<double>>();
        binaries[at].support =
            b.at("support").get<std::vector<std::vector<double>>>();
        ++at;
      }
      SvmModel model;
      model.restore(std::get<SvmParams>(params), width, std::move(binaries));
      return model;
    }
    case ClassifierKind::Mlp: {
      MlpModel model;
      model.restore(
          std::get<MlpParams>(params), width,
          j.at("weights")
              .get<std::array<std::vector<double>, MlpModel::kLayerCount>>(),
          j.at("biases")
              .get<std::array<std::vector<double>, MlpModel::kLayerCount>>());
      return model;
    }
  }
  throw FormatError("unknown classifier kind");
}

// ---------------------------------------------------------------------------
// Pipeline bundle: model + scaler + optional PCA, one deployable artifact
// ---------------------------------------------------------------------------

struct ModelBundle {
  TrainedModel model;
  Scaler scaler;
  std::optional<PcaModel> pca;
  std::size_t pca_augment = 0;  // score columns appended after scaling
  std::vector<std::string> feature_names;
};

inline json bundle_to_json(const ModelBundle& bundle) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["feature_names"] = bundle.feature_names;
  j["scaler"] = {{"mean", bundle.scaler.mean}, {"stddev", bundle.scaler.stddev}};
  if (bundle.pca) {
    j["pca"] = {{"mean", bundle.pca->mean},
                {"components", bundle.pca->components},
                {"explained_variance", bundle.pca->explained_variance},
                {"explained_variance_ratio", bundle.pca->explained_variance_ratio}};
    j["pca_augment"] = bundle.pca_augment;
  } else {
    j["pca"] = nullptr;
    j["pca_augment"] = 0;
  }
  j["model"] = model_to_json(bundle.model);
  return j;
}

inline ModelBundle bundle_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw FormatError("unsupported model format version");
    ModelBundle bundle{model_from_json(j.at("model")), Scaler{}, std::nullopt, 0,
                       j.at("feature_names").get<std::vector<std::string>>()};
    bundle.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    bundle.scaler.stddev =
        j.at("scaler").at("stddev").get<std::vector<double>>();
    if (!j.at("pca").is_null()) {
      PcaModel pca;
      pca.mean = j.at("pca").at("mean").get<std::vector<double>>();
      pca.components =
          j.at("pca").at("components").get<std::vector<std::vector<double>>>();
      pca.explained_variance =
          j.at("pca").at("explained_variance").get<std::vector<double>>();
      pca.explained_variance_ratio = j.at("pca")
                                         .at("explained_variance_ratio")
                                         .get<std::vector<double>>();
      bundle.pca = std::move(pca);
      bundle.pca_augment = j.at("pca_augment").get<std::size_t>();
    }
    return bundle;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_bundle(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << bundle_to_json(bundle).dump(2) << "\n";
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
  return bundle_from_json(j);
}

// ---------------------------------------------------------------------------
// Machine-readable evaluation report
// ---------------------------------------------------------------------------

inline json report_json(const EvalReport& report) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["classifier"] = report.classifier;
  j["params"] = params_to_json(report.params);
  j["row_count"] = report.row_count;
  json class_order = json::array();
  for (AppLabel a : kClassOrder) class_order.push_back(std::string(app_name(a)));
  j["class_order"] = std::move(class_order);
  j["confusion_counts"] = report.cm.counts;
  j["confusion_normalized"] = report.cm.normalized();
  j["accuracy"] = report.cm.accuracy();
  const ClassScores& s = report.class_scores;
  j["scores"] = {{"precision", s.precision},
                 {"recall", s.recall},
                 {"f1", s.f1},
                 {"degenerate", s.degenerate},
                 {"macro_precision", s.macro_precision},
                 {"macro_recall", s.macro_recall},
                 {"macro_f1", s.macro_f1}};
  return j;
}

}  // namespace fleetprint
