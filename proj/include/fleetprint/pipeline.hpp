#pragma once

#include <cstdint>
#include <optional>

#include "fleetprint/classifiers/model.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/eval.hpp"
#include "fleetprint/pca.hpp"
#include "fleetprint/serialize.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

// Preprocessing fit on the training features only: z-score scaling, and
// optionally a 3-component PCA whose first two scores are appended.
struct PipelinePrep {
  Scaler scaler;
  std::optional<PcaModel> pca;
  std::size_t pca_augment = 0;
  Dataset transformed;
};

inline PipelinePrep prepare_training(const Dataset& raw_train, bool pca_augment) {
  PipelinePrep prep;
  prep.scaler = fit_scaler(raw_train);
  prep.transformed = apply_scaler(prep.scaler, raw_train);
  if (pca_augment) {
    prep.pca = pca_fit(prep.transformed, 3);
    prep.pca_augment = 2;
    prep.transformed = augment(*prep.pca, prep.transformed, prep.pca_augment);
  }
  return prep;
}

// Applies a bundle's training-time preprocessing to new raw features.
inline Dataset transform_features(const ModelBundle& bundle, const Dataset& raw) {
  Dataset out = apply_scaler(bundle.scaler, raw);
  if (bundle.pca) out = augment(*bundle.pca, out, bundle.pca_augment);
  return out;
}

inline ModelBundle train_bundle(const Dataset& raw_train,
                                const HyperParams& params, bool pca_augment,
                                std::uint64_t seed) {
  PipelinePrep prep = prepare_training(raw_train, pca_augment);
  return ModelBundle{fit(params, prep.transformed, seed), std::move(prep.scaler),
                     std::move(prep.pca), prep.pca_augment,
                     std::move(prep.transformed.feature_names)};
}

inline EvalReport evaluate_bundle(const ModelBundle& bundle,
                                  const Dataset& raw_validation) {
  return evaluate(bundle.model, transform_features(bundle, raw_validation));
}

}  // namespace fleetprint
