#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fleetprint/classifiers/svm.hpp"
#include "fleetprint/detail/rng.hpp"
#include "fleetprint/telemetry.hpp"

using namespace fleetprint;

namespace {

Dataset make_dataset(const std::vector<std::vector<double>>& rows,
                     const std::vector<AppLabel>& labels) {
  Dataset data;
  for (std::size_t j = 0; j < rows[0].size(); ++j) {
    data.feature_names.push_back("f" + std::to_string(j));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.rows.push_back({rows[i], labels[i]});
  }
  return data;
}

Dataset single_query(const std::vector<double>& values) {
  Dataset data;
  for (std::size_t j = 0; j < values.size(); ++j) {
    data.feature_names.push_back("f" + std::to_string(j));
  }
  data.rows.push_back({values, std::nullopt});
  return data;
}

// Two-class dataset that is linearly separable with at least the given
// geometric margin after standardization.
Dataset separable_dataset(std::size_t n, std::size_t width, std::uint64_t seed,
                          double margin = 0.15) {
  detail::Rng rng(seed);
  std::vector<double> w(width);
  double norm = 0.0;
  for (double& v : w) {
    v = rng.next_gaussian();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : w) v /= norm;

  std::vector<std::vector<double>> rows;
  std::vector<AppLabel> labels;
  while (rows.size() < n) {
    std::vector<double> x(width);
    for (double& v : x) v = rng.next_gaussian();
    double dist = 0.0;
    for (std::size_t j = 0; j < width; ++j) dist += w[j] * x[j];
    if (std::abs(dist) < margin) continue;
    rows.push_back(std::move(x));
    labels.push_back(dist > 0.0 ? AppLabel::Mcnp6 : AppLabel::CadoNfs);
  }
  // Keep both classes present.
  labels[0] = AppLabel::CadoNfs;
  labels[1] = AppLabel::Mcnp6;
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t j = 0; j < width; ++j) {
    d0 += w[j] * rows[0][j];
    d1 += w[j] * rows[1][j];
  }
  for (std::size_t j = 0; j < width; ++j) {
    rows[0][j] -= (d0 + 2.0 * margin) * w[j];
    rows[1][j] -= (d1 - 2.0 * margin) * w[j];
  }
  return make_dataset(rows, labels);
}

double training_accuracy(const SvmModel& model, const Dataset& data) {
  const auto predicted = model.predict(data);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == data.rows[i].label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace

TEST_CASE("two separable points in one dimension") {
  const Dataset train =
      make_dataset({{-1.0}, {1.0}}, {AppLabel::CadoNfs, AppLabel::Mcnp6});
  const SvmModel model =
      SvmModel::fit(SvmParams{SvmKernel::Linear, 1e-3, 1000.0}, train);
  REQUIRE(model.predict(single_query({-0.5}))[0] == AppLabel::CadoNfs);
  REQUIRE(model.predict(single_query({0.5}))[0] == AppLabel::Mcnp6);
}

TEST_CASE("linear C=1000 separates margin-separated data perfectly") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Dataset train = separable_dataset(60, 6, seed);
    const Scaler scaler = fit_scaler(train);
    train = apply_scaler(scaler, train);
    const SvmModel model =
        SvmModel::fit(SvmParams{SvmKernel::Linear, 1e-3, 1000.0}, train);
    REQUIRE(training_accuracy(model, train) == 1.0);
  }
}

TEST_CASE("solver satisfies the KKT conditions at tolerance") {
  Dataset train = separable_dataset(50, 4, 11);
  const Scaler scaler = fit_scaler(train);
  train = apply_scaler(scaler, train);
  const SvmParams params{SvmKernel::Linear, 1e-3, 1000.0};
  const SvmModel model = SvmModel::fit(params, train);

  // Reconstruct alpha per training row from the stored support vectors.
  const int c = static_cast<int>(AppLabel::CadoNfs);
  const auto& binary = model.binaries()[c];
  REQUIRE(binary.present);
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    const double y = train.rows[i].label == AppLabel::CadoNfs ? 1.0 : -1.0;
    double alpha = 0.0;
    for (std::size_t s = 0; s < binary.support.size(); ++s) {
      if (binary.support[s] == train.rows[i].values) {
        alpha = std::abs(binary.coef[s]);
        break;
      }
    }
    const double f = model.decision_values(train.rows[i].values.data())[c];
    const double margin = y * f;
    const double tol = 2e-3;
    if (alpha == 0.0) {
      REQUIRE(margin >= 1.0 - tol);
    } else if (alpha >= params.c * (1.0 - 1e-6)) {
      REQUIRE(margin <= 1.0 + tol);
    } else {
      REQUIRE(margin == Catch::Approx(1.0).margin(tol));
    }
  }
}

TEST_CASE("duplicate training points do not stall the solver") {
  // Identical rows make the pair direction flat (eta = 0) under the
  // linear kernel; the solver must still terminate and separate.
  const Dataset train = make_dataset(
      {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {2.0, 2.0}, {2.0, 2.0}, {2.0, 2.0}},
      {AppLabel::CadoNfs, AppLabel::CadoNfs, AppLabel::CadoNfs,
       AppLabel::Mcnp6, AppLabel::Mcnp6, AppLabel::Mcnp6});
  const SvmModel model =
      SvmModel::fit(SvmParams{SvmKernel::Linear, 1e-3, 1000.0}, train);
  REQUIRE(training_accuracy(model, train) == 1.0);
  REQUIRE(model.predict(single_query({-1.0, -1.0}))[0] == AppLabel::CadoNfs);
  REQUIRE(model.predict(single_query({3.0, 3.0}))[0] == AppLabel::Mcnp6);
}

TEST_CASE("the rbf kernel solves XOR") {
  const Dataset train = make_dataset(
      {{0, 0}, {1, 1}, {0, 1}, {1, 0}},
      {AppLabel::CadoNfs, AppLabel::CadoNfs, AppLabel::Mcnp6, AppLabel::Mcnp6});
  const SvmModel model =
      SvmModel::fit(SvmParams{SvmKernel::Rbf, 1.0, 1000.0}, train);
  REQUIRE(training_accuracy(model, train) == 1.0);
}

TEST_CASE("rbf with tiny gamma matches linear predictions on separable data") {
  int agreeing_trials = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    Dataset train = separable_dataset(40, 5, seed);
    const Scaler scaler = fit_scaler(train);
    train = apply_scaler(scaler, train);
    const SvmModel linear =
        SvmModel::fit(SvmParams{SvmKernel::Linear, 1e-3, 1000.0}, train);
    const SvmModel rbf =
        SvmModel::fit(SvmParams{SvmKernel::Rbf, 1e-3, 1000.0}, train);
    if (linear.predict(train) == rbf.predict(train)) ++agreeing_trials;
  }
  REQUIRE(agreeing_trials >= 9);
}

TEST_CASE("three-class one-vs-rest classification") {
  detail::Rng rng(8);
  std::vector<std::vector<double>> rows;
  std::vector<AppLabel> labels;
  const double centers[3][2] = {{0, 0}, {6, 0}, {0, 6}};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 20; ++i) {
      rows.push_back({centers[c][0] + 0.5 * rng.next_gaussian(),
                      centers[c][1] + 0.5 * rng.next_gaussian()});
      labels.push_back(kClassOrder[c]);
    }
  }
  Dataset train = make_dataset(rows, labels);
  const Scaler scaler = fit_scaler(train);
  train = apply_scaler(scaler, train);
  const SvmModel model =
      SvmModel::fit(SvmParams{SvmKernel::Linear, 1e-3, 100.0}, train);
  REQUIRE(training_accuracy(model, train) == 1.0);

  const auto probas = model.predict_proba(train);
  const auto predicted = model.predict(train);
  for (std::size_t i = 0; i < probas.size(); ++i) {
    REQUIRE(probas[i][0] + probas[i][1] + probas[i][2] ==
            Catch::Approx(1.0).margin(1e-9));
    int best = 0;
    for (int c = 1; c < kClassCount; ++c) {
      if (probas[i][c] > probas[i][best]) best = c;
    }
    REQUIRE(predicted[i] == static_cast<AppLabel>(best));
  }
}

TEST_CASE("a class absent from training never wins") {
  const Dataset train = separable_dataset(30, 3, 42);
  const SvmModel model =
      SvmModel::fit(SvmParams{SvmKernel::Linear, 1e-3, 10.0}, train);
  const auto probas = model.predict_proba(train);
  for (const auto& p : probas) {
    REQUIRE(p[static_cast<int>(AppLabel::OpenFoam)] < 1e-12);
  }
}

TEST_CASE("fitting is deterministic") {
  Dataset train = separable_dataset(50, 4, 77);
  train = apply_scaler(fit_scaler(train), train);
  const SvmParams params{SvmKernel::Rbf, 1e-3, 100.0};
  const SvmModel a = SvmModel::fit(params, train);
  const SvmModel b = SvmModel::fit(params, train);
  for (int c = 0; c < kClassCount; ++c) {
    REQUIRE(a.binaries()[c].coef == b.binaries()[c].coef);
    REQUIRE(a.binaries()[c].bias == b.binaries()[c].bias);
    REQUIRE(a.binaries()[c].support == b.binaries()[c].support);
  }
  const auto pa = a.predict_proba(train);
  const auto pb = b.predict_proba(train);
  for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i] == pb[i]);
}

TEST_CASE("degenerate and invalid inputs") {
  const Dataset single = make_dataset({{0.0}, {1.0}},
                                      {AppLabel::Mcnp6, AppLabel::Mcnp6});
  REQUIRE_THROWS_AS(SvmModel::fit(SvmParams{}, single), DegenerateData);

  const Dataset ok =
      make_dataset({{0.0}, {1.0}}, {AppLabel::CadoNfs, AppLabel::Mcnp6});
  REQUIRE_THROWS_AS(SvmModel::fit(SvmParams{SvmKernel::Linear, 1e-3, 0.0}, ok),
                    InvalidParams);
  REQUIRE_THROWS_AS(SvmModel::fit(SvmParams{SvmKernel::Rbf, 0.0, 1.0}, ok),
                    InvalidParams);
}
