#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "fleetprint/classifiers/model.hpp"
#include "fleetprint/detail/rng.hpp"
#include "fleetprint/errors.hpp"
#include "fleetprint/telemetry.hpp"

namespace fleetprint {

// ---------------------------------------------------------------------------
// Confusion matrices and scores
// ---------------------------------------------------------------------------

// Rows are true labels, columns predicted, both in canonical class order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kClassCount>, kClassCount> counts{};

  std::uint64_t row_total(int c) const {
    return counts[c][0] + counts[c][1] + counts[c][2];
  }

  std::uint64_t total() const {
    return row_total(0) + row_total(1) + row_total(2);
  }

  bool row_empty(int c) const { return row_total(c) == 0; }

  double accuracy() const {
    const std::uint64_t n = total();
    if (n == 0) return 0.0;
    return static_cast<double>(counts[0][0] + counts[1][1] + counts[2][2]) /
           static_cast<double>(n);
  }

  // Per-true-class proportions; empty rows normalize to all zeros.
  std::array<std::array<double, kClassCount>, kClassCount> normalized() const {
    std::array<std::array<double, kClassCount>, kClassCount> out{};
    for (int r = 0; r < kClassCount; ++r) {
      const std::uint64_t n = row_total(r);
      if (n == 0) continue;
      for (int c = 0; c < kClassCount; ++c) {
        out[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(n);
      }
    }
    return out;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(const std::vector<AppLabel>& truth,
                                 const std::vector<AppLabel>& predicted) {
  if (truth.size() != predicted.size())
    throw LengthMismatch("label sequences differ in length");
  if (truth.empty()) throw EmptyInput("no labels to tally");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++cm.counts[static_cast<int>(truth[i])][static_cast<int>(predicted[i])];
  }
  return cm;
}

// Per-class precision/recall/F1 plus unweighted macro averages. A 0/0
// denominator yields 0 and sets the class's degenerate flag.
struct ClassScores {
  std::array<double, kClassCount> precision{};
  std::array<double, kClassCount> recall{};
  std::array<double, kClassCount> f1{};
  std::array<bool, kClassCount> degenerate{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

inline ClassScores scores(const ConfusionMatrix& cm) {
  ClassScores out;
  for (int c = 0; c < kClassCount; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    double fp = 0.0;
    double fn = 0.0;
    for (int o = 0; o < kClassCount; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(cm.counts[o][c]);
      fn += static_cast<double>(cm.counts[c][o]);
    }
    if (tp + fp > 0.0) {
      out.precision[c] = tp / (tp + fp);
    } else {
      out.degenerate[c] = true;
    }
    if (tp + fn > 0.0) {
      out.recall[c] = tp / (tp + fn);
    } else {
      out.degenerate[c] = true;
    }
    const double pr = out.precision[c] + out.recall[c];
    out.f1[c] = pr > 0.0 ? 2.0 * out.precision[c] * out.recall[c] / pr : 0.0;
    out.macro_precision += out.precision[c] / kClassCount;
    out.macro_recall += out.recall[c] / kClassCount;
    out.macro_f1 += out.f1[c] / kClassCount;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

// The exhaustive parameter space, defaulting to the full search grid:
// DT depth 1..20; kNN neighbors 1..20 x {uniform, distance} x
// {ball_tree, kd_tree}; SVM {linear, rbf} x gamma {1e-3, 1e-4} x
// C {1, 10, 100, 1000}. The MLP is trained with fixed parameters and has
// no grid.
struct GridSpec {
  std::vector<int> dt_depths;
  std::vector<int> knn_neighbors;
  std::vector<KnnWeights> knn_weights;
  std::vector<KnnIndex> knn_indexes;
  std::vector<SvmKernel> svm_kernels;
  std::vector<double> svm_gammas;
  std::vector<double> svm_cs;

  static GridSpec table_default() {
    GridSpec grid;
    for (int d = 1; d <= 20; ++d) grid.dt_depths.push_back(d);
    for (int k = 1; k <= 20; ++k) grid.knn_neighbors.push_back(k);
    grid.knn_weights = {KnnWeights::Uniform, KnnWeights::Distance};
    grid.knn_indexes = {KnnIndex::BallTree, KnnIndex::KdTree};
    grid.svm_kernels = {SvmKernel::Linear, SvmKernel::Rbf};
    grid.svm_gammas = {1e-3, 1e-4};
    grid.svm_cs = {1.0, 10.0, 100.0, 1000.0};
    return grid;
  }

  // Deterministic enumeration order; the last listed axis varies fastest.
  std::vector<HyperParams> enumerate(ClassifierKind kind) const {
    std::vector<HyperParams> out;
    switch (kind) {
      case ClassifierKind::Dt:
        for (int depth : dt_depths) out.push_back(DtParams{depth});
        break;
      case ClassifierKind::Knn:
        for (int k : knn_neighbors) {
          for (KnnWeights w : knn_weights) {
            for (KnnIndex index : knn_indexes) {
              out.push_back(KnnParams{k, w, index});
            }
          }
        }
        break;
      case ClassifierKind::Svm:
        for (SvmKernel kernel : svm_kernels) {
          for (double gamma : svm_gammas) {
            for (double c : svm_cs) {
              out.push_back(SvmParams{kernel, gamma, c});
            }
          }
        }
        break;
      case ClassifierKind::Mlp:
        throw InvalidParams("the mlp has no search grid");
    }
    return out;
  }
};

// Stratified k-fold assignment: per-class seeded shuffle, then round-robin
// dealing. Returns validation index lists forming a partition of the rows.
inline std::vector<std::vector<std::size_t>> stratified_folds(
    const std::vector<AppLabel>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidParams("folds must be >= 2");
  std::array<std::vector<std::size_t>, kClassCount> per_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    per_class[static_cast<int>(labels[i])].push_back(i);
  }
  detail::Rng rng(detail::mix64(seed ^ 0x666f6c6473ULL));
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (auto& indices : per_class) {
    rng.shuffle(indices);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      out[i % static_cast<std::size_t>(folds)].push_back(indices[i]);
    }
  }
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

struct GridCandidate {
  HyperParams params;
  double mean_macro_f1 = 0.0;
  std::vector<double> fold_macro_f1;
};

struct GridResult {
  HyperParams best;
  std::vector<GridCandidate> table;  // enumeration order
};

// Exhaustive stratified cross-validated search over the grid. The
// objective is mean macro-F1 across folds; ties keep the first candidate
// in enumeration order.
inline GridResult grid_search(ClassifierKind kind, const GridSpec& grid,
                              const Dataset& train, int folds = 5,
                              std::uint64_t seed = 0) {
  const std::vector<AppLabel> labels = labels_of(train);
  std::array<std::size_t, kClassCount> per_class{};
  for (AppLabel l : labels) ++per_class[static_cast<int>(l)];
  for (int c = 0; c < kClassCount; ++c) {
    if (per_class[c] > 0 && per_class[c] < static_cast<std::size_t>(folds))
      throw InsufficientData("class " + std::string(app_name(kClassOrder[c])) +
                             " has fewer rows than folds");
  }

  const auto fold_indices = stratified_folds(labels, folds, seed);
  std::vector<std::pair<Dataset, Dataset>> splits;  // (fit part, val part)
  splits.resize(fold_indices.size());
  for (std::size_t f = 0; f < fold_indices.size(); ++f) {
    std::vector<bool> held_out(train.rows.size(), false);
    for (std::size_t i : fold_indices[f]) held_out[i] = true;
    splits[f].first.feature_names = train.feature_names;
    splits[f].second.feature_names = train.feature_names;
    for (std::size_t i = 0; i < train.rows.size(); ++i) {
      (held_out[i] ? splits[f].second : splits[f].first)
          .rows.push_back(train.rows[i]);
    }
  }

  GridResult result;
  result.table.reserve(grid.enumerate(kind).size());
  double best_score = -1.0;
  for (const HyperParams& params : grid.enumerate(kind)) {
    GridCandidate candidate;
    candidate.params = params;
    for (const auto& [fit_part, val_part] : splits) {
      const TrainedModel model = fit(params, fit_part, seed);
      const ClassScores fold_scores =
          scores(confusion(labels_of(val_part), predict(model, val_part)));
      candidate.fold_macro_f1.push_back(fold_scores.macro_f1);
      candidate.mean_macro_f1 += fold_scores.macro_f1;
    }
    candidate.mean_macro_f1 /= static_cast<double>(fold_indices.size());
    if (candidate.mean_macro_f1 > best_score) {
      best_score = candidate.mean_macro_f1;
      result.best = candidate.params;
    }
    result.table.push_back(std::move(candidate));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

struct EvalReport {
  std::string classifier;
  HyperParams params;
  ConfusionMatrix cm;
  ClassScores class_scores;
  std::size_t row_count = 0;
};

inline EvalReport evaluate(const TrainedModel& model, const Dataset& validation) {
  if (validation.width() != model_width(model))
    throw DimensionMismatch("validation width does not match the model");
  EvalReport report;
  report.classifier = std::string(classifier_name(model_kind(model)));
  report.params = model_params(model);
  report.row_count = validation.rows.size();
  report.cm = confusion(labels_of(validation), predict(model, validation));
  report.class_scores = scores(report.cm);
  return report;
}

// ---------------------------------------------------------------------------
// Raw-versus-augmented comparison
// ---------------------------------------------------------------------------

struct AugmentEntry {
  std::string classifier;
  ClassScores raw;
  ClassScores augmented;
  std::array<double, kClassCount> f1_delta{};  // augmented minus raw
};

inline std::vector<AugmentEntry> compare_augmented(
    const std::vector<EvalReport>& raw, const std::vector<EvalReport>& augmented) {
  std::map<std::string, const EvalReport*> by_name;
  for (const EvalReport& r : augmented) by_name[r.classifier] = &r;
  if (by_name.size() != augmented.size() || raw.size() != augmented.size())
    throw KeyMismatch("classifier sets do not match");
  std::vector<AugmentEntry> out;
  out.reserve(raw.size());
  for (const EvalReport& r : raw) {
    const auto it = by_name.find(r.classifier);
    if (it == by_name.end())
      throw KeyMismatch("no augmented report for '" + r.classifier + "'");
    AugmentEntry entry;
    entry.classifier = r.classifier;
    entry.raw = r.class_scores;
    entry.augmented = it->second->class_scores;
    for (int c = 0; c < kClassCount; ++c) {
      entry.f1_delta[c] = entry.augmented.f1[c] - entry.raw.f1[c];
    }
    out.push_back(std::move(entry));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text rendering (2 decimal places, matching the report conventions)
// ---------------------------------------------------------------------------

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// "raw [augmented]" cell.
inline std::string bracket_cell(double raw, double augmented) {
  return fmt2(raw) + " [" + fmt2(augmented) + "]";
}

namespace detail {

inline std::string pad_left(const std::string& text, std::size_t width) {
  return text.size() >= width ? text
                              : std::string(width - text.size(), ' ') + text;
}

inline std::string pad_right(const std::string& text, std::size_t width) {
  return text.size() >= width ? text
                              : text + std::string(width - text.size(), ' ');
}

}  // namespace detail

inline std::string report_text(const EvalReport& report) {
  const auto normalized = report.cm.normalized();
  std::string out;
  out += "== " + report.classifier + " normalized confusion matrix ==\n";
  out += "params: " + params_text(report.params) + "\n";
  out += detail::pad_right("true \\ predicted", 18);
  for (AppLabel a : kClassOrder) {
    out += detail::pad_left(std::string(app_name(a)), 10);
  }
  out += "\n";
  for (int r = 0; r < kClassCount; ++r) {
    out += detail::pad_right(std::string(app_name(kClassOrder[r])), 18);
    for (int c = 0; c < kClassCount; ++c) {
      out += detail::pad_left(fmt2(normalized[r][c]), 10);
    }
    if (report.cm.row_empty(r)) out += "  (no rows)";
    out += "\n";
  }
  out += "\n== " + report.classifier + " scoring statistics ==\n";
  out += detail::pad_right("", 18);
  out += detail::pad_left("precision", 10);
  out += detail::pad_left("recall", 10);
  out += detail::pad_left("f1-score", 10);
  out += "\n";
  const ClassScores& s = report.class_scores;
  for (int c = 0; c < kClassCount; ++c) {
    out += detail::pad_right(std::string(app_name(kClassOrder[c])), 18);
    out += detail::pad_left(fmt2(s.precision[c]), 10);
    out += detail::pad_left(fmt2(s.recall[c]), 10);
    out += detail::pad_left(fmt2(s.f1[c]), 10);
    if (s.degenerate[c]) out += "  (degenerate)";
    out += "\n";
  }
  out += detail::pad_right("macro", 18);
  out += detail::pad_left(fmt2(s.macro_precision), 10);
  out += detail::pad_left(fmt2(s.macro_recall), 10);
  out += detail::pad_left(fmt2(s.macro_f1), 10);
  out += "\n\nrows: " + std::to_string(report.row_count) +
         "  accuracy: " + fmt2(report.cm.accuracy()) + "\n";
  return out;
}

// Tables with "raw [augmented]" cells per classifier.
inline std::string comparison_text(const std::vector<AugmentEntry>& entries) {
  std::string out;
  for (const AugmentEntry& e : entries) {
    out += "== " + e.classifier + " scoring statistics, raw [augmented] ==\n";
    out += detail::pad_right("", 18);
    out += detail::pad_left("precision", 14);
    out += detail::pad_left("recall", 14);
    out += detail::pad_left("f1-score", 14);
    out += detail::pad_left("delta-f1", 10);
    out += "\n";
    for (int c = 0; c < kClassCount; ++c) {
      out += detail::pad_right(std::string(app_name(kClassOrder[c])), 18);
      out += detail::pad_left(bracket_cell(e.raw.precision[c], e.augmented.precision[c]), 14);
      out += detail::pad_left(bracket_cell(e.raw.recall[c], e.augmented.recall[c]), 14);
      out += detail::pad_left(bracket_cell(e.raw.f1[c], e.augmented.f1[c]), 14);
      char delta[16];
      std::snprintf(delta, sizeof(delta), "%+.2f", e.f1_delta[c]);
      out += detail::pad_left(delta, 10);
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

}  // namespace fleetprint
