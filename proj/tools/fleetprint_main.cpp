// fleetprint: simulate telemetry corpora, train and evaluate workload
// classifiers, and classify live record streams.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fleetprint/eval.hpp"
#include "fleetprint/ingest.hpp"
#include "fleetprint/pipeline.hpp"
#include "fleetprint/serialize.hpp"
#include "fleetprint/simulate.hpp"
#include "fleetprint/telemetry.hpp"

namespace {

using namespace fleetprint;

// Exit codes: 0 ok, 1 I/O or data failure, 2 usage, 3 degenerate training
// data, 4 train/eval pipeline mismatch.
constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitPipelineMismatch = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t env_default_seed() {
  const char* raw = std::getenv("FLEETPRINT_SEED");
  if (!raw) return 0;
  try {
    return std::stoull(raw);
  } catch (const std::exception&) {
    return 0;
  }
}

std::string join_output(const std::string& dir, const std::string& path) {
  if (dir.empty() || path.empty() || path.front() == '/') return path;
  return dir + "/" + path;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string format = "text";
  bool timestamps = false;
};

struct SimulateOptions {
  std::string app_flag;
  bool all = false;
  int runs = 10;
  double duration = 600.0;
  double period = 5.0;
  double noise = 0.05;
  std::string nodes_flag;
  std::string config_path;
  std::string out;
};

int cmd_simulate(const GlobalOptions& global, const SimulateOptions& opt,
                 const CLI::App* sub) {
  SimConfig base;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw IoError("cannot open '" + opt.config_path + "'");
    base = load_sim_config(in);
  }
  if (sub->count("--duration")) base.duration = opt.duration;
  if (sub->count("--period")) base.sample_period = opt.period;
  if (sub->count("--noise")) base.noise_std_fraction = opt.noise;
  if (!opt.nodes_flag.empty()) {
    std::vector<NodeId> nodes;
    std::stringstream ss(opt.nodes_flag);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      nodes.push_back({name, nodes.empty() ? NodeRole::Master : NodeRole::Slave});
    }
    if (nodes.empty()) throw UsageError("--nodes needs at least one name");
    base.nodes = std::move(nodes);
  }

  std::vector<AppLabel> apps;
  if (opt.all) {
    apps.assign(kClassOrder.begin(), kClassOrder.end());
  } else if (!opt.app_flag.empty()) {
    const auto app = app_from_token(opt.app_flag);
    if (!app)
      throw UsageError("unknown --app '" + opt.app_flag +
                       "' (expected cado_nfs, mcnp6 or openfoam)");
    apps.push_back(*app);
  } else {
    throw UsageError("one of --app or --all is required");
  }

  std::vector<TelemetryRun> runs;
  for (AppLabel app : apps) {
    for (int i = 0; i < opt.runs; ++i) {
      SimConfig config = base;
      config.app = app;
      config.seed = run_seed(global.seed, app, i);
      std::string id = std::string(app_name(app)) + "-r" + std::to_string(i) +
                       "-s" + std::to_string(global.seed);
      runs.push_back(simulate_run(config, std::move(id)));
    }
  }

  const std::string path = join_output(global.output_dir, opt.out);
  const std::uint64_t bytes = write_csv_file(runs, path);
  std::size_t records = 0;
  for (const TelemetryRun& run : runs) records += run.samples.size();
  const auto buckets = static_cast<std::size_t>(base.duration / base.sample_period);
  std::cout << "runs=" << runs.size() << " records=" << records
            << " buckets_per_run=" << buckets << " bytes=" << bytes << " out="
            << path << "\n";
  return kExitOk;
}

struct TrainOptions {
  std::string train_path;
  std::string classifier;
  bool pca_augment = false;
  std::string model_out;
  int folds = 5;
  // Tuned defaults for the per-classifier flags.
  int max_depth = 10;
  int neighbors = 5;
  std::string weights = "uniform";
  std::string index = "ball_tree";
  std::string kernel = "linear";
  double gamma = 1e-3;
  double c = 1000.0;
  int epochs = 200;
  int batch = 32;
  double lr = 0.01;
};

HyperParams params_from_flags(ClassifierKind kind, const TrainOptions& opt) {
  switch (kind) {
    case ClassifierKind::Dt:
      return DtParams{opt.max_depth};
    case ClassifierKind::Knn: {
      const auto weights = knn_weights_from_name(opt.weights);
      if (!weights) throw UsageError("unknown --weights '" + opt.weights + "'");
      const auto index = knn_index_from_name(opt.index);
      if (!index) throw UsageError("unknown --index '" + opt.index + "'");
      return KnnParams{opt.neighbors, *weights, *index};
    }
    case ClassifierKind::Svm: {
      const auto kernel = svm_kernel_from_name(opt.kernel);
      if (!kernel) throw UsageError("unknown --kernel '" + opt.kernel + "'");
      return SvmParams{*kernel, opt.gamma, opt.c};
    }
    case ClassifierKind::Mlp:
      return MlpParams{opt.epochs, opt.batch, opt.lr};
  }
  throw UsageError("unknown classifier");
}

int cmd_train(const GlobalOptions& global, const TrainOptions& opt,
              bool run_grid_search) {
  const auto kind = classifier_from_name(opt.classifier);
  if (!kind)
    throw UsageError("unknown --classifier '" + opt.classifier +
                     "' (expected dt, knn, svm or mlp)");
  if (run_grid_search && *kind == ClassifierKind::Mlp)
    throw UsageError("the mlp has no search grid; use train instead");

  const Dataset raw = featurize_corpus(read_csv_file(opt.train_path));
  const PipelinePrep prep = prepare_training(raw, opt.pca_augment);

  HyperParams params = params_from_flags(*kind, opt);
  if (run_grid_search) {
    const GridResult result = grid_search(*kind, GridSpec::table_default(),
                                          prep.transformed, opt.folds,
                                          global.seed);
    params = result.best;
    double best = 0.0;
    for (const GridCandidate& c : result.table) {
      if (c.params == params) best = c.mean_macro_f1;
    }
    std::cout << "winner " << classifier_name(*kind) << " "
              << params_text(params) << " mean_macro_f1=" << fmt6(best)
              << " candidates=" << result.table.size() << "\n";
  }

  ModelBundle bundle{fit(params, prep.transformed, global.seed), prep.scaler,
                     prep.pca, prep.pca_augment, prep.transformed.feature_names};
  const std::string path = join_output(global.output_dir, opt.model_out);
  save_bundle(bundle, path);
  std::cout << "trained " << classifier_name(*kind) << " "
            << params_text(params) << " rows=" << prep.transformed.rows.size()
            << " features=" << prep.transformed.width() << " model=" << path
            << "\n";
  return kExitOk;
}

struct EvaluateOptions {
  std::string model_path;
  std::string validation_path;
  bool pca_augment = false;
  std::string report_out;
};

int cmd_evaluate(const GlobalOptions& global, const EvaluateOptions& opt) {
  const ModelBundle bundle = load_bundle(opt.model_path);
  if (bundle.pca.has_value() != opt.pca_augment)
    throw PipelineMismatch(bundle.pca
                               ? "model was trained with --pca-augment"
                               : "model was trained without --pca-augment");
  const Dataset raw = featurize_corpus(read_csv_file(opt.validation_path));
  const EvalReport report = evaluate_bundle(bundle, raw);

  std::string text = report_text(report);
  if (global.timestamps) {
    text += "generated-at: " + std::to_string(std::time(nullptr)) + "\n";
  }
  if (!opt.report_out.empty()) {
    const std::string path = join_output(global.output_dir, opt.report_out);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    std::ofstream machine(path + ".json", std::ios::binary);
    if (!machine) throw IoError("cannot open '" + path + ".json' for writing");
    machine << report_json(report).dump(2) << "\n";
  }
  if (global.format == "machine") {
    std::cout << report_json(report).dump(2) << "\n";
  } else {
    std::cout << text;
  }
  std::cout << "accuracy=" << fmt2(report.cm.accuracy()) << "\n";
  return kExitOk;
}

struct ClassifyOptions {
  std::string model_path;
  std::string stream = "-";
  std::size_t window = 12;
  double period = 5.0;
};

int cmd_classify(const GlobalOptions&, const ClassifyOptions& opt) {
  const ModelBundle bundle = load_bundle(opt.model_path);
  std::ifstream file;
  if (opt.stream != "-") {
    file.open(opt.stream, std::ios::binary);
    if (!file) throw IoError("cannot open '" + opt.stream + "' for reading");
  }
  std::istream& in = opt.stream == "-" ? std::cin : file;

  StreamSubscriber subscriber(in, opt.window, opt.period);
  while (true) {
    std::optional<StreamWindow> event;
    try {
      event = subscriber.next();
    } catch (const ParseError& e) {
      std::cerr << "parse error: " << e.what() << "\n";
      continue;
    }
    if (!event) break;
    const Dataset transformed = transform_features(bundle, event->window);
    const auto probas = predict_proba(bundle.model, transformed);
    ProbaTriple mean{};
    for (const ProbaTriple& p : probas) {
      for (int c = 0; c < kClassCount; ++c) mean[c] += p[c] / probas.size();
    }
    const AppLabel label = detail::argmax_label(mean);
    std::cout << event->run_id << "," << event->bucket_index;
    for (int c = 0; c < kClassCount; ++c) std::cout << "," << fmt6(mean[c]);
    std::cout << "," << app_name(label) << "\n";
  }
  return kExitOk;
}

struct PcaOptions {
  std::string train_path;
  std::size_t components = 3;
  std::string scores_out;
};

int cmd_pca(const GlobalOptions& global, const PcaOptions& opt) {
  const Dataset raw = featurize_corpus(read_csv_file(opt.train_path));
  const Scaler scaler = fit_scaler(raw);
  const Dataset standardized = apply_scaler(scaler, raw);
  const PcaModel model = pca_fit(standardized, opt.components);

  std::cout << "explained_variance_ratio=";
  for (std::size_t i = 0; i < model.explained_variance_ratio.size(); ++i) {
    std::cout << (i ? "," : "") << fmt6(model.explained_variance_ratio[i]);
  }
  std::cout << "\n";

  if (!opt.scores_out.empty()) {
    const auto scores = pca_transform(model, standardized);
    const std::string path = join_output(global.output_dir, opt.scores_out);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "label";
    for (std::size_t k = 0; k < opt.components; ++k) {
      out << ",pc" << (k + 1);
    }
    out << "\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out << app_name(*standardized.rows[i].label);
      for (double s : scores[i]) out << "," << format_double(s);
      out << "\n";
    }
    std::cout << "scores=" << path << " rows=" << scores.size() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fleetprint: telemetry-based workload fingerprinting"};
  app.require_subcommand(1);

  GlobalOptions global;
  global.seed = env_default_seed();
  app.add_option("--seed", global.seed,
                 "RNG seed (default: FLEETPRINT_SEED or 0)")
      ->capture_default_str();
  app.add_option("--output-dir", global.output_dir,
                 "directory prepended to relative output paths");
  app.add_option("--format", global.format, "stdout format: text or machine")
      ->check(CLI::IsMember({"text", "machine"}))
      ->capture_default_str();
  app.add_flag("--timestamps", global.timestamps,
               "embed a generation timestamp in text reports");

  SimulateOptions sim;
  CLI::App* sub_sim = app.add_subcommand(
      "simulate", "generate a labeled telemetry corpus as CSV");
  sub_sim->add_option("--app", sim.app_flag,
                      "application: cado_nfs, mcnp6 or openfoam");
  sub_sim->add_flag("--all", sim.all, "simulate all three applications");
  sub_sim->add_option("--runs", sim.runs, "runs per application")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub_sim->add_option("--duration", sim.duration, "run length in seconds")
      ->capture_default_str();
  sub_sim->add_option("--period", sim.period, "sample period in seconds")
      ->capture_default_str();
  sub_sim->add_option("--noise", sim.noise,
                      "multiplicative noise std as a fraction of the signal")
      ->capture_default_str();
  sub_sim->add_option("--nodes", sim.nodes_flag,
                      "comma-separated node names, first is the master");
  sub_sim->add_option("--config", sim.config_path,
                      "key=value simulator config file");
  sub_sim->add_option("--out", sim.out, "output CSV path")->required();

  TrainOptions train;
  CLI::App* sub_train =
      app.add_subcommand("train", "fit one classifier with fixed parameters");
  CLI::App* sub_grid = app.add_subcommand(
      "gridsearch", "exhaustive cross-validated parameter search, then fit");
  for (CLI::App* sub : {sub_train, sub_grid}) {
    sub->add_option("--train", train.train_path, "training corpus CSV")
        ->required();
    sub->add_option("--classifier", train.classifier, "dt, knn, svm or mlp")
        ->required();
    sub->add_flag("--pca-augment", train.pca_augment,
                  "append the first two PCA score columns");
    sub->add_option("--model-out", train.model_out, "model bundle path")
        ->required();
  }
  sub_grid->add_option("--folds", train.folds, "cross-validation folds")
      ->capture_default_str()
      ->check(CLI::Range(2, 20));
  sub_train->add_option("--max-depth", train.max_depth, "dt: depth limit")
      ->capture_default_str();
  sub_train->add_option("--neighbors", train.neighbors, "knn: neighbor count")
      ->capture_default_str();
  sub_train->add_option("--weights", train.weights,
                        "knn: uniform or distance")
      ->capture_default_str();
  sub_train->add_option("--index", train.index,
                        "knn: brute, kd_tree or ball_tree")
      ->capture_default_str();
  sub_train->add_option("--kernel", train.kernel, "svm: linear or rbf")
      ->capture_default_str();
  sub_train->add_option("--gamma", train.gamma, "svm: rbf kernel width")
      ->capture_default_str();
  sub_train->add_option("--c", train.c, "svm: box constraint")
      ->capture_default_str();
  sub_train->add_option("--epochs", train.epochs, "mlp: training epochs")
      ->capture_default_str();
  sub_train->add_option("--batch", train.batch, "mlp: minibatch size")
      ->capture_default_str();
  sub_train->add_option("--lr", train.lr, "mlp: learning rate")
      ->capture_default_str();

  EvaluateOptions eval_opt;
  CLI::App* sub_eval = app.add_subcommand(
      "evaluate", "score a trained model on a validation corpus");
  sub_eval->add_option("--model", eval_opt.model_path, "model bundle path")
      ->required();
  sub_eval->add_option("--validation", eval_opt.validation_path,
                       "validation corpus CSV")
      ->required();
  sub_eval->add_flag("--pca-augment", eval_opt.pca_augment,
                     "must match the training-time flag");
  sub_eval->add_option("--report-out", eval_opt.report_out,
                       "write the text report here and JSON alongside");

  ClassifyOptions classify;
  CLI::App* sub_classify = app.add_subcommand(
      "classify", "classify a record stream, one line per completed bucket");
  sub_classify->add_option("--model", classify.model_path, "model bundle path")
      ->required();
  sub_classify
      ->add_option("--stream", classify.stream, "record stream file, or - for stdin")
      ->capture_default_str();
  sub_classify->add_option("--window", classify.window,
                           "sliding window length in buckets")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub_classify->add_option("--period", classify.period,
                           "bucket period in seconds")
      ->capture_default_str();

  PcaOptions pca_opt;
  CLI::App* sub_pca = app.add_subcommand(
      "pca", "explained variance and component scores of a corpus");
  sub_pca->add_option("--train", pca_opt.train_path, "training corpus CSV")
      ->required();
  sub_pca->add_option("--components", pca_opt.components, "retained components")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub_pca->add_option("--scores-out", pca_opt.scores_out,
                      "labeled component-score CSV for plotting");

  // Global flags may appear after the subcommand name.
  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (sub_sim->parsed()) return cmd_simulate(global, sim, sub_sim);
    if (sub_train->parsed()) return cmd_train(global, train, false);
    if (sub_grid->parsed()) return cmd_train(global, train, true);
    if (sub_eval->parsed()) return cmd_evaluate(global, eval_opt);
    if (sub_classify->parsed()) return cmd_classify(global, classify);
    if (sub_pca->parsed()) return cmd_pca(global, pca_opt);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidParams& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DegenerateData& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const PipelineMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipelineMismatch;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
