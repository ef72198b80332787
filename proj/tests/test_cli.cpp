#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fleetprint/ingest.hpp"
#include "fleetprint/telemetry.hpp"

using namespace fleetprint;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("fleetprint_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct CliResult {
  int exit_code = -1;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

CliResult run_cli(const TempDir& dir, const std::string& args,
                  const std::string& env = "") {
  static int counter = 0;
  const std::string out_path = dir.file(".stdout" + std::to_string(counter++));
  const std::string command = env + (env.empty() ? "" : " ") + FLEETPRINT_BIN +
                              " " + args + " > " + out_path + " 2>/dev/null";
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  return result;
}

// Small corpus shared by the training tests.
std::string make_corpus(const TempDir& dir, const std::string& name,
                        const std::string& extra = "--all --runs 2 --duration 100") {
  const std::string path = dir.file(name);
  const CliResult r =
      run_cli(dir, "simulate " + extra + " --seed 5 --out " + path);
  REQUIRE(r.exit_code == 0);
  return path;
}

}  // namespace

TEST_CASE("simulate reports counts and writes a readable corpus") {
  TempDir dir;
  const std::string path = dir.file("corpus.csv");
  const CliResult r = run_cli(
      dir, "simulate --all --runs 10 --duration 600 --seed 7 --out " + path);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("runs=30") != std::string::npos);
  REQUIRE(r.out.find("buckets_per_run=120") != std::string::npos);
  const auto runs = read_csv_file(path);
  REQUIRE(runs.size() == 30);
}

TEST_CASE("simulate is byte-deterministic for fixed flags") {
  TempDir dir;
  const std::string a = dir.file("a.csv");
  const std::string b = dir.file("b.csv");
  REQUIRE(run_cli(dir, "simulate --all --runs 2 --duration 60 --seed 9 --out " +
                           a).exit_code == 0);
  REQUIRE(run_cli(dir, "simulate --all --runs 2 --duration 60 --seed 9 --out " +
                           b).exit_code == 0);
  REQUIRE(slurp(a) == slurp(b));
  REQUIRE_FALSE(slurp(a).empty());
}

TEST_CASE("FLEETPRINT_SEED provides the default seed") {
  TempDir dir;
  const std::string explicit_path = dir.file("explicit.csv");
  const std::string env_path = dir.file("env.csv");
  REQUIRE(run_cli(dir, "simulate --app mcnp6 --runs 1 --duration 60 --seed 11 --out " +
                           explicit_path).exit_code == 0);
  REQUIRE(run_cli(dir, "simulate --app mcnp6 --runs 1 --duration 60 --out " +
                           env_path, "FLEETPRINT_SEED=11").exit_code == 0);
  REQUIRE(slurp(explicit_path) == slurp(env_path));
}

TEST_CASE("usage errors exit with code 2") {
  TempDir dir;
  REQUIRE(run_cli(dir, "simulate --all --runs 2").exit_code == 2);  // no --out
  REQUIRE(run_cli(dir, "simulate --app quake --out " + dir.file("x.csv"))
              .exit_code == 2);
  REQUIRE(run_cli(dir, "simulate --runs 2 --out " + dir.file("y.csv"))
              .exit_code == 2);  // neither --app nor --all
  REQUIRE(run_cli(dir, "frobnicate").exit_code == 2);
  REQUIRE(run_cli(dir, "train --train missing.csv --classifier nope "
                       "--model-out m.json").exit_code == 2);
}

TEST_CASE("missing input files exit with code 1") {
  TempDir dir;
  REQUIRE(run_cli(dir, "train --train " + dir.file("absent.csv") +
                           " --classifier dt --model-out " + dir.file("m.json"))
              .exit_code == 1);
}

TEST_CASE("train records the default parameters") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "train.csv");

  const std::string knn_model = dir.file("knn.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier knn --model-out " + knn_model)
              .exit_code == 0);
  const auto knn_json = nlohmann::json::parse(slurp(knn_model));
  REQUIRE(knn_json["model"]["params"]["n_neighbors"] == 5);
  REQUIRE(knn_json["model"]["params"]["weights"] == "uniform");
  REQUIRE(knn_json["model"]["params"]["index"] == "ball_tree");

  const std::string svm_model = dir.file("svm.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier svm --model-out " + svm_model)
              .exit_code == 0);
  const auto svm_json = nlohmann::json::parse(slurp(svm_model));
  REQUIRE(svm_json["model"]["params"]["kernel"] == "linear");
  REQUIRE(svm_json["model"]["params"]["c"] == 1000.0);

  const std::string dt_model = dir.file("dt.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --model-out " + dt_model)
              .exit_code == 0);
  const auto dt_json = nlohmann::json::parse(slurp(dt_model));
  REQUIRE(dt_json["model"]["params"]["max_depth"] == 10);
  REQUIRE(dt_json["format_version"] == 1);
}

TEST_CASE("gridsearch prints an in-space winner") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "grid.csv");
  const std::string model = dir.file("grid_dt.json");
  const CliResult r = run_cli(dir, "gridsearch --train " + corpus +
                                       " --classifier dt --model-out " + model);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("winner dt max_depth=") != std::string::npos);
  REQUIRE(r.out.find("candidates=20") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(model));
  const int depth = j["model"]["params"]["max_depth"].get<int>();
  REQUIRE(depth >= 1);
  REQUIRE(depth <= 20);

  REQUIRE(run_cli(dir, "gridsearch --train " + corpus +
                           " --classifier mlp --model-out " + dir.file("x.json"))
              .exit_code == 2);
}

TEST_CASE("evaluate prints accuracy and writes both report forms") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "eval.csv");
  const std::string model = dir.file("dt20.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --max-depth 20 --model-out " + model)
              .exit_code == 0);
  // Depth 20 memorizes its own training corpus.
  const std::string report = dir.file("report.txt");
  const CliResult r = run_cli(dir, "evaluate --model " + model +
                                       " --validation " + corpus +
                                       " --report-out " + report);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("accuracy=1.00") != std::string::npos);
  REQUIRE(slurp(report).find("normalized confusion matrix") != std::string::npos);
  const auto machine = nlohmann::json::parse(slurp(report + ".json"));
  REQUIRE(machine["schema_version"] == 1);
  REQUIRE(machine["accuracy"] == 1.0);
  for (const auto& row : machine["confusion_normalized"]) {
    double sum = 0.0;
    for (const auto& cell : row) sum += cell.get<double>();
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("pipeline mismatch exits with code 4") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "mismatch.csv");
  const std::string model = dir.file("raw.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --model-out " + model)
              .exit_code == 0);
  REQUIRE(run_cli(dir, "evaluate --model " + model + " --validation " + corpus +
                           " --pca-augment").exit_code == 4);

  const std::string pca_model = dir.file("pca.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --pca-augment --model-out " +
                           pca_model).exit_code == 0);
  REQUIRE(run_cli(dir, "evaluate --model " + pca_model + " --validation " +
                           corpus).exit_code == 4);
  REQUIRE(run_cli(dir, "evaluate --model " + pca_model + " --validation " +
                           corpus + " --pca-augment --report-out " +
                           dir.file("pca_report.txt")).exit_code == 0);
}

TEST_CASE("held-out evaluation through the CLI clears 0.90 accuracy") {
  TempDir dir;
  const std::string train =
      make_corpus(dir, "e2e_train.csv", "--all --runs 3 --duration 150");
  const std::string val = dir.file("e2e_val.csv");
  REQUIRE(run_cli(dir, "simulate --all --runs 2 --duration 150 --seed 99 --out " +
                           val).exit_code == 0);
  const std::string model = dir.file("e2e_dt.json");
  REQUIRE(run_cli(dir, "train --train " + train +
                           " --classifier dt --model-out " + model)
              .exit_code == 0);
  const CliResult r =
      run_cli(dir, "evaluate --model " + model + " --validation " + val);
  REQUIRE(r.exit_code == 0);
  const auto at = r.out.rfind("accuracy=");
  REQUIRE(at != std::string::npos);
  REQUIRE(std::stod(r.out.substr(at + 9)) > 0.90);
}

TEST_CASE("help output lists flags with defaults") {
  TempDir dir;
  const CliResult top = run_cli(dir, "--help");
  REQUIRE(top.exit_code == 0);
  REQUIRE(top.out.find("simulate") != std::string::npos);
  REQUIRE(top.out.find("classify") != std::string::npos);
  const CliResult sim = run_cli(dir, "simulate --help");
  REQUIRE(sim.exit_code == 0);
  REQUIRE(sim.out.find("--runs") != std::string::npos);
  REQUIRE(sim.out.find("600") != std::string::npos);  // duration default
  const CliResult classify = run_cli(dir, "classify --help");
  REQUIRE(classify.exit_code == 0);
  REQUIRE(classify.out.find("--window") != std::string::npos);
  REQUIRE(classify.out.find("12") != std::string::npos);
}

TEST_CASE("simulate reads a key=value config file") {
  TempDir dir;
  const std::string config = dir.file("sim.conf");
  {
    std::ofstream out(config);
    out << "duration = 50\nnoise_std_fraction = 0.01\n";
  }
  const std::string path = dir.file("from_config.csv");
  const CliResult r = run_cli(dir, "simulate --app openfoam --runs 1 --config " +
                                       config + " --seed 3 --out " + path);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("buckets_per_run=10") != std::string::npos);
  // An explicit flag overrides the config file.
  const CliResult overridden =
      run_cli(dir, "simulate --app openfoam --runs 1 --config " + config +
                       " --duration 100 --seed 3 --out " + dir.file("o.csv"));
  REQUIRE(overridden.out.find("buckets_per_run=20") != std::string::npos);
}

TEST_CASE("degenerate training data exits with code 3") {
  TempDir dir;
  const std::string corpus =
      make_corpus(dir, "single.csv", "--app mcnp6 --runs 2 --duration 100");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier svm --model-out " + dir.file("m.json"))
              .exit_code == 3);
}

TEST_CASE("classify labels a streamed run") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "clf_train.csv");
  const std::string model = dir.file("clf.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --model-out " + model)
              .exit_code == 0);
  const std::string stream =
      make_corpus(dir, "stream.csv", "--app cado_nfs --runs 1 --duration 100");
  const CliResult r = run_cli(dir, "classify --model " + model + " --stream " +
                                       stream + " --window 1");
  REQUIRE(r.exit_code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::size_t total = 0;
  std::size_t cado = 0;
  while (std::getline(lines, line)) {
    ++total;
    REQUIRE(line.find("CADO_NFS-r0-s5,") == 0);
    if (line.find(",CADO_NFS") == line.size() - 9) ++cado;
  }
  REQUIRE(total == 20);  // 100 s at 5 s period
  REQUIRE(cado >= 18);
}

TEST_CASE("classify settles on the streamed application within the window") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "w_train.csv");
  const std::string model = dir.file("w.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --model-out " + model)
              .exit_code == 0);
  const std::string stream =
      make_corpus(dir, "w_stream.csv", "--app cado_nfs --runs 1 --duration 600");
  const CliResult r = run_cli(dir, "classify --model " + model + " --stream " +
                                       stream + " --window 12");
  REQUIRE(r.exit_code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::size_t late = 0;
  std::size_t late_cado = 0;
  while (std::getline(lines, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    const long bucket = std::stol(line.substr(first + 1, second - first - 1));
    if (bucket < 12) continue;
    ++late;
    if (line.find(",CADO_NFS") == line.size() - 9) ++late_cado;
  }
  REQUIRE(late == 108);  // buckets 12..119
  REQUIRE(static_cast<double>(late_cado) / static_cast<double>(late) >= 0.90);
}

TEST_CASE("classify on an empty stream emits nothing and exits 0") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "e_train.csv");
  const std::string model = dir.file("e.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --model-out " + model)
              .exit_code == 0);
  const std::string empty = dir.file("empty.csv");
  std::ofstream(empty).close();
  const CliResult r =
      run_cli(dir, "classify --model " + model + " --stream " + empty);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.empty());
}

TEST_CASE("classify reads records from standard input") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "stdin_train.csv");
  const std::string model = dir.file("stdin.json");
  REQUIRE(run_cli(dir, "train --train " + corpus +
                           " --classifier dt --model-out " + model)
              .exit_code == 0);
  const std::string stream =
      make_corpus(dir, "stdin_stream.csv", "--app mcnp6 --runs 1 --duration 60");
  const CliResult from_file = run_cli(
      dir, "classify --model " + model + " --stream " + stream + " --window 1");
  // "- " selects stdin; piping the same file must give identical output.
  const CliResult from_stdin = run_cli(
      dir, "classify --model " + model + " --stream - --window 1 < " + stream);
  REQUIRE(from_stdin.exit_code == 0);
  REQUIRE(from_stdin.out == from_file.out);
  REQUIRE_FALSE(from_stdin.out.empty());
}

TEST_CASE("pca prints non-increasing ratios and writes score rows") {
  TempDir dir;
  const std::string corpus = make_corpus(dir, "pca.csv");
  const std::string scores = dir.file("scores.csv");
  const CliResult r = run_cli(dir, "pca --train " + corpus +
                                       " --components 3 --scores-out " + scores);
  REQUIRE(r.exit_code == 0);
  const std::string prefix = "explained_variance_ratio=";
  REQUIRE(r.out.rfind(prefix, 0) == 0);
  std::stringstream ratios(
      r.out.substr(prefix.size(), r.out.find('\n') - prefix.size()));
  std::vector<double> values;
  std::string token;
  while (std::getline(ratios, token, ',')) values.push_back(std::stod(token));
  REQUIRE(values.size() == 3);
  double sum = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    REQUIRE(values[i] <= values[i - 1]);
  }
  for (double v : values) sum += v;
  REQUIRE(sum <= 1.0 + 1e-9);

  std::ifstream score_file(scores);
  std::string line;
  std::size_t rows = 0;
  REQUIRE(std::getline(score_file, line));
  REQUIRE(line == "label,pc1,pc2,pc3");
  while (std::getline(score_file, line)) ++rows;
  REQUIRE(rows == 2 * 3 * 20);  // 2 runs x 3 apps x 20 buckets
}
