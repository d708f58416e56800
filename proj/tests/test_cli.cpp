#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "misp/data.hpp"
#include "misp/model.hpp"
#include "misp/io.hpp"

namespace fs = std::filesystem;

namespace {

// End-to-end runs of the installed binary; MISP_BIN is set by ctest.
std::string binary() {
  const char* bin = std::getenv("MISP_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

fs::path workdir() {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "misp_cli_tests" /
                       ("run_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = binary() + " " + args + " > " + out_file.string() +
                          " 2> " + err_file.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::string write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  return path.string();
}

const std::string kSimConfig =
    "[simulate]\n"
    "sites = -75:0; -74.93:0.5; -74.86:1\n"
    "cores_per_site = 2\n"
    "n_depths = 8\n"
    "campaigns = c1, c2\n"
    "[sampler]\n"
    "seed = 2\n";

const std::string kFitSampler =
    "[sampler]\n"
    "n_chains = 2\n"
    "n_warmup = 150\n"
    "n_keep = 150\n"
    "leapfrog_steps = 8\n"
    "seed = 31\n";

// Simulated dataset shared by the pipeline cases, built once.
fs::path dataset_path() {
  static fs::path path;
  if (path.empty()) {
    const fs::path dir = workdir();
    const std::string cfg = write_file(dir / "sim.ini", kSimConfig);
    const RunResult r =
        run("simulate --config " + cfg + " --out " + dir.string(), dir);
    REQUIRE(r.code == 0);
    path = dir / "data.csv";
    REQUIRE(fs::exists(path));
  }
  return path;
}

}  // namespace

TEST_CASE("simulate emits an ingestible dataset with truth and manifest") {
  const fs::path dir = workdir();
  const std::string cfg = write_file(dir / "sim.ini", kSimConfig);
  const RunResult r =
      run("simulate --config " + cfg + " --out " + dir.string(), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("n_sites=3 n_cores=6") != std::string::npos);
  CHECK(r.out.find("wrote: ") != std::string::npos);

  const misp::Dataset data = misp::ingest((dir / "data.csv").string());
  CHECK(data.n_sites() == 3);
  CHECK(data.n_cores() == 6);
  CHECK(data.campaigns == std::vector<std::string>{"c1", "c2"});

  // truth.csv names one value per model parameter
  std::ifstream truth(dir / "truth.csv");
  REQUIRE(truth.is_open());
  std::string line;
  int rows = 0;
  while (std::getline(truth, line)) ++rows;
  CHECK(rows == 1 + 38);  // header + dim for 3 sites, 2 campaigns

  nlohmann::json manifest;
  std::ifstream mj(dir / "manifest.json");
  REQUIRE(mj.is_open());
  mj >> manifest;
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 2);
  CHECK(manifest["data_hash"] == "");

  SUBCASE("prior curve panels") {
    const fs::path cdir = workdir();
    const std::string ccfg = write_file(cdir / "curves.ini",
                                        "[simulate]\n"
                                        "mode = prior_curves\n"
                                        "n_curves = 20\n"
                                        "curve_points = 11\n"
                                        "[sampler]\n"
                                        "seed = 4\n");
    const RunResult cr =
        run("simulate --config " + ccfg + " --out " + cdir.string(), cdir);
    REQUIRE(cr.code == 0);
    std::ifstream curves(cdir / "prior_curves.csv");
    REQUIRE(curves.is_open());
    rows = 0;
    while (std::getline(curves, line)) ++rows;
    CHECK(rows == 1 + 20 * 11);
  }
}

TEST_CASE("fit, predict, and diagnose chain together") {
  const fs::path data = dataset_path();
  const fs::path fit_dir = workdir();
  const std::string fit_cfg = write_file(fit_dir / "fit.ini", kFitSampler);

  const RunResult fit = run("fit --config " + fit_cfg + " --data " +
                                data.string() + " --out " + fit_dir.string() +
                                " --threads 1",
                            fit_dir);
  REQUIRE(fit.code == 0);
  CHECK(fit.out.find("n_sites=3") != std::string::npos);
  REQUIRE(fs::exists(fit_dir / "samples.csv"));
  REQUIRE(fs::exists(fit_dir / "summary.csv"));

  std::ifstream summary(fit_dir / "summary.csv");
  std::string line;
  int rows = 0;
  while (std::getline(summary, line)) ++rows;
  CHECK(rows == 1 + 38);

  SUBCASE("predict consumes the saved samples") {
    const fs::path pred_dir = workdir();
    const std::string pred_cfg = write_file(
        pred_dir / "pred.ini",
        kFitSampler +
            "[predict]\n"
            "sites = site_1\n"
            "targets = -74.9:0.25\n"
            "labels = midpoint\n"
            "depths = 5, 70\n"
            "mode = both\n"
            "campaign = c1\n"
            "n = 8\n"
            "x_max = 140\n"
            "thin = 2\n"
            "samples = " +
            (fit_dir / "samples.csv").string() + "\n");
    const RunResult pred =
        run("predict --config " + pred_cfg + " --data " + data.string() +
                " --out " + pred_dir.string(),
            pred_dir);
    REQUIRE(pred.code == 0);
    const std::string curves = slurp(pred_dir / "curves.csv");
    // two bundles x two targets x two depths
    CHECK(std::count(curves.begin(), curves.end(), '\n') == 1 + 8);
    CHECK(curves.find("midpoint,5,") != std::string::npos);
    CHECK(curves.find("site_1,70,") != std::string::npos);
    CHECK(curves.find("mean_curve") != std::string::npos);
    CHECK(curves.find("noisy_measurement") != std::string::npos);
  }

  SUBCASE("diagnose reads any samples file") {
    const fs::path diag_dir = workdir();
    const RunResult diag =
        run("diagnose --data " + (fit_dir / "samples.csv").string() +
                " --out " + diag_dir.string(),
            diag_dir);
    REQUIRE(diag.code == 0);
    CHECK(diag.out.find("parameters=38 chains=2 draws_per_chain=150") !=
          std::string::npos);
    rows = 0;
    std::ifstream dfile(diag_dir / "diagnostics.csv");
    while (std::getline(dfile, line)) ++rows;
    CHECK(rows == 1 + 38);
    CHECK(fs::exists(diag_dir / "traces.csv"));
  }

  SUBCASE("repeat runs and thread counts do not move the draws") {
    const fs::path again_dir = workdir();
    const RunResult again =
        run("fit --config " + fit_cfg + " --data " + data.string() +
                " --out " + again_dir.string() + " --threads 2",
            again_dir);
    REQUIRE(again.code == 0);
    CHECK(slurp(again_dir / "samples.csv") ==
          slurp(fit_dir / "samples.csv"));
  }

  SUBCASE("the seed flag overrides the config") {
    const fs::path seed_dir = workdir();
    const RunResult seeded =
        run("fit --config " + fit_cfg + " --data " + data.string() +
                " --out " + seed_dir.string() + " --seed 7",
            seed_dir);
    REQUIRE(seeded.code == 0);
    CHECK(slurp(seed_dir / "samples.csv") !=
          slurp(fit_dir / "samples.csv"));
    nlohmann::json manifest;
    std::ifstream mj(seed_dir / "manifest.json");
    mj >> manifest;
    CHECK(manifest["seed"] == 7);
  }
}

TEST_CASE("cv ranks competing configurations") {
  const fs::path data = dataset_path();
  const fs::path dir = workdir();
  const std::string base =
      "[sampler]\n"
      "n_chains = 2\n"
      "n_warmup = 100\n"
      "n_keep = 100\n"
      "leapfrog_steps = 8\n"
      "seed = 12\n"
      "[cv]\n"
      "n_folds = 2\n";
  const std::string full = write_file(dir / "full.ini",
                                      base + "[model]\nlabel = full\n");
  const std::string homo = write_file(
      dir / "homo.ini",
      base + "[model]\nlabel = homo\nvariance_mode = homoscedastic\n");

  const RunResult r = run("cv --config " + full + " --config " + homo +
                              " --data " + data.string() + " --out " +
                              dir.string(),
                          dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("cv: full (2 folds)") != std::string::npos);
  CHECK(r.out.find("cv: homo (2 folds)") != std::string::npos);

  std::ifstream report(dir / "cv_report.csv");
  REQUIRE(report.is_open());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(report, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "model_label,ISE,IAE,CRPS,relative_CRPS");
  CHECK(lines[1].rfind("full,", 0) == 0);
  CHECK(lines[2].rfind("homo,", 0) == 0);

  // the better model anchors the relative column at exactly one
  double best = 1e300;
  for (int i = 1; i <= 2; ++i) {
    const std::string rel = lines[i].substr(lines[i].rfind(',') + 1);
    best = std::min(best, std::stod(rel));
  }
  CHECK(best == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("failures map onto the exit code contract") {
  const fs::path dir = workdir();

  SUBCASE("missing data file is an io error") {
    const RunResult r = run("fit --data /nonexistent/data.csv", dir);
    CHECK(r.code == 8);
    CHECK(r.err.find("error: [io]") != std::string::npos);
  }
  SUBCASE("unknown config key is a config error") {
    const std::string cfg =
        write_file(dir / "bad.ini", "[model]\nrho_nice = 1\n");
    const RunResult r = run("simulate --config " + cfg, dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("error: [config]") != std::string::npos);
    CHECK(r.err.find("bad.ini:2:") != std::string::npos);
  }
  SUBCASE("too many folds is a plan error") {
    const fs::path data = dataset_path();
    const std::string cfg = write_file(dir / "folds.ini",
                                       "[cv]\nn_folds = 40\n"
                                       "[sampler]\nn_warmup = 50\n"
                                       "n_keep = 50\n");
    const RunResult r = run("cv --config " + cfg + " --data " +
                                data.string() + " --out " + dir.string(),
                            dir);
    CHECK(r.code == 7);
    CHECK(r.err.find("error: [plan]") != std::string::npos);
  }
  SUBCASE("unknown predict site is a data error") {
    const fs::path data = dataset_path();
    // the samples file is opened before site labels resolve, so hand the
    // command a structurally valid one
    const misp::Dataset d = misp::ingest(data.string());
    misp::DensityModel model(misp::default_model_config(), d);
    misp::PosteriorSamples s;
    s.names = model.names();
    s.chain_draws = {Eigen::MatrixXd::Zero(2, model.dim())};
    misp::write_samples_csv((dir / "samples.csv").string(), s);
    const std::string cfg = write_file(
        dir / "ghost.ini",
        "[predict]\nsites = site_99\nsamples = " +
            (dir / "samples.csv").string() + "\n");
    const RunResult r = run("predict --config " + cfg + " --data " +
                                data.string() + " --out " + dir.string(),
                            dir);
    CHECK(r.code == 3);
    CHECK(r.err.find("error: [data]") != std::string::npos);
  }
  SUBCASE("a subcommand is required") {
    const RunResult r = run("", dir);
    CHECK(r.code != 0);
  }
  SUBCASE("fit requires --data") {
    const RunResult r = run("fit", dir);
    CHECK(r.code != 0);
  }
}
