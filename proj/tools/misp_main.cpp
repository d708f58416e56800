#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "misp/errors.hpp"
#include "misp/io.hpp"
#include "misp/parallel.hpp"

namespace fs = std::filesystem;

namespace {

struct Args {
  std::vector<std::string> configs;
  std::string data;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;  // 0 -> MISP_THREADS env, else 1
};

int resolve_threads(const Args& a) {
  if (a.threads > 0) return a.threads;
  if (const char* env = std::getenv("MISP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

misp::RunConfig load_single_config(const Args& a) {
  if (a.configs.size() > 1) {
    misp::throw_error(misp::ErrorCategory::Config,
                      "this command takes at most one --config");
  }
  misp::RunConfig cfg = a.configs.empty()
                            ? misp::default_run_config()
                            : misp::parse_run_config(a.configs[0]);
  if (a.seed_given) cfg.sampler.seed = a.seed;
  return cfg;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    misp::throw_error(misp::ErrorCategory::Io, "cannot open '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string out_path(const Args& a, const std::string& name) {
  fs::create_directories(a.out);
  return (fs::path(a.out) / name).string();
}

std::vector<double> depth_grid(const misp::ModelConfig& model,
                               const std::vector<double>& explicit_depths,
                               int n_points) {
  if (!explicit_depths.empty()) return explicit_depths;
  if (n_points < 2) {
    misp::throw_error(misp::ErrorCategory::Config,
                      "depth grid needs at least two points");
  }
  const double lo = model.basis.knots.x_min;
  const double hi = model.basis.knots.x_max;
  std::vector<double> grid(n_points);
  for (int i = 0; i < n_points; ++i) {
    grid[i] = lo + (hi - lo) * i / (n_points - 1);
  }
  return grid;
}

void emit_warnings(const misp::PosteriorSamples& samples) {
  for (const auto& w : samples.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
}

void report(const std::vector<std::string>& outputs) {
  for (const auto& p : outputs) std::cout << "wrote: " << p << "\n";
}

int cmd_fit(const Args& a) {
  misp::RunConfig cfg = load_single_config(a);
  const int threads = resolve_threads(a);
  const misp::Dataset data = misp::ingest(a.data);
  std::cout << misp::dataset_summary(data) << "\n";
  misp::DensityModel model(cfg.model, data);
  const misp::PosteriorSamples samples =
      misp::fit(model, cfg.sampler, threads);
  emit_warnings(samples);
  const std::string samples_path = out_path(a, "samples.csv");
  const std::string summary_path = out_path(a, "summary.csv");
  misp::write_samples_csv(samples_path, samples);
  misp::write_summary_csv(summary_path, samples);
  const std::string manifest_path = out_path(a, "manifest.json");
  misp::write_manifest(manifest_path, "fit", cfg, a.data, read_bytes(a.data),
                       cfg.sampler.seed, threads,
                       {samples_path, summary_path});
  report({samples_path, summary_path, manifest_path});
  return 0;
}

int cmd_predict(const Args& a) {
  misp::RunConfig cfg = load_single_config(a);
  const int threads = resolve_threads(a);
  const misp::Dataset data = misp::ingest(a.data);
  misp::DensityModel model(cfg.model, data);
  const std::string samples_path = cfg.predict.samples_path.empty()
                                       ? out_path(a, "samples.csv")
                                       : cfg.predict.samples_path;
  const misp::PosteriorSamples samples =
      misp::read_samples_csv(samples_path, model.names());

  misp::PredictionRequest req;
  req.targets = cfg.predict.targets;
  req.target_labels = cfg.predict.labels;
  if (req.target_labels.empty()) {
    for (std::size_t t = 0; t < req.targets.size(); ++t) {
      req.target_labels.push_back("target_" + std::to_string(t + 1));
    }
  } else if (req.target_labels.size() != req.targets.size()) {
    misp::throw_error(misp::ErrorCategory::Config,
                      "[predict] labels must match targets in length");
  }
  for (const std::string& label : cfg.predict.site_refs) {
    int found = -1;
    for (int s = 0; s < data.n_sites(); ++s) {
      if (data.site_labels[s] == label) {
        found = s;
        break;
      }
    }
    if (found < 0) {
      misp::throw_error(misp::ErrorCategory::Data,
                        "[predict] sites: '" + label +
                            "' is not in the dataset");
    }
    req.targets.push_back(data.sites[found]);
    req.target_labels.push_back(label);
  }
  req.depths = depth_grid(cfg.model, cfg.predict.depths, cfg.predict.n_depths);
  req.weighting = cfg.predict.weighting;
  req.thin = cfg.predict.thin;
  req.seed = cfg.sampler.seed;

  std::vector<misp::PredictiveDraws> bundles;
  if (cfg.predict.mode == "mean_curve" || cfg.predict.mode == "both") {
    req.mode = misp::PredictionMode::MeanCurve;
    bundles.push_back(misp::predict_curves(samples, req, model, threads));
  }
  if (cfg.predict.mode == "noisy_measurement" || cfg.predict.mode == "both") {
    req.mode = misp::PredictionMode::NoisyMeasurement;
    bundles.push_back(misp::predict_curves(samples, req, model, threads));
  }
  const std::string curves_path = out_path(a, "curves.csv");
  misp::write_curves_csv(curves_path, bundles);
  const std::string manifest_path = out_path(a, "manifest.json");
  misp::write_manifest(manifest_path, "predict", cfg, a.data,
                       read_bytes(a.data), cfg.sampler.seed, threads,
                       {curves_path});
  report({curves_path, manifest_path});
  return 0;
}

int cmd_cv(const Args& a) {
  if (a.configs.empty()) {
    misp::throw_error(misp::ErrorCategory::Config,
                      "cv needs at least one --config");
  }
  const int threads = resolve_threads(a);
  const misp::Dataset data = misp::ingest(a.data);
  std::cout << misp::dataset_summary(data) << "\n";
  std::vector<misp::CvMetrics> rows;
  std::vector<double> totals;
  std::string joined_text;
  std::uint64_t seed = 0;
  for (std::size_t i = 0; i < a.configs.size(); ++i) {
    misp::RunConfig cfg = misp::parse_run_config(a.configs[i]);
    if (a.seed_given) cfg.sampler.seed = a.seed;
    if (i == 0) seed = cfg.sampler.seed;
    if (!joined_text.empty()) joined_text += "\n# ---\n";
    joined_text += cfg.source_text;
    const misp::CvPlan plan =
        misp::make_cv_plan(data, cfg.cv_folds, cfg.sampler.seed);
    std::cout << "cv: " << cfg.model.label << " (" << cfg.cv_folds
              << " folds)\n";
    rows.push_back(
        misp::run_cv(data, cfg.model, cfg.sampler, plan, threads));
    totals.push_back(rows.back().crps);
  }
  const std::vector<double> relative = misp::relative_crps(totals);
  const std::string report_path = out_path(a, "cv_report.csv");
  misp::write_cv_report_csv(report_path, rows, relative);
  misp::RunConfig manifest_cfg = misp::parse_run_config(a.configs[0]);
  manifest_cfg.source_text = joined_text;
  const std::string manifest_path = out_path(a, "manifest.json");
  misp::write_manifest(manifest_path, "cv", manifest_cfg, a.data,
                       read_bytes(a.data), seed, threads, {report_path});
  report({report_path, manifest_path});
  return 0;
}

int cmd_simulate(const Args& a) {
  misp::RunConfig cfg = load_single_config(a);
  const int threads = resolve_threads(a);
  (void)threads;
  cfg.simulate.spec.seed = cfg.sampler.seed;
  std::vector<std::string> outputs;
  if (cfg.simulate.mode == "dataset") {
    const misp::SimulatedData sim =
        misp::generate_dataset(cfg.simulate.spec, cfg.model);
    std::cout << misp::dataset_summary(sim.data) << "\n";
    const std::string data_path = out_path(a, "data.csv");
    misp::write_dataset_csv(data_path, sim.data);
    misp::DensityModel model(cfg.model, sim.data);
    const std::string truth_path = out_path(a, "truth.csv");
    misp::write_truth_csv(truth_path, model.names(),
                          model.constrained_row(sim.truth));
    outputs = {data_path, truth_path};
  } else {
    misp::ModelConfig curve_cfg = cfg.model;
    if (cfg.simulate.zero_mean_gamma) {
      curve_cfg.priors.gamma0_mean = 0.0;
      curve_cfg.priors.gammaj_mean = 0.0;
    }
    const std::vector<double> grid =
        depth_grid(curve_cfg, {}, cfg.simulate.curve_points);
    if (cfg.simulate.n_curves < 1) {
      misp::throw_error(misp::ErrorCategory::Config,
                        "n_curves must be positive");
    }
    const std::vector<misp::SiteLocation> one_site = {{-75.0, 0.0}};
    std::vector<Eigen::VectorXd> curves(cfg.simulate.n_curves);
    for (int d = 0; d < cfg.simulate.n_curves; ++d) {
      misp::Rng rng(misp::derive_seed(cfg.sampler.seed, "prior-curve", d));
      const misp::ParameterState st =
          misp::draw_prior_state(curve_cfg, one_site, 1, rng);
      Eigen::VectorXd curve(grid.size());
      for (std::size_t k = 0; k < grid.size(); ++k) {
        curve(k) = misp::mean_density(st, curve_cfg, 0, grid[k]);
      }
      curves[d] = std::move(curve);
    }
    const std::string curves_path = out_path(a, "prior_curves.csv");
    misp::write_prior_curves_csv(curves_path, grid, curves);
    outputs = {curves_path};
  }
  const std::string manifest_path = out_path(a, "manifest.json");
  misp::write_manifest(manifest_path, "simulate", cfg, "", "",
                       cfg.sampler.seed, resolve_threads(a), outputs);
  outputs.push_back(manifest_path);
  report(outputs);
  return 0;
}

int cmd_diagnose(const Args& a) {
  const misp::PosteriorSamples samples = misp::read_samples_csv(a.data);
  std::cout << "parameters=" << samples.dim()
            << " chains=" << samples.n_chains()
            << " draws_per_chain=" << samples.n_keep() << "\n";
  const std::string diag_path = out_path(a, "diagnostics.csv");
  misp::write_diagnostics_csv(diag_path, samples);
  const std::string traces_path = out_path(a, "traces.csv");
  misp::write_traces_csv(traces_path, samples);
  misp::RunConfig cfg = load_single_config(a);
  const std::string manifest_path = out_path(a, "manifest.json");
  misp::write_manifest(manifest_path, "diagnose", cfg, a.data,
                       read_bytes(a.data), cfg.sampler.seed,
                       resolve_threads(a), {diag_path, traces_path});
  report({diag_path, traces_path, manifest_path});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian spatial monotone snow-density curves"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub, bool data_required) {
    sub->add_option("--config", args.configs,
                    "run configuration file (repeatable for cv)");
    auto* data_opt =
        sub->add_option("--data", args.data, "input data file");
    if (data_required) data_opt->required();
    sub->add_option("--out", args.out, "output directory (default .)");
    sub->add_option("--seed", args.seed, "root RNG seed (overrides config)")
        ->each([&](const std::string&) { args.seed_given = true; });
    sub->add_option("--threads", args.threads,
                    "worker threads (default MISP_THREADS or 1)");
  };

  CLI::App* fit = app.add_subcommand("fit", "sample the posterior");
  add_common(fit, true);
  CLI::App* predict =
      app.add_subcommand("predict", "predict curves from saved samples");
  add_common(predict, true);
  CLI::App* cv =
      app.add_subcommand("cv", "grouped cross-validation model comparison");
  add_common(cv, true);
  CLI::App* simulate =
      app.add_subcommand("simulate", "generate synthetic data or prior curves");
  add_common(simulate, false);
  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "convergence diagnostics for a samples.csv (--data)");
  add_common(diagnose, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(args);
    if (predict->parsed()) return cmd_predict(args);
    if (cv->parsed()) return cmd_cv(args);
    if (simulate->parsed()) return cmd_simulate(args);
    if (diagnose->parsed()) return cmd_diagnose(args);
  } catch (const misp::Error& e) {
    std::cerr << "error: [" << misp::error_category_name(e.category()) << "] "
              << e.what() << "\n";
    return misp::error_category_exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: [internal] " << e.what() << "\n";
    return 1;
  }
  return 0;
}
