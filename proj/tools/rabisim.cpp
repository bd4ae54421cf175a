// rabisim -- command-line front end for the Rabi-model RWA toolkit.
//
// Subcommands: spectrum, splitting, evolve, metrics, bounds, contour, slices,
// converge, figures.  Results go to --output as CSV/JSON (and SVG unless
// --no-plots).  Machine-readable output stays on stdout; progress and errors
// go to stderr.  Exit codes: 0 success, 2 bad arguments, 3 numerical or IO
// failure.

#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "rabi/io.hpp"

namespace {

using namespace rabi;
namespace fs = std::filesystem;

// "<k>rev" (collapse-revival times), "<k>per" (Rabi periods), or a plain time.
HorizonRule parse_horizon(const std::string& text) {
  auto tail_value = [&](size_t suffix_len) {
    size_t used = 0;
    const std::string head = text.substr(0, text.size() - suffix_len);
    const double v = std::stod(head, &used);
    if (used != head.size()) throw std::invalid_argument("bad horizon: " + text);
    return v;
  };
  if (text.size() > 3 && text.compare(text.size() - 3, 3, "rev") == 0)
    return HorizonRule::revivals(tail_value(3));
  if (text.size() > 3 && text.compare(text.size() - 3, 3, "per") == 0)
    return HorizonRule::rabi_periods(tail_value(3));
  return HorizonRule::fixed(tail_value(0));
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::vector<double> lambda_grid(const RunConfig& cfg) {
  if (!cfg.lambdas.empty()) return cfg.lambdas;
  return log_spaced(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count);
}

void report(const fs::path& dir, const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << (dir / f).string() << '\n';
}

std::function<void(int, int)> progress_printer(const std::string& tag) {
  return [tag](int idx, int total) {
    std::fprintf(stderr, "%s: cell %d/%d done\n", tag.c_str(), idx + 1, total);
  };
}

int run_spectrum(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  const auto lambdas = linear_spaced(0.0, cfg.spectrum_lambda_max, cfg.spectrum_lambda_count);
  const auto rows = spectrum_scan(lambdas, cfg.spectrum_levels, cfg.spectrum_n_max,
                                  ModelParams{}, cfg.workers);
  fs::create_directories(dir);
  const auto files = write_spectrum_outputs(dir, rows, cfg.svg);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

int run_splitting(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  std::fprintf(stderr, "splitting: scanning %d levels at delta=%g\n", cfg.n_max_level, cfg.delta);
  const auto scan = splitting_scan(cfg.n_max_level, cfg.delta, SplittingOptions{}, ModelParams{},
                                   cfg.workers, cfg.fit_min_n);
  for (const auto& row : scan.rows)
    if (!row.error.empty())
      std::fprintf(stderr, "splitting: level %d failed: %s\n", row.n, row.error.c_str());
  fs::create_directories(dir);
  const auto files = write_splitting_outputs(dir, scan, cfg.json, cfg.svg);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

DynamicsComparison comparison_from(const RunConfig& cfg) {
  DynamicsOptions opts;
  opts.samples_per_period = cfg.samples_per_period;
  opts.step_tol = cfg.step_tol;
  opts.max_lab_dim = cfg.max_lab_dim;
  opts.omega_max_corr = cfg.omega_max_corr;
  return dynamics_comparison(cfg.lambda, cfg.alpha, parse_horizon(cfg.horizon), opts);
}

int run_evolve(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  if (cfg.pair != "quantum" && cfg.pair != "semiclassical")
    throw CLI::ValidationError("--pair", "must be quantum or semiclassical");
  const auto cmp = comparison_from(cfg);
  fs::create_directories(dir);
  const bool quantum = cfg.pair == "quantum";
  const auto files = write_dynamics_outputs(dir, quantum ? cmp.q_full : cmp.sc_full,
                                            quantum ? cmp.q_rwa : cmp.sc_rwa, cfg.svg,
                                            cfg.snapshots && quantum);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

int run_metrics(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  const auto cmp = comparison_from(cfg);
  fs::create_directories(dir);
  const auto files = write_metrics_outputs(dir, cmp, cfg.json, cfg.svg);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

int run_bounds(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  ModelParams p;
  p.lambda = cfg.lambda;
  const double t_end = parse_horizon(cfg.horizon).resolve(cfg.lambda, cfg.alpha);
  const auto grid = TimeGrid::over(t_end, p.omega0 + p.Omega, cfg.samples_per_period);
  fs::create_directories(dir);
  const auto files = write_bounds_outputs(dir, p, cfg.alpha, grid, cfg.svg);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

SweepSpec sweep_from(const RunConfig& cfg) {
  SweepSpec spec;
  spec.horizon_cap = cfg.horizon_cap;
  spec.samples_per_period = cfg.sweep_samples_per_period;
  spec.step_tol = cfg.step_tol;
  spec.max_lab_dim = cfg.max_lab_dim;
  spec.workers = cfg.workers;
  spec.omega_max_corr = cfg.omega_max_corr;
  return spec;
}

int run_contour(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  SweepSpec spec = sweep_from(cfg);
  spec.lambdas = lambda_grid(cfg);
  spec.alphas = linear_spaced(cfg.alpha_min, cfg.alpha_max, cfg.alpha_count);
  spec.progress = progress_printer("contour");
  const auto result = correlation_contour(spec);
  for (const auto& cell : result.rows)
    if (!cell.error.empty())
      std::fprintf(stderr, "contour: cell (lambda=%g, alpha=%g) failed: %s\n", cell.lambda,
                   cell.alpha, cell.error.c_str());
  fs::create_directories(dir);
  const auto files = write_contour_outputs(dir, result, cfg.svg);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

int run_slices(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  SweepSpec spec = sweep_from(cfg);
  spec.A_values = cfg.A_values;
  spec.lambdas = lambda_grid(cfg);
  spec.progress = progress_printer("slices");
  const auto result = constant_A_slices(spec);
  for (const auto& cell : result.rows)
    if (!cell.error.empty())
      std::fprintf(stderr, "slices: cell (A=%g, lambda=%g) failed: %s\n", cell.A, cell.lambda,
                   cell.error.c_str());
  fs::create_directories(dir);
  const auto files = write_slices_outputs(dir, result, cfg.svg);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

int run_converge(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  ConvergenceSpec spec;
  spec.A = cfg.A;
  if (!cfg.lambdas.empty()) spec.lambdas = cfg.lambdas;
  spec.n_periods = cfg.n_periods;
  spec.samples_per_period = cfg.samples_per_period;
  spec.step_tol = cfg.step_tol;
  spec.max_lab_dim = cfg.max_lab_dim;
  spec.workers = cfg.workers;
  spec.omega_max_corr = cfg.omega_max_corr;
  const auto study = convergence_study(spec);
  for (const auto& row : study.rows)
    if (!row.error.empty())
      std::fprintf(stderr, "converge: lambda=%g failed: %s\n", row.lambda, row.error.c_str());
  fs::create_directories(dir);
  const auto files = write_convergence_outputs(dir, study, cfg.svg);
  write_manifest(dir, cfg, files, timer.seconds());
  report(dir, files);
  return 0;
}

int run_figures(const RunConfig& cfg, const fs::path& dir) {
  Timer timer;
  std::vector<std::string> outputs;
  auto step = [&](const char* name, int (*fn)(const RunConfig&, const fs::path&)) {
    Timer t;
    std::fprintf(stderr, "figures: %s ...\n", name);
    RunConfig sub = cfg;
    sub.subcommand = name;
    fn(sub, dir / name);
    outputs.push_back(std::string(name) + "/manifest.json");
    std::fprintf(stderr, "figures: %s done in %.1f s\n", name, t.seconds());
  };
  step("spectrum", run_spectrum);
  step("splitting", run_splitting);
  step("metrics", run_metrics);
  step("bounds", run_bounds);
  step("contour", run_contour);
  step("slices", run_slices);
  step("converge", run_converge);
  fs::create_directories(dir);
  write_manifest(dir, cfg, outputs, timer.seconds());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  // --config seeds the defaults; explicit flags then override field by field.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0) {
      std::ifstream in(argv[i + 1]);
      if (!in) {
        std::cerr << "error: cannot read config file " << argv[i + 1] << '\n';
        return 2;
      }
      try {
        cfg = nlohmann::json::parse(in).get<RunConfig>();
      } catch (const std::exception& e) {
        std::cerr << "error: bad config file: " << e.what() << '\n';
        return 2;
      }
    }
  }

  CLI::App app{"quantum vs semiclassical Rabi dynamics: spectra, splittings, and RWA error"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags remain valid after the subcommand name
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("-o,--output", cfg.output_dir, "output directory")->capture_default_str();
  app.add_option("--workers", cfg.workers,
                 "worker threads (0 = RABISIM_WORKERS env or hardware)")
      ->capture_default_str();
  app.add_flag("!--no-plots", cfg.svg, "skip SVG emission");
  app.add_flag("!--no-json", cfg.json, "skip JSON summaries");
  app.add_option("--step-tol", cfg.step_tol, "integrator substep tolerance")
      ->capture_default_str();
  app.add_option("--max-lab-dim", cfg.max_lab_dim, "lab-frame dimension budget")
      ->capture_default_str();

  auto* sc_spectrum = app.add_subcommand("spectrum", "energy levels vs coupling, both models");
  sc_spectrum->add_option("--lambda-max", cfg.spectrum_lambda_max, "top of the coupling range")
      ->capture_default_str();
  sc_spectrum->add_option("--points", cfg.spectrum_lambda_count, "couplings to sample")
      ->capture_default_str();
  sc_spectrum->add_option("--levels", cfg.spectrum_levels, "levels per parity sector")
      ->capture_default_str();
  sc_spectrum->add_option("--n-max-photon", cfg.spectrum_n_max, "photon-number truncation")
      ->capture_default_str();

  auto* sc_splitting = app.add_subcommand("splitting", "deviation thresholds level by level");
  sc_splitting->add_option("--delta", cfg.delta, "energy-deviation threshold")
      ->capture_default_str();
  sc_splitting->add_option("--n-max", cfg.n_max_level, "highest pair level")
      ->capture_default_str();
  sc_splitting->add_option("--fit-min-n", cfg.fit_min_n, "lowest level entering the fits")
      ->capture_default_str();

  auto add_point_options = [&](CLI::App* sub) {
    sub->add_option("--lambda", cfg.lambda, "coupling strength")->capture_default_str();
    sub->add_option("--alpha", cfg.alpha, "coherent amplitude")->capture_default_str();
    sub->add_option("--horizon", cfg.horizon, "time horizon: <k>rev, <k>per, or a time")
        ->capture_default_str();
    sub->add_option("--samples-per-period", cfg.samples_per_period, "samples per drive period")
        ->capture_default_str();
  };
  auto* sc_evolve = app.add_subcommand("evolve", "population dynamics for one model pair");
  add_point_options(sc_evolve);
  sc_evolve->add_option("--pair", cfg.pair, "quantum | semiclassical")->capture_default_str();
  sc_evolve->add_flag("--snapshots", cfg.snapshots, "dump state snapshots (quantum pair)");

  auto* sc_metrics = app.add_subcommand("metrics", "distances, bounds, and spectra at one point");
  add_point_options(sc_metrics);

  auto* sc_bounds = app.add_subcommand("bounds", "analytic error bounds over a horizon");
  add_point_options(sc_bounds);

  auto* sc_contour = app.add_subcommand("contour", "correlation loss over (lambda, alpha)");
  sc_contour->add_option("--lambda-min", cfg.lambda_min, "")->capture_default_str();
  sc_contour->add_option("--lambda-max", cfg.lambda_max, "")->capture_default_str();
  sc_contour->add_option("--lambda-count", cfg.lambda_count, "")->capture_default_str();
  sc_contour->add_option("--alpha-min", cfg.alpha_min, "")->capture_default_str();
  sc_contour->add_option("--alpha-max", cfg.alpha_max, "")->capture_default_str();
  sc_contour->add_option("--alpha-count", cfg.alpha_count, "")->capture_default_str();
  sc_contour->add_option("--horizon-cap", cfg.horizon_cap, "")->capture_default_str();

  auto* sc_slices = app.add_subcommand("slices", "correlation loss along constant-A slices");
  sc_slices->add_option("--A-values", cfg.A_values, "drive amplitudes")->capture_default_str();
  sc_slices->add_option("--lambdas", cfg.lambdas, "explicit coupling list")
      ->capture_default_str();
  sc_slices->add_option("--horizon-cap", cfg.horizon_cap, "")->capture_default_str();

  auto* sc_converge = app.add_subcommand("converge", "semiclassical limit at fixed drive");
  sc_converge->add_option("--A", cfg.A, "drive amplitude")->capture_default_str();
  sc_converge->add_option("--lambdas", cfg.lambdas, "couplings toward the limit")
      ->capture_default_str();
  sc_converge->add_option("--periods", cfg.n_periods, "Rabi periods to cover")
      ->capture_default_str();
  sc_converge->add_option("--samples-per-period", cfg.samples_per_period, "")
      ->capture_default_str();

  auto* sc_figures = app.add_subcommand("figures", "run every study into one directory tree");
  add_point_options(sc_figures);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (const auto* sub : {sc_spectrum, sc_splitting, sc_evolve, sc_metrics, sc_bounds,
                          sc_contour, sc_slices, sc_converge, sc_figures})
    if (sub->parsed()) cfg.subcommand = sub->get_name();

  const fs::path dir = cfg.output_dir;
  try {
    Timer timer;
    int rc = 0;
    if (cfg.subcommand == "spectrum")
      rc = run_spectrum(cfg, dir);
    else if (cfg.subcommand == "splitting")
      rc = run_splitting(cfg, dir);
    else if (cfg.subcommand == "evolve")
      rc = run_evolve(cfg, dir);
    else if (cfg.subcommand == "metrics")
      rc = run_metrics(cfg, dir);
    else if (cfg.subcommand == "bounds")
      rc = run_bounds(cfg, dir);
    else if (cfg.subcommand == "contour")
      rc = run_contour(cfg, dir);
    else if (cfg.subcommand == "slices")
      rc = run_slices(cfg, dir);
    else if (cfg.subcommand == "converge")
      rc = run_converge(cfg, dir);
    else if (cfg.subcommand == "figures")
      rc = run_figures(cfg, dir);
    else {
      std::cerr << "error: unknown subcommand " << cfg.subcommand << '\n';
      return 2;
    }
    std::fprintf(stderr, "%s finished in %.1f s\n", cfg.subcommand.c_str(), timer.seconds());
    return rc;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
