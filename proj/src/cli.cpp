#include "gmusic/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmusic/doa.hpp"
#include "gmusic/estimator.hpp"
#include "gmusic/io.hpp"
#include "gmusic/montecarlo.hpp"
#include "gmusic/spectrum.hpp"

namespace gmusic {

namespace {

// Opens `path` for writing, or hands back `fallback` for "" and "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback, bool binary = false) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(
        path, binary ? std::ios::out | std::ios::binary : std::ios::out);
    if (!*file_) throw ValidationError("cannot open " + path + " for writing");
    os_ = file_.get();
  }

  std::ostream& stream() { return *os_; }

  void close() {
    os_->flush();
    if (!*os_) throw NumericalError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

struct ExperimentFlags {
  std::string in;
  std::string out;
  std::string preset;
  std::vector<double> snr;
  std::optional<int> trials;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> grid_step;
};

void add_experiment_flags(CLI::App* app, ExperimentFlags& f) {
  app->add_option("--in", f.in, "Experiment config JSON");
  app->add_option("--out", f.out, "Output file (default: standard output)");
  app->add_option("--preset", f.preset, "Built-in config: exp1 or exp2");
  app->add_option("--snr", f.snr, "SNR grid override in dB (repeatable)");
  app->add_option("--trials", f.trials, "Noise trials per SNR");
  app->add_option("--workers", f.workers, "Worker threads (default: hardware concurrency)");
  app->add_option("--seed", f.seed, "Master seed override");
  app->add_option("--grid-step", f.grid_step, "Angle grid step in degrees");
}

ExperimentConfig build_config(const ExperimentFlags& f) {
  if (f.in.empty() && f.preset.empty()) throw ValidationError("one of --in or --preset is required");
  ExperimentConfig cfg;
  if (!f.in.empty()) {
    io::Json j = io::read_json_file(f.in);
    if (!f.preset.empty()) j["preset"] = f.preset;
    cfg = io::config_from_json(j);
  } else {
    cfg = preset(f.preset);
  }
  if (!f.snr.empty()) cfg.snr_grid_db = f.snr;
  if (f.trials) cfg.trials = *f.trials;
  if (f.workers) cfg.workers = *f.workers;
  if (f.seed) cfg.scenario.master_seed = *f.seed;
  if (f.grid_step) cfg.grid_step_deg = *f.grid_step;
  cfg.validate();
  return cfg;
}

int cmd_support(const std::string& in, const std::string& out, const std::string& density_path,
                std::ostream& stdout_) {
  const SignalSpectrum spec = io::spectrum_from_json(io::read_json_file(in));
  const SupportProfile profile = support_clusters(spec);
  Sink sink(out, stdout_);
  sink.stream() << io::support_to_json(profile).dump(2) << '\n';
  sink.close();
  if (!density_path.empty()) {
    Sink d(density_path, stdout_);
    io::write_density_csv(d.stream(), profile, spec);
    d.close();
  }
  return 0;
}

struct EstimateFlags {
  std::string in;
  std::string out;
  std::string pseudospectrum;
  int k = -1;
  double sigma2 = -1.0;
  double grid_step = 0.05;
  bool normalized = false;
};

int cmd_estimate(const EstimateFlags& f, std::ostream& stdout_) {
  if (f.k < 0) throw ValidationError("--k is required");
  if (!(f.sigma2 > 0.0)) throw ValidationError("--sigma2 must be positive");
  CMatrix y = io::read_matrix_file(f.in);
  if (y.rows() >= y.cols()) throw ValidationError("observation must have fewer rows than columns");
  if (f.k >= y.rows()) throw ValidationError("--k must be below the row count");
  if (!f.normalized) y /= std::sqrt(static_cast<double>(y.cols()));
  const double c = static_cast<double>(y.rows()) / static_cast<double>(y.cols());
  const EigenSystem eig = eigensystem(y);
  const OmegaRoots roots = solve_omegas(eig, f.sigma2, c);
  const XiWeights xi = xi_weights(roots, f.k);

  Sink sink(f.out, stdout_);
  sink.stream() << io::estimate_to_json(eig, roots, xi).dump(2) << '\n';
  sink.close();

  if (!f.pseudospectrum.empty()) {
    const std::vector<double> grid = angle_grid(f.grid_step);
    const RMatrix proj = steering_projections(eig, grid);
    const auto trad =
        scan(proj, traditional_weights(eig.m(), f.k), grid, EstimatorKind::Traditional);
    const auto fresh = scan(proj, xi.xi, grid, EstimatorKind::New);
    Sink ps(f.pseudospectrum, stdout_);
    io::write_pseudospectrum_csv(ps.stream(), trad, fresh);
    ps.close();
  }
  return 0;
}

int cmd_simulate(const ExperimentFlags& f, const std::string& trials_out, std::ostream& stdout_) {
  const ExperimentConfig cfg = build_config(f);
  const ExperimentResult result = run_experiment(cfg);
  Sink sink(f.out, stdout_);
  io::write_results_csv(sink.stream(), result.stats);
  sink.close();
  if (!trials_out.empty()) {
    Sink t(trials_out, stdout_);
    io::write_trials_csv(t.stream(), cfg, result.records);
    t.close();
  }
  return 0;
}

int cmd_validate(const ExperimentFlags& f, std::ostream& stdout_, std::ostream& err) {
  const ExperimentConfig cfg = build_config(f);
  const auto diags = validate_eigenvalue_location(cfg);
  Sink sink(f.out, stdout_);
  sink.stream() << io::diagnostics_to_json(diags).dump(2) << '\n';
  sink.close();
  int status = 0;
  for (const auto& d : diags) {
    if (d.refused) {
      err << "validate: refused at snr " << io::format_double(d.snr_db) << " dB: " << d.reason
          << '\n';
      status = 1;
    } else {
      err << "validate: snr " << io::format_double(d.snr_db)
          << " dB, exact separation in " << io::format_double(d.fraction) << " of trials\n";
    }
  }
  return status;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subspace estimation and DoA tools for the information-plus-noise model", "gmusic"};
  app.require_subcommand(1);

  std::string support_in;
  std::string support_out;
  std::string support_density;
  auto* support = app.add_subcommand("support", "Limiting spectrum support of a signal spectrum");
  support->add_option("--in", support_in, "JSON {gammas, sigma2, c}")->required();
  support->add_option("--out", support_out, "Output JSON (default: standard output)");
  support->add_option("--density", support_density, "Also write the density CSV here");

  EstimateFlags est;
  auto* estimate = app.add_subcommand("estimate", "Eigenvalues, roots and weights of one observation");
  estimate->add_option("--in", est.in, "Observation matrix, CSV or binary")->required();
  estimate->add_option("--out", est.out, "Output JSON (default: standard output)");
  estimate->add_option("--k", est.k, "Number of sources")->required();
  estimate->add_option("--sigma2", est.sigma2, "Noise variance")->required();
  estimate->add_option("--pseudospectrum", est.pseudospectrum, "Also write the scan CSV here");
  estimate->add_option("--grid-step", est.grid_step, "Scan step in degrees");
  estimate->add_flag("--normalized", est.normalized, "Input is already divided by sqrt(N)");

  ExperimentFlags sim;
  std::string sim_trials_out;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo experiment over an SNR grid");
  add_experiment_flags(simulate, sim);
  simulate->add_option("--trials-out", sim_trials_out, "Also write per-trial rows here");

  ExperimentFlags val;
  auto* validate = app.add_subcommand("validate", "Check sample eigenvalue locations");
  add_experiment_flags(validate, val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*support) return cmd_support(support_in, support_out, support_density, out);
    if (*estimate) return cmd_estimate(est, out);
    if (*simulate) return cmd_simulate(sim, sim_trials_out, out);
    if (*validate) return cmd_validate(val, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace gmusic
