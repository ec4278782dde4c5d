#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <optional>

#include "gmusic/doa.hpp"
#include "gmusic/estimator.hpp"
#include "gmusic/io.hpp"
#include "gmusic/montecarlo.hpp"
#include "gmusic/signal_model.hpp"
#include "gmusic/spectrum.hpp"

namespace py = pybind11;
using namespace gmusic;

namespace {

py::object to_python(const io::Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

ExperimentConfig make_config(const std::optional<std::string>& config_json, const std::string& preset_name,
                             const std::optional<std::vector<double>>& snr_db, std::optional<int> trials,
                             int workers, std::optional<std::uint64_t> seed,
                             std::optional<double> grid_step) {
  ExperimentConfig cfg = config_json ? io::config_from_json(io::Json::parse(*config_json)) : preset(preset_name);
  if (snr_db) cfg.snr_grid_db = *snr_db;
  if (trials) cfg.trials = *trials;
  if (seed) cfg.scenario.master_seed = *seed;
  if (grid_step) cfg.grid_step_deg = *grid_step;
  cfg.workers = workers;
  cfg.validate();
  return cfg;
}

py::dict snr_stats(const SnrStats& s) {
  py::dict d;
  d["snr_db"] = s.snr_db;
  d["target"] = s.target;
  d["mse_trad"] = s.mse_trad;
  d["mse_new"] = s.mse_new;
  d["ratio_db"] = s.ratio_db;
  d["angle_mse_trad"] = s.angle_mse_trad;
  d["angle_mse_new"] = s.angle_mse_new;
  d["outlier_trad"] = s.outlier_trad;
  d["outlier_new"] = s.outlier_new;
  d["sep_fraction"] = s.sep_fraction;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Subspace estimation and direction finding for the information-plus-noise model.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("steering_vector", &steering_vector, py::arg("theta_deg"), py::arg("m"));

  m.def(
      "support",
      [](const std::vector<double>& gammas, double sigma2, double c) {
        return to_python(io::support_to_json(support_clusters(SignalSpectrum(gammas, sigma2, c))));
      },
      py::arg("gammas"), py::arg("sigma2"), py::arg("c"),
      "Clusters of the limiting spectrum support and the separation margins.");

  m.def(
      "density",
      [](const std::vector<double>& x, const std::vector<double>& gammas, double sigma2, double c) {
        const SignalSpectrum spec(gammas, sigma2, c);
        const auto profile = support_clusters(spec);
        std::vector<double> out;
        out.reserve(x.size());
        for (double v : x) out.push_back(v > 0.0 ? density(v, profile, spec) : 0.0);
        return out;
      },
      py::arg("x"), py::arg("gammas"), py::arg("sigma2"), py::arg("c"));

  m.def(
      "estimate",
      [](const CMatrix& sigma, double sigma2, int k) {
        if (sigma.rows() >= sigma.cols()) throw ValidationError("sigma must have fewer rows than columns");
        if (k < 0 || k >= sigma.rows()) throw ValidationError("k must lie in [0, M)");
        const double c = static_cast<double>(sigma.rows()) / static_cast<double>(sigma.cols());
        const auto eig = eigensystem(sigma);
        const auto roots = solve_omegas(eig, sigma2, c);
        const auto xi = xi_weights(roots, k);
        py::dict d;
        d["lambdas"] = eig.lambdas;
        d["vectors"] = eig.vectors;
        d["omegas"] = roots.omegas;
        d["xi"] = xi.xi;
        return d;
      },
      py::arg("sigma"), py::arg("sigma2"), py::arg("k"),
      "Eigenvalues, roots and weights of a normalized M x N observation.");

  m.def(
      "pseudospectrum",
      [](const CMatrix& sigma, double sigma2, int k, double grid_step) {
        if (sigma.rows() >= sigma.cols()) throw ValidationError("sigma must have fewer rows than columns");
        if (k < 1 || k >= sigma.rows()) throw ValidationError("k must lie in [1, M)");
        const double c = static_cast<double>(sigma.rows()) / static_cast<double>(sigma.cols());
        const auto eig = eigensystem(sigma);
        const auto grid = angle_grid(grid_step);
        const RMatrix proj = steering_projections(eig, grid);
        const auto trad = scan(proj, traditional_weights(eig.m(), k), grid, EstimatorKind::Traditional);
        const auto fresh =
            scan(proj, estimator_weights(EstimatorKind::New, eig, sigma2, c, k), grid, EstimatorKind::New);
        py::dict d;
        d["theta_deg"] = grid;
        d["eta_trad"] = trad.eta_values;
        d["eta_new"] = fresh.eta_values;
        d["angles_trad"] = estimate_angles(trad, k).angles_deg;
        d["angles_new"] = estimate_angles(fresh, k).angles_deg;
        return d;
      },
      py::arg("sigma"), py::arg("sigma2"), py::arg("k"), py::arg("grid_step") = 0.05);

  m.def(
      "observation",
      [](int m_, int n, const std::vector<double>& angles, double snr_db, double ar_coeff,
         std::uint64_t seed, std::uint64_t trial) {
        ArrayScenario sc;
        sc.m = m_;
        sc.n = n;
        sc.k = static_cast<int>(angles.size());
        sc.angles_deg = angles;
        sc.snr_db = snr_db;
        sc.ar_coeff = ar_coeff;
        sc.master_seed = seed;
        const auto obs = generate_observation(sc, generate_sources(sc), trial);
        return py::make_tuple(obs.sigma, obs.sigma2);
      },
      py::arg("m"), py::arg("n"), py::arg("angles_deg"), py::arg("snr_db"), py::arg("ar_coeff") = 0.9,
      py::arg("seed") = 1234, py::arg("trial") = 0,
      "Normalized observation Sigma and its noise variance for one trial.");

  m.def(
      "simulate",
      [](std::optional<std::string> config, const std::string& preset_name,
         std::optional<std::vector<double>> snr_db, std::optional<int> trials, int workers,
         std::optional<std::uint64_t> seed, std::optional<double> grid_step) {
        const auto cfg = make_config(config, preset_name, snr_db, trials, workers, seed, grid_step);
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(cfg);
        }
        py::list out;
        for (const auto& s : res.stats.per_snr) out.append(snr_stats(s));
        py::dict d;
        d["theta_eval"] = res.stats.theta_eval;
        d["per_snr"] = out;
        return d;
      },
      py::arg("config") = py::none(), py::arg("preset") = "exp1", py::arg("snr_db") = py::none(),
      py::arg("trials") = py::none(), py::arg("workers") = 0, py::arg("seed") = py::none(),
      py::arg("grid_step") = py::none(),
      "Monte Carlo experiment. `config` is a JSON string; otherwise `preset` is used.");

  m.def(
      "validate",
      [](std::optional<std::string> config, const std::string& preset_name,
         std::optional<std::vector<double>> snr_db, std::optional<int> trials, int workers,
         std::optional<std::uint64_t> seed) {
        const auto cfg = make_config(config, preset_name, snr_db, trials, workers, seed, std::nullopt);
        std::vector<LocationDiagnostics> diags;
        {
          py::gil_scoped_release release;
          diags = validate_eigenvalue_location(cfg);
        }
        return to_python(io::diagnostics_to_json(diags));
      },
      py::arg("config") = py::none(), py::arg("preset") = "exp1", py::arg("snr_db") = py::none(),
      py::arg("trials") = py::none(), py::arg("workers") = 0, py::arg("seed") = py::none());
}
