#include "gmusic/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "gmusic/doa.hpp"
#include "gmusic/estimator.hpp"

namespace gmusic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void ExperimentConfig::validate() const {
  if (trials < 1) throw ValidationError("config: trials must be at least 1");
  if (snr_grid_db.empty()) throw ValidationError("config: snr grid is empty");
  if (!use_traditional && !use_new) throw ValidationError("config: no estimator selected");
  if (!(grid_step_deg > 0.0 && grid_step_deg < 90.0)) {
    throw ValidationError("config: grid_step_deg must lie in (0, 90)");
  }
  if (workers < 0) throw ValidationError("config: workers must be non-negative");
  for (double t : theta_eval) {
    if (!(t > -90.0 && t < 90.0)) throw ValidationError("config: theta_eval outside (-90, 90)");
  }
  for (double s : snr_grid_db) scenario_at(s).validate();
}

ArrayScenario ExperimentConfig::scenario_at(double snr_db) const {
  ArrayScenario s = scenario;
  s.snr_db = snr_db;
  return s;
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig cfg;
  cfg.scenario.m = 20;
  cfg.scenario.n = 40;
  cfg.scenario.ar_coeff = 0.9;
  cfg.scenario.master_seed = 1234;
  if (name == "exp1") {
    cfg.scenario.k = 2;
    cfg.scenario.angles_deg = {16.0, 18.0};
    cfg.snr_grid_db = {8.0, 12.0, 16.0, 20.0, 24.0};
    for (double t = 10.0; t <= 24.0 + 1e-9; t += 0.5) cfg.theta_eval.push_back(t);
  } else if (name == "exp2") {
    cfg.scenario.k = 10;
    for (int i = 1; i <= 10; ++i) cfg.scenario.angles_deg.push_back(-40.0 + (i - 1) * 10.0);
    cfg.snr_grid_db = {12.0, 16.0, 20.0, 24.0};
    for (int t = -50; t <= 50; ++t) cfg.theta_eval.push_back(t);
  } else {
    throw ValidationError("unknown preset '" + std::string(name) + "' (expected exp1 or exp2)");
  }
  cfg.scenario.snr_db = cfg.snr_grid_db.front();
  return cfg;
}

TrialError::TrialError(double snr_db, int trial, const std::string& what)
    : NumericalError("trial " + std::to_string(trial) + " at snr " + std::to_string(snr_db) +
                     " dB failed: " + what),
      snr_db_(snr_db),
      trial_(trial) {}

std::vector<double> localization_targets(const ExperimentConfig& cfg) {
  const auto& sc = cfg.scenario;
  const NoiseProjector pi = true_noise_projector(steering_matrix(sc.angles_deg, sc.m));
  std::vector<double> out;
  out.reserve(cfg.theta_eval.size());
  for (double t : cfg.theta_eval) out.push_back(true_localization(steering_vector(t, sc.m), pi));
  return out;
}

bool exact_separation(const RVector& lambdas, int k, const SeparationMargins& margins,
                      int* noise_count) {
  const int m = static_cast<int>(lambdas.size());
  int inside = 0;
  for (int i = 0; i < m; ++i) {
    if (lambdas[i] > margins.t1_minus && lambdas[i] < margins.t1_plus) ++inside;
  }
  if (noise_count != nullptr) *noise_count = inside;
  if (inside != m - k) return false;
  // The M - K inside must be the smallest ones.
  if (m - k > 0 && !(lambdas[m - k - 1] < margins.t1_plus && lambdas[0] > margins.t1_minus)) {
    return false;
  }
  return k == 0 || lambdas[m - k] > margins.t2_minus;
}

std::optional<SeparationMargins> separation_margins(const ExperimentConfig& cfg,
                                                    const SourceMatrix& sources, double snr_db,
                                                    std::string* reason, int* q_count) {
  const ArrayScenario sc = cfg.scenario_at(snr_db);
  const double sigma2 = sc.noise_variance();
  if (!(sigma2 > 0.0)) {
    if (reason != nullptr) *reason = "noiseless observation has no limiting support";
    return std::nullopt;
  }
  const SignalSpectrum spec =
      SignalSpectrum::from_signal(signal_matrix(sc, sources), sc.k, sigma2, sc.ratio());
  const SupportProfile profile = support_clusters(spec);
  if (q_count != nullptr) *q_count = profile.q_count;
  if (!profile.separated()) {
    if (reason != nullptr) {
      *reason = "clusters merged: the noise cluster holds " +
                std::to_string(profile.clusters.front().eig_indices.size() -
                               static_cast<std::size_t>(spec.zero_count())) +
                " signal eigenvalue(s) (q = " + std::to_string(profile.q_count) + ")";
    }
    return std::nullopt;
  }
  return profile.separation;
}

TrialRecord run_trial(const ExperimentConfig& cfg, const SourceMatrix& sources, double snr_db,
                      int trial, const std::optional<SeparationMargins>& margins) {
  const ArrayScenario sc = cfg.scenario_at(snr_db);
  const Observation obs = generate_observation(sc, sources, static_cast<std::uint64_t>(trial));
  const EigenSystem eig = eigensystem(obs);
  const int k = sc.k;

  TrialRecord rec;
  rec.snr_db = snr_db;
  rec.trial = trial;

  std::vector<double> w_trad = traditional_weights(sc.m, k);
  std::vector<double> w_new;
  if (cfg.use_new) {
    // Without noise the weights collapse to the traditional indicator.
    w_new = obs.sigma2 > 0.0 ? xi_weights(solve_omegas(eig, obs.sigma2, sc.ratio()), k).xi
                             : w_trad;
  }

  const RMatrix eval_proj = steering_projections(eig, cfg.theta_eval);
  const auto record_eta = [&](const std::vector<double>& w, std::vector<double>& out) {
    const Eigen::Map<const RVector> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    const RVector eta = eval_proj * wv;
    out.assign(eta.data(), eta.data() + eta.size());
  };
  if (cfg.use_traditional) record_eta(w_trad, rec.eta_trad);
  if (cfg.use_new) record_eta(w_new, rec.eta_new);

  if (k > 0) {
    const std::vector<double> grid = angle_grid(cfg.grid_step_deg);
    const RMatrix proj = steering_projections(eig, grid);
    const auto locate = [&](const std::vector<double>& w, EstimatorKind kind,
                            std::vector<double>& angles, bool& outlier) {
      const AngleEstimates est = estimate_angles(scan(proj, w, grid, kind), k, sc.angles_deg);
      angles = est.angles_deg;
      outlier = std::any_of(est.outlier_flags.begin(), est.outlier_flags.end(),
                            [](bool b) { return b; });
    };
    if (cfg.use_traditional) {
      locate(w_trad, EstimatorKind::Traditional, rec.angles_trad, rec.outlier_trad);
    }
    if (cfg.use_new) locate(w_new, EstimatorKind::New, rec.angles_new, rec.outlier_new);
  }

  if (margins.has_value()) {
    rec.exact_separation = exact_separation(eig.lambdas, k, *margins, &rec.noise_cluster_count);
  }
  return rec;
}

AggregateStats aggregate(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
  const std::size_t n_theta = cfg.theta_eval.size();
  const std::vector<double> target = localization_targets(cfg);
  const auto& truth = cfg.scenario.angles_deg;

  AggregateStats stats;
  stats.theta_eval = cfg.theta_eval;
  std::size_t pos = 0;
  for (double snr : cfg.snr_grid_db) {
    SnrStats s;
    s.snr_db = snr;
    s.target = target;
    std::vector<double> se_trad(n_theta, 0.0);
    std::vector<double> se_new(n_theta, 0.0);
    std::vector<double> angle_trad;
    std::vector<double> angle_new;
    int n_outlier_trad = 0;
    int n_outlier_new = 0;
    int n_trials = 0;
    int n_separated = 0;
    bool have_margins = true;
    for (; pos < records.size() && records[pos].snr_db == snr; ++pos) {
      const TrialRecord& r = records[pos];
      ++n_trials;
      for (std::size_t j = 0; j < n_theta; ++j) {
        if (cfg.use_traditional) se_trad[j] += std::pow(r.eta_trad[j] - target[j], 2);
        if (cfg.use_new) se_new[j] += std::pow(r.eta_new[j] - target[j], 2);
      }
      const auto angle_se = [&](const std::vector<double>& est) {
        double acc = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i) acc += std::pow(est[i] - truth[i], 2);
        return acc / static_cast<double>(est.size());
      };
      if (!r.angles_trad.empty()) angle_trad.push_back(angle_se(r.angles_trad));
      if (!r.angles_new.empty()) angle_new.push_back(angle_se(r.angles_new));
      n_outlier_trad += r.outlier_trad ? 1 : 0;
      n_outlier_new += r.outlier_new ? 1 : 0;
      if (r.noise_cluster_count < 0) have_margins = false;
      n_separated += r.exact_separation ? 1 : 0;
    }
    if (n_trials == 0) throw ValidationError("aggregate: no records for an SNR grid point");
    const double t = n_trials;
    for (std::size_t j = 0; j < n_theta; ++j) {
      const double mt = cfg.use_traditional ? se_trad[j] / t : kNaN;
      const double mn = cfg.use_new ? se_new[j] / t : kNaN;
      s.mse_trad.push_back(mt);
      s.mse_new.push_back(mn);
      s.ratio_db.push_back(10.0 * std::log10(mt / mn));
    }
    const bool has_angles = cfg.scenario.k > 0;
    s.angle_mse_trad = has_angles && cfg.use_traditional ? mean_of(angle_trad) : kNaN;
    s.angle_mse_new = has_angles && cfg.use_new ? mean_of(angle_new) : kNaN;
    s.outlier_trad = has_angles && cfg.use_traditional ? n_outlier_trad / t : kNaN;
    s.outlier_new = has_angles && cfg.use_new ? n_outlier_new / t : kNaN;
    s.sep_fraction = have_margins ? n_separated / t : kNaN;
    stats.per_snr.push_back(std::move(s));
  }
  if (pos != records.size()) throw ValidationError("aggregate: records out of grid order");
  return stats;
}

namespace {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs task(i) for i in [0, count) on a worker pool. A failing task does not
// stop the others from being attempted; the lowest failing index is
// rethrown.
template <typename Task>
void parallel_for(int count, int workers, Task&& task) {
  std::atomic<int> next{0};
  std::mutex mu;
  int failed_index = count;
  std::exception_ptr failure;
  const auto body = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  const int n_threads = std::min(workers, count);
  if (n_threads <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const SourceMatrix sources = generate_sources(cfg.scenario_at(cfg.snr_grid_db.front()));

  std::vector<std::optional<SeparationMargins>> margins;
  margins.reserve(cfg.snr_grid_db.size());
  for (double snr : cfg.snr_grid_db) margins.push_back(separation_margins(cfg, sources, snr));

  const int n_snr = static_cast<int>(cfg.snr_grid_db.size());
  const int total = n_snr * cfg.trials;
  ExperimentResult result;
  result.records.resize(static_cast<std::size_t>(total));
  parallel_for(total, resolve_workers(cfg.workers), [&](int task) {
    const int s = task / cfg.trials;
    const int t = task % cfg.trials;
    const double snr = cfg.snr_grid_db[static_cast<std::size_t>(s)];
    try {
      result.records[static_cast<std::size_t>(task)] =
          run_trial(cfg, sources, snr, t, margins[static_cast<std::size_t>(s)]);
    } catch (const std::exception& e) {
      throw TrialError(snr, t, e.what());
    }
  });
  result.stats = aggregate(cfg, result.records);
  return result;
}

std::vector<LocationDiagnostics> validate_eigenvalue_location(const ExperimentConfig& cfg) {
  cfg.validate();
  const SourceMatrix sources = generate_sources(cfg.scenario_at(cfg.snr_grid_db.front()));
  const int k = cfg.scenario.k;
  std::vector<LocationDiagnostics> out;
  for (double snr : cfg.snr_grid_db) {
    LocationDiagnostics d;
    d.snr_db = snr;
    const auto margins = separation_margins(cfg, sources, snr, &d.reason, &d.q_count);
    if (!margins) {
      d.refused = true;
      d.fraction = kNaN;
      out.push_back(std::move(d));
      continue;
    }
    d.margins = *margins;
    d.noise_counts.resize(static_cast<std::size_t>(cfg.trials));
    d.exact.resize(static_cast<std::size_t>(cfg.trials));
    const ArrayScenario sc = cfg.scenario_at(snr);
    std::vector<char> exact(static_cast<std::size_t>(cfg.trials), 0);
    parallel_for(cfg.trials, resolve_workers(cfg.workers), [&](int t) {
      try {
        const Observation obs = generate_observation(sc, sources, static_cast<std::uint64_t>(t));
        const EigenSystem eig = eigensystem(obs);
        int count = 0;
        exact[static_cast<std::size_t>(t)] = exact_separation(eig.lambdas, k, *margins, &count);
        d.noise_counts[static_cast<std::size_t>(t)] = count;
      } catch (const std::exception& e) {
        throw TrialError(snr, t, e.what());
      }
    });
    int hits = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      d.exact[static_cast<std::size_t>(t)] = exact[static_cast<std::size_t>(t)] != 0;
      hits += exact[static_cast<std::size_t>(t)];
    }
    d.fraction = static_cast<double>(hits) / cfg.trials;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace gmusic
