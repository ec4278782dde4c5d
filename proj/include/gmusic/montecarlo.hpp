#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmusic/signal_model.hpp"
#include "gmusic/spectrum.hpp"
#include "gmusic/types.hpp"

namespace gmusic {

struct ExperimentConfig {
  // snr_db inside the scenario is ignored; the grid below drives the loop.
  ArrayScenario scenario;
  std::vector<double> snr_grid_db;
  int trials = 200;
  // Angles at which the localization estimates are recorded.
  std::vector<double> theta_eval;
  double grid_step_deg = 0.05;
  bool use_traditional = true;
  bool use_new = true;
  // 0 selects the machine's hardware concurrency.
  int workers = 0;

  void validate() const;
  ArrayScenario scenario_at(double snr_db) const;
};

// "exp1": two close sources at 16 and 18 degrees, M = 20, N = 40.
// "exp2": ten sources spread from -40 to 50 degrees, M = 20, N = 40.
ExperimentConfig preset(std::string_view name);

/// Everything one noise realization contributes to the aggregates.
struct TrialRecord {
  double snr_db = 0.0;
  int trial = 0;
  // Localization estimates at ExperimentConfig::theta_eval. Empty for a
  // disabled estimator.
  std::vector<double> eta_trad;
  std::vector<double> eta_new;
  // Angle estimates paired with the true angles (empty when K = 0).
  std::vector<double> angles_trad;
  std::vector<double> angles_new;
  bool outlier_trad = false;
  bool outlier_new = false;
  // Sample eigenvalues inside (t1_minus, t1_plus); -1 when the deterministic
  // spectrum is not separated.
  int noise_cluster_count = -1;
  bool exact_separation = false;
};

struct SnrStats {
  double snr_db = 0.0;
  // Per theta_eval entry. mse_* is NaN for a disabled estimator.
  std::vector<double> target;
  std::vector<double> mse_trad;
  std::vector<double> mse_new;
  std::vector<double> ratio_db;
  double angle_mse_trad = 0.0;
  double angle_mse_new = 0.0;
  // Fraction of trials with at least one outlier.
  double outlier_trad = 0.0;
  double outlier_new = 0.0;
  // NaN when the deterministic spectrum is not separated.
  double sep_fraction = 0.0;
};

struct AggregateStats {
  std::vector<double> theta_eval;
  std::vector<SnrStats> per_snr;
};

struct ExperimentResult {
  AggregateStats stats;
  // Ordered by (snr index, trial).
  std::vector<TrialRecord> records;
};

/// Raised when a trial fails; carries the failing position.
class TrialError : public NumericalError {
 public:
  TrialError(double snr_db, int trial, const std::string& what);
  double snr_db() const { return snr_db_; }
  int trial() const { return trial_; }

 private:
  double snr_db_;
  int trial_;
};

// Localization target b^H Pi b at each theta_eval angle.
std::vector<double> localization_targets(const ExperimentConfig& cfg);

TrialRecord run_trial(const ExperimentConfig& cfg, const SourceMatrix& sources, double snr_db,
                      int trial, const std::optional<SeparationMargins>& margins);

// Ordered fold of the per-trial records. Records must be grouped by SNR in
// grid order, trials ascending.
AggregateStats aggregate(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records);

// Deterministic for a given master seed regardless of the worker count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct LocationDiagnostics {
  double snr_db = 0.0;
  bool refused = false;
  std::string reason;
  SeparationMargins margins;
  int q_count = 0;
  // Per trial: eigenvalues inside (t1_minus, t1_plus) and whether the
  // exact separation held.
  std::vector<int> noise_counts;
  std::vector<bool> exact;
  double fraction = 0.0;
};

// Per configured SNR. A non-separated deterministic spectrum yields a
// refused entry carrying the reason and no trials.
std::vector<LocationDiagnostics> validate_eigenvalue_location(const ExperimentConfig& cfg);

// Margins of the deterministic spectrum of cfg at the given SNR, or the
// reason they do not exist.
std::optional<SeparationMargins> separation_margins(const ExperimentConfig& cfg,
                                                    const SourceMatrix& sources, double snr_db,
                                                    std::string* reason = nullptr,
                                                    int* q_count = nullptr);

// Exactly M - K eigenvalues in (t1_minus, t1_plus) and the (M - K + 1)-th
// above t2_minus.
bool exact_separation(const RVector& lambdas, int k, const SeparationMargins& margins,
                      int* noise_count = nullptr);

}  // namespace gmusic
