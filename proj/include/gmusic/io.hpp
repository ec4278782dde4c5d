#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "gmusic/doa.hpp"
#include "gmusic/estimator.hpp"
#include "gmusic/montecarlo.hpp"
#include "gmusic/signal_model.hpp"
#include "gmusic/spectrum.hpp"

namespace gmusic::io {

using Json = nlohmann::json;

// Shortest round-trip decimal; "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double x);

// Keys exactly m, n, k, angles_deg, snr_db, ar_coeff, master_seed. snr_db
// may be the string "inf" for a noiseless scenario.
Json scenario_to_json(const ArrayScenario& s);
ArrayScenario scenario_from_json(const Json& j);

// {"preset"?, "scenario", "snr_grid_db", "trials", "theta_eval",
//  "grid_step_deg", "estimators", "workers"}. Missing keys keep the preset
// (or default) values.
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const Json& j);

// {"gammas": [...], "sigma2": s, "c": c}
SignalSpectrum spectrum_from_json(const Json& j);

// Infinite margins are written as null.
Json support_to_json(const SupportProfile& profile);
// Density on a uniform grid from 0 to slightly past the support edge.
void write_density_csv(std::ostream& os, const SupportProfile& profile,
                       const SignalSpectrum& spec, int points = 2001);

// M rows of N comma-separated "re+imj" tokens.
CMatrix read_matrix_csv(std::istream& is);
void write_matrix_csv(std::ostream& os, const CMatrix& m);
// "GMAT" magic, uint32 rows, uint32 cols, then rows * cols (re, im) double
// pairs in row-major order, little endian.
CMatrix read_matrix_binary(std::istream& is);
void write_matrix_binary(std::ostream& os, const CMatrix& m);
// Detects the binary magic, otherwise parses CSV.
CMatrix read_matrix_file(const std::string& path);

Complex parse_complex(const std::string& token);

Json estimate_to_json(const EigenSystem& eig, const OmegaRoots& roots, const XiWeights& xi);
void write_pseudospectrum_csv(std::ostream& os, const PseudospectrumScan& trad,
                              const PseudospectrumScan& fresh);

void write_results_csv(std::ostream& os, const AggregateStats& stats);
void write_trials_csv(std::ostream& os, const ExperimentConfig& cfg,
                      const std::vector<TrialRecord>& records);
Json diagnostics_to_json(const std::vector<LocationDiagnostics>& diags);

Json read_json_file(const std::string& path);

}  // namespace gmusic::io
