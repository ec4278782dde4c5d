#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gmusic/types.hpp"

namespace gmusic {

/// Full description of one array-processing experiment: a half-wavelength
/// uniform linear array of `m` antennas observing `k` narrowband sources
/// over `n` snapshots.
struct ArrayScenario {
  int m = 0;
  int n = 0;
  int k = 0;
  std::vector<double> angles_deg;
  double snr_db = 0.0;
  double ar_coeff = 0.9;
  std::uint64_t master_seed = 0;

  double ratio() const { return static_cast<double>(m) / n; }
  // Noise variance per antenna with unit-variance sources.
  double noise_variance() const;

  // Throws ValidationError unless 0 <= k < m < n, angles strictly
  // increasing inside (-90, 90), and ar_coeff in [0, 1).
  void validate() const;
};

/// K x N deterministic source matrix. Held fixed across noise trials.
struct SourceMatrix {
  CMatrix entries;
};

/// Normalized observation sigma = (A S + V) / sqrt(N) together with its
/// deterministic part.
struct Observation {
  CMatrix sigma;
  CMatrix b_matrix;
  double sigma2 = 0.0;
};

/// Orthogonal projector onto the complement of the steering matrix span.
struct NoiseProjector {
  CMatrix pi;
};

// Seeds the engine for stream `stream` of a master seed. The seed is the
// splitmix64 output at counter position `stream`, so distinct streams of
// the same master seed never share a state. Stream 0 drives the sources,
// stream t + 1 drives the noise of trial t.
std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t stream);
std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t stream);

// Draws CN(0, variance): independent real/imaginary parts of variance / 2,
// both scaled from one standard normal stream.
class ComplexGaussian {
 public:
  Complex operator()(std::mt19937_64& rng, double variance);

 private:
  std::normal_distribution<double> normal_{0.0, 1.0};
};

CVector steering_vector(double theta_deg, int m);
CMatrix steering_matrix(std::span<const double> angles_deg, int m);

SourceMatrix generate_sources(const ArrayScenario& scenario);

Observation generate_observation(const ArrayScenario& scenario,
                                 const SourceMatrix& sources,
                                 std::uint64_t trial_index);

// Deterministic part B = A S / sqrt(N) only.
CMatrix signal_matrix(const ArrayScenario& scenario, const SourceMatrix& sources);

NoiseProjector true_noise_projector(const CMatrix& steering);

double true_localization(const CVector& b, const NoiseProjector& projector);

}  // namespace gmusic
