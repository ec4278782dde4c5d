#include "gmusic/signal_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>

namespace gmusic {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

double ArrayScenario::noise_variance() const {
  return std::pow(10.0, -snr_db / 10.0);
}

void ArrayScenario::validate() const {
  if (m < 1 || n < 1) throw ValidationError("scenario: m and n must be positive");
  if (m >= n) throw ValidationError("scenario: requires m < n (c = m/n < 1)");
  if (k < 0 || k >= m) throw ValidationError("scenario: requires 0 <= k < m");
  if (static_cast<int>(angles_deg.size()) != k) {
    throw ValidationError("scenario: angles_deg must hold exactly k angles");
  }
  for (std::size_t i = 0; i < angles_deg.size(); ++i) {
    const double a = angles_deg[i];
    if (!(a > -90.0 && a < 90.0)) {
      throw ValidationError("scenario: angle " + std::to_string(a) + " outside (-90, 90)");
    }
    if (i > 0 && !(a > angles_deg[i - 1])) {
      throw ValidationError("scenario: angles must be strictly increasing");
    }
  }
  if (!(ar_coeff >= 0.0 && ar_coeff < 1.0)) {
    throw ValidationError("scenario: ar_coeff must lie in [0, 1)");
  }
  // +inf is accepted and means a noiseless observation.
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw ValidationError("scenario: snr_db must be a number or +inf");
  }
}

std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t stream) {
  return splitmix64(master_seed + stream * kGoldenGamma);
}

std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t stream) {
  return std::mt19937_64(stream_seed(master_seed, stream));
}

Complex ComplexGaussian::operator()(std::mt19937_64& rng, double variance) {
  const double sd = std::sqrt(variance / 2.0);
  const double re = normal_(rng);
  const double im = normal_(rng);
  return {sd * re, sd * im};
}

CVector steering_vector(double theta_deg, int m) {
  if (m < 1) throw ValidationError("steering_vector: m must be positive");
  const double phase = std::numbers::pi * std::sin(theta_deg * std::numbers::pi / 180.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  CVector a(m);
  for (int i = 0; i < m; ++i) a[i] = std::polar(scale, phase * i);
  return a;
}

CMatrix steering_matrix(std::span<const double> angles_deg, int m) {
  CMatrix a(m, static_cast<Eigen::Index>(angles_deg.size()));
  for (std::size_t j = 0; j < angles_deg.size(); ++j) {
    a.col(static_cast<Eigen::Index>(j)) = steering_vector(angles_deg[j], m);
  }
  return a;
}

SourceMatrix generate_sources(const ArrayScenario& scenario) {
  scenario.validate();
  const double rho = scenario.ar_coeff;
  const double innovation = 1.0 - rho * rho;
  auto rng = make_stream(scenario.master_seed, 0);
  ComplexGaussian complex_gaussian;
  SourceMatrix s{CMatrix(scenario.k, scenario.n)};
  for (int row = 0; row < scenario.k; ++row) {
    // Stationary start: s_0 ~ CN(0, 1).
    Complex prev = complex_gaussian(rng, 1.0);
    s.entries(row, 0) = prev;
    for (int col = 1; col < scenario.n; ++col) {
      prev = rho * prev + complex_gaussian(rng, innovation);
      s.entries(row, col) = prev;
    }
  }
  return s;
}

CMatrix signal_matrix(const ArrayScenario& scenario, const SourceMatrix& sources) {
  if (sources.entries.rows() != scenario.k || sources.entries.cols() != scenario.n) {
    throw ValidationError("signal_matrix: source matrix must be k x n");
  }
  const CMatrix a = steering_matrix(scenario.angles_deg, scenario.m);
  return (a * sources.entries) / std::sqrt(static_cast<double>(scenario.n));
}

Observation generate_observation(const ArrayScenario& scenario,
                                 const SourceMatrix& sources,
                                 std::uint64_t trial_index) {
  scenario.validate();
  Observation obs;
  obs.b_matrix = signal_matrix(scenario, sources);
  obs.sigma2 = scenario.noise_variance();
  obs.sigma = obs.b_matrix;
  // Per-entry variance of W = V / sqrt(N) is sigma2 / N.
  const double entry_variance = obs.sigma2 / scenario.n;
  if (entry_variance > 0.0) {
    auto rng = make_stream(scenario.master_seed, trial_index + 1);
    ComplexGaussian complex_gaussian;
    for (int col = 0; col < scenario.n; ++col) {
      for (int row = 0; row < scenario.m; ++row) {
        obs.sigma(row, col) += complex_gaussian(rng, entry_variance);
      }
    }
  }
  return obs;
}

NoiseProjector true_noise_projector(const CMatrix& steering) {
  const auto m = steering.rows();
  NoiseProjector p{CMatrix::Identity(m, m)};
  if (steering.cols() == 0) return p;
  Eigen::ColPivHouseholderQR<CMatrix> qr(steering);
  if (qr.rank() < steering.cols()) {
    throw ValidationError("true_noise_projector: steering matrix is rank deficient");
  }
  const CMatrix gram = steering.adjoint() * steering;
  p.pi -= steering * gram.ldlt().solve(steering.adjoint());
  // Symmetrize away rounding so the projector is exactly Hermitian.
  p.pi = 0.5 * (p.pi + p.pi.adjoint()).eval();
  return p;
}

double true_localization(const CVector& b, const NoiseProjector& projector) {
  if (b.size() != projector.pi.rows()) {
    throw ValidationError("true_localization: dimension mismatch");
  }
  return (b.adjoint() * projector.pi * b)(0, 0).real();
}

}  // namespace gmusic
