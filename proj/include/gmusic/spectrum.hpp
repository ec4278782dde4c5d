#pragma once

#include <optional>
#include <vector>

#include "gmusic/types.hpp"

namespace gmusic {

/// Eigenvalues of B B^H together with the noise level and the ratio
/// c = M / N. Everything the limiting spectral law depends on.
class SignalSpectrum {
 public:
  // Relative tolerance under which positive eigenvalues are merged.
  static constexpr double kMergeTolerance = 1e-9;

  // `gammas` may be unsorted. Values below 1e-12 * max(gammas) are taken
  // as exact zeros. Requires sigma2 > 0, 0 < c < 1 and at least one zero
  // eigenvalue (rank of B below M).
  SignalSpectrum(std::vector<double> gammas, double sigma2, double c);

  // Builds the spectrum of B B^H for an M x N signal matrix of the given
  // rank, forcing its M - rank smallest eigenvalues to zero.
  static SignalSpectrum from_signal(const CMatrix& b_matrix, int rank, double sigma2, double c);

  int m() const { return static_cast<int>(gammas_.size()); }
  double sigma2() const { return sigma2_; }
  double c() const { return c_; }

  // Ascending, the first zero_count() entries are zero.
  const std::vector<double>& gammas() const { return gammas_; }
  int zero_count() const { return zero_count_; }

  // Distinct positive eigenvalues (K-bar of them) and their multiplicities.
  const std::vector<double>& distinct() const { return distinct_; }
  const std::vector<int>& multiplicity() const { return multiplicity_; }
  int distinct_count() const { return static_cast<int>(distinct_.size()); }

  // Characteristic magnitude used for relative tolerances.
  double scale() const;

 private:
  std::vector<double> gammas_;
  double sigma2_;
  double c_;
  int zero_count_ = 0;
  std::vector<double> distinct_;
  std::vector<int> multiplicity_;
};

/// One connected component [x_minus, x_plus] of the limiting support and
/// the preimages of its endpoints under phi.
struct Cluster {
  double x_minus = 0.0;
  double x_plus = 0.0;
  double w_minus = 0.0;
  double w_plus = 0.0;
  // Indices into SignalSpectrum::gammas() of the eigenvalues associated to
  // this cluster.
  std::vector<int> eig_indices;
};

struct SeparationMargins {
  double t1_minus = 0.0;
  double t1_plus = 0.0;
  // +infinity when there is no second cluster (no sources).
  double t2_minus = 0.0;
};

struct SupportProfile {
  std::vector<Cluster> clusters;
  int q_count = 0;
  // Present iff no positive eigenvalue is associated to the first cluster.
  std::optional<SeparationMargins> separation;

  bool separated() const { return separation.has_value(); }
  // Index of the cluster whose closed interval holds x, or -1.
  int cluster_of(double x) const;
};

struct WBranchValue {
  Complex w;
  bool inside_support = false;
};

struct Extremum {
  enum class Kind { Min, Max };
  double w = 0.0;
  double x = 0.0;
  Kind kind = Kind::Min;
};

// f(w) = (1/M) sum_k 1 / (gamma_k - w).
Complex f_value(Complex w, const SignalSpectrum& spec);
double f_value(double w, const SignalSpectrum& spec);

Complex phi_value(Complex w, const SignalSpectrum& spec);
double phi_value(double w, const SignalSpectrum& spec);
// Analytic derivative of phi.
double phi_prime(double w, const SignalSpectrum& spec);
Complex phi_prime(Complex w, const SignalSpectrum& spec);

// The 2 * (K-bar + 1) real zeros of phi, ascending.
std::vector<double> zeros_of_phi(const SignalSpectrum& spec);

// Local extrema of phi with positive value whose preimage lies where
// 1 - sigma2 c f(w) > 0, ascending in w. Consecutive (Max, Min) pairs are
// the cluster endpoints. Tangent clusters are merged.
std::vector<Extremum> positive_extrema(const SignalSpectrum& spec);

SupportProfile support_clusters(const SignalSpectrum& spec);

// All roots of phi(w) = x, from the degree 2 (K-bar + 1) polynomial
// obtained by clearing denominators.
std::vector<Complex> phi_level_roots(double x, const SignalSpectrum& spec);

// Branch-correct w(x) for x > 0.
WBranchValue solve_w(double x, const SupportProfile& profile, const SignalSpectrum& spec);

// Boundary value of the Stieltjes transform of the limiting law.
Complex m_on_axis(double x, const SupportProfile& profile, const SignalSpectrum& spec);
double density(double x, const SupportProfile& profile, const SignalSpectrum& spec);

// Mass of the limiting law carried by one cluster.
double cluster_mass(const Cluster& cluster, const SignalSpectrum& spec);
// Limiting distribution function mu([0, x]).
double cumulative_mass(double x, const SupportProfile& profile, const SignalSpectrum& spec);

// Solution of the canonical equation m = h(m, z) for Im z != 0.
Complex canonical_m(Complex z, const SignalSpectrum& spec);

// b^H T(z) b for the deterministic equivalent T(z) of the resolvent.
Complex t_matrix_diag(Complex z, const CMatrix& b_matrix, const SignalSpectrum& spec,
                      const CVector& b);

}  // namespace gmusic
