#pragma once

#include <span>
#include <vector>

#include "gmusic/signal_model.hpp"
#include "gmusic/types.hpp"

namespace gmusic {

/// Eigendecomposition of R = Sigma Sigma^H. Eigenvalues ascending; the first
/// nonzero component of every eigenvector is real and positive.
struct EigenSystem {
  RVector lambdas;
  CMatrix vectors;

  int m() const { return static_cast<int>(lambdas.size()); }
};

EigenSystem eigensystem(const CMatrix& sigma);
EigenSystem eigensystem(const Observation& obs);

// (1/M) sum_k 1 / (lambda_k - z).
Complex m_hat(Complex z, std::span<const double> lambdas);
Complex m_hat(Complex z, const EigenSystem& eig);

/// Roots of 1 + sigma2 c m_hat(x) = 0, one per interval (lambda_k,
/// lambda_{k+1}) and one above lambda_M.
///
/// Each root is kept as an offset from its left pole so that differences
/// lambda_i - omega_k keep full relative precision. `lambdas` holds the
/// eigenvalues the roots were solved against: equal to the input except
/// that exact ties are split apart by 1e-10 * lambda_M.
struct OmegaRoots {
  std::vector<double> lambdas;
  std::vector<double> offsets;
  std::vector<double> omegas;
  double sigma2 = 0.0;
  double c = 0.0;

  int m() const { return static_cast<int>(omegas.size()); }
  // lambda_i - omega_k computed from the offset representation.
  double lambda_minus_omega(int i, int k) const;
  // |1 + sigma2 c m_hat(omega_k)|.
  double residual(int k) const;
};

OmegaRoots solve_omegas(std::span<const double> lambdas, double sigma2, double c);
OmegaRoots solve_omegas(const EigenSystem& eig, double sigma2, double c);

struct XiWeights {
  std::vector<double> xi;
};

// Weights of the consistent estimator in their closed form.
XiWeights xi_weights(const OmegaRoots& roots, int k);
XiWeights xi_weights(const EigenSystem& eig, const OmegaRoots& roots, int k);

// Same weights as the raw sum of residues, before the sums over the noise
// roots are eliminated. Equal to xi_weights() up to rounding.
XiWeights xi_weights_residue_form(const OmegaRoots& roots, int k);

// Max over k of the mismatch in the pole identity
//   (1/M) sum_{i!=k} 1/(l_i - w_k)
//     = (2/M) sum_{i!=k} 1/(l_i - l_k) - (1/M) sum_{i!=k} 1/(w_i - l_k)
// relative to the largest single term.
double xi_identity_residual(const OmegaRoots& roots);

// sum_{k <= M-K} |b^H e_k|^2
double eta_traditional(const CVector& b, const EigenSystem& eig, int k);
// sum_k xi_k |b^H e_k|^2, unclamped.
double eta_new(const CVector& b, const EigenSystem& eig, const XiWeights& xi);

/// w_hat(z) = z (1 + sigma2 c m_hat(z))^2 - sigma2 (1 - c) (1 + sigma2 c m_hat(z)).
class EmpiricalWFunction {
 public:
  EmpiricalWFunction(std::vector<double> lambdas, double sigma2, double c);

  Complex operator()(Complex z) const;
  double operator()(double x) const;

  // The 2M + 1 real zeros, ascending:
  // z_0 < l_1 < w_1 < z_1 < l_2 < ... < l_M < w_M < z_M.
  std::vector<double> zeros() const;

 private:
  std::vector<double> lambdas_;
  double sigma2_;
  double c_;
};

std::vector<double> what_zeros(const EigenSystem& eig, double sigma2, double c);

}  // namespace gmusic
