#include "gmusic/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "numeric_util.hpp"

namespace gmusic {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kTieSpread = 1e-10;

std::vector<double> split_ties(std::vector<double> l) {
  if (l.size() < 2) return l;
  const double scale = l.back() > 0.0 ? l.back() : 1.0;
  for (int pass = 0; pass < 8; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i + 1 < l.size();) {
      std::size_t j = i + 1;
      while (j < l.size() && l[j] - l[j - 1] < kTieTolerance * scale) ++j;
      const std::size_t group = j - i;
      if (group > 1) {
        double mean = 0.0;
        for (std::size_t t = i; t < j; ++t) mean += l[t];
        mean /= static_cast<double>(group);
        for (std::size_t t = i; t < j; ++t) {
          const double pos = static_cast<double>(t - i) - 0.5 * static_cast<double>(group - 1);
          l[t] = mean + 2.0 * kTieSpread * scale * pos;
        }
        changed = true;
      }
      i = j;
    }
    if (!changed) break;
    std::sort(l.begin(), l.end());
  }
  return l;
}

// g(delta) = 1 + a sum_i 1 / (d_i - delta), d_i = lambda_i - lambda_k.
struct ShiftedSecular {
  const std::vector<double>& lambdas;
  std::size_t k;
  double a;

  double operator()(double delta) const {
    const double lk = lambdas[k];
    double sum = 0.0;
    for (double li : lambdas) sum += 1.0 / ((li - lk) - delta);
    return 1.0 + a * sum;
  }
};

}  // namespace

EigenSystem eigensystem(const CMatrix& sigma) {
  if (sigma.rows() > sigma.cols()) throw ValidationError("eigensystem: requires M <= N");
  const CMatrix r = sigma * sigma.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  if (es.info() != Eigen::Success) throw NumericalError("eigensystem: eigensolver failed");
  EigenSystem out{es.eigenvalues().cwiseMax(0.0), es.eigenvectors()};
  for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
    auto col = out.vectors.col(j);
    const double norm = col.norm();
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      const double mag = std::abs(col[i]);
      if (mag > 1e-12 * norm) {
        col *= std::conj(col[i]) / mag;
        col[i] = mag;
        break;
      }
    }
  }
  return out;
}

EigenSystem eigensystem(const Observation& obs) { return eigensystem(obs.sigma); }

Complex m_hat(Complex z, std::span<const double> lambdas) {
  Complex sum = 0.0;
  for (double l : lambdas) {
    if (z == Complex(l)) throw NumericalError("m_hat: evaluation at an eigenvalue");
    sum += 1.0 / (l - z);
  }
  return sum / static_cast<double>(lambdas.size());
}

Complex m_hat(Complex z, const EigenSystem& eig) {
  return m_hat(z, std::span<const double>(eig.lambdas.data(), eig.lambdas.size()));
}

double OmegaRoots::lambda_minus_omega(int i, int k) const {
  const auto ii = static_cast<std::size_t>(i);
  const auto kk = static_cast<std::size_t>(k);
  return (lambdas[ii] - lambdas[kk]) - offsets[kk];
}

double OmegaRoots::residual(int k) const {
  const double a = sigma2 * c / m();
  double sum = 0.0;
  for (int i = 0; i < m(); ++i) sum += 1.0 / lambda_minus_omega(i, k);
  return std::abs(1.0 + a * sum);
}

OmegaRoots solve_omegas(std::span<const double> lambdas, double sigma2, double c) {
  if (lambdas.empty()) throw ValidationError("solve_omegas: no eigenvalues");
  if (!(sigma2 > 0.0) || !(c > 0.0)) {
    throw ValidationError("solve_omegas: requires sigma2 > 0 and c > 0");
  }
  OmegaRoots roots;
  roots.sigma2 = sigma2;
  roots.c = c;
  roots.lambdas.assign(lambdas.begin(), lambdas.end());
  if (!std::is_sorted(roots.lambdas.begin(), roots.lambdas.end())) {
    throw ValidationError("solve_omegas: eigenvalues must be ascending");
  }
  roots.lambdas = split_ties(std::move(roots.lambdas));
  const auto& l = roots.lambdas;
  const std::size_t m = l.size();
  const double a = sigma2 * c / static_cast<double>(m);

  for (std::size_t k = 0; k < m; ++k) {
    const ShiftedSecular g{l, k, a};
    // g increases from -inf just above lambda_k to +inf below lambda_{k+1};
    // above lambda_M it reaches g >= 0 by delta = sigma2 c.
    const double upper = (k + 1 < m) ? l[k + 1] - l[k] : sigma2 * c;
    double lo = 1e-12 * upper;
    double hi = (k + 1 < m) ? upper * (1.0 - 1e-12) : upper;
    for (int shrink = 0; shrink < 40 && g(lo) >= 0.0; ++shrink) lo *= 1e-3;
    if (k + 1 < m) {
      for (int shrink = 0; shrink < 40 && g(hi) <= 0.0; ++shrink) hi = upper - (upper - hi) * 1e-3;
    }
    if (!(g(lo) < 0.0) || !(g(hi) >= 0.0)) {
      throw NumericalError("solve_omegas: bracket failure for root " + std::to_string(k));
    }
    const double delta = roots::bisect(g, lo, hi);
    roots.offsets.push_back(delta);
    roots.omegas.push_back(l[k] + delta);
  }
  return roots;
}

OmegaRoots solve_omegas(const EigenSystem& eig, double sigma2, double c) {
  return solve_omegas(std::span<const double>(eig.lambdas.data(), eig.lambdas.size()), sigma2, c);
}

XiWeights xi_weights(const OmegaRoots& roots, int k) {
  const int m = roots.m();
  if (k < 0 || k >= m) throw ValidationError("xi_weights: requires 0 <= K < M");
  const int n = m - k;
  const double s2 = roots.sigma2;
  const double c = roots.c;
  const double a = s2 * c / m;
  const auto& l = roots.lambdas;
  auto lam = [&](int i) { return l[static_cast<std::size_t>(i)]; };
  auto off = [&](int i) { return roots.offsets[static_cast<std::size_t>(i)]; };

  // 1/(l_k - l_j) - 1/(l_k - w_j) = -delta_j / ((l_k - l_j)(l_k - w_j))
  auto cross = [&](int kk, int j) {
    const double d = lam(kk) - lam(j);
    return -off(j) / (d * (d - off(j)));
  };

  XiWeights out;
  out.xi.resize(static_cast<std::size_t>(m));
  for (int kk = 0; kk < n; ++kk) {
    double quad = 0.0;
    double mixed = 0.0;
    for (int j = n; j < m; ++j) {
      const double d = lam(kk) - lam(j);
      quad += (lam(kk) + lam(j)) / (d * d);
      mixed += cross(kk, j);
    }
    out.xi[static_cast<std::size_t>(kk)] = 1.0 + a * quad + s2 * (1.0 - c) * mixed;
  }
  for (int kk = n; kk < m; ++kk) {
    double quad = 0.0;
    double mixed = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = lam(kk) - lam(j);
      quad += (lam(kk) + lam(j)) / (d * d);
      mixed += cross(kk, j);
    }
    out.xi[static_cast<std::size_t>(kk)] = -a * quad - s2 * (1.0 - c) * mixed;
  }
  return out;
}

XiWeights xi_weights(const EigenSystem& eig, const OmegaRoots& roots, int k) {
  if (eig.m() != roots.m()) throw ValidationError("xi_weights: dimension mismatch");
  return xi_weights(roots, k);
}

XiWeights xi_weights_residue_form(const OmegaRoots& roots, int k) {
  const int m = roots.m();
  if (k < 0 || k >= m) throw ValidationError("xi_weights_residue_form: requires 0 <= K < M");
  const int n = m - k;
  const double s2 = roots.sigma2;
  const double c = roots.c;
  const double a = s2 * c / m;
  const auto& l = roots.lambdas;
  auto lam = [&](int i) { return l[static_cast<std::size_t>(i)]; };
  // omega_i - lambda_kk
  auto om_minus = [&](int i, int kk) { return -roots.lambda_minus_omega(kk, i); };

  XiWeights out;
  out.xi.resize(static_cast<std::size_t>(m));
  for (int kk = 0; kk < n; ++kk) {
    // Residues at lambda_kk itself plus the other noise eigenvalues and
    // all noise roots omega_1..omega_{M-K}.
    double v = 1.0 + m * (1.0 - c) / c;
    double all = 0.0;
    double noise = 0.0;
    double noise_om = 0.0;
    for (int i = 0; i < m; ++i) {
      if (i != kk) all += 1.0 / (lam(i) - lam(kk));
    }
    for (int i = n; i < m; ++i) {
      const double d = lam(kk) - lam(i);
      v += -a / d + 2.0 * a * lam(kk) / (d * d);
    }
    for (int i = 0; i < n; ++i) {
      if (i != kk) noise += 1.0 / (lam(i) - lam(kk));
      noise_om += 1.0 / om_minus(i, kk);
    }
    v += s2 * (1.0 - c) * (all + noise - noise_om);
    out.xi[static_cast<std::size_t>(kk)] = v;
  }
  for (int kk = n; kk < m; ++kk) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = lam(kk) - lam(i);
      v += a / d - 2.0 * a * lam(kk) / (d * d) - s2 * (1.0 - c) / d +
           s2 * (1.0 - c) / roots.lambda_minus_omega(kk, i);
    }
    out.xi[static_cast<std::size_t>(kk)] = v;
  }
  return out;
}

double xi_identity_residual(const OmegaRoots& roots) {
  const int m = roots.m();
  const auto& l = roots.lambdas;
  double worst = 0.0;
  double biggest = 0.0;
  for (int k = 0; k < m; ++k) {
    double lhs = 0.0;
    double rhs = 0.0;
    for (int i = 0; i < m; ++i) {
      if (i == k) continue;
      const double t1 = 1.0 / roots.lambda_minus_omega(i, k);
      const double t2 = 2.0 / (l[static_cast<std::size_t>(i)] - l[static_cast<std::size_t>(k)]);
      const double t3 = 1.0 / -roots.lambda_minus_omega(k, i);
      lhs += t1;
      rhs += t2 - t3;
      biggest = std::max({biggest, std::abs(t1), std::abs(t2), std::abs(t3)});
    }
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return biggest > 0.0 ? worst / biggest : 0.0;
}

double eta_traditional(const CVector& b, const EigenSystem& eig, int k) {
  const int m = eig.m();
  if (b.size() != m) throw ValidationError("eta_traditional: dimension mismatch");
  if (k < 0 || k >= m) throw ValidationError("eta_traditional: requires 0 <= K < M");
  double sum = 0.0;
  for (int j = 0; j < m - k; ++j) sum += std::norm(eig.vectors.col(j).dot(b));
  return sum;
}

double eta_new(const CVector& b, const EigenSystem& eig, const XiWeights& xi) {
  const int m = eig.m();
  if (b.size() != m || static_cast<int>(xi.xi.size()) != m) {
    throw ValidationError("eta_new: dimension mismatch");
  }
  double sum = 0.0;
  for (int j = 0; j < m; ++j) {
    sum += xi.xi[static_cast<std::size_t>(j)] * std::norm(eig.vectors.col(j).dot(b));
  }
  return sum;
}

// ---------------------------------------------------------------------------

EmpiricalWFunction::EmpiricalWFunction(std::vector<double> lambdas, double sigma2, double c)
    : lambdas_(std::move(lambdas)), sigma2_(sigma2), c_(c) {
  if (lambdas_.empty()) throw ValidationError("EmpiricalWFunction: no eigenvalues");
  std::sort(lambdas_.begin(), lambdas_.end());
}

Complex EmpiricalWFunction::operator()(Complex z) const {
  const Complex g = 1.0 + sigma2_ * c_ * m_hat(z, lambdas_);
  return z * g * g - sigma2_ * (1.0 - c_) * g;
}

double EmpiricalWFunction::operator()(double x) const { return (*this)(Complex(x)).real(); }

std::vector<double> EmpiricalWFunction::zeros() const {
  if (lambdas_.front() <= 0.0) throw ValidationError("what_zeros: eigenvalues must be positive");
  const auto roots = solve_omegas(lambdas_, sigma2_, c_);
  const auto& l = roots.lambdas;
  const std::size_t m = l.size();
  const double s2c = sigma2_ * c_;
  const double target = sigma2_ * (1.0 - c_);
  // x g(x) - sigma2 (1 - c): increasing wherever g > 0.
  auto h = [&](double x) {
    double sum = 0.0;
    for (double li : l) sum += 1.0 / (li - x);
    return x * (1.0 + s2c * sum / static_cast<double>(m)) - target;
  };

  std::vector<double> z;
  z.reserve(2 * m + 1);
  z.push_back(roots::bisect(h, 0.0, l[0] * (1.0 - 1e-15)));
  for (std::size_t k = 0; k < m; ++k) {
    const double w = roots.omegas[k];
    z.push_back(w);
    double hi = 0.0;
    if (k + 1 < m) {
      hi = l[k + 1] - 1e-15 * l[k + 1];
      for (int shrink = 0; shrink < 40 && h(hi) <= 0.0; ++shrink) hi = l[k + 1] - (l[k + 1] - hi) * 1e-3;
    } else {
      double span = target + s2c + (w - l[k]);
      while (h(w + span) <= 0.0) span *= 2.0;
      hi = w + span;
    }
    z.push_back(roots::bisect(h, w, hi));
  }
  return z;
}

std::vector<double> what_zeros(const EigenSystem& eig, double sigma2, double c) {
  return EmpiricalWFunction({eig.lambdas.data(), eig.lambdas.data() + eig.lambdas.size()}, sigma2,
                            c)
      .zeros();
}

}  // namespace gmusic
