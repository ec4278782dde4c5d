#include "gmusic/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include <unsupported/Eigen/Polynomials>

#include "numeric_util.hpp"

namespace gmusic {

namespace {

constexpr double kPoleTolerance = 1e-14;
// Points per pole-free interval for the phi' sign scan: a geometric grid
// crowding each end plus a uniform grid over the middle.
constexpr int kGeometricPointsPerEnd = 256;
constexpr int kUniformPoints = 512;

// Poles of f: 0 (with multiplicity zero_count) then the distinct gammas.
// Distance below which w counts as sitting on a pole. The zero pole is
// measured against sigma2, the others against their own magnitude.
double pole_tolerance(double pole, const SignalSpectrum& spec) {
  return kPoleTolerance * std::max(std::abs(pole), spec.sigma2());
}

template <typename T>
T f_eval(T w, const SignalSpectrum& spec) {
  if (std::abs(w) < pole_tolerance(0.0, spec)) {
    throw NumericalError("f: evaluation at the pole w = 0");
  }
  T sum = static_cast<double>(spec.zero_count()) / (0.0 - w);
  const auto& g = spec.distinct();
  const auto& mult = spec.multiplicity();
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (std::abs(g[j] - w) < pole_tolerance(g[j], spec)) {
      throw NumericalError("f: evaluation at the pole w = " + std::to_string(g[j]));
    }
    sum += static_cast<double>(mult[j]) / (g[j] - w);
  }
  return sum / static_cast<double>(spec.m());
}

template <typename T>
T f_prime_eval(T w, const SignalSpectrum& spec) {
  T sum = static_cast<double>(spec.zero_count()) / (w * w);
  const auto& g = spec.distinct();
  const auto& mult = spec.multiplicity();
  for (std::size_t j = 0; j < g.size(); ++j) {
    const T d = g[j] - w;
    sum += static_cast<double>(mult[j]) / (d * d);
  }
  return sum / static_cast<double>(spec.m());
}

template <typename T>
T phi_eval(T w, const SignalSpectrum& spec) {
  const double s2 = spec.sigma2();
  const double c = spec.c();
  const T u = 1.0 - c * s2 * f_eval(w, spec);
  return w * u * u + (1.0 - c) * s2 * u;
}

template <typename T>
T phi_prime_eval(T w, const SignalSpectrum& spec) {
  const double s2 = spec.sigma2();
  const double c = spec.c();
  const T u = 1.0 - c * s2 * f_eval(w, spec);
  const T du = -c * s2 * f_prime_eval(w, spec);
  return u * u + 2.0 * w * u * du + (1.0 - c) * s2 * du;
}

double u_value(double w, const SignalSpectrum& spec) {
  return 1.0 - spec.c() * spec.sigma2() * f_eval(w, spec);
}

// Real poles of f in ascending order.
std::vector<double> poles(const SignalSpectrum& spec) {
  std::vector<double> p{0.0};
  p.insert(p.end(), spec.distinct().begin(), spec.distinct().end());
  return p;
}

// Sample points strictly inside (a, b), crowding both ends geometrically.
std::vector<double> scan_points(double a, double b, const SignalSpectrum& spec) {
  std::vector<double> pts;
  pts.reserve(2 * kGeometricPointsPerEnd + kUniformPoints);
  const double width = b - a;
  // Closest approach to a pole: well outside the pole tolerance of f.
  const double tol = std::max(pole_tolerance(a, spec), pole_tolerance(b, spec));
  const double smallest = std::min(0.25, std::max(1e-12, 10.0 * tol / width));
  for (int j = 0; j < kGeometricPointsPerEnd; ++j) {
    const double t = static_cast<double>(j) / kGeometricPointsPerEnd;
    const double s = 0.5 * std::pow(smallest, 1.0 - t);
    pts.push_back(a + width * s);
    pts.push_back(b - width * s);
  }
  for (int j = 1; j < kUniformPoints; ++j) {
    pts.push_back(a + width * static_cast<double>(j) / kUniformPoints);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::erase_if(pts, [&](double p) { return !(p > a && p < b); });
  return pts;
}

// Right end of the last scanning interval: beyond it phi' stays positive.
double upper_scan_bound(const SignalSpectrum& spec) {
  const double last = spec.distinct().empty() ? 0.0 : spec.distinct().back();
  double span = 4.0 * (spec.sigma2() + last) + spec.sigma2();
  for (int i = 0; i < 200 && phi_prime_eval(last + span, spec) <= 0.0; ++i) span *= 2.0;
  return last + 4.0 * span;
}

struct ScanInterval {
  double lo;
  double hi;
};

std::vector<ScanInterval> scan_intervals(const SignalSpectrum& spec) {
  // All negative critical points and zeros lie above -sigma2.
  std::vector<ScanInterval> out{{-2.0 * spec.sigma2(), 0.0}};
  const auto p = poles(spec);
  for (std::size_t j = 1; j < p.size(); ++j) out.push_back({p[j - 1], p[j]});
  out.push_back({p.back(), upper_scan_bound(spec)});
  return out;
}

// Roots of w U(w)^2 ... after clearing denominators, in units of `scale`.
std::vector<double> level_polynomial(double x, const SignalSpectrum& spec, double scale) {
  using poly::Poly;
  const double s2 = spec.sigma2() / scale;
  const double c = spec.c();
  const double inv_m = 1.0 / spec.m();
  std::vector<double> g;
  for (double v : spec.distinct()) g.push_back(v / scale);
  const auto& mult = spec.multiplicity();

  // prod_j (g_j - w)
  Poly prod{1.0};
  for (double gj : g) prod = poly::mul(prod, Poly{gj, -1.0});
  const Poly w{0.0, 1.0};

  // V = w prod u(w) with u = 1 - c s2 f.
  Poly bracket = poly::scale(prod, -static_cast<double>(spec.zero_count()));
  for (std::size_t j = 0; j < g.size(); ++j) {
    Poly others{1.0};
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (i != j) others = poly::mul(others, Poly{g[i], -1.0});
    }
    bracket = poly::add(bracket, poly::scale(poly::mul(w, others), mult[j]));
  }
  const Poly wprod = poly::mul(w, prod);
  const Poly v = poly::add(wprod, poly::scale(bracket, -c * s2 * inv_m));

  Poly eq = poly::mul(v, v);
  eq = poly::add(eq, poly::scale(poly::mul(v, prod), (1.0 - c) * s2));
  eq = poly::add(eq, poly::scale(poly::mul(wprod, prod), -x / scale));
  return eq;
}

Complex newton_polish(Complex w, double x, const SignalSpectrum& spec) {
  Complex best = w;
  double best_res = std::abs(phi_eval(w, spec) - x);
  for (int it = 0; it < 60; ++it) {
    const Complex r = phi_eval(w, spec) - x;
    const Complex d = phi_prime_eval(w, spec);
    if (d == Complex(0.0)) break;
    const Complex step = r / d;
    w -= step;
    const double res = std::abs(phi_eval(w, spec) - x);
    if (res < best_res) {
      best_res = res;
      best = w;
    }
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(w)) break;
  }
  return best;
}

// Root of phi(w) = x with the largest imaginary part, for x inside the
// support.
Complex interior_w(double x, const SignalSpectrum& spec) {
  const auto roots = phi_level_roots(x, spec);
  Complex best = roots.front();
  for (const auto& r : roots) {
    if (r.imag() > best.imag()) best = r;
  }
  if (best.imag() < 0.0) best = std::conj(best);
  return best;
}

double interior_density(double x, const SignalSpectrum& spec) {
  const Complex w = interior_w(x, spec);
  const Complex f = f_eval(w, spec);
  const Complex m = f / (1.0 - spec.sigma2() * spec.c() * f);
  return std::max(0.0, m.imag()) / std::numbers::pi;
}

// Mass of the density over [x_minus, x_minus + (x_plus - x_minus) sin^2(u_end)].
double cluster_mass_to(const Cluster& cl, double u_end, const SignalSpectrum& spec) {
  const double len = cl.x_plus - cl.x_minus;
  auto integrand = [&](double u) {
    if (u <= 0.0 || u >= std::numbers::pi / 2) return 0.0;
    const double s = std::sin(u);
    const double x = cl.x_minus + len * s * s;
    if (!(x > cl.x_minus && x < cl.x_plus)) return 0.0;
    return len * std::sin(2.0 * u) * interior_density(x, spec);
  };
  return quad::adaptive_simpson(integrand, 0.0, u_end, 1e-8);
}

}  // namespace

// ---------------------------------------------------------------------------

SignalSpectrum::SignalSpectrum(std::vector<double> gammas, double sigma2, double c)
    : gammas_(std::move(gammas)), sigma2_(sigma2), c_(c) {
  if (gammas_.empty()) throw ValidationError("spectrum: no eigenvalues");
  if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
    throw ValidationError("spectrum: sigma2 must be positive");
  }
  if (!(c_ > 0.0 && c_ < 1.0)) throw ValidationError("spectrum: c must lie in (0, 1)");
  std::sort(gammas_.begin(), gammas_.end());
  const double top = std::max(gammas_.back(), 0.0);
  for (double& g : gammas_) {
    if (!std::isfinite(g)) throw ValidationError("spectrum: non-finite eigenvalue");
    if (g <= 1e-12 * top) {
      if (g < -1e-12 * top) throw ValidationError("spectrum: negative eigenvalue");
      g = 0.0;
    }
  }
  zero_count_ = static_cast<int>(std::count(gammas_.begin(), gammas_.end(), 0.0));
  if (zero_count_ == 0) {
    throw ValidationError("spectrum: B B^H must have at least one zero eigenvalue (K < M)");
  }
  for (int i = zero_count_; i < m(); ++i) {
    const double g = gammas_[static_cast<std::size_t>(i)];
    if (!distinct_.empty() && g - distinct_.back() <= kMergeTolerance * g) {
      ++multiplicity_.back();
    } else {
      distinct_.push_back(g);
      multiplicity_.push_back(1);
    }
  }
}

SignalSpectrum SignalSpectrum::from_signal(const CMatrix& b_matrix, int rank, double sigma2,
                                           double c) {
  const auto m = b_matrix.rows();
  if (rank < 0 || rank >= m) throw ValidationError("spectrum: requires 0 <= rank < M");
  std::vector<double> gammas(static_cast<std::size_t>(m), 0.0);
  if (rank > 0) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(b_matrix * b_matrix.adjoint(),
                                              Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("spectrum: eigensolver failed");
    for (Eigen::Index i = m - rank; i < m; ++i) {
      gammas[static_cast<std::size_t>(i)] = std::max(0.0, es.eigenvalues()[i]);
    }
  }
  return SignalSpectrum(std::move(gammas), sigma2, c);
}

double SignalSpectrum::scale() const {
  return std::max(gammas_.back(), sigma2_);
}

int SupportProfile::cluster_of(double x) const {
  for (std::size_t q = 0; q < clusters.size(); ++q) {
    if (x >= clusters[q].x_minus && x <= clusters[q].x_plus) return static_cast<int>(q);
  }
  return -1;
}

Complex f_value(Complex w, const SignalSpectrum& spec) { return f_eval(w, spec); }
double f_value(double w, const SignalSpectrum& spec) { return f_eval(w, spec); }
Complex phi_value(Complex w, const SignalSpectrum& spec) { return phi_eval(w, spec); }
double phi_value(double w, const SignalSpectrum& spec) { return phi_eval(w, spec); }
double phi_prime(double w, const SignalSpectrum& spec) { return phi_prime_eval(w, spec); }
Complex phi_prime(Complex w, const SignalSpectrum& spec) { return phi_prime_eval(w, spec); }

std::vector<double> zeros_of_phi(const SignalSpectrum& spec) {
  const double s2 = spec.sigma2();
  const double c = spec.c();
  auto u = [&](double w) { return u_value(w, spec); };
  auto v = [&](double w) { return w * u_value(w, spec) + (1.0 - c) * s2; };
  const auto p = poles(spec);
  std::vector<double> zeros;

  // Negative pair: u changes sign on (-2 c s2, 0), v on (-2 s2, z0+).
  const double tiny = 10.0 * pole_tolerance(0.0, spec);
  const double z0_plus = roots::bisect(u, -2.0 * c * s2, -tiny);
  zeros.push_back(roots::bisect(v, -2.0 * s2, z0_plus));
  zeros.push_back(z0_plus);

  // One pair below every positive pole: u decreases through zero, then v
  // does between that zero and the pole.
  for (std::size_t j = 1; j < p.size(); ++j) {
    const double gap = p[j] - p[j - 1];
    const double tol = std::max(pole_tolerance(p[j - 1], spec), pole_tolerance(p[j], spec));
    const double off = std::min(0.25 * gap, std::max(1e-12 * gap, 10.0 * tol));
    const double zk_minus = roots::bisect(u, p[j - 1] + off, p[j] - off);
    zeros.push_back(zk_minus);
    zeros.push_back(roots::bisect(v, zk_minus, p[j] - off));
  }
  std::sort(zeros.begin(), zeros.end());
  return zeros;
}

std::vector<Extremum> positive_extrema(const SignalSpectrum& spec) {
  std::vector<Extremum> ext;
  auto dphi = [&](double w) { return phi_prime_eval(w, spec); };
  for (const auto& iv : scan_intervals(spec)) {
    const auto pts = scan_points(iv.lo, iv.hi, spec);
    double prev_w = pts.front();
    double prev_d = dphi(prev_w);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double w = pts[i];
      const double d = dphi(w);
      if ((prev_d > 0.0 && d <= 0.0) || (prev_d < 0.0 && d >= 0.0)) {
        const double root = (d == 0.0) ? w : roots::bisect(dphi, prev_w, w, 1e-13);
        const double x = phi_eval(root, spec);
        if (x > 0.0 && u_value(root, spec) > 0.0) {
          ext.push_back({root, x, prev_d > 0.0 ? Extremum::Kind::Max : Extremum::Kind::Min});
        }
        if (d == 0.0 && i + 1 < pts.size()) {
          // Skip the exact zero so it is not counted twice.
          prev_w = w;
          prev_d = dphi(pts[i + 1]);
          continue;
        }
      }
      prev_w = w;
      prev_d = d;
    }
  }
  std::sort(ext.begin(), ext.end(), [](const Extremum& a, const Extremum& b) { return a.w < b.w; });

  // Expected pattern (Max, Min)+. Merge tangent clusters by dropping an
  // interior (Min, Max) pair whose values touch or cross.
  for (std::size_t i = 0; i < ext.size(); ++i) {
    const auto expect = (i % 2 == 0) ? Extremum::Kind::Max : Extremum::Kind::Min;
    if (ext[i].kind != expect) {
      throw NumericalError("positive_extrema: extrema do not alternate as max/min pairs");
    }
  }
  if (ext.size() % 2 != 0 || ext.empty()) {
    throw NumericalError("positive_extrema: odd or empty set of positive extrema");
  }
  for (std::size_t i = 1; i + 2 < ext.size();) {
    const double lo = ext[i].x;
    const double hi = ext[i + 1].x;
    if (lo >= hi * (1.0 - 1e-12)) {
      ext.erase(ext.begin() + static_cast<std::ptrdiff_t>(i),
                ext.begin() + static_cast<std::ptrdiff_t>(i + 2));
    } else {
      i += 2;
    }
  }
  return ext;
}

SupportProfile support_clusters(const SignalSpectrum& spec) {
  const auto ext = positive_extrema(spec);
  SupportProfile profile;
  for (std::size_t i = 0; i + 1 < ext.size(); i += 2) {
    Cluster cl;
    cl.w_minus = ext[i].w;
    cl.x_minus = ext[i].x;
    cl.w_plus = ext[i + 1].w;
    cl.x_plus = ext[i + 1].x;
    profile.clusters.push_back(std::move(cl));
  }
  profile.q_count = static_cast<int>(profile.clusters.size());

  const auto& g = spec.gammas();
  for (int idx = 0; idx < spec.m(); ++idx) {
    const double gamma = g[static_cast<std::size_t>(idx)];
    bool placed = false;
    for (auto& cl : profile.clusters) {
      if (gamma > cl.w_minus && gamma < cl.w_plus) {
        cl.eig_indices.push_back(idx);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw NumericalError("support_clusters: eigenvalue " + std::to_string(gamma) +
                           " not associated to any cluster");
    }
  }

  const auto& first = profile.clusters.front();
  if (static_cast<int>(first.eig_indices.size()) == spec.zero_count()) {
    SeparationMargins sep;
    const double gap0 = first.x_minus;
    sep.t1_minus = first.x_minus - 0.25 * gap0;
    if (profile.q_count >= 2) {
      const double gap1 = profile.clusters[1].x_minus - first.x_plus;
      sep.t1_plus = first.x_plus + 0.25 * gap1;
      sep.t2_minus = profile.clusters[1].x_minus - 0.25 * gap1;
    } else {
      sep.t1_plus = first.x_plus + 0.25 * (first.x_plus - first.x_minus);
      sep.t2_minus = std::numeric_limits<double>::infinity();
    }
    profile.separation = sep;
  }
  return profile;
}

std::vector<Complex> phi_level_roots(double x, const SignalSpectrum& spec) {
  const double scale = spec.scale();
  auto coeffs = level_polynomial(x, spec, scale);
  // Strip vanishing leading terms (never expected, degree is 2(K+1)).
  while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
  Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(coeffs.data(),
                                                        static_cast<Eigen::Index>(coeffs.size()));
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
  solver.compute(c);
  std::vector<Complex> out;
  for (Eigen::Index i = 0; i < solver.roots().size(); ++i) {
    out.push_back(newton_polish(solver.roots()[i] * scale, x, spec));
  }
  std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
  return out;
}

WBranchValue solve_w(double x, const SupportProfile& profile, const SignalSpectrum& spec) {
  if (!(x > 0.0)) throw ValidationError("solve_w: requires x > 0");
  const auto& cls = profile.clusters;
  for (const auto& cl : cls) {
    if (x == cl.x_minus) return {Complex(cl.w_minus), false};
    if (x == cl.x_plus) return {Complex(cl.w_plus), false};
    if (x > cl.x_minus && x < cl.x_plus) return {interior_w(x, spec), true};
  }

  auto phi = [&](double w) { return phi_eval(w, spec); };
  double lo = 0.0;
  double hi = 0.0;
  if (x < cls.front().x_minus) {
    hi = cls.front().w_minus;
    double step = spec.sigma2() + std::abs(x);
    lo = hi - step;
    while (phi(lo) >= x) {
      step *= 2.0;
      lo = hi - step;
    }
  } else if (x > cls.back().x_plus) {
    lo = cls.back().w_plus;
    hi = lo + (x - cls.back().x_plus) + spec.sigma2();
    while (phi(hi) <= x) hi += 2.0 * (hi - lo);
  } else {
    for (std::size_t q = 0; q + 1 < cls.size(); ++q) {
      if (x > cls[q].x_plus && x < cls[q + 1].x_minus) {
        lo = cls[q].w_plus;
        hi = cls[q + 1].w_minus;
        break;
      }
    }
  }
  const double w = roots::bisect([&](double t) { return phi(t) - x; }, lo, hi);
  return {Complex(w), false};
}

Complex m_on_axis(double x, const SupportProfile& profile, const SignalSpectrum& spec) {
  for (const auto& cl : profile.clusters) {
    if (x == cl.x_minus || x == cl.x_plus) {
      throw NumericalError("m_on_axis: x is a support edge");
    }
  }
  const Complex w = solve_w(x, profile, spec).w;
  const Complex f = f_eval(w, spec);
  return f / (1.0 - spec.sigma2() * spec.c() * f);
}

double density(double x, const SupportProfile& profile, const SignalSpectrum& spec) {
  for (const auto& cl : profile.clusters) {
    if (x > cl.x_minus && x < cl.x_plus) return interior_density(x, spec);
  }
  return 0.0;
}

double cluster_mass(const Cluster& cluster, const SignalSpectrum& spec) {
  return cluster_mass_to(cluster, std::numbers::pi / 2, spec);
}

double cumulative_mass(double x, const SupportProfile& profile, const SignalSpectrum& spec) {
  double total = 0.0;
  for (const auto& cl : profile.clusters) {
    if (x >= cl.x_plus) {
      total += cluster_mass(cl, spec);
    } else if (x > cl.x_minus) {
      const double frac = (x - cl.x_minus) / (cl.x_plus - cl.x_minus);
      total += cluster_mass_to(cl, std::asin(std::sqrt(frac)), spec);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Canonical equation.

namespace {

struct CanonicalEq {
  const SignalSpectrum& spec;
  Complex z;

  Complex denom(double gamma, Complex one_plus) const {
    const double s2 = spec.sigma2();
    const double c = spec.c();
    return -z * one_plus + s2 * (1.0 - c) + gamma / one_plus;
  }

  Complex h(Complex m) const {
    const Complex one_plus = 1.0 + spec.sigma2() * spec.c() * m;
    Complex sum = static_cast<double>(spec.zero_count()) / denom(0.0, one_plus);
    for (std::size_t j = 0; j < spec.distinct().size(); ++j) {
      sum += static_cast<double>(spec.multiplicity()[j]) / denom(spec.distinct()[j], one_plus);
    }
    return sum / static_cast<double>(spec.m());
  }

  Complex h_prime(Complex m) const {
    const double a = spec.sigma2() * spec.c();
    const Complex one_plus = 1.0 + a * m;
    auto term = [&](double gamma, double mult) {
      const Complex d = denom(gamma, one_plus);
      const Complex dd = -z * a - gamma * a / (one_plus * one_plus);
      return -mult * dd / (d * d);
    };
    Complex sum = term(0.0, spec.zero_count());
    for (std::size_t j = 0; j < spec.distinct().size(); ++j) {
      sum += term(spec.distinct()[j], spec.multiplicity()[j]);
    }
    return sum / static_cast<double>(spec.m());
  }

  bool admissible(Complex m) const {
    const double y = z.imag();
    return std::isfinite(m.real()) && std::isfinite(m.imag()) && m.imag() * y > 0.0 &&
           std::abs(m) <= (1.0 + 1e-9) / std::abs(y);
  }

  // Damped fixed-point iteration. Returns nullopt on divergence.
  std::optional<Complex> fixed_point(Complex m, int max_iter) const {
    double alpha = 1.0;
    double prev_delta = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
      const Complex next = h(m);
      const double delta = std::abs(next - m);
      if (!std::isfinite(delta)) return std::nullopt;
      if (delta < 1e-12 * std::max(1.0, std::abs(m))) return next;
      if (delta > prev_delta) alpha *= 0.5;
      prev_delta = delta;
      m += alpha * (next - m);
      if (alpha < 1e-8) return std::nullopt;
    }
    return std::nullopt;
  }

  std::optional<Complex> newton(Complex m) const {
    for (int it = 0; it < 100; ++it) {
      const Complex step = (m - h(m)) / (1.0 - h_prime(m));
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) return std::nullopt;
      m -= step;
      if (std::abs(step) <= 1e-15 * std::abs(m)) break;
    }
    if (std::abs(m - h(m)) > 1e-11 * std::max(1.0, std::abs(m))) return std::nullopt;
    return m;
  }
};

}  // namespace

Complex canonical_m(Complex z, const SignalSpectrum& spec) {
  if (z.imag() == 0.0) throw ValidationError("canonical_m: requires Im z != 0");
  if (z.imag() < 0.0) return std::conj(canonical_m(std::conj(z), spec));

  const CanonicalEq eq{spec, z};
  if (auto m = eq.fixed_point(-1.0 / z, 10000); m && eq.admissible(*m)) {
    if (auto polished = eq.newton(*m); polished && eq.admissible(*polished)) return *polished;
    return *m;
  }

  // Continuation from far above the axis, following the Stieltjes branch
  // with Newton steps.
  const double target = z.imag();
  double y = std::max(10.0 * target, 10.0 * std::max(std::abs(z.real()), spec.scale()));
  const CanonicalEq start{spec, Complex(z.real(), y)};
  auto cur = start.fixed_point(-1.0 / start.z, 10000);
  if (!cur || !start.admissible(*cur)) {
    throw NumericalError("canonical_m: fixed-point iteration diverged");
  }
  Complex m = *cur;
  int guard = 0;
  double factor = 0.5;
  while (y > target) {
    if (++guard > 100000) throw NumericalError("canonical_m: continuation stalled");
    const double y_next = std::max(target, y * factor);
    const CanonicalEq step{spec, Complex(z.real(), y_next)};
    auto next = step.newton(m);
    if (next && step.admissible(*next)) {
      m = *next;
      y = y_next;
      factor = std::max(0.05, factor * 0.8);
    } else {
      factor = 0.5 * (1.0 + factor);
      if (factor > 1.0 - 1e-9) throw NumericalError("canonical_m: continuation failed");
    }
  }
  return m;
}

Complex t_matrix_diag(Complex z, const CMatrix& b_matrix, const SignalSpectrum& spec,
                      const CVector& b) {
  const auto m = b_matrix.rows();
  if (b.size() != m || spec.m() != m) throw ValidationError("t_matrix_diag: dimension mismatch");
  const Complex mz = canonical_m(z, spec);
  const Complex one_plus = 1.0 + spec.sigma2() * spec.c() * mz;
  CMatrix inv = (b_matrix * b_matrix.adjoint()) / one_plus;
  inv.diagonal().array() += -z * one_plus + spec.sigma2() * (1.0 - spec.c());
  const CVector x = inv.partialPivLu().solve(b);
  return b.dot(x);
}

}  // namespace gmusic
