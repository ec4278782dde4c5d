#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "gmusic/types.hpp"

namespace gmusic {

namespace poly {

// Ascending coefficients: p(x) = sum_i p[i] x^i.
using Poly = std::vector<double>;

inline Poly mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

inline Poly add(const Poly& a, const Poly& b) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

inline Poly scale(Poly a, double s) {
  for (double& v : a) v *= s;
  return a;
}

}  // namespace poly

namespace roots {

// Root of a continuous fn with a sign change on [lo, hi]. Stops when the
// bracket is below rel_tol relative width or the midpoint stops moving.
template <typename Fn>
double bisect(Fn&& fn, double lo, double hi, double rel_tol = 0.0) {
  double flo = fn(lo);
  const double fhi = fn(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw NumericalError("bisect: no sign change on bracket");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (rel_tol > 0.0 && (hi - lo) <= rel_tol * std::max(std::abs(lo), std::abs(hi))) break;
    const double fm = fn(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace roots

namespace quad {

namespace detail {

template <typename Fn>
double simpson_step(Fn& fn, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = fn(lm);
  const double frm = fn(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  if (depth <= 0) throw NumericalError("adaptive_simpson: quadrature did not converge");
  return simpson_step(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson over [a, b] to absolute tolerance tol, started from a
// fixed panel split so narrow features are not skipped.
template <typename Fn>
double adaptive_simpson(Fn&& fn, double a, double b, double tol, int panels = 16) {
  if (b <= a) return 0.0;
  double total = 0.0;
  const double h = (b - a) / panels;
  const double panel_tol = tol / panels;
  double x0 = a;
  double f0 = fn(x0);
  for (int p = 0; p < panels; ++p) {
    const double x1 = (p + 1 == panels) ? b : a + h * (p + 1);
    const double xm = 0.5 * (x0 + x1);
    const double fm = fn(xm);
    const double f1 = fn(x1);
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    total += detail::simpson_step(fn, x0, x1, f0, fm, f1, whole, panel_tol, 40);
    x0 = x1;
    f0 = f1;
  }
  return total;
}

}  // namespace quad

}  // namespace gmusic
