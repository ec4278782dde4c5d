#include "gmusic/doa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gmusic/signal_model.hpp"

namespace gmusic {

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Traditional:
      return "traditional";
    case EstimatorKind::New:
      return "new";
    case EstimatorKind::Unconditional:
      return "unconditional";
  }
  return "unknown";
}

std::vector<double> angle_grid(double step_deg) {
  if (!(step_deg > 0.0) || step_deg >= 90.0) {
    throw ValidationError("angle_grid: step must lie in (0, 90)");
  }
  const auto count = static_cast<int>(std::floor(90.0 / step_deg - 1e-9));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * count + 1));
  for (int i = -count; i <= count; ++i) grid.push_back(i * step_deg);
  return grid;
}

std::vector<double> traditional_weights(int m, int k) {
  if (k < 0 || k >= m) throw ValidationError("traditional_weights: requires 0 <= K < M");
  std::vector<double> w(static_cast<std::size_t>(m), 0.0);
  std::fill(w.begin(), w.begin() + (m - k), 1.0);
  return w;
}

std::vector<double> estimator_weights(EstimatorKind kind, const EigenSystem& eig, double sigma2,
                                      double c, int k) {
  switch (kind) {
    case EstimatorKind::Traditional:
      return traditional_weights(eig.m(), k);
    case EstimatorKind::New:
      return xi_weights(solve_omegas(eig, sigma2, c), k).xi;
    case EstimatorKind::Unconditional:
      break;
  }
  throw ValidationError("estimator_weights: the unconditional estimator is not implemented");
}

RMatrix steering_projections(const EigenSystem& eig, std::span<const double> grid_deg) {
  const int m = eig.m();
  RMatrix out(static_cast<Eigen::Index>(grid_deg.size()), m);
  const CMatrix vh = eig.vectors.adjoint();
  for (std::size_t g = 0; g < grid_deg.size(); ++g) {
    const CVector a = steering_vector(grid_deg[g], m);
    out.row(static_cast<Eigen::Index>(g)) = (vh * a).cwiseAbs2().transpose();
  }
  return out;
}

PseudospectrumScan scan(const RMatrix& projections, std::span<const double> weights,
                        std::span<const double> grid_deg, EstimatorKind kind) {
  if (projections.rows() != static_cast<Eigen::Index>(grid_deg.size()) ||
      projections.cols() != static_cast<Eigen::Index>(weights.size())) {
    throw ValidationError("scan: dimension mismatch");
  }
  for (std::size_t i = 0; i < grid_deg.size(); ++i) {
    if (!(grid_deg[i] > -90.0 && grid_deg[i] < 90.0)) {
      throw ValidationError("scan: grid must lie inside (-90, 90)");
    }
    if (i > 0 && !(grid_deg[i] > grid_deg[i - 1])) {
      throw ValidationError("scan: grid must be strictly increasing");
    }
  }
  const Eigen::Map<const RVector> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const RVector eta = projections * w;
  PseudospectrumScan out;
  out.kind = kind;
  out.thetas_deg.assign(grid_deg.begin(), grid_deg.end());
  out.eta_values.assign(eta.data(), eta.data() + eta.size());
  return out;
}

PseudospectrumScan scan(const EigenSystem& eig, std::span<const double> weights,
                        std::span<const double> grid_deg, EstimatorKind kind) {
  return scan(steering_projections(eig, grid_deg), weights, grid_deg, kind);
}

std::vector<int> min_cost_assignment(const RMatrix& cost) {
  // Shortest augmenting path (Hungarian) on an n x n matrix, 1-based
  // potentials u, v and column owner p.
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ValidationError("min_cost_assignment: cost must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0);
  std::vector<int> way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        if (used[jj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[jj];
        if (cur < minv[jj]) {
          minv[jj] = cur;
          way[jj] = j0;
        }
        if (minv[jj] < delta) {
          delta = minv[jj];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        if (used[jj]) {
          u[static_cast<std::size_t>(p[jj])] += delta;
          v[jj] -= delta;
        } else {
          minv[jj] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  }
  return row_to_col;
}

namespace {

// Vertex of the parabola through (x0,y0), (x1,y1), (x2,y2).
double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d0 = (y1 - y0) / (x1 - x0);
  const double d1 = (y2 - y1) / (x2 - x1);
  const double curvature = (d1 - d0) / (x2 - x0);
  if (!(curvature > 0.0)) return x1;
  const double vertex = 0.5 * (x0 + x1) - d0 / (2.0 * curvature);
  return std::clamp(vertex, x0, x2);
}

}  // namespace

AngleEstimates estimate_angles(const PseudospectrumScan& scan, int k,
                               std::span<const double> true_angles) {
  if (k < 1) throw ValidationError("estimate_angles: requires K >= 1");
  if (!true_angles.empty() && static_cast<int>(true_angles.size()) != k) {
    throw ValidationError("estimate_angles: need exactly K true angles");
  }
  const auto& th = scan.thetas_deg;
  const auto& v = scan.eta_values;
  if (th.size() != v.size() || th.size() < 3) {
    throw ValidationError("estimate_angles: scan needs at least three points");
  }

  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] < v[i - 1] && v[i] <= v[i + 1]) minima.push_back(i);
  }
  std::stable_sort(minima.begin(), minima.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  if (minima.size() > static_cast<std::size_t>(k)) minima.resize(static_cast<std::size_t>(k));

  std::vector<double> est;
  std::vector<bool> padded;
  for (std::size_t i : minima) {
    est.push_back(parabola_vertex(th[i - 1], v[i - 1], th[i], v[i], th[i + 1], v[i + 1]));
    padded.push_back(false);
  }
  if (static_cast<int>(est.size()) < k) {
    const auto global = static_cast<std::size_t>(
        std::distance(v.begin(), std::min_element(v.begin(), v.end())));
    while (static_cast<int>(est.size()) < k) {
      est.push_back(th[global]);
      padded.push_back(true);
    }
  }

  AngleEstimates out;
  if (true_angles.empty()) {
    std::vector<std::size_t> order(est.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return est[a] < est[b]; });
    for (std::size_t i : order) out.angles_deg.push_back(est[i]);
    out.outlier_flags.assign(est.size(), false);
    for (std::size_t i = 0; i < order.size(); ++i) out.outlier_flags[i] = padded[order[i]];
    return out;
  }

  double separation = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < true_angles.size(); ++j) {
    separation = std::min(separation, std::abs(true_angles[j] - true_angles[j - 1]));
  }
  RMatrix cost(k, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      const double d = est[static_cast<std::size_t>(i)] - true_angles[static_cast<std::size_t>(j)];
      cost(j, i) = d * d;
    }
  }
  const auto match = min_cost_assignment(cost);
  out.angles_deg.resize(static_cast<std::size_t>(k));
  out.outlier_flags.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const auto i = static_cast<std::size_t>(match[static_cast<std::size_t>(j)]);
    const auto jj = static_cast<std::size_t>(j);
    out.angles_deg[jj] = est[i];
    out.outlier_flags[jj] = padded[i] || std::abs(est[i] - true_angles[jj]) > 0.5 * separation;
  }
  return out;
}

}  // namespace gmusic
