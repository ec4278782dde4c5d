#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gmusic/estimator.hpp"

namespace gmusic {

enum class EstimatorKind {
  Traditional,
  New,
  // i.i.d.-source estimator; comparison hook only, not implemented.
  Unconditional,
};

const char* to_string(EstimatorKind kind);

struct PseudospectrumScan {
  std::vector<double> thetas_deg;
  std::vector<double> eta_values;
  EstimatorKind kind = EstimatorKind::Traditional;
};

struct AngleEstimates {
  std::vector<double> angles_deg;
  std::vector<bool> outlier_flags;
};

// Uniform grid over the open interval (-90, 90) with the given step.
std::vector<double> angle_grid(double step_deg);

// Weight vector reproducing the traditional estimator: 1 on the M - K noise
// eigenvectors, 0 elsewhere.
std::vector<double> traditional_weights(int m, int k);

// Throws ValidationError for EstimatorKind::Unconditional.
std::vector<double> estimator_weights(EstimatorKind kind, const EigenSystem& eig, double sigma2,
                                      double c, int k);

// |a(theta)^H e_j|^2 for every grid angle (row) and eigenvector (column).
RMatrix steering_projections(const EigenSystem& eig, std::span<const double> grid_deg);

PseudospectrumScan scan(const EigenSystem& eig, std::span<const double> weights,
                        std::span<const double> grid_deg, EstimatorKind kind);
// Scan reusing precomputed steering_projections().
PseudospectrumScan scan(const RMatrix& projections, std::span<const double> weights,
                        std::span<const double> grid_deg, EstimatorKind kind);

// K deepest local minima, refined by a three-point parabola. With true
// angles, estimates are paired to them by minimum-cost assignment and
// returned in true-angle order; an estimate is an outlier when it misses
// its pair by more than half the smallest true separation. Without true
// angles, estimates are returned ascending and only padded ones are flagged.
AngleEstimates estimate_angles(const PseudospectrumScan& scan, int k,
                               std::span<const double> true_angles = {});

// Minimum-cost perfect matching on a square cost matrix: result[row] = col.
std::vector<int> min_cost_assignment(const RMatrix& cost);

}  // namespace gmusic
