#pragma once

// Brute-force verification of analytic equilibria.
//
// The region [c, r_t] x [0, 1] is discretized into cell centers
// (midpoint rule, so region edges are never double-counted) and every
// grid driver picks its station from the sign of delta_t at a candidate
// congestion level. An equilibrium certificate then checks three things:
// the empirical A/B boundary tracks the analytic curve column by column,
// the empirical Station-A share matches alpha, and re-evaluating every
// driver against the empirical share itself flips no cell far from the
// boundary (the fixed-point property).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "chargeq/curve.hpp"
#include "chargeq/equilibrium.hpp"
#include "chargeq/model.hpp"

namespace chargeq {

struct GridAssignment {
  int n_r = 0, n_y = 0;
  std::vector<double> r_centers;   // cell-center SoCs, size n_r
  std::vector<double> y_centers;   // cell-center positions, size n_y
  std::vector<Decision> choices;   // row-major, index ir * n_y + iy
  double alpha_empirical = 0.0;    // A-fraction, indifferent cells count half

  Decision at(int ir, int iy) const {
    return choices[static_cast<std::size_t>(ir) * static_cast<std::size_t>(n_y) + iy];
  }
};

inline GridAssignment best_response_grid(const ChargingTimeFn& f, const ModelParams& p,
                                         double congestion_share, WaitingModel model,
                                         int n_r, int n_y) {
  p.validate();
  if (n_r < 2 || n_y < 2)
    throw std::domain_error("best_response_grid: needs n_r, n_y >= 2");
  GridAssignment grid;
  grid.n_r = n_r;
  grid.n_y = n_y;
  grid.r_centers.resize(n_r);
  grid.y_centers.resize(n_y);
  for (int ir = 0; ir < n_r; ++ir)
    grid.r_centers[ir] = p.c + (p.r_t - p.c) * (ir + 0.5) / n_r;
  for (int iy = 0; iy < n_y; ++iy) grid.y_centers[iy] = (iy + 0.5) / n_y;
  grid.choices.resize(static_cast<std::size_t>(n_r) * n_y);
  double weighted_a = 0.0;
  for (int ir = 0; ir < n_r; ++ir) {
    for (int iy = 0; iy < n_y; ++iy) {
      const CostBreakdown cb = total_costs(
          f, p, DriverState{grid.r_centers[ir], grid.y_centers[iy]}, congestion_share, model);
      Decision d;
      if (std::fabs(cb.delta_t) <= kTolIndifferent) {
        d = Decision::Indifferent;
        weighted_a += 0.5;
      } else if (cb.delta_t > 0.0) {
        d = Decision::StationA;
        weighted_a += 1.0;
      } else {
        d = Decision::StationB;
      }
      grid.choices[static_cast<std::size_t>(ir) * n_y + iy] = d;
    }
  }
  grid.alpha_empirical = weighted_a / (static_cast<double>(n_r) * n_y);
  return grid;
}

struct VerificationReport {
  int n_r = 0, n_y = 0;
  double boundary_max_gap = 0.0;  // max over columns vs clamp(g(r, z), 0, 1)
  double boundary_tol = 0.0;      // 2 grid cells
  double alpha_empirical = 0.0;
  double alpha_gap = 0.0;
  double alpha_tol = 0.0;         // max(2/min(n_r, n_y), 1e-3)
  int offband_violations = 0;     // flips farther than 2 cells from the boundary
  int total_violations = 0;       // all flips under the fixed-point re-evaluation

  bool boundary_ok() const { return boundary_max_gap <= boundary_tol; }
  bool alpha_ok() const { return alpha_gap <= alpha_tol; }
  bool responses_ok() const { return offband_violations == 0; }
  bool passed() const { return boundary_ok() && alpha_ok() && responses_ok(); }
};

namespace detail {

// Fraction of a column assigned to Station A, ties counted half; equals
// the empirical boundary height when the column is vertically sorted.
inline double column_a_fraction(const GridAssignment& grid, int ir) {
  double acc = 0.0;
  for (int iy = 0; iy < grid.n_y; ++iy) {
    const Decision d = grid.at(ir, iy);
    if (d == Decision::StationA)
      acc += 1.0;
    else if (d == Decision::Indifferent)
      acc += 0.5;
  }
  return acc / grid.n_y;
}

}  // namespace detail

// Grid certificate for one or more classes sharing the solution's
// congestion level. Per class: its grid at solution.alpha feeds the
// boundary check against that class's curve; the combined empirical
// share (class grids weighted by W_i) feeds the alpha check and the
// fixed-point re-evaluation.
inline VerificationReport verify_equilibrium(const std::vector<EvClass>& classes,
                                             const ModelParams& p,
                                             const EquilibriumSolution& solution,
                                             int n_r, int n_y) {
  if (classes.empty() || classes.size() != solution.curves.size())
    throw std::domain_error("verify_equilibrium: class list must match the solution");
  const WaitingModel wmodel = solution.model == EquilibriumKind::Exogenous
                                  ? WaitingModel::Exogenous
                                  : WaitingModel::Endogenous;
  VerificationReport rep;
  rep.n_r = n_r;
  rep.n_y = n_y;
  rep.boundary_tol = 2.0 / n_y;
  rep.alpha_tol = std::max(2.0 / std::min(n_r, n_y), 1e-3);

  std::vector<GridAssignment> grids;
  grids.reserve(classes.size());
  double combined = 0.0;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    grids.push_back(
        best_response_grid(classes[ci].f, p, solution.alpha, wmodel, n_r, n_y));
    combined += classes[ci].weight * grids.back().alpha_empirical;
  }
  rep.alpha_empirical = combined;
  rep.alpha_gap = std::fabs(combined - solution.alpha);

  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const GridAssignment& grid = grids[ci];
    const IndifferenceCurve& curve = solution.curves[ci];
    std::vector<double> boundary(grid.n_r);
    for (int ir = 0; ir < grid.n_r; ++ir) {
      boundary[ir] = std::clamp(solve_y_at(curve, grid.r_centers[ir]), 0.0, 1.0);
      const double gap = std::fabs(detail::column_a_fraction(grid, ir) - boundary[ir]);
      rep.boundary_max_gap = std::max(rep.boundary_max_gap, gap);
    }
    const GridAssignment refit =
        best_response_grid(classes[ci].f, p, combined, wmodel, n_r, n_y);
    for (int ir = 0; ir < grid.n_r; ++ir) {
      for (int iy = 0; iy < grid.n_y; ++iy) {
        if (refit.at(ir, iy) == grid.at(ir, iy)) continue;
        ++rep.total_violations;
        if (std::fabs(grid.y_centers[iy] - boundary[ir]) > 2.0 / n_y)
          ++rep.offband_violations;
      }
    }
  }
  return rep;
}

inline VerificationReport verify_equilibrium(const ChargingTimeFn& f, const ModelParams& p,
                                             const EquilibriumSolution& solution,
                                             int n_r, int n_y) {
  return verify_equilibrium(std::vector<EvClass>{EvClass{"", f, 1.0}}, p, solution,
                            n_r, n_y);
}

}  // namespace chargeq
