#pragma once

// Equilibrium solvers for the three waiting-time models.
//
// Exogenous: the boundary value z solves psi(r_t, z) = w_A - w_B - tau,
// a single strictly monotone root-find. Endogenous: z is the unique root
// of rho(z) = psi(r_t, z) + tau + w_B - w_A + eps - 2*eps*A(z), where the
// congestion integral A(z) averages the clamped curve over the region;
// rho is strictly decreasing because psi(r_t, .) is and A is
// non-decreasing. Heterogeneous: classes share one congestion level, and
// Phi(alpha) = alpha - sum of W_i * A_i(z_i(alpha)) is strictly
// increasing with a sign change on [0, 1], so the shared alpha is again
// a bisection away.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chargeq/curve.hpp"
#include "chargeq/model.hpp"

namespace chargeq {

enum class EquilibriumKind { Exogenous, Endogenous, Heterogeneous };

inline const char* to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::Exogenous: return "exogenous";
    case EquilibriumKind::Endogenous: return "endogenous";
    default: return "heterogeneous";
  }
}

struct SolverDiagnostics {
  int iterations = 0;
  double residual = 0.0;  // |equilibrium equation| at the returned point
};

// One vehicle class: its charging-time function and population weight.
struct EvClass {
  std::string label;
  ChargingTimeFn f;
  double weight = 1.0;
};

struct EquilibriumSolution {
  EquilibriumKind model = EquilibriumKind::Exogenous;
  std::vector<IndifferenceCurve> curves;  // one per class
  std::vector<std::string> labels;
  std::vector<double> class_weights;      // normalized, sum to 1
  std::vector<double> betas;              // per-class Station-A shares
  std::vector<bool> indifferent_in_r;     // z_i in [0, 1] per class
  double alpha = 0.0;                     // overall Station-A share
  SolverDiagnostics diagnostics;
};

// A(z): mean of clamp(g(r, z), 0, 1) over [c, r_t], composite trapezoid.
inline double congestion_integral(const IndifferenceCurve& curve,
                                  int n_quad = kDefaultQuadPoints) {
  if (n_quad < 2) throw std::domain_error("congestion_integral: needs n_quad >= 2");
  const ModelParams& p = curve.params;
  double acc = 0.0;
  for (int i = 0; i < n_quad; ++i) {
    const double r =
        p.c + (p.r_t - p.c) * static_cast<double>(i) / static_cast<double>(n_quad - 1);
    const double y = std::clamp(solve_y_at(curve, r), 0.0, 1.0);
    acc += (i == 0 || i == n_quad - 1) ? 0.5 * y : y;
  }
  return std::clamp(acc / static_cast<double>(n_quad - 1), 0.0, 1.0);
}

// Closed-form existence test for an indifferent driver in the region:
// F(r_t - c) - F(r_t) >= |w_A - w_B| - tau, minus eps for the endogenous
// model. Equivalent to the solved z landing in [0, 1] when the charging
// rate is non-increasing.
inline bool indifferent_exists(const ChargingTimeFn& f, const ModelParams& p,
                               WaitingModel model) {
  p.validate();
  const double lhs = f.value(p.r_t - p.c) - f.value(p.r_t);
  double rhs = std::fabs(p.w_a_x - p.w_b_x) - p.tau;
  if (model == WaitingModel::Endogenous) rhs -= p.epsilon;
  return lhs >= rhs;
}

namespace detail {

// Root of a continuous strictly decreasing h, bracketed from [-1, 2] by
// doubling, then bisected to width kTolBracket.
template <class H>
double solve_decreasing_root(H&& h, int* iterations_out = nullptr) {
  double lo = -1.0, hi = 2.0;
  double hlo = h(lo);
  double hhi = h(hi);
  int iters = 2;
  for (int i = 0; hlo < 0.0 && i < 60; ++i) {
    const double w = hi - lo;
    hi = lo;
    hhi = hlo;
    lo -= w;
    hlo = h(lo);
    ++iters;
  }
  for (int i = 0; hhi > 0.0 && i < 60; ++i) {
    const double w = hi - lo;
    lo = hi;
    hlo = hhi;
    hi += w;
    hhi = h(hi);
    ++iters;
  }
  if (hlo < 0.0 || hhi > 0.0)
    throw std::runtime_error("solve_decreasing_root: failed to bracket a sign change");
  for (int i = 0; i < 260 && hi - lo > kTolBracket; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
    ++iters;
  }
  if (hi - lo > kTolBracket)
    throw std::runtime_error("solve_decreasing_root: bisection did not converge");
  if (iterations_out) *iterations_out = iters;
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline EquilibriumSolution solve_exogenous(const ChargingTimeFn& f, const ModelParams& p,
                                           int n_quad = kDefaultQuadPoints) {
  p.validate();
  const double rhs = p.w_a_x - p.w_b_x - p.tau;
  int iters = 0;
  const double z =
      detail::solve_decreasing_root([&](double y) { return psi(f, p, p.r_t, y) - rhs; },
                                    &iters);
  EquilibriumSolution sol;
  sol.model = EquilibriumKind::Exogenous;
  sol.curves.push_back(make_curve(f, p, z));
  sol.labels.push_back("");
  sol.class_weights.push_back(1.0);
  sol.alpha = congestion_integral(sol.curves.front(), n_quad);
  sol.betas.push_back(sol.alpha);
  sol.indifferent_in_r.push_back(z >= 0.0 && z <= 1.0);
  sol.diagnostics.iterations = iters;
  sol.diagnostics.residual = std::fabs(psi(f, p, p.r_t, z) - rhs);
  return sol;
}

inline EquilibriumSolution solve_endogenous(const ChargingTimeFn& f, const ModelParams& p,
                                            int n_quad = kDefaultQuadPoints) {
  p.validate();
  if (p.epsilon == 0.0) {  // rho reduces to the exogenous equation
    EquilibriumSolution sol = solve_exogenous(f, p, n_quad);
    sol.model = EquilibriumKind::Endogenous;
    return sol;
  }
  const double base = p.tau + p.w_b_x - p.w_a_x + p.epsilon;
  auto a_of = [&](double z) { return congestion_integral(make_curve(f, p, z), n_quad); };
  auto rho = [&](double z) {
    return psi(f, p, p.r_t, z) + base - 2.0 * p.epsilon * a_of(z);
  };
  int iters = 0;
  const double z = detail::solve_decreasing_root(rho, &iters);
  EquilibriumSolution sol;
  sol.model = EquilibriumKind::Endogenous;
  sol.curves.push_back(make_curve(f, p, z));
  sol.labels.push_back("");
  sol.class_weights.push_back(1.0);
  sol.alpha = congestion_integral(sol.curves.front(), n_quad);
  sol.betas.push_back(sol.alpha);
  sol.indifferent_in_r.push_back(z >= 0.0 && z <= 1.0);
  sol.diagnostics.iterations = iters;
  sol.diagnostics.residual = std::fabs(psi(f, p, p.r_t, z) + base - 2.0 * p.epsilon * sol.alpha);
  return sol;
}

// Shared-congestion equilibrium for m classes with weights summing to 1.
// z_i(alpha) is each class's boundary value at congestion alpha; the
// fixed point of alpha -> sum W_i A_i(z_i(alpha)) is found by bisecting
// the strictly increasing Phi on [0, 1]. alpha is then set to
// sum W_i beta_i exactly so the reported identity holds to the last bit.
inline EquilibriumSolution solve_heterogeneous(const std::vector<EvClass>& classes,
                                               const ModelParams& p,
                                               int n_quad = kDefaultQuadPoints) {
  p.validate();
  if (classes.empty())
    throw std::domain_error("solve_heterogeneous: needs at least one class");
  double wsum = 0.0;
  for (const EvClass& cls : classes) {
    if (!(cls.weight > 0.0))
      throw std::domain_error("solve_heterogeneous: class weights must be positive");
    wsum += cls.weight;
  }
  if (std::fabs(wsum - 1.0) > 1e-9)
    throw std::domain_error("solve_heterogeneous: class weights must sum to 1");

  if (classes.size() == 1) {  // degenerate case: the homogeneous fixed point
    EquilibriumSolution sol = solve_endogenous(classes.front().f, p, n_quad);
    sol.model = EquilibriumKind::Heterogeneous;
    sol.labels.front() = classes.front().label;
    return sol;
  }

  auto z_at = [&](const ChargingTimeFn& f, double alpha) {
    const double rhs = p.w_a_x - p.w_b_x - p.tau - p.epsilon + 2.0 * p.epsilon * alpha;
    return detail::solve_psi_level(f, p, p.r_t, rhs);
  };
  auto share_sum = [&](double alpha) {
    double s = 0.0;
    for (const EvClass& cls : classes)
      s += cls.weight *
           congestion_integral(make_curve(cls.f, p, z_at(cls.f, alpha)), n_quad);
    return s;
  };

  double lo = 0.0, hi = 1.0;
  int iters = 2;
  if (!(lo - share_sum(lo) <= 0.0 && hi - share_sum(hi) >= 0.0))
    throw std::runtime_error("solve_heterogeneous: fixed-point map left [0, 1]");
  for (int i = 0; i < 260 && hi - lo > kTolBracket; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid - share_sum(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
    ++iters;
  }
  if (hi - lo > kTolBracket)
    throw std::runtime_error("solve_heterogeneous: bisection did not converge");
  const double alpha_root = 0.5 * (lo + hi);

  EquilibriumSolution sol;
  sol.model = EquilibriumKind::Heterogeneous;
  double combined = 0.0;
  for (const EvClass& cls : classes) {
    const double z = z_at(cls.f, alpha_root);
    sol.curves.push_back(make_curve(cls.f, p, z));
    sol.labels.push_back(cls.label);
    sol.class_weights.push_back(cls.weight);
    const double beta = congestion_integral(sol.curves.back(), n_quad);
    sol.betas.push_back(beta);
    sol.indifferent_in_r.push_back(z >= 0.0 && z <= 1.0);
    combined += cls.weight * beta;
  }
  sol.alpha = combined;
  sol.diagnostics.iterations = iters;
  sol.diagnostics.residual = std::fabs(alpha_root - combined);
  return sol;
}

}  // namespace chargeq
