#pragma once

// Indifference curves of the two-station game.
//
// Along a curve the quantity psi(r, y) is conserved, so the curve through
// the boundary point (r_t, z) is the level set psi(r, y) = psi(r_t, z).
// Because psi is strictly decreasing in y (slope at most -2*tau), each
// level set is the graph of a function y = g(r, z), recovered pointwise
// by bracketing and bisection rather than by integrating the curve ODE;
// the error at every r is then independent of the path taken and kinks
// in F' (piecewise-flat rates) cost nothing.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "chargeq/model.hpp"

namespace chargeq {

namespace detail {

// Unique y with psi(r, y) = k, valid for every real r. psi(r, .) is
// strictly decreasing on all of R and unbounded both ways, so a sign
// change can always be bracketed; [-1, 2] already covers every curve
// that touches the region.
inline double solve_psi_level(const ChargingTimeFn& f, const ModelParams& p,
                              double r, double k) {
  double lo = -1.0, hi = 2.0;
  double flo = psi(f, p, r, lo) - k;
  double fhi = psi(f, p, r, hi) - k;
  for (int i = 0; flo < 0.0 && i < 60; ++i) {  // root left of lo
    const double w = hi - lo;
    hi = lo;
    fhi = flo;
    lo -= w;
    flo = psi(f, p, r, lo) - k;
  }
  for (int i = 0; fhi > 0.0 && i < 60; ++i) {  // root right of hi
    const double w = hi - lo;
    lo = hi;
    flo = fhi;
    hi += w;
    fhi = psi(f, p, r, hi) - k;
  }
  if (flo < 0.0 || fhi > 0.0)
    throw std::runtime_error("solve_psi_level: failed to bracket the level set");
  for (int i = 0; i < 260 && hi - lo > kTolY; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (psi(f, p, r, mid) - k >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double y = 0.5 * (lo + hi);
  if (hi - lo > kTolY || std::fabs(psi(f, p, r, y) - k) > kTolResidual)
    throw std::runtime_error("solve_psi_level: bisection did not converge");
  return y;
}

}  // namespace detail

// Level set psi(r, y) = k anchored at the boundary point (r_t, z). The
// anchor z may lie outside [0, 1]; callers clamp where the physical
// region matters.
struct IndifferenceCurve {
  ChargingTimeFn f;
  ModelParams params;
  double z = 0.0;  // y at r = r_t
  double k = 0.0;  // conserved value psi(r_t, z)
};

inline IndifferenceCurve make_curve(ChargingTimeFn f, const ModelParams& p, double z) {
  p.validate();
  const double k = psi(f, p, p.r_t, z);
  return IndifferenceCurve{std::move(f), p, z, k};
}

// g(r, z): the curve's y-coordinate at SoC r, defined for every real r.
inline double solve_y_at(const IndifferenceCurve& curve, double r) {
  return detail::solve_psi_level(curve.f, curve.params, r, curve.k);
}

struct CurvePoint {
  double r;
  double y;
};

// n evenly spaced samples of the curve over [r_lo, r_hi], n >= 2.
inline std::vector<CurvePoint> sample_curve(const IndifferenceCurve& curve,
                                            double r_lo, double r_hi, std::size_t n) {
  if (!(r_lo < r_hi)) throw std::domain_error("sample_curve: needs r_lo < r_hi");
  if (n < 2) throw std::domain_error("sample_curve: needs n >= 2");
  std::vector<CurvePoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = r_lo + (r_hi - r_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    pts.push_back({r, solve_y_at(curve, r)});
  }
  return pts;
}

// Station choice of the driver relative to the curve: A below, B above,
// Indifferent within a kTolY band around g(r, z). Well defined even for
// drivers outside the region. When the curve is the equilibrium curve
// for its parameters, this agrees with the sign of delta_t.
inline Decision decide(const IndifferenceCurve& curve, DriverState d) {
  const double g = solve_y_at(curve, d.r);
  if (d.y < g - kTolY) return Decision::StationA;
  if (d.y > g + kTolY) return Decision::StationB;
  return Decision::Indifferent;
}

}  // namespace chargeq
