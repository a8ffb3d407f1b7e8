#pragma once

// Core types for the two-station charging game on the unit segment.
//
// Station A sits at y = 0 and Station B at y = 1. A driver is a pair
// (r, y): remaining state of charge and position. The charging time
// function
//
//     F(r) = integral from r to r_t of E / P(gamma) dgamma
//
// maps a state of charge to the time needed to reach the target r_t,
// where P is the (continuous, positive) charging-rate curve and E the
// battery capacity. F is extended beyond [0, 1] by its tangent lines so
// it stays C^1 and strictly decreasing on the whole real line.
//
// The indifference function
//
//     psi(r, y) = F(r - c + c*y) - F(r - c*y) - 2*tau*y
//
// collects every term of the cost difference between the two stations
// that depends on the driver; its level sets are the indifference
// curves. psi(r, .) is strictly decreasing, which every solver in this
// library leans on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace chargeq {

inline constexpr double kTolY = 1e-10;           // bisection width on y
inline constexpr double kTolResidual = 1e-8;     // |psi - k| accepted at a root
inline constexpr double kTolIndifferent = 1e-9;  // |delta_t| treated as a tie
inline constexpr double kTolEquilibrium = 1e-9;  // equilibrium residual
inline constexpr double kTolBracket = 1e-10;     // bisection width on z and alpha
inline constexpr int kDefaultQuadPoints = 2049;  // congestion-integral grid

enum class Decision { StationA, StationB, Indifferent };
enum class WaitingModel { Exogenous, Endogenous };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::StationA: return "A";
    case Decision::StationB: return "B";
    default: return "I";
  }
}

// Game constants. Waiting times are exogenous baselines; under the
// endogenous model the congestion term epsilon*share is added on top.
struct ModelParams {
  double c = 0.2;          // SoC consumed per unit distance
  double tau = 1.0;        // travel time per unit distance
  double r_t = 1.0;        // target state of charge
  double w_a_x = 0.0;      // exogenous wait at Station A
  double w_b_x = 0.0;      // exogenous wait at Station B
  double epsilon = 0.0;    // full-congestion waiting time scale
  double capacity_e = 1.0; // battery capacity E

  void validate() const {
    if (!(c > 0.0 && c < r_t && r_t <= 1.0))
      throw std::domain_error("ModelParams: requires 0 < c < r_t <= 1");
    if (!(tau > 0.0)) throw std::domain_error("ModelParams: requires tau > 0");
    if (!(capacity_e > 0.0))
      throw std::domain_error("ModelParams: requires capacity_e > 0");
    if (!(epsilon >= 0.0))
      throw std::domain_error("ModelParams: requires epsilon >= 0");
    if (!(w_a_x >= 0.0 && w_b_x >= 0.0))
      throw std::domain_error("ModelParams: requires w_a_x, w_b_x >= 0");
  }
};

struct RateKnot {
  double soc;
  double power;
};

// Piecewise-linear charging-rate curve P(soc) on [0, 1]. Knot SoCs are
// strictly increasing with endpoints pinned at 0 and 1; powers are
// strictly positive so that F stays finite.
class RateCurve {
 public:
  explicit RateCurve(std::vector<RateKnot> knots, bool monotone_non_increasing = false)
      : knots_(std::move(knots)), monotone_(monotone_non_increasing) {
    if (knots_.size() < 2)
      throw std::domain_error("RateCurve: needs at least 2 knots");
    if (knots_.front().soc != 0.0 || knots_.back().soc != 1.0)
      throw std::domain_error("RateCurve: knot SoCs must start at 0 and end at 1");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!(knots_[i].power > 0.0))
        throw std::domain_error("RateCurve: powers must be strictly positive");
      if (i > 0 && !(knots_[i].soc > knots_[i - 1].soc))
        throw std::domain_error("RateCurve: knot SoCs must be strictly increasing");
      if (monotone_ && i > 0 && knots_[i].power > knots_[i - 1].power)
        throw std::domain_error("RateCurve: powers must be non-increasing when the monotone flag is set");
    }
  }

  double eval(double soc) const {
    if (!(soc >= 0.0 && soc <= 1.0))
      throw std::domain_error("RateCurve::eval: soc outside [0, 1]");
    // upper_bound gives the first knot strictly right of soc
    std::size_t hi = 1;
    while (hi + 1 < knots_.size() && knots_[hi].soc <= soc) ++hi;
    const RateKnot& a = knots_[hi - 1];
    const RateKnot& b = knots_[hi];
    const double t = (soc - a.soc) / (b.soc - a.soc);
    return a.power + t * (b.power - a.power);
  }

  const std::vector<RateKnot>& knots() const { return knots_; }
  bool monotone_non_increasing() const { return monotone_; }

 private:
  std::vector<RateKnot> knots_;
  bool monotone_;
};

inline double eval_rate(const RateCurve& curve, double soc) { return curve.eval(soc); }

// Closed-form charging-time families used by the analytic case studies.
// All satisfy F(r_t) = 0:
//   affine          F(r) = scale * (r_t - r)            (constant rate)
//   quadratic       F(r) = scale * (r_t^2 - r*|r|)      (rate ~ 1/r)
//   cubic           F(r) = scale * (r_t^3 - r^3)        (rate ~ 1/r^2)
//   piecewise_flat  rate levels constant between breakpoints
// The quadratic form is written with r*|r| so that it keeps strictly
// decreasing through r = 0; on [0, 1] it coincides with scale*(r_t^2 - r^2).
enum class RateFamily { Affine, Quadratic, Cubic, PiecewiseFlat };

inline const char* to_string(RateFamily f) {
  switch (f) {
    case RateFamily::Affine: return "affine";
    case RateFamily::Quadratic: return "quadratic";
    case RateFamily::Cubic: return "cubic";
    default: return "piecewise_flat";
  }
}

inline RateFamily rate_family_from_string(const std::string& s) {
  if (s == "affine") return RateFamily::Affine;
  if (s == "quadratic") return RateFamily::Quadratic;
  if (s == "cubic") return RateFamily::Cubic;
  if (s == "piecewise_flat") return RateFamily::PiecewiseFlat;
  throw std::domain_error("unknown rate family: " + s);
}

struct ClosedForm {
  RateFamily family = RateFamily::Affine;
  double scale = 1.0;
  // piecewise_flat only: levels[i] is the charge rate (SoC per unit time,
  // capacity folded in) on [breaks[i-1], breaks[i]), with implicit outer
  // breakpoints 0 and 1. levels.size() == breaks.size() + 1.
  std::vector<double> levels;
  std::vector<double> breaks;

  void validate() const {
    if (family == RateFamily::PiecewiseFlat) {
      if (levels.empty() || levels.size() != breaks.size() + 1)
        throw std::domain_error("ClosedForm: piecewise_flat needs levels.size() == breaks.size() + 1");
      for (double lv : levels)
        if (!(lv > 0.0)) throw std::domain_error("ClosedForm: rate levels must be positive");
      double prev = 0.0;
      for (double b : breaks) {
        if (!(b > prev && b < 1.0))
          throw std::domain_error("ClosedForm: breaks must be strictly increasing inside (0, 1)");
        prev = b;
      }
    } else {
      if (!(scale > 0.0)) throw std::domain_error("ClosedForm: scale must be positive");
    }
  }
};

// Charging-time function F with value and derivative on all of R.
// Built either from an analytic family or from a sampled rate curve; the
// numeric form integrates E/P in closed form per linear segment of P, so
// no quadrature error enters. Immutable after construction.
class ChargingTimeFn {
 public:
  static ChargingTimeFn closed_form(ClosedForm form, double r_t) {
    form.validate();
    if (!(r_t > 0.0 && r_t <= 1.0))
      throw std::domain_error("ChargingTimeFn: requires 0 < r_t <= 1");
    ChargingTimeFn f;
    if (form.family == RateFamily::PiecewiseFlat) {
      PiecewiseImpl impl;
      impl.bounds.push_back(0.0);
      for (double b : form.breaks) impl.bounds.push_back(b);
      impl.bounds.push_back(1.0);
      impl.levels = form.levels;
      impl.cum.assign(impl.bounds.size(), 0.0);
      for (std::size_t i = 1; i < impl.bounds.size(); ++i)
        impl.cum[i] = impl.cum[i - 1] +
                      (impl.bounds[i] - impl.bounds[i - 1]) / impl.levels[i - 1];
      impl.g_rt = impl.g(r_t);
      f.impl_ = std::move(impl);
    } else {
      f.impl_ = AnalyticImpl{form.family, form.scale};
    }
    f.form_ = std::move(form);
    f.r_t_ = r_t;
    return f;
  }

  static ChargingTimeFn from_rate_curve(RateCurve curve, double capacity_e, double r_t) {
    if (!(capacity_e > 0.0))
      throw std::domain_error("ChargingTimeFn: requires capacity_e > 0");
    if (!(r_t > 0.0 && r_t <= 1.0))
      throw std::domain_error("ChargingTimeFn: requires 0 < r_t <= 1");
    ChargingTimeFn f;
    NumericImpl impl{std::move(curve), capacity_e, {}, 0.0};
    const auto& ks = impl.curve.knots();
    impl.cum.assign(ks.size(), 0.0);
    for (std::size_t i = 1; i < ks.size(); ++i)
      impl.cum[i] = impl.cum[i - 1] + impl.segment_time(i - 1, ks[i].soc);
    impl.g_rt = impl.g(r_t);
    f.impl_ = std::move(impl);
    f.r_t_ = r_t;
    return f;
  }

  // F(r); tangent-line extension outside the physical SoC range.
  double value(double r) const {
    return std::visit([&](const auto& impl) { return impl.value(r, r_t_); }, impl_);
  }

  // F'(r) = -E / P(clamp(r, 0, 1)) for rate-backed forms; analytic otherwise.
  double derivative(double r) const {
    return std::visit([&](const auto& impl) { return impl.derivative(r); }, impl_);
  }

  double target_soc() const { return r_t_; }

  bool is_closed_form() const { return form_.has_value(); }
  const ClosedForm& descriptor() const {
    if (!form_) throw std::logic_error("ChargingTimeFn: no closed-form descriptor");
    return *form_;
  }
  const RateCurve& rate_curve() const {
    const auto* n = std::get_if<NumericImpl>(&impl_);
    if (!n) throw std::logic_error("ChargingTimeFn: not rate-curve backed");
    return n->curve;
  }
  double capacity() const {
    const auto* n = std::get_if<NumericImpl>(&impl_);
    if (!n) throw std::logic_error("ChargingTimeFn: not rate-curve backed");
    return n->capacity;
  }

  // True when the implied charging rate is non-increasing in SoC, the
  // regime in which F is concave and the indifference curves are monotone.
  bool non_increasing_rate() const {
    if (const auto* a = std::get_if<AnalyticImpl>(&impl_)) {
      (void)a;
      return true;  // constant or decaying rate by construction
    }
    if (const auto* p = std::get_if<PiecewiseImpl>(&impl_)) {
      for (std::size_t i = 1; i < p->levels.size(); ++i)
        if (p->levels[i] > p->levels[i - 1]) return false;
      return true;
    }
    const auto& ks = std::get<NumericImpl>(impl_).curve.knots();
    for (std::size_t i = 1; i < ks.size(); ++i)
      if (ks[i].power > ks[i - 1].power) return false;
    return true;
  }

 private:
  ChargingTimeFn() = default;

  struct AnalyticImpl {
    RateFamily family;
    double scale;

    double value(double r, double r_t) const {
      switch (family) {
        case RateFamily::Affine: return scale * (r_t - r);
        case RateFamily::Quadratic: return scale * (r_t * r_t - r * std::fabs(r));
        default: return scale * (r_t * r_t * r_t - r * r * r);
      }
    }
    double derivative(double r) const {
      switch (family) {
        case RateFamily::Affine: return -scale;
        case RateFamily::Quadratic: return -2.0 * scale * std::fabs(r);
        default: return -3.0 * scale * r * r;
      }
    }
  };

  struct PiecewiseImpl {
    std::vector<double> bounds;  // 0 = b_0 < ... < b_m = 1
    std::vector<double> levels;  // rate on [b_i, b_{i+1})
    std::vector<double> cum;     // time to charge from 0 to b_i
    double g_rt = 0.0;

    double g(double x) const {  // time to charge from 0 to x, x in [0, 1]
      std::size_t i = 0;
      while (i + 2 < bounds.size() && bounds[i + 1] <= x) ++i;
      return cum[i] + (x - bounds[i]) / levels[i];
    }
    double value(double r, double) const {
      if (r < 0.0) return g_rt + (-r) / levels.front();
      if (r > 1.0) return g_rt - cum.back() - (r - 1.0) / levels.back();
      return g_rt - g(r);
    }
    double derivative(double r) const {
      const double x = std::clamp(r, 0.0, 1.0);
      std::size_t i = 0;
      while (i + 2 < bounds.size() && bounds[i + 1] <= x) ++i;
      return -1.0 / levels[i];
    }
  };

  struct NumericImpl {
    RateCurve curve;
    double capacity;
    std::vector<double> cum;  // integral of E/P from 0 to each knot
    double g_rt;

    // integral of E/P over [soc_i, x] inside segment i of the rate curve
    double segment_time(std::size_t i, double x) const {
      const auto& ks = curve.knots();
      const double dx = x - ks[i].soc;
      if (dx == 0.0) return 0.0;
      const double seg = ks[i + 1].soc - ks[i].soc;
      const double slope = (ks[i + 1].power - ks[i].power) / seg;
      if (slope == 0.0) return capacity * dx / ks[i].power;
      // E / (P0 + slope*(g - soc_i)) integrates to a logarithm
      return capacity / slope * std::log1p(slope * dx / ks[i].power);
    }

    double g(double x) const {  // integral of E/P from 0 to x, x in [0, 1]
      const auto& ks = curve.knots();
      std::size_t i = 0;
      while (i + 2 < ks.size() && ks[i + 1].soc <= x) ++i;
      return cum[i] + segment_time(i, x);
    }

    double value(double r, double) const {
      const auto& ks = curve.knots();
      if (r < 0.0) return g_rt + capacity / ks.front().power * (-r);
      if (r > 1.0) return g_rt - cum.back() - capacity / ks.back().power * (r - 1.0);
      return g_rt - g(r);
    }
    double derivative(double r) const {
      return -capacity / curve.eval(std::clamp(r, 0.0, 1.0));
    }
  };

  std::variant<AnalyticImpl, PiecewiseImpl, NumericImpl> impl_;
  std::optional<ClosedForm> form_;
  double r_t_ = 1.0;
};

inline double charging_time(const ChargingTimeFn& f, double r) { return f.value(r); }
inline double charging_time_derivative(const ChargingTimeFn& f, double r) {
  return f.derivative(r);
}

struct DriverState {
  double r = 0.0;
  double y = 0.0;

  bool in_region(const ModelParams& p) const {
    return r >= p.c && r <= p.r_t && y >= 0.0 && y <= 1.0;
  }
};

// psi(r, y) = F(r - c + c*y) - F(r - c*y) - 2*tau*y, strictly decreasing in y.
inline double psi(const ChargingTimeFn& f, const ModelParams& p, double r, double y) {
  return f.value(r - p.c + p.c * y) - f.value(r - p.c * y) - 2.0 * p.tau * y;
}

struct CostBreakdown {
  double wait_a = 0.0, wait_b = 0.0;
  double travel_a = 0.0, travel_b = 0.0;
  double charge_a = 0.0, charge_b = 0.0;
  double total_a = 0.0, total_b = 0.0;
  double delta_t = 0.0;  // total_b - total_a; positive means A is cheaper
};

// Full cost decomposition for one driver. Under the endogenous model the
// waits become w^x + epsilon*share at A and w^x + epsilon*(1-share) at B.
// delta_t always equals psi(r, y) + tau + wait_b - wait_a.
inline CostBreakdown total_costs(const ChargingTimeFn& f, const ModelParams& p,
                                 DriverState d, double congestion_share,
                                 WaitingModel model) {
  CostBreakdown out;
  out.wait_a = p.w_a_x;
  out.wait_b = p.w_b_x;
  if (model == WaitingModel::Endogenous) {
    if (!(congestion_share >= 0.0 && congestion_share <= 1.0))
      throw std::domain_error("total_costs: congestion share outside [0, 1]");
    out.wait_a += p.epsilon * congestion_share;
    out.wait_b += p.epsilon * (1.0 - congestion_share);
  }
  out.travel_a = p.tau * d.y;
  out.travel_b = p.tau * (1.0 - d.y);
  out.charge_a = f.value(d.r - p.c * d.y);
  out.charge_b = f.value(d.r - p.c * (1.0 - d.y));
  out.total_a = out.wait_a + out.travel_a + out.charge_a;
  out.total_b = out.wait_b + out.travel_b + out.charge_b;
  out.delta_t = out.total_b - out.total_a;
  return out;
}

}  // namespace chargeq
