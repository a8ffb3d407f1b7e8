#pragma once

// Ingestion of measured charging-rate samples, the monotone fitting
// pipeline, and all serialization.
//
// Fitting: samples are binned to the nearest of n_knots uniform SoC
// knots, each occupied bin contributes its mean point weighted by its
// count, and a piecewise-linear (hat basis) least-squares fit on the
// knots is solved with a tiny second/first-difference ridge. The ridge
// keeps the normal matrix positive definite whatever the bin pattern and
// makes empty spans come out as straight interpolation between their
// fitted neighbors. A weighted pool-adjacent-violators pass then
// projects onto non-increasing curves when requested.
//
// All numeric output is written at 12 significant digits; values already
// representable at that precision round-trip exactly.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chargeq/curve.hpp"
#include "chargeq/equilibrium.hpp"
#include "chargeq/model.hpp"
#include "chargeq/oracle.hpp"

namespace chargeq {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline double round12(double v) { return std::strtod(format12(v).c_str(), nullptr); }

struct Sample {
  double soc;
  double power;
};

struct RateSampleSet {
  std::string vehicle_label;
  std::vector<Sample> samples;

  void validate() const {
    if (samples.size() < 2)
      throw std::domain_error("RateSampleSet: needs at least 2 samples");
    for (const Sample& s : samples) {
      if (!(s.soc >= 0.0 && s.soc <= 1.0))
        throw std::domain_error("RateSampleSet: soc must lie in [0, 1]");
      if (!(s.power > 0.0))
        throw std::domain_error("RateSampleSet: power must be strictly positive");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

}  // namespace detail

// CSV with two columns `soc,power_kw`; '#' lines are comments and an
// unparseable first row is taken as a header.
inline RateSampleSet load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_samples: cannot open " + path);
  RateSampleSet set;
  std::string line;
  int line_no = 0;
  bool saw_row_slot = false;  // a header is only allowed in the first slot
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t comma = t.find(',');
    double soc = 0.0, power = 0.0;
    const bool ok = comma != std::string::npos &&
                    detail::parse_double(t.substr(0, comma), soc) &&
                    detail::parse_double(t.substr(comma + 1), power);
    if (!ok) {
      if (!saw_row_slot) {
        saw_row_slot = true;
        continue;
      }
      throw parse_error(path + ":" + std::to_string(line_no) +
                        ": expected 'soc,power' with numeric fields");
    }
    saw_row_slot = true;
    if (!(soc >= 0.0 && soc <= 1.0))
      throw std::domain_error(path + ":" + std::to_string(line_no) +
                              ": soc must lie in [0, 1]");
    if (!(power > 0.0))
      throw std::domain_error(path + ":" + std::to_string(line_no) +
                              ": power must be strictly positive");
    set.samples.push_back({soc, power});
  }
  if (set.samples.size() < 2)
    throw std::domain_error("load_samples: " + path + ": needs at least 2 samples");
  return set;
}

namespace detail {

// Weighted least-squares projection onto non-increasing sequences
// (pool adjacent violators). Each pooled block takes its weighted mean.
inline std::vector<double> pava_non_increasing(const std::vector<double>& values,
                                               const std::vector<double>& weights) {
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> stack;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Block b{values[i], weights[i], 1};
    while (!stack.empty() && stack.back().mean < b.mean) {
      const Block& t = stack.back();
      b.mean = (t.mean * t.weight + b.mean * b.weight) / (t.weight + b.weight);
      b.weight += t.weight;
      b.count += t.count;
      stack.pop_back();
    }
    stack.push_back(b);
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : stack) out.insert(out.end(), b.count, b.mean);
  return out;
}

// In-place Cholesky solve of a symmetric positive definite system.
inline std::vector<double> solve_spd(std::vector<std::vector<double>> m,
                                     std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t j = 0; j < n; ++j) {
    double d = m[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= m[j][k] * m[j][k];
    if (!(d > 0.0)) throw std::runtime_error("solve_spd: matrix not positive definite");
    m[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = m[i][j];
      for (std::size_t k = 0; k < j; ++k) v -= m[i][k] * m[j][k];
      m[i][j] = v / m[j][j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {  // forward: L y = rhs
    double v = rhs[i];
    for (std::size_t k = 0; k < i; ++k) v -= m[i][k] * rhs[k];
    rhs[i] = v / m[i][i];
  }
  for (std::size_t ii = n; ii-- > 0;) {  // backward: L^T x = y
    double v = rhs[ii];
    for (std::size_t k = ii + 1; k < n; ++k) v -= m[k][ii] * rhs[k];
    rhs[ii] = v / m[ii][ii];
  }
  return rhs;
}

}  // namespace detail

inline RateCurve fit_rate_curve(const RateSampleSet& set, int n_knots,
                                bool enforce_monotone) {
  set.validate();
  if (n_knots < 2) throw std::domain_error("fit_rate_curve: needs n_knots >= 2");
  const std::size_t k = static_cast<std::size_t>(n_knots);

  std::vector<double> soc_sum(k, 0.0), pow_sum(k, 0.0), count(k, 0.0);
  for (const Sample& s : set.samples) {
    const std::size_t b = static_cast<std::size_t>(
        std::lround(s.soc * static_cast<double>(k - 1)));
    soc_sum[b] += s.soc;
    pow_sum[b] += s.power;
    count[b] += 1.0;
  }
  double occupied = 0.0, weight_sum = 0.0;
  for (std::size_t b = 0; b < k; ++b) {
    if (count[b] > 0.0) {
      occupied += 1.0;
      weight_sum += count[b];
    }
  }
  if (occupied == 0.0) throw std::domain_error("fit_rate_curve: all bins empty");
  const double mean_w = weight_sum / occupied;
  const double lambda2 = 1e-8 * mean_w;   // curvature ridge: empty spans go straight
  const double lambda1 = 1e-11 * mean_w;  // slope ridge: pins the last free direction

  std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
  std::vector<double> rhs(k, 0.0);
  const double h = 1.0 / static_cast<double>(k - 1);
  for (std::size_t b = 0; b < k; ++b) {
    if (count[b] == 0.0) continue;
    const double soc = soc_sum[b] / count[b];
    const double pw = pow_sum[b] / count[b];
    // hat-basis row: the two knots bracketing soc
    std::size_t j = std::min(static_cast<std::size_t>(soc / h), k - 2);
    const double t = soc / h - static_cast<double>(j);
    const double phi[2] = {1.0 - t, t};
    const std::size_t idx[2] = {j, j + 1};
    for (int a = 0; a < 2; ++a) {
      rhs[idx[a]] += count[b] * phi[a] * pw;
      for (int c = 0; c < 2; ++c) m[idx[a]][idx[c]] += count[b] * phi[a] * phi[c];
    }
  }
  for (std::size_t j = 0; j + 1 < k; ++j) {  // lambda1 * ||first differences||^2
    m[j][j] += lambda1;
    m[j + 1][j + 1] += lambda1;
    m[j][j + 1] -= lambda1;
    m[j + 1][j] -= lambda1;
  }
  for (std::size_t j = 0; j + 2 < k; ++j) {  // lambda2 * ||second differences||^2
    const double d[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 3; ++c) m[j + a][j + c] += lambda2 * d[a] * d[c];
  }
  std::vector<double> fitted = detail::solve_spd(std::move(m), std::move(rhs));

  if (enforce_monotone) {
    std::vector<double> w(k);
    for (std::size_t b = 0; b < k; ++b) w[b] = count[b] + 1e-6;
    fitted = detail::pava_non_increasing(fitted, w);
  }
  std::vector<RateKnot> knots(k);
  double pmax = 0.0;
  for (double v : fitted) pmax = std::max(pmax, std::fabs(v));
  for (std::size_t j = 0; j < k; ++j) {
    // positivity floor: wild extrapolation must not break the RateCurve invariant
    knots[j] = {static_cast<double>(j) * h,
                std::max(fitted[j], 1e-9 * std::max(pmax, 1.0))};
  }
  knots.back().soc = 1.0;
  return RateCurve(std::move(knots), enforce_monotone);
}

// ---- JSON forms ----

inline nlohmann::ordered_json rate_curve_to_json(const RateCurve& curve,
                                                 const std::string& label) {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["monotone_non_increasing"] = curve.monotone_non_increasing();
  nlohmann::ordered_json knots = nlohmann::ordered_json::array();
  for (const RateKnot& kn : curve.knots())
    knots.push_back({round12(kn.soc), round12(kn.power)});
  j["knots"] = std::move(knots);
  return j;
}

inline RateCurve rate_curve_from_json(const nlohmann::ordered_json& j,
                                      std::string* label_out = nullptr) {
  if (!j.contains("knots") || !j["knots"].is_array())
    throw parse_error("rate curve JSON: missing 'knots' array");
  std::vector<RateKnot> knots;
  for (const auto& kn : j["knots"]) {
    if (!kn.is_array() || kn.size() != 2)
      throw parse_error("rate curve JSON: each knot must be a [soc, power] pair");
    knots.push_back({kn[0].get<double>(), kn[1].get<double>()});
  }
  if (label_out) *label_out = j.value("label", std::string());
  return RateCurve(std::move(knots), j.value("monotone_non_increasing", false));
}

inline nlohmann::ordered_json closed_form_to_json(const ClosedForm& form) {
  nlohmann::ordered_json j;
  j["family"] = to_string(form.family);
  nlohmann::ordered_json coeff = nlohmann::ordered_json::array();
  if (form.family == RateFamily::PiecewiseFlat) {
    // interleaved: level_0, break_1, level_1, ..., break_m, level_m
    coeff.push_back(round12(form.levels[0]));
    for (std::size_t i = 0; i < form.breaks.size(); ++i) {
      coeff.push_back(round12(form.breaks[i]));
      coeff.push_back(round12(form.levels[i + 1]));
    }
  } else {
    coeff.push_back(round12(form.scale));
  }
  j["coefficients"] = std::move(coeff);
  return j;
}

inline ClosedForm closed_form_from_json(const nlohmann::ordered_json& j) {
  if (!j.contains("family"))
    throw parse_error("closed form JSON: missing 'family'");
  ClosedForm form;
  form.family = rate_family_from_string(j["family"].get<std::string>());
  const auto& coeff = j.at("coefficients");
  if (form.family == RateFamily::PiecewiseFlat) {
    if (!coeff.is_array() || coeff.empty() || coeff.size() % 2 == 0)
      throw parse_error("closed form JSON: piecewise_flat needs an odd-length "
                        "level/break/level/... coefficient list");
    form.levels.push_back(coeff[0].get<double>());
    for (std::size_t i = 1; i < coeff.size(); i += 2) {
      form.breaks.push_back(coeff[i].get<double>());
      form.levels.push_back(coeff[i + 1].get<double>());
    }
  } else {
    if (!coeff.is_array() || coeff.size() != 1)
      throw parse_error("closed form JSON: expected a single scale coefficient");
    form.scale = coeff[0].get<double>();
  }
  form.validate();
  return form;
}

inline nlohmann::ordered_json solution_to_json(const EquilibriumSolution& sol) {
  nlohmann::ordered_json j;
  j["model"] = to_string(sol.model);
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < sol.curves.size(); ++i) {
    nlohmann::ordered_json cls;
    cls["label"] = sol.labels[i];
    cls["z"] = round12(sol.curves[i].z);
    cls["beta"] = round12(sol.betas[i]);
    cls["indifferent_in_r"] = static_cast<bool>(sol.indifferent_in_r[i]);
    classes.push_back(std::move(cls));
  }
  j["classes"] = std::move(classes);
  j["alpha"] = round12(sol.alpha);
  const ModelParams& p = sol.curves.front().params;
  j["params"] = {{"c", round12(p.c)},         {"tau", round12(p.tau)},
                 {"r_t", round12(p.r_t)},     {"w_a_x", round12(p.w_a_x)},
                 {"w_b_x", round12(p.w_b_x)}, {"epsilon", round12(p.epsilon)}};
  j["diagnostics"] = {{"iterations", sol.diagnostics.iterations},
                      {"residual", round12(sol.diagnostics.residual)}};
  return j;
}

// ---- file writers ----

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open " + path + " for writing");
  return out;
}

}  // namespace detail

inline void export_solution(const EquilibriumSolution& sol, const std::string& path) {
  auto out = detail::open_out(path);
  out << solution_to_json(sol).dump(2) << '\n';
  if (!out) throw io_error("failed writing " + path);
}

inline void export_rate_curve(const RateCurve& curve, const std::string& label,
                              const std::string& path) {
  auto out = detail::open_out(path);
  out << rate_curve_to_json(curve, label).dump(2) << '\n';
  if (!out) throw io_error("failed writing " + path);
}

inline RateCurve load_rate_curve(const std::string& path, std::string* label_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw io_error("load_rate_curve: cannot open " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  return rate_curve_from_json(j, label_out);
}

inline ClosedForm load_closed_form(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_closed_form: cannot open " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  return closed_form_from_json(j);
}

inline void export_curve_csv(const std::vector<CurvePoint>& points,
                             const std::string& path) {
  auto out = detail::open_out(path);
  out << "r,y\n";
  for (const CurvePoint& pt : points)
    out << format12(pt.r) << ',' << format12(pt.y) << '\n';
  if (!out) throw io_error("failed writing " + path);
}

inline void export_dense_rate_csv(const RateCurve& curve, int n,
                                  const std::string& path) {
  if (n < 2) throw std::domain_error("export_dense_rate_csv: needs n >= 2");
  auto out = detail::open_out(path);
  out << "soc,power_kw\n";
  for (int i = 0; i < n; ++i) {
    const double soc = static_cast<double>(i) / (n - 1);
    out << format12(soc) << ',' << format12(curve.eval(soc)) << '\n';
  }
  if (!out) throw io_error("failed writing " + path);
}

inline void export_grid_csv(const GridAssignment& grid, const std::string& path) {
  auto out = detail::open_out(path);
  out << "r,y,choice\n";
  for (int ir = 0; ir < grid.n_r; ++ir)
    for (int iy = 0; iy < grid.n_y; ++iy)
      out << format12(grid.r_centers[ir]) << ',' << format12(grid.y_centers[iy])
          << ',' << to_string(grid.at(ir, iy)) << '\n';
  if (!out) throw io_error("failed writing " + path);
}

}  // namespace chargeq
