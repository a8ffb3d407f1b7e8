// chargeq: equilibrium solver CLI for the two-station charging game.
//
// Subcommands: solve (equilibrium for a parameter set), decide (one
// driver's station choice at equilibrium), verify (brute-force grid
// certificate), fit (rate-curve fitting from sampled data).
// Exit codes: 0 ok, 1 usage/parameter error, 2 verification failure,
// 3 I/O error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chargeq/chargeq.hpp"

namespace {

using namespace chargeq;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  const char sep = text.find(';') != std::string::npos ? ';' : ',';
  std::vector<double> out;
  for (const std::string& item : split(text, sep)) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0')
      throw std::domain_error("expected a numeric list, got '" + text + "'");
    out.push_back(v);
  }
  return out;
}

// One charging form: an analytic family, a closed-form JSON file, or a
// fitted rate-curve JSON file.
struct FormSpec {
  std::string family;
  double scale = 1.0;
  std::string coeff_text;  // piecewise_flat: level,break,level,...
  std::string form_path;
  std::string curve_path;
  double capacity = 1.0;
  std::string label;
  double weight = 1.0;

  ChargingTimeFn build(const ModelParams& p) {
    const int sources =
        (!family.empty() ? 1 : 0) + (!form_path.empty() ? 1 : 0) + (!curve_path.empty() ? 1 : 0);
    if (sources != 1)
      throw std::domain_error(
          "exactly one charging form is required (--family, --form, or --curve)");
    if (!family.empty()) {
      ClosedForm cf;
      cf.family = rate_family_from_string(family);
      if (cf.family == RateFamily::PiecewiseFlat) {
        const std::vector<double> coeff =
            coeff_text.empty() ? std::vector<double>{} : parse_doubles(coeff_text);
        if (coeff.empty() || coeff.size() % 2 == 0)
          throw std::domain_error(
              "piecewise_flat needs --coeff level,break,level,... (odd length)");
        cf.levels.push_back(coeff[0]);
        for (std::size_t i = 1; i < coeff.size(); i += 2) {
          cf.breaks.push_back(coeff[i]);
          cf.levels.push_back(coeff[i + 1]);
        }
      } else {
        cf.scale = scale;
      }
      if (label.empty()) label = to_string(cf.family);
      return ChargingTimeFn::closed_form(cf, p.r_t);
    }
    if (!form_path.empty()) {
      const ClosedForm cf = load_closed_form(form_path);
      if (label.empty()) label = to_string(cf.family);
      return ChargingTimeFn::closed_form(cf, p.r_t);
    }
    std::string file_label;
    RateCurve curve = load_rate_curve(curve_path, &file_label);
    if (label.empty()) label = file_label;
    return ChargingTimeFn::from_rate_curve(std::move(curve), capacity, p.r_t);
  }
};

FormSpec parse_class_spec(const std::string& text) {
  FormSpec spec;
  for (const std::string& field : split(text, ',')) {
    const std::size_t eq = field.find('=');
    if (eq == std::string::npos)
      throw std::domain_error("--class fields must look like key=value: '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "label") spec.label = val;
    else if (key == "family") spec.family = val;
    else if (key == "scale") spec.scale = std::stod(val);
    else if (key == "coeff") spec.coeff_text = val;
    else if (key == "form") spec.form_path = val;
    else if (key == "curve") spec.curve_path = val;
    else if (key == "capacity") spec.capacity = std::stod(val);
    else if (key == "weight") spec.weight = std::stod(val);
    else throw std::domain_error("unknown --class key '" + key + "'");
  }
  return spec;
}

int quad_points_from_env() {
  const char* env = std::getenv("CHARGE_EQ_QUAD_POINTS");
  if (!env || *env == '\0') return kDefaultQuadPoints;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 2)
    throw std::domain_error("CHARGE_EQ_QUAD_POINTS must be an integer >= 2");
  return static_cast<int>(v);
}

struct Cli {
  ModelParams params;
  std::string model = "exogenous";
  FormSpec form;
  std::vector<std::string> class_specs;

  std::string out_path, curve_out, grid_out, dense_out;
  int curve_samples = 201;
  double driver_r = 0.0, driver_y = 0.0;
  int n_r = 500, n_y = 500;
  double perturb_z = 0.0;
  std::string samples_path;
  int n_knots = 21;
  bool monotone = false;
  std::string fit_label;
  int dense_n = 101;
};

std::vector<EvClass> build_classes(Cli& cli) {
  std::vector<EvClass> classes;
  if (cli.model == "heterogeneous") {
    if (cli.class_specs.empty())
      throw std::domain_error("heterogeneous model needs at least one --class");
    double wsum = 0.0;
    std::vector<FormSpec> specs;
    for (const std::string& text : cli.class_specs) {
      specs.push_back(parse_class_spec(text));
      if (!(specs.back().weight > 0.0))
        throw std::domain_error("class weights must be positive");
      wsum += specs.back().weight;
    }
    for (FormSpec& spec : specs) {
      ChargingTimeFn f = spec.build(cli.params);
      classes.push_back({spec.label, std::move(f), spec.weight / wsum});
    }
  } else {
    ChargingTimeFn f = cli.form.build(cli.params);
    classes.push_back({cli.form.label, std::move(f), 1.0});
  }
  return classes;
}

EquilibriumSolution solve_model(Cli& cli, const std::vector<EvClass>& classes,
                                int n_quad) {
  if (cli.model == "exogenous") return solve_exogenous(classes.front().f, cli.params, n_quad);
  if (cli.model == "endogenous") return solve_endogenous(classes.front().f, cli.params, n_quad);
  if (cli.model == "heterogeneous") return solve_heterogeneous(classes, cli.params, n_quad);
  throw std::domain_error("unknown model '" + cli.model + "'");
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const std::size_t dot = path.find_last_of('.');
  const std::size_t slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + suffix;
  return path.substr(0, dot) + suffix + path.substr(dot);
}

void print_solution(const EquilibriumSolution& sol, const ModelParams& p,
                    const std::vector<EvClass>& classes, WaitingModel wmodel) {
  std::cout << "model: " << to_string(sol.model) << '\n';
  for (std::size_t i = 0; i < sol.curves.size(); ++i) {
    std::cout << "class " << i;
    if (!sol.labels[i].empty()) std::cout << " (" << sol.labels[i] << ")";
    std::cout << ": z=" << format12(sol.curves[i].z) << " beta=" << format12(sol.betas[i])
              << " weight=" << format12(sol.class_weights[i])
              << " indifferent_in_r=" << (sol.indifferent_in_r[i] ? "true" : "false")
              << " indifferent_exists=" << (indifferent_exists(classes[i].f, p, wmodel) ? "true" : "false")
              << '\n';
  }
  std::cout << "alpha: " << format12(sol.alpha) << '\n';
  std::cout << "iterations: " << sol.diagnostics.iterations << '\n';
  std::cout << "residual: " << format12(sol.diagnostics.residual) << '\n';
}

int cmd_solve(Cli& cli) {
  cli.params.validate();
  const int n_quad = quad_points_from_env();
  std::vector<EvClass> classes = build_classes(cli);
  const EquilibriumSolution sol = solve_model(cli, classes, n_quad);
  const WaitingModel wmodel = sol.model == EquilibriumKind::Exogenous
                                  ? WaitingModel::Exogenous
                                  : WaitingModel::Endogenous;
  print_solution(sol, cli.params, classes, wmodel);
  if (!cli.out_path.empty()) export_solution(sol, cli.out_path);
  if (!cli.curve_out.empty()) {
    for (std::size_t i = 0; i < sol.curves.size(); ++i) {
      const std::string path =
          sol.curves.size() == 1 ? cli.curve_out
                                 : with_suffix(cli.curve_out, "_" + std::to_string(i));
      export_curve_csv(sample_curve(sol.curves[i], cli.params.c, cli.params.r_t,
                                    static_cast<std::size_t>(cli.curve_samples)),
                       path);
    }
  }
  return 0;
}

int cmd_decide(Cli& cli) {
  cli.params.validate();
  const int n_quad = quad_points_from_env();
  std::vector<EvClass> classes = build_classes(cli);
  const EquilibriumSolution sol = solve_model(cli, classes, n_quad);
  const WaitingModel wmodel = sol.model == EquilibriumKind::Exogenous
                                  ? WaitingModel::Exogenous
                                  : WaitingModel::Endogenous;
  const DriverState driver{cli.driver_r, cli.driver_y};
  if (!driver.in_region(cli.params))
    std::cerr << "warning: driver (" << format12(driver.r) << ", " << format12(driver.y)
              << ") lies outside the region [c, r_t] x [0, 1]\n";
  for (std::size_t i = 0; i < sol.curves.size(); ++i) {
    const Decision d = decide(sol.curves[i], driver);
    const CostBreakdown cb = total_costs(classes[i].f, cli.params, driver, sol.alpha, wmodel);
    if (sol.curves.size() > 1) std::cout << "class " << i << " (" << sol.labels[i] << "):\n";
    std::cout << "decision: " << to_string(d) << '\n'
              << "boundary_y: " << format12(solve_y_at(sol.curves[i], driver.r)) << '\n'
              << "wait_a: " << format12(cb.wait_a) << '\n'
              << "wait_b: " << format12(cb.wait_b) << '\n'
              << "travel_a: " << format12(cb.travel_a) << '\n'
              << "travel_b: " << format12(cb.travel_b) << '\n'
              << "charge_a: " << format12(cb.charge_a) << '\n'
              << "charge_b: " << format12(cb.charge_b) << '\n'
              << "total_a: " << format12(cb.total_a) << '\n'
              << "total_b: " << format12(cb.total_b) << '\n'
              << "delta_t: " << format12(cb.delta_t) << '\n';
  }
  return 0;
}

int cmd_verify(Cli& cli) {
  cli.params.validate();
  const int n_quad = quad_points_from_env();
  std::vector<EvClass> classes = build_classes(cli);
  EquilibriumSolution sol = solve_model(cli, classes, n_quad);
  if (cli.perturb_z != 0.0) {
    // negative control: shift every boundary value and recompute the
    // shares this wrong solution claims for itself
    double alpha = 0.0;
    for (std::size_t i = 0; i < sol.curves.size(); ++i) {
      sol.curves[i] = make_curve(classes[i].f, cli.params, sol.curves[i].z + cli.perturb_z);
      sol.betas[i] = congestion_integral(sol.curves[i], n_quad);
      sol.indifferent_in_r[i] = sol.curves[i].z >= 0.0 && sol.curves[i].z <= 1.0;
      alpha += sol.class_weights[i] * sol.betas[i];
    }
    sol.alpha = alpha;
  }
  const VerificationReport rep = verify_equilibrium(classes, cli.params, sol, cli.n_r, cli.n_y);
  std::cout << "grid: " << rep.n_r << "x" << rep.n_y << '\n'
            << "boundary_max_gap: " << format12(rep.boundary_max_gap)
            << " (tol " << format12(rep.boundary_tol) << ")\n"
            << "alpha_empirical: " << format12(rep.alpha_empirical) << '\n'
            << "alpha_gap: " << format12(rep.alpha_gap) << " (tol " << format12(rep.alpha_tol)
            << ")\n"
            << "violations: " << rep.total_violations << " total, " << rep.offband_violations
            << " off-band\n";
  if (!cli.grid_out.empty()) {
    const WaitingModel wmodel = sol.model == EquilibriumKind::Exogenous
                                    ? WaitingModel::Exogenous
                                    : WaitingModel::Endogenous;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const std::string path =
          classes.size() == 1 ? cli.grid_out
                              : with_suffix(cli.grid_out, "_" + std::to_string(i));
      export_grid_csv(
          best_response_grid(classes[i].f, cli.params, sol.alpha, wmodel, cli.n_r, cli.n_y),
          path);
    }
  }
  if (!rep.boundary_ok()) {
    std::cout << "FAIL: boundary check\n";
    return 2;
  }
  if (!rep.alpha_ok()) {
    std::cout << "FAIL: alpha check\n";
    return 2;
  }
  if (!rep.responses_ok()) {
    std::cout << "FAIL: fixed-point best-response check\n";
    return 2;
  }
  std::cout << "PASS\n";
  return 0;
}

int cmd_fit(Cli& cli) {
  RateSampleSet set = load_samples(cli.samples_path);
  set.vehicle_label = cli.fit_label;
  const RateCurve curve = fit_rate_curve(set, cli.n_knots, cli.monotone);
  std::cout << "samples: " << set.samples.size() << '\n'
            << "knots: " << curve.knots().size() << '\n';
  for (const RateKnot& kn : curve.knots())
    std::cout << format12(kn.soc) << ',' << format12(kn.power) << '\n';
  if (!cli.out_path.empty()) export_rate_curve(curve, cli.fit_label, cli.out_path);
  if (!cli.dense_out.empty()) export_dense_rate_csv(curve, cli.dense_n, cli.dense_out);
  return 0;
}

void add_param_flags(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--c", cli.params.c, "SoC consumed per unit distance");
  cmd->add_option("--tau", cli.params.tau, "travel time per unit distance");
  cmd->add_option("--rt", cli.params.r_t, "target state of charge");
  cmd->add_option("--wa", cli.params.w_a_x, "exogenous wait at Station A");
  cmd->add_option("--wb", cli.params.w_b_x, "exogenous wait at Station B");
  cmd->add_option("--eps", cli.params.epsilon, "full-congestion waiting time scale");
}

void add_form_flags(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--model", cli.model, "exogenous | endogenous | heterogeneous");
  cmd->add_option("--family", cli.form.family,
                  "closed form: affine | quadratic | cubic | piecewise_flat");
  cmd->add_option("--scale", cli.form.scale, "closed-form scale factor");
  cmd->add_option("--coeff", cli.form.coeff_text,
                  "piecewise_flat coefficients level,break,level,...");
  cmd->add_option("--form", cli.form.form_path, "closed-form descriptor JSON file");
  cmd->add_option("--curve", cli.form.curve_path, "fitted rate-curve JSON file");
  cmd->add_option("--capacity", cli.form.capacity, "battery capacity for --curve");
  cmd->add_option("--label", cli.form.label, "class label for output");
  cmd->add_option("--class", cli.class_specs,
                  "heterogeneous class spec key=value[,key=value...]; keys: label, "
                  "family, scale, coeff (';'-separated), form, curve, capacity, weight");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-station EV charging equilibrium solver"};
  app.require_subcommand(1);
  Cli cli;

  CLI::App* solve = app.add_subcommand("solve", "solve for the equilibrium boundary");
  add_form_flags(solve, cli);
  add_param_flags(solve, cli);
  solve->add_option("--out", cli.out_path, "solution JSON output path");
  solve->add_option("--curve-out", cli.curve_out, "indifference curve CSV output path");
  solve->add_option("--samples", cli.curve_samples, "curve CSV sample count")
      ->check(CLI::Range(2, 1000000));

  CLI::App* decide = app.add_subcommand("decide", "station choice for one driver");
  add_form_flags(decide, cli);
  add_param_flags(decide, cli);
  decide->add_option("--r", cli.driver_r, "driver state of charge")->required();
  decide->add_option("--y", cli.driver_y, "driver position")->required();

  CLI::App* verify = app.add_subcommand("verify", "brute-force grid certificate");
  add_form_flags(verify, cli);
  add_param_flags(verify, cli);
  verify->add_option("--nr", cli.n_r, "grid cells along r")->check(CLI::Range(2, 100000));
  verify->add_option("--ny", cli.n_y, "grid cells along y")->check(CLI::Range(2, 100000));
  verify->add_option("--perturb-z", cli.perturb_z,
                     "shift the solved z before verifying (negative control)");
  verify->add_option("--grid-out", cli.grid_out, "grid assignment CSV output path");

  CLI::App* fit = app.add_subcommand("fit", "fit a rate curve to samples");
  fit->add_option("--samples", cli.samples_path, "input CSV (soc,power_kw)")->required();
  fit->add_option("--knots", cli.n_knots, "number of uniform knots")
      ->check(CLI::Range(2, 10000));
  fit->add_flag("--monotone", cli.monotone, "project onto non-increasing curves");
  fit->add_option("--label", cli.fit_label, "vehicle label for the curve JSON");
  fit->add_option("--out", cli.out_path, "fitted curve JSON output path");
  fit->add_option("--dense-out", cli.dense_out, "dense rate CSV output path");
  fit->add_option("--dense-n", cli.dense_n, "dense CSV sample count")
      ->check(CLI::Range(2, 1000000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return cmd_solve(cli);
    if (decide->parsed()) return cmd_decide(cli);
    if (verify->parsed()) return cmd_verify(cli);
    return cmd_fit(cli);
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
