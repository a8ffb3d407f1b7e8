#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "chargeq/curve.hpp"
#include "chargeq/equilibrium.hpp"
#include "chargeq/model.hpp"
#include "chargeq/oracle.hpp"

using namespace chargeq;

namespace {

ModelParams base_params() {
  ModelParams p;
  p.c = 0.2;
  p.tau = 1.0;
  p.r_t = 1.0;
  return p;
}

ChargingTimeFn family(RateFamily fam, double scale = 1.0, double r_t = 1.0) {
  ClosedForm form;
  form.family = fam;
  form.scale = scale;
  return ChargingTimeFn::closed_form(form, r_t);
}

// Empirical A-share error of the flat w_A = 0.5 case on an n-by-n grid.
double flat_grid_error(int n) {
  ModelParams p = base_params();
  p.w_a_x = 0.5;
  const GridAssignment grid = best_response_grid(
      family(RateFamily::Affine), p, 0.0, WaitingModel::Exogenous, n, n);
  return std::fabs(grid.alpha_empirical - 7.0 / 24.0);
}

}  // namespace

TEST_CASE("grid construction and validation") {
  const ModelParams p = base_params();
  const ChargingTimeFn f = family(RateFamily::Affine);
  REQUIRE_THROWS_AS(
      best_response_grid(f, p, 0.0, WaitingModel::Exogenous, 1, 10), std::domain_error);
  REQUIRE_THROWS_AS(
      best_response_grid(f, p, 0.0, WaitingModel::Exogenous, 10, 1), std::domain_error);

  const GridAssignment grid =
      best_response_grid(f, p, 0.0, WaitingModel::Exogenous, 4, 5);
  REQUIRE(grid.r_centers.size() == 4);
  REQUIRE(grid.y_centers.size() == 5);
  REQUIRE(grid.choices.size() == 20);
  CHECK(grid.r_centers.front() == Catch::Approx(0.3));
  CHECK(grid.r_centers.back() == Catch::Approx(0.9));
  CHECK(grid.y_centers.front() == Catch::Approx(0.1));
  CHECK(grid.y_centers.back() == Catch::Approx(0.9));
}

TEST_CASE("grid responses on benchmark cases") {
  SECTION("flat boundary lands within one cell of 7/24") {
    ModelParams p = base_params();
    p.w_a_x = 0.5;
    const GridAssignment grid = best_response_grid(
        family(RateFamily::Affine), p, 0.0, WaitingModel::Exogenous, 400, 400);
    for (std::size_t ir = 0; ir < grid.r_centers.size(); ++ir)
      REQUIRE(std::fabs(detail::column_a_fraction(grid, ir) - 7.0 / 24.0) <= 1.0 / 400.0);
    CHECK(std::fabs(grid.alpha_empirical - 7.0 / 24.0) <= 1.0 / 400.0);
  }
  SECTION("balanced waits split the region in half exactly") {
    ModelParams p = base_params();
    p.w_a_x = p.w_b_x = 0.7;
    const GridAssignment grid = best_response_grid(
        family(RateFamily::Quadratic), p, 0.0, WaitingModel::Exogenous, 7, 10);
    CHECK(grid.alpha_empirical == 0.5);
  }
  SECTION("overloaded Station A empties it exactly") {
    ModelParams p = base_params();
    p.w_a_x = 2.0;
    const GridAssignment grid = best_response_grid(
        family(RateFamily::Affine), p, 0.0, WaitingModel::Exogenous, 50, 50);
    CHECK(grid.alpha_empirical == 0.0);
    for (Decision d : grid.choices) REQUIRE(d == Decision::StationB);
  }
  SECTION("cells on the boundary count half") {
    ModelParams p = base_params();
    p.w_a_x = p.w_b_x = 0.0;
    const GridAssignment grid = best_response_grid(
        family(RateFamily::Affine), p, 0.0, WaitingModel::Exogenous, 4, 5);
    for (std::size_t ir = 0; ir < 4; ++ir) {
      CHECK(grid.at(ir, 0) == Decision::StationA);
      CHECK(grid.at(ir, 1) == Decision::StationA);
      CHECK(grid.at(ir, 2) == Decision::Indifferent);
      CHECK(grid.at(ir, 3) == Decision::StationB);
      CHECK(grid.at(ir, 4) == Decision::StationB);
    }
    CHECK(grid.alpha_empirical == 0.5);
  }
  SECTION("every column is A then I then B from bottom to top") {
    ModelParams p = base_params();
    p.w_a_x = 0.5;
    const GridAssignment grid = best_response_grid(
        family(RateFamily::Quadratic), p, 0.0, WaitingModel::Exogenous, 60, 80);
    for (std::size_t ir = 0; ir < 60; ++ir) {
      int phase = 0;  // 0 = A, 1 = I, 2 = B
      for (std::size_t iy = 0; iy < 80; ++iy) {
        const Decision d = grid.at(ir, iy);
        const int want = d == Decision::StationA ? 0 : d == Decision::Indifferent ? 1 : 2;
        REQUIRE(want >= phase);
        phase = want;
      }
    }
  }
}

TEST_CASE("grid error shrinks as the grid refines") {
  SECTION("flat case, frozen error ladder") {
    const std::vector<int> sizes = {50, 100, 200, 400};
    const std::vector<double> expected = {1.0 / 120.0, 1.0 / 600.0, 1.0 / 600.0,
                                          1.0 / 1200.0};
    double prev = 1.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const double err = flat_grid_error(sizes[i]);
      CHECK(err == Catch::Approx(expected[i]).margin(1e-12));
      REQUIRE(err <= prev + 1e-12);
      prev = err;
    }
  }
  SECTION("quadratic case, rate bound") {
    ModelParams p = base_params();
    p.w_a_x = 0.5;
    const EquilibriumSolution sol = solve_exogenous(family(RateFamily::Quadratic), p);
    for (int n : {50, 100, 200, 400}) {
      const GridAssignment grid = best_response_grid(
          family(RateFamily::Quadratic), p, 0.0, WaitingModel::Exogenous, n, n);
      REQUIRE(std::fabs(grid.alpha_empirical - sol.alpha) <= 2.0 / n);
    }
  }
}

TEST_CASE("verification accepts true equilibria") {
  auto expect_pass = [](const ChargingTimeFn& f, const ModelParams& p,
                        const EquilibriumSolution& sol) {
    const VerificationReport report = verify_equilibrium(f, p, sol, 300, 300);
    CHECK(report.boundary_ok());
    CHECK(report.alpha_ok());
    CHECK(report.responses_ok());
    CHECK(report.passed());
    CHECK(report.boundary_tol == Catch::Approx(2.0 / 300.0));
    CHECK(report.offband_violations == 0);
  };

  SECTION("flat exogenous") {
    ModelParams p = base_params();
    p.w_a_x = 0.5;
    const ChargingTimeFn f = family(RateFamily::Affine);
    expect_pass(f, p, solve_exogenous(f, p));
  }
  SECTION("quadratic exogenous") {
    ModelParams p = base_params();
    p.w_a_x = 0.5;
    const ChargingTimeFn f = family(RateFamily::Quadratic);
    expect_pass(f, p, solve_exogenous(f, p));
  }
  SECTION("flat endogenous") {
    ModelParams p = base_params();
    p.w_a_x = 1.0;
    p.epsilon = 1.0;
    const ChargingTimeFn f = family(RateFamily::Affine);
    expect_pass(f, p, solve_endogenous(f, p));
  }
  SECTION("all-B corner still verifies") {
    ModelParams p = base_params();
    p.w_a_x = 2.0;
    const ChargingTimeFn f = family(RateFamily::Affine);
    const VerificationReport report = verify_equilibrium(f, p, solve_exogenous(f, p), 200, 200);
    CHECK(report.passed());
    CHECK(report.alpha_empirical == 0.0);
  }
}

TEST_CASE("verification rejects a shifted boundary") {
  ModelParams p = base_params();
  p.w_a_x = 1.0;
  p.epsilon = 1.0;
  const ChargingTimeFn f = family(RateFamily::Affine);
  const EquilibriumSolution sol = solve_endogenous(f, p);

  EquilibriumSolution fake = sol;
  fake.curves[0] = make_curve(f, p, sol.curves[0].z + 0.05);
  fake.alpha = congestion_integral(fake.curves[0]);
  fake.betas = {fake.alpha};

  const VerificationReport report = verify_equilibrium(f, p, fake, 300, 300);
  CHECK_FALSE(report.boundary_ok());
  CHECK_FALSE(report.alpha_ok());
  CHECK_FALSE(report.responses_ok());
  CHECK_FALSE(report.passed());
  CHECK(report.boundary_max_gap > 0.05);
  CHECK(report.alpha_gap > 0.05);
  CHECK(report.offband_violations > 0);
}

TEST_CASE("verification covers mixed fleets") {
  ModelParams p = base_params();
  p.w_a_x = 0.5;
  p.epsilon = 1.0;
  std::vector<EvClass> classes;
  classes.push_back({"flat", family(RateFamily::Affine), 0.5});
  classes.push_back({"quad", family(RateFamily::Quadratic), 0.5});
  const EquilibriumSolution sol = solve_heterogeneous(classes, p);
  const VerificationReport report = verify_equilibrium(classes, p, sol, 200, 200);
  CHECK(report.passed());

  std::vector<EvClass> wrong_count(1, classes[0]);
  REQUIRE_THROWS_AS(verify_equilibrium(wrong_count, p, sol, 50, 50), std::domain_error);
}
