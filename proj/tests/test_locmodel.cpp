#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "pointer/locmodel.hpp"
#include "pointer/special.hpp"

using namespace pointer;

TEST_CASE("Dawson integral against mpmath")
{
  for (auto const &[z, d] : oracle::dawson_table()) {
    CAPTURE(z);
    CHECK(std::abs(dawson(z) - d) <= 1e-13 * std::abs(d));
    CHECK(dawson(-z) == -dawson(z));
  }
  CHECK(dawson(0.0) == 0.0);
}

TEST_CASE("Dawson accuracy on [0, 4] against quadrature erfi")
{
  double worst = 0;
  for (int i = 1; i <= 80; ++i) {
    double const z = 0.05 * i;
    double const ref = oracle::erfi_quadrature(z);
    worst = std::max(worst, std::abs(erfi(z) - ref) / ref);
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("width model")
{
  CHECK(width_model_1d(0.0, 0.4) == 0.4);
  CHECK(width_model_1d(4 * 0.4 * 0.4, 0.4) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(width_model_1d(-1.0, 0.4), DomainError);
  CHECK_THROWS_AS(width_model_1d(1.0, 0.0), DomainError);
}

TEST_CASE("fit_a_loc recovers a synthetic a_loc")
{
  std::vector<WidthSample> table;
  for (int i = 0; i < 11; ++i) {
    double const k = std::pow(10.0, -4 + 0.5 * i);
    table.push_back({k, width_model_1d(k, 0.4)});
  }
  auto const fit = fit_a_loc(table);
  CHECK(std::abs(fit.a_loc - 0.4) < 1e-6);
  CHECK(fit.max_relative_deviation < 1e-6);
  CHECK_FALSE(fit.narrow_span);
  CHECK(fit.decades == doctest::Approx(5));
}

TEST_CASE("narrow tables are flagged and widen the uncertainty")
{
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0, 0.02);
  auto make = [&](double lo_exp, double hi_exp) {
    std::vector<WidthSample> t;
    for (int i = 0; i < 8; ++i) {
      double const k = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * i / 7.0);
      t.push_back({k, width_model_1d(k, 0.4) * (1 + noise(rng))});
    }
    return t;
  };
  // Errors are averaged over repetitions so the comparison does not hinge on one noise draw.
  double wide = 0, narrow = 0;
  for (int r = 0; r < 20; ++r) {
    auto const w = fit_a_loc(make(-4, 1));
    auto const n = fit_a_loc(make(0, 0.9));
    CHECK_FALSE(w.narrow_span);
    CHECK(n.narrow_span);
    wide += w.std_error;
    narrow += n.std_error;
  }
  CHECK(narrow > wide);
}

TEST_CASE("fit_a_loc preconditions")
{
  std::vector<WidthSample> t{{1e-3, 0.4}, {1e-2, 0.4}, {1e-1, 0.46}, {1, 1.0}};
  CHECK_THROWS_AS(fit_a_loc(t), FitError);
  t.push_back({-1.0, 1.0});
  CHECK_THROWS_AS(fit_a_loc(t), FitError);
}

TEST_CASE("xi_loc at a_loc = 0.4")
{
  double const xi = solve_xi_loc(0.4);
  CHECK(xi > 0.08);
  CHECK(xi < 0.12);
  CHECK(std::abs(xi_loc_residual(xi, 0.4)) < 1e-12);
  CHECK(std::abs(xi - oracle::xi_loc_mpmath_04) < 1e-12);
}

TEST_CASE("xi_loc at a_loc = 0.8 against a fine sign scan")
{
  auto const roots = oracle::sign_scan_roots(
    [](double xi) {
      // Defining equation, with erfi by quadrature (independent of the Dawson series).
      double const z = 2 * std::sqrt(std::numbers::pi) * xi;
      return xi - std::exp(0.32 - 4 * std::numbers::pi * xi * xi) * oracle::erfi_quadrature(z) / 4;
    },
    1e-6, 1.0, 100000);
  REQUIRE(roots.size() == 1);
  CHECK(std::abs(solve_xi_loc(0.8) - roots[0]) < 1e-10);
  CHECK(std::abs(solve_xi_loc(0.8) - oracle::xi_loc_mpmath_08) < 1e-12);
}

TEST_CASE("root is unique in (0, 1) across a_loc")
{
  for (double a : {0.05, 0.2, 0.4, 0.8, 1.2, 1.6, 1.95}) {
    CAPTURE(a);
    auto const roots = oracle::sign_scan_roots([a](double xi) { return xi_loc_residual(xi, a); }, 1e-6, 1.0);
    REQUIRE(roots.size() == 1);
    double const xi = solve_xi_loc(a);
    CHECK(std::abs(xi - roots[0]) < 1e-10);
    CHECK(std::abs(xi_loc_residual(xi, a)) < 1e-12);
  }
  CHECK_THROWS_AS(solve_xi_loc(2.5), DomainError);
  CHECK_THROWS_AS(solve_xi_loc(0.0), DomainError);
}

TEST_CASE("3D pointer width")
{
  CHECK(pointer_width_3d(1.6, 1.0, 0.1) == doctest::Approx(1.1).epsilon(1e-15));
  double const xi = solve_xi_loc(0.4);
  CHECK(pointer_width_3d(GasParams{1e-12, 2.0, 0.4}) == doctest::Approx(xi * 2.0).epsilon(1e-9));
  double const l = 1e6;
  CHECK(pointer_width_3d(GasParams{l, 1.0, 0.4}) == doctest::Approx(l / (16 * xi)).epsilon(1e-6));
  double prev = 0;
  for (int i = 0; i < 50; ++i) {
    double const s = pointer_width_3d(GasParams{std::pow(10.0, -3 + 0.15 * i), 1.0, 0.4});
    CHECK(s > prev);
    prev = s;
  }
  CHECK_THROWS_AS(pointer_width_3d(GasParams{-1, 1, 0.4}), ConfigError);
}

TEST_CASE("coherence length")
{
  double const lth = 1.7;
  CHECK(coherence_length(lth / std::sqrt(8 * std::numbers::pi), lth) == doctest::Approx(lth / std::sqrt(2)));
  CHECK(coherence_length(1e12, lth) == doctest::Approx(lth).epsilon(1e-15));
  double prev = 0;
  for (int i = 0; i < 200; ++i) {
    double const s = std::pow(10.0, -4 + 0.05 * i);
    double const c = coherence_length(s, lth);
    CHECK(c <= lth);
    CHECK(c > prev);
    prev = c;
  }
  CHECK_THROWS_AS(coherence_length(0.0, 1.0), DomainError);
}
