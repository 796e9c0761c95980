#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pergo/conditions.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace pergo;

namespace {

PeriodicSDEModel
ou_sine()
{
  return catalog_model("ou-gauss", { { "gamma", "1" }, { "sigma", "1" }, { "signal", "sin(2*pi*t)" }, { "T", "1" } });
}

PeriodicSDEModel
gbm()
{
  return catalog_model("gbm", { { "mu", "-1" }, { "sigma", "1" } });
}

PeriodicSDEModel
pearson()
{
  return catalog_model("pearson", { { "theta", "1" },
                                    { "c0", "1" },
                                    { "c1", "0" },
                                    { "sigma", "1" },
                                    { "signal", "1 + 0.5*sin(2*pi*t/T)" },
                                    { "T", "1" } });
}

CheckConfig
eps1()
{
  CheckConfig c;
  c.epsilon = 1.0;
  return c;
}

double
L(const PeriodicSDEModel& m, double s, double x)
{
  return lyapunov_generator(m, s, std::vector<double>{ x });
}

} // namespace

TEST_CASE("generator of the squared norm")
{
  const auto ou = catalog_model("ou-gauss", { { "gamma", "1" }, { "sigma", "1" }, { "T", "1" } });
  CHECK(L(ou, 0.4, 2.0) == -7.0);
  CHECK(L(ou, 0.4, 0.0) == 1.0);
  CHECK(L(gbm(), 0.0, 3.0) == -9.0);
}

TEST_CASE("compact set, radius and C for OU with a sine signal")
{
  const auto tk = find_tilde_K(ou_sine(), eps1());
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(tk.scan.pass);
  CHECK(std::fabs(tk.scan.radius - golden) <= tk.scan.radial_step);
  CHECK(tk.r_tilde == doctest::Approx(std::numbers::e));
  // dense grid oracle for sup |2 x sin(2 pi s) - 2 x^2 + 1| over |x| <= golden
  double c = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double s = i / 400.0;
    c = std::max(c, oracle::grid_max(
                      [&](double x) { return std::fabs(2.0 * x * std::sin(2.0 * std::numbers::pi * s) - 2.0 * x * x + 1.0); },
                      -golden, golden, 4000));
  }
  CHECK(c == doctest::Approx(7.47).epsilon(1e-3));
  CHECK(std::fabs(tk.c_sup - c) <= 1e-2);
}

TEST_CASE("GBM passes the Lyapunov scan with radius 1")
{
  const auto tk = find_tilde_K(gbm(), eps1());
  CHECK(tk.scan.pass);
  CHECK(std::fabs(tk.scan.radius - 1.0) <= tk.scan.radial_step);
}

TEST_CASE("no restoring drift fails the scan with a witness")
{
  const auto m = catalog_model("custom", { { "d", "1" }, { "m", "1" }, { "drift1", "sin(2*pi*t)" } });
  const auto tk = find_tilde_K(m, eps1());
  CHECK_FALSE(tk.scan.pass);
  REQUIRE(tk.scan.max_outside.x.size() == 1);
  CHECK(tk.scan.max_outside.value > -1.0);
}

TEST_CASE("automatic epsilon picks the largest passing value")
{
  CheckConfig c;
  const auto tk = find_tilde_K(ou_sine(), c);
  CHECK(tk.scan.pass);
  CHECK(tk.scan.epsilon > 1.0);
  CheckConfig fixed = c;
  fixed.epsilon = tk.scan.epsilon * 1.05;
  CHECK_FALSE(find_tilde_K(ou_sine(), fixed).scan.pass);
}

TEST_CASE("C2 arithmetic")
{
  CHECK(compute_C2(1, 1, 1.0) == doctest::Approx(12.0));
  CHECK(compute_C2(1, 1, 0.0) == 0.0);
  CHECK(compute_C2(2, 2, 1.0) == doctest::Approx(8.0 * std::sqrt(3.0) + 96.0));
}

TEST_CASE("minimal radius")
{
  const double R = compute_minimal_R(1, 1, 1.0, 1.0, std::numbers::e, 1.0, 10.0);
  const double logR = oracle::minimal_log_R_bisection(1, 1, 1.0, 1.0, std::numbers::e, 1.0, 10.0);
  CHECK(std::fabs(std::log(R) - logR) <= 1e-9 * logR);
  CHECK(std::log(R) == doctest::Approx(24.0043).epsilon(1e-5));
  CHECK(R == doctest::Approx(2.67e10).epsilon(5e-3));
  CHECK(std::fabs(minimal_R_by_bisection(1, 1, 1.0, 1.0, std::numbers::e, 1.0, 10.0) / R - 1.0) <= 1e-9);

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    const int d = 1 + static_cast<int>(u(rng) * 2.0);
    const int m = 1 + static_cast<int>(u(rng) * 2.0);
    const double C0 = 0.05 + 0.5 * u(rng), T = 0.2 + u(rng), rt = std::numbers::e * (1.0 + 3.0 * u(rng));
    const double eps = 0.1 + 5.0 * u(rng), C = 20.0 * u(rng);
    CAPTURE(n);
    const double lr = std::log(compute_minimal_R(d, m, C0, T, rt, eps, C));
    const double ref = oracle::minimal_log_R_bisection(d, m, C0, T, rt, eps, C);
    CHECK(std::fabs(lr - ref) <= 1e-9 * std::fabs(ref));
  }

  const double base = std::log(compute_minimal_R(1, 1, 0.5, 1.0, 3.0, 1.0, 5.0));
  CHECK(std::log(compute_minimal_R(1, 1, 0.5, 1.0, 3.0, 1.0, 6.0)) >= base);
  CHECK(std::log(compute_minimal_R(1, 1, 0.6, 1.0, 3.0, 1.0, 5.0)) >= base);
  CHECK(std::log(compute_minimal_R(1, 1, 0.5, 1.0, 3.0, 2.0, 5.0)) <= base);
  double prev = INFINITY;
  for (double eps : { 1.0, 10.0, 100.0, 1e4, 1e8 }) {
    const double lr = std::log(compute_minimal_R(1, 1, 0.5, 1.0, 3.0, eps, 5.0));
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK(compute_minimal_R(1, 1, 0.0, 1.0, 3.0, 1.0, 5.0) == doctest::Approx(3.0));
}

TEST_CASE("nondegeneracy on the ball")
{
  const auto ou = catalog_model("ou-gauss", { { "gamma", "1" }, { "sigma", "1" }, { "T", "1" } });
  const auto a = check_nondegeneracy(ou, 50.0, CheckConfig{});
  CHECK(a.pass);
  CHECK(a.lambda_min == doctest::Approx(1.0));

  const auto g = check_nondegeneracy(gbm(), 50.0, CheckConfig{});
  CHECK_FALSE(g.pass);
  CHECK(g.lambda_min == 0.0);
  CHECK(std::fabs(g.argmin[0]) <= g.grid_step);

  const auto p = check_nondegeneracy(pearson(), 50.0, CheckConfig{});
  CHECK(p.pass);
  CHECK(p.lambda_min == doctest::Approx(1.0));
}

TEST_CASE("full certificate")
{
  const auto p = check_theorem11(pearson(), eps1());
  CHECK(p.overall);

  const auto g = check_theorem11(gbm(), eps1());
  CHECK(g.verdict_lyapunov);
  CHECK_FALSE(g.verdict_nondegeneracy);
  CHECK_FALSE(g.overall);
  CHECK(std::fabs(g.nondegeneracy.argmin[0]) <= g.nondegeneracy.grid_step);

  const auto o = check_theorem11(ou_sine(), eps1());
  CHECK(o.overall);
  CHECK(o.tilde_K.r_tilde == doctest::Approx(std::numbers::e));
  CHECK(o.R == doctest::Approx(o.R_bisection).epsilon(1e-9));
  CHECK(o.log_R == doctest::Approx(std::log(compute_minimal_R(1, 1, o.C0, 1.0, std::numbers::e, 1.0, o.tilde_K.c_sup))));
  CHECK_FALSE(o.notes.empty());
}

TEST_CASE("signal envelope G_S")
{
  const std::vector<Signal> sine{ Signal::sinusoid(1.0, 1.0) };
  CHECK(compute_G_S(sine, std::vector<double>{ -3.0 }) == doctest::Approx(6.0));
  CHECK(compute_G_S({ Signal::constant(0.0, 1.0) }, std::vector<double>{ 4.0 }) == 0.0);
  CHECK(compute_G_S({ Signal::constant(2.0, 1.0) }, std::vector<double>{ 1.5 }) == doctest::Approx(6.0));
  CHECK(compute_G_S({ Signal::constant(2.0, 1.0) }, std::vector<double>{ -1.5 }) == 0.0);

  const auto m = ou_sine();
  const VectorField hat = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
  const auto r = check_signal_condition(hat, sine, m, eps1());
  CHECK(r.pass);
  CHECK(std::fabs(r.radius - (1.0 + std::sqrt(5.0)) / 2.0) <= r.radial_step);

  const VectorField none = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  const auto f = check_signal_condition(none, sine, m, eps1());
  CHECK_FALSE(f.pass);
  CHECK(f.max_outside.value > -1.0);
}

TEST_CASE("Levy measure conditions")
{
  const auto s15 = check_levy_conditions(LevyDescriptor::stable(1.5));
  CHECK(s15.cond11);
  CHECK(s15.cond12);
  const auto s05 = check_levy_conditions(LevyDescriptor::stable(0.5));
  CHECK_FALSE(s05.cond11);
  CHECK(s05.cond12);
  CHECK_THROWS_AS(LevyDescriptor::stable(2.5), std::invalid_argument);
  CHECK_THROWS_AS(LevyDescriptor::stable(0.0), std::invalid_argument);

  const CompoundPoissonJumps cp{ 1.0, JumpLaw{ JumpLaw::Kind::constant, 1.0, 0.0 },
                                 CompoundPoissonJumps::Compensation::none };
  const auto c = check_levy_conditions(LevyDescriptor::compound_poisson(cp));
  CHECK(c.cond11);
  CHECK_FALSE(c.cond12);
  REQUIRE(c.g_values.size() >= 2);
  CHECK(c.g_values.back().second < c.g_values.front().second);
}

TEST_CASE("Aronson conditions")
{
  const auto ou = catalog_model("ou-gauss", { { "gamma", "1" }, { "sigma", "1" }, { "T", "1" } });
  const auto a = check_aronson(ou, CheckConfig{});
  CHECK(a.ellipticity);
  CHECK(a.bounded_coefficients);
  CHECK(a.bounded_first_derivatives);
  CHECK(a.sup_derivative == doctest::Approx(1.0).epsilon(1e-6));

  const auto g = check_aronson(gbm(), CheckConfig{});
  CHECK_FALSE(g.ellipticity);
  CHECK(std::fabs(g.ellipticity_witness.x[0]) < 1e-9);
  CHECK_FALSE(g.bounded_coefficients);

  const auto p = check_aronson(pearson(), CheckConfig{});
  CHECK(p.ellipticity);
  CHECK_FALSE(p.bounded_coefficients);
}

TEST_CASE("Veretennikov condition")
{
  const auto ou = catalog_model("ou-gauss", { { "gamma", "1" }, { "sigma", "1" }, { "T", "1" } });
  const auto r = check_veretennikov(ou, std::sqrt(2.0), 2.0, CheckConfig{});
  CHECK(r.lambda_minus == doctest::Approx(1.0));
  CHECK(r.lambda_plus == doctest::Approx(1.0));
  CHECK(r.Lambda_tilde == doctest::Approx(1.0));
  CHECK(r.drift_condition);
  CHECK(r.spectral_condition);
  CHECK(r.pass);
  CHECK(r.implied_inequality);

  const auto still = catalog_model("custom", { { "d", "1" }, { "m", "1" }, { "drift1", "-x1" }, { "diffusion1_1", "0" } });
  const auto z = check_veretennikov(still, std::sqrt(2.0), 2.0, CheckConfig{});
  CHECK(z.lambda_plus == 0.0);

  CHECK_THROWS_AS(check_veretennikov(ou_sine(), 1.0, 1.0, CheckConfig{}), std::invalid_argument);
}

TEST_CASE("degenerate two-dimensional route")
{
  const auto ok = check_degenerate_2d(catalog_model("degenerate2d", {}), eps1());
  CHECK(ok.condition_i);
  CHECK(ok.inf_sigma == doctest::Approx(1.0));
  CHECK(ok.inf_db2_dx1 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ok.condition_ii.pass);
  CHECK(ok.pass);

  const auto vanishing = check_degenerate_2d(catalog_model("degenerate2d", { { "sigma", "x1" } }), eps1());
  CHECK_FALSE(vanishing.condition_i);
  CHECK(std::fabs(vanishing.sigma_witness.x[0]) < 1e-9);

  const auto flat = check_degenerate_2d(catalog_model("degenerate2d", { { "b2", "-x2 + 1" } }), eps1());
  CHECK_FALSE(flat.condition_i);

  CHECK_THROWS_AS(check_degenerate_2d(ou_sine(), eps1()), std::invalid_argument);
}
