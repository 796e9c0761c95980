#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pergo/closedform.hpp"
#include "pergo/functionals.hpp"

#include <cmath>
#include <sstream>

using namespace pergo;

namespace {

PeriodicSDEModel
still(double c)
{
  return catalog_model("custom", { { "d", "1" }, { "m", "1" }, { "drift1", "0" }, { "diffusion1_1", "0" }, { "p_c", std::to_string(c) } });
}

PeriodicSDEModel
ou(double gamma, double sigma, const std::string& signal)
{
  return catalog_model("ou-gauss",
                       { { "gamma", std::to_string(gamma) }, { "sigma", std::to_string(sigma) }, { "signal", signal }, { "T", "1" } });
}

SimulationPlan
plan(double h, std::size_t K, std::size_t N, std::uint64_t seed, double x0, Scheme scheme = Scheme::euler_maruyama)
{
  SimulationPlan p;
  p.step = h;
  p.horizon_periods = K;
  p.n_paths = N;
  p.seed = seed;
  p.initial_state = { x0 };
  p.scheme = scheme;
  return p;
}

std::function<GaussianLaw(double)>
ou_marginal(double gamma, double sigma, const Signal& S)
{
  return [=](double s) { return ou_invariant(gamma, sigma, S, S.period(), s); };
}

} // namespace

TEST_CASE("Riemann sums of simple functionals")
{
  const auto b = simulate_paths(still(0.0), plan(0.125, 8, 1, 1, 2.5));
  const auto one = PeriodicFunctional::from_expressions("1", "1", {}, 1.0, 1);
  const auto A1 = accumulate(b, one);
  for (std::size_t j = 0; j < A1.n_records(); ++j)
    CHECK(std::fabs(A1.path(0)[j] - A1.time(j)) <= 1e-10);
  CHECK(time_average(A1.path(0), A1.record_dt(), 8.0) == doctest::Approx(1.0));

  const auto x = PeriodicFunctional::from_expressions("x1", "1", {}, 1.0, 1);
  const auto Ax = accumulate(b, x);
  for (std::size_t j = 0; j < Ax.n_records(); ++j)
    CHECK(Ax.path(0)[j] == doctest::Approx(2.5 * Ax.time(j)));
  CHECK(time_average(Ax.path(0), Ax.record_dt(), 4.0) == doctest::Approx(2.5));
  CHECK_THROWS_AS(time_average(Ax.path(0), Ax.record_dt(), 0.0), std::invalid_argument);
}

TEST_CASE("atoms pick out the grid chain")
{
  const auto m = ou(1.0, 1.0, "sin(2*pi*t)");
  const std::size_t K = 20;
  const auto b = simulate_paths(m, plan(0.05, K, 2, 3, 0.7));
  const auto f = PeriodicFunctional::from_expressions("x1", "", { Atom{ 0.0, 1.0 } }, 1.0, 1);
  const auto A = accumulate(b, f);
  const auto chain = extract_grid_chain(b, 1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k <= K; ++k)
      sum += chain.at(i, k)[0];
    CHECK(A.path(i)[A.n_records() - 1] == doctest::Approx(sum).epsilon(1e-13));
    CHECK(A.path(i)[0] == chain.at(i, 0)[0]);
  }

  const auto bad = PeriodicFunctional::from_expressions("x1", "", { Atom{ 0.33, 1.0 }, Atom{ 0.5, 2.0 } }, 1.0, 1);
  try {
    accumulate(b, bad);
    FAIL("expected misaligned atoms to be rejected");
  } catch (const std::invalid_argument& err) {
    CHECK(std::string(err.what()).find("0.33") != std::string::npos);
  }
}

TEST_CASE("time variable can be written s or t")
{
  const auto fs = PeriodicFunctional::from_expressions("s*x1", "1 + 0*t", {}, 2.0, 1);
  CHECK(fs.F(0.5, std::vector<double>{ 3.0 }) == doctest::Approx(1.5));
  CHECK(fs.F(2.5, std::vector<double>{ 3.0 }) == doctest::Approx(1.5));
  CHECK(fs.g(7.0) == 1.0);
}

TEST_CASE("closed-form ergodic limits")
{
  const auto x = PeriodicFunctional::from_expressions("x1", "1", {}, 1.0, 1);
  CHECK(std::fabs(ergodic_limit(x, ou_marginal(1.0, 1.0, Signal::constant(0.0, 1.0))).value) <= 1e-12);
  CHECK(ergodic_limit(x, ou_marginal(0.5, 1.0, Signal::constant(2.0, 1.0))).value == doctest::Approx(4.0).epsilon(1e-10));
  const auto x2 = PeriodicFunctional::from_expressions("x1^2", "1", {}, 1.0, 1);
  CHECK(ergodic_limit(x2, ou_marginal(1.0, 1.0, Signal::constant(0.0, 1.0))).value == doctest::Approx(0.5).epsilon(1e-10));

  const Signal sine = Signal::sinusoid(1.0, 1.0);
  // int_0^1 M(s) ds = 0 for a zero-mean signal; int M(s) sin(2 pi s) ds = gamma / (2 (gamma^2 + omega^2))
  CHECK(std::fabs(ergodic_limit(x, ou_marginal(1.0, 1.0, sine)).value) <= 1e-10);
  const auto xs = PeriodicFunctional::from_expressions("x1*sin(2*pi*s)", "1", {}, 1.0, 1);
  const double omega = 2.0 * std::numbers::pi;
  CHECK(ergodic_limit(xs, ou_marginal(1.0, 1.0, sine)).value ==
        doctest::Approx(1.0 / (2.0 * (1.0 + omega * omega))).epsilon(1e-8));

  const auto atom = PeriodicFunctional::from_expressions("x1", "", { Atom{ 0.25, 2.0 } }, 1.0, 1);
  CHECK(ergodic_limit(atom, ou_marginal(1.0, 1.0, sine)).value ==
        doctest::Approx(2.0 * oracle::ou_sine_mean(1.0, omega, 0.25)).epsilon(1e-10));
}

TEST_CASE("nested Monte Carlo ergodic limit agrees with the closed form")
{
  const Signal sine = Signal::sinusoid(1.0, 1.0, 0.0, 1, 0.5);
  const auto f = PeriodicFunctional::from_expressions("x1^2", "1", { Atom{ 0.0, 0.5 } }, 1.0, 1);
  const auto exact = ergodic_limit(f, ou_marginal(1.0, 1.0, sine));
  const MarginalSampler sampler = [&](double s, Rng& rng, std::span<double> out) {
    const GaussianLaw law = ou_invariant(1.0, 1.0, sine, 1.0, s);
    out[0] = law.mean + law.sd() * std::normal_distribution<double>()(rng);
  };
  const auto mc = ergodic_limit(f, sampler, 1, 64, 2000, 9);
  CHECK(mc.standard_error > 0.0);
  CHECK(std::fabs(mc.value - exact.value) <= 4.0 * mc.standard_error + 1e-3);
}

TEST_CASE("time-average estimate and trace export")
{
  const auto m = ou(1.0, 1.0, "sin(2*pi*t)");
  auto p = plan(0.01, 1000, 1, 12, 0.0, Scheme::exact_ou);
  const auto b = simulate_paths(m, p);
  const auto f = PeriodicFunctional::from_expressions("x1", "1", {}, 1.0, 1);
  const auto A = accumulate(b, f);
  const auto est = time_average_estimate(A, 0, 1.0);
  CHECK(est.n_batches == 50);
  CHECK(est.standard_error > 0.0);
  CHECK(std::fabs(est.value) <= 4.0 * est.standard_error);

  std::ostringstream os;
  const auto small = simulate_paths(m, plan(0.5, 1, 2, 1, 0.0));
  write_time_average_csv(os, accumulate(small, f));
  const std::string csv = os.str();
  CHECK(csv.rfind("path_id,t,A_t,A_t_over_t\n", 0) == 0);
}
