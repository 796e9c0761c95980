// Acceptance suite: one PASS/FAIL line per criterion, followed by the
// measured quantities. Exit status is 0 only when every criterion passes.

#include "expr_fixtures.hpp"
#include "oracles.hpp"
#include "pergo/closedform.hpp"
#include "pergo/coeffexpr.hpp"
#include "pergo/conditions.hpp"
#include "pergo/functionals.hpp"
#include "pergo/model.hpp"
#include "pergo/simulate.hpp"
#include "pergo/stats.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace pergo;

namespace {

constexpr double level = 0.01;

struct Outcome
{
  bool pass = true;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what)
  {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok    " : "FAILED") + "  " + what);
  }
};

std::string
fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));

std::string
fmt(const char* f, ...)
{
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

using Clock = std::chrono::steady_clock;

double
seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

PeriodicSDEModel
ou_model(const std::string& signal)
{
  return catalog_model("ou-gauss", { { "gamma", "1" }, { "sigma", "1" }, { "signal", signal }, { "T", "1" } });
}

PeriodicSDEModel
levy_model(const std::string& signal)
{
  return catalog_model("ou-levy", { { "gamma", "1" },
                                    { "signal", signal },
                                    { "T", "1" },
                                    { "jump_rate", "1" },
                                    { "jump_law", "constant" },
                                    { "jump_a", "1" } });
}

SimulationPlan
make_plan(double h, std::size_t K, std::size_t N, std::uint64_t seed, std::vector<double> x0, Scheme scheme,
          std::size_t stride)
{
  SimulationPlan p;
  p.step = h;
  p.horizon_periods = K;
  p.n_paths = N;
  p.seed = seed;
  p.initial_state = std::move(x0);
  p.scheme = scheme;
  p.record_stride = stride;
  return p;
}

// --- 1: OU invariant law -----------------------------------------------------------

Outcome
ou_invariant_law()
{
  Outcome out;
  const auto t0 = Clock::now();
  const PeriodicSDEModel model = ou_model("sin(2*pi*t)");
  const std::size_t burn_in = 100, retained = 100000, thin = 5;
  const double h = 0.01;
  const auto plan = make_plan(h, burn_in + thin * retained, 1, 20240917, { 0.0 }, Scheme::exact_ou, 100);
  const TrajectoryBundle bundle = simulate_paths(model, plan);
  std::vector<double> chain(retained);
  for (std::size_t j = 0; j < retained; ++j)
    chain[j] = bundle.state(0, burn_in + thin * (j + 1))[0];

  const double M0 = compute_M(model.ou()->signal, 1.0, 1.0, 0.0);
  const double M0_ref = oracle::ou_sine_mean(1.0, 2.0 * std::numbers::pi, 0.0);
  const double sd = std::sqrt(0.5);
  const TestResult ks = ks_one_sample(chain, [&](double x) { return oracle::normal_cdf(x, M0, sd); }, level);
  const double elapsed = seconds_since(t0);

  out.require(std::fabs(M0 - M0_ref) <= 1e-10, fmt("M(0) = %.12f, closed-form oracle %.12f", M0, M0_ref));
  out.require(ks.pass, fmt("one-sample KS vs N(M(0), 0.5): n = %zu, D = %.5f, threshold %.5f", ks.n, ks.statistic,
                           ks.threshold));
  out.require(elapsed < 10.0, fmt("runtime %.2f s < 10 s", elapsed));
  return out;
}

// --- 2: ergodic limit ---------------------------------------------------------------

Outcome
ergodic_limit_ou()
{
  Outcome out;
  const auto t0 = Clock::now();
  const PeriodicSDEModel model = ou_model("sin(2*pi*t)");
  const std::size_t K = 10000;
  const auto plan = make_plan(0.01, K, 1, 77, { 0.0 }, Scheme::exact_ou, 1);
  const TrajectoryBundle bundle = simulate_paths(model, plan);
  const PeriodicFunctional f = PeriodicFunctional::from_expressions("x1", "1", {}, 1.0, 1);
  const AccumulatedFunctional A = accumulate(bundle, f);
  const TimeAverageEstimate est = time_average_estimate(A, 0, 1.0);
  const double at = time_average(A.path(0), A.record_dt(), static_cast<double>(K));
  const double target =
    oracle::simpson([](double s) { return oracle::ou_sine_mean(1.0, 2.0 * std::numbers::pi, s); }, 0.0, 1.0);
  const double diff = std::fabs(at - target);
  const double elapsed = seconds_since(t0);

  out.require(diff <= 3.0 * est.standard_error,
              fmt("A_t/t = %.6f at t = %zu T, limit %.3g, |diff| = %.5f <= 3 SE = %.5f", at, K, target, diff,
                  3.0 * est.standard_error));
  out.require(diff <= 0.05, fmt("|diff| = %.5f <= 0.05", diff));
  out.require(elapsed < 30.0, fmt("runtime %.2f s < 30 s", elapsed));
  return out;
}

// --- 3: certificate regression -------------------------------------------------------

Outcome
certificate_regression()
{
  Outcome out;
  CheckConfig cfg;
  cfg.epsilon = 1.0;

  auto t0 = Clock::now();
  const PeriodicSDEModel pearson = catalog_model("pearson", { { "theta", "1" },
                                                              { "c0", "1" },
                                                              { "c1", "0" },
                                                              { "sigma", "1" },
                                                              { "signal", "1 + 0.5*sin(2*pi*t/T)" },
                                                              { "T", "1" } });
  const Theorem11Report p = check_theorem11(pearson, cfg);
  double elapsed = seconds_since(t0);
  out.require(p.overall, fmt("Pearson: overall = %s (R~ = %.4f, C = %.4f, R = %.4g, lambda_min = %.4f)",
                             p.overall ? "true" : "false", p.tilde_K.r_tilde, p.tilde_K.c_sup, p.R,
                             p.nondegeneracy.lambda_min));
  out.require(elapsed < 5.0, fmt("Pearson runtime %.2f s < 5 s", elapsed));

  t0 = Clock::now();
  const PeriodicSDEModel gbm = catalog_model("gbm", { { "mu", "-1" }, { "sigma", "1" } });
  const Theorem11Report g = check_theorem11(gbm, cfg);
  elapsed = seconds_since(t0);
  const double x_star = g.nondegeneracy.argmin.empty() ? NAN : g.nondegeneracy.argmin[0];
  out.require(!g.overall, fmt("GBM: overall = %s", g.overall ? "true" : "false"));
  out.require(std::fabs(x_star) <= g.nondegeneracy.grid_step,
              fmt("GBM non-degeneracy witness x* = %.3g, |x*| <= grid step %.3g (lambda_min = %.3g)", x_star,
                  g.nondegeneracy.grid_step, g.nondegeneracy.lambda_min));
  out.require(elapsed < 5.0, fmt("GBM runtime %.2f s < 5 s", elapsed));
  return out;
}

// --- 4: minimal radius arithmetic ----------------------------------------------------

Outcome
minimal_radius()
{
  Outcome out;
  const double R = compute_minimal_R(1, 1, 1.0, 1.0, std::numbers::e, 1.0, 10.0);
  const double ref = std::exp(oracle::minimal_log_R_bisection(1, 1, 1.0, 1.0, std::numbers::e, 1.0, 10.0));
  out.require(std::fabs(R / ref - 1.0) <= 1e-9, fmt("R = %.10g, bisection oracle %.10g, rel. diff %.2g", R, ref,
                                                    std::fabs(R / ref - 1.0)));
  out.require(std::fabs(R / 2.67e10 - 1.0) <= 5e-3, fmt("R = %.4g ~ 2.67e10", R));

  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int d = 1 + static_cast<int>(u(rng) * 3.0);
    const int m = 1 + static_cast<int>(u(rng) * 3.0);
    const double C0 = 0.05 + 0.5 * u(rng), T = 0.2 + 2.0 * u(rng), rt = std::numbers::e * (1.0 + 3.0 * u(rng));
    const double eps = 0.1 + 5.0 * u(rng), C = 20.0 * u(rng);
    const double lr = std::log(compute_minimal_R(d, m, C0, T, rt, eps, C));
    const double lref = oracle::minimal_log_R_bisection(d, m, C0, T, rt, eps, C);
    worst = std::max(worst, std::fabs(std::expm1(lr - lref)));
  }
  out.require(worst <= 1e-9, fmt("100 random draws: worst relative difference %.2g <= 1e-9", worst));
  return out;
}

// --- 5: Euler-Maruyama weak accuracy ----------------------------------------------------

Outcome
euler_weak_accuracy()
{
  Outcome out;
  const PeriodicSDEModel model = ou_model("0");
  const double mean_exact = oracle::ou_mean(1.0, 2.0, 1.0);
  const double var_exact = oracle::ou_variance(1.0, 1.0, 1.0);
  auto endpoints = [&](double h) {
    const std::size_t n_per = static_cast<std::size_t>(std::llround(1.0 / h));
    auto plan = make_plan(h, 1, 100000, 31, { 2.0 }, Scheme::euler_maruyama, n_per);
    plan.antithetic = true;
    const TrajectoryBundle b = simulate_paths(model, plan);
    std::vector<double> v(b.n_paths());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = b.state(i, 1)[0];
    return oracle::mean_variance(v);
  };
  const auto [m1, v1] = endpoints(1e-3);
  const auto [m2, v2] = endpoints(5e-4);
  out.require(std::fabs(m1 - 0.7357589) <= 5e-3 && std::fabs(m1 - mean_exact) <= 5e-3,
              fmt("h = 1e-3, N = 1e5: mean %.7f vs %.7f", m1, mean_exact));
  out.require(std::fabs(v1 - 0.4323324) <= 5e-3 && std::fabs(v1 - var_exact) <= 5e-3,
              fmt("h = 1e-3, N = 1e5: variance %.7f vs %.7f", v1, var_exact));
  const double b1 = m1 - mean_exact, b2 = m2 - mean_exact;
  const double ratio = b1 / b2;
  out.require(ratio >= 1.5 && ratio <= 3.0,
              fmt("mean bias %.3e at h, %.3e at h/2: ratio %.3f in [1.5, 3] (antithetic pairs)", b1, b2, ratio));
  return out;
}

// --- 6: drift inequality ----------------------------------------------------------------

Outcome
drift_inequality()
{
  Outcome out;
  const PeriodicSDEModel model = ou_model("0");
  const TransitionSampler exact = exact_ou_sampler(model);
  const double x = 5.0, eps = 1.0, T = 1.0;
  const double a = oracle::ou_mean(1.0, x, T);
  const double value = a * a + oracle::ou_variance(1.0, 1.0, T) - x * x;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TestResult r =
      drift_check(exact, LyapunovFunction::squared_norm, std::vector<double>{ x }, eps, T, 10000, 1000 + seed);
    good += r.pass && r.extras.at("ci_lower") <= value && value <= r.extras.at("ci_upper");
  }
  out.require(std::fabs(value + 21.19) <= 0.01, fmt("exact P V(x) - V(x) = %.4f ~ -21.19", value));
  out.require(good >= 95, fmt("%d/100 seeds: 99%% CI covers the exact value and its upper bound <= -eps T", good));
  return out;
}

// --- 7: Bernstein tail -------------------------------------------------------------------

Outcome
bernstein_tail()
{
  Outcome out;
  const auto rs = bernstein_tail_check(scaled_bm_sup_sampler(1.0, 1.0), 1.0, { 1.0, 2.0, 3.0 }, 100000, 17);
  for (const auto& r : rs) {
    const double x = r.extras.at("x"), p = r.extras.at("p_hat");
    out.require(r.pass && p <= r.threshold,
                fmt("x = %.0f: empirical tail %.5f <= 2exp(-x^2/2) = %.5f (reflection value %.5f)", x, p,
                    r.threshold, oracle::bm_abs_sup_tail(x)));
  }
  const auto wrong = bernstein_tail_check(scaled_bm_sup_sampler(2.0, 1.0), 1.0, { 2.0 }, 100000, 18);
  out.require(!wrong[0].pass, fmt("mis-declared bracket (2W with B = 1) at x = 2: tail %.4f vs bound %.4f, rejected",
                                  wrong[0].extras.at("p_hat"), wrong[0].threshold));
  return out;
}

// --- 8: Levy OU invariant law --------------------------------------------------------------

Outcome
levy_invariant_law()
{
  Outcome out;
  const PeriodicSDEModel model = levy_model("0");
  const std::size_t burn_in = 100, retained = 10000;
  const auto plan = make_plan(0.25, burn_in + retained, 1, 8080, { 0.0 }, Scheme::levy_ou, 4);
  const TrajectoryBundle bundle = simulate_paths(model, plan);
  std::vector<double> chain(retained);
  for (std::size_t j = 0; j < retained; ++j)
    chain[j] = bundle.state(0, burn_in + j + 1)[0];
  const double M0 = compute_M(model.ou()->signal, 1.0, 1.0, 0.0);
  std::vector<double> ref = sample_invariant_U(1.0, *model.jumps(), retained, 9090);
  for (auto& u : ref)
    u += M0;
  const TestResult ks = ks_two_sample(chain, ref, level);
  const auto [mc, vc] = oracle::mean_variance(chain);
  const auto [mu, vu] = oracle::mean_variance(ref);
  out.require(ks.pass, fmt("two-sample KS chain vs M(0) + U: D = %.4f, threshold %.4f", ks.statistic, ks.threshold));
  out.details.push_back(fmt("        chain mean %.4f var %.4f; M(0) + U mean %.4f var %.4f", mc, vc, mu, vu));

  const auto s05 = check_levy_conditions(LevyDescriptor::stable(0.5));
  const auto s15 = check_levy_conditions(LevyDescriptor::stable(1.5));
  bool rejected = false;
  try {
    (void)LevyDescriptor::stable(2.5);
  } catch (const std::invalid_argument&) {
    rejected = true;
  }
  out.require(!(s05.cond11 && s05.cond12), fmt("stable alpha = 0.5: cond (11) %d, cond (12) %d -> not covered",
                                               s05.cond11, s05.cond12));
  out.require(s15.cond11 && s15.cond12,
              fmt("stable alpha = 1.5: cond (11) %d, cond (12) %d -> covered", s15.cond11, s15.cond12));
  out.require(rejected, "stable alpha = 2.5 rejected as invalid");
  return out;
}

// --- 9: periodicity ------------------------------------------------------------------------

Outcome
periodicity()
{
  Outcome out;
  struct Case
  {
    std::string name;
    ParamMap params;
    std::vector<double> x;
  };
  const std::vector<Case> cases{
    { "ou-gauss", { { "gamma", "1" }, { "sigma", "1" }, { "signal", "sin(2*pi*t)" }, { "T", "1" } }, { 0.5 } },
    { "ou-levy",
      { { "gamma", "1" },
        { "signal", "sin(2*pi*t)" },
        { "T", "1" },
        { "jump_rate", "1" },
        { "jump_law", "constant" },
        { "jump_a", "1" } },
      { 0.5 } },
    { "pearson",
      { { "theta", "1" }, { "c0", "1" }, { "c1", "0" }, { "sigma", "1" }, { "signal", "1 + 0.5*sin(2*pi*t/T)" },
        { "T", "1" } },
      { 0.5 } },
    { "gbm", { { "mu", "-1" }, { "sigma", "1" } }, { 1.0 } },
    { "degenerate2d", { { "b1", "-x1 + sin(2*pi*t/T)" }, { "b2", "x1 - x2" }, { "sigma", "1" }, { "T", "1" } },
      { 0.5, 0.5 } },
    { "custom",
      { { "d", "2" },
        { "m", "2" },
        { "drift1", "-x1 + cos(2*pi*t/T)" },
        { "drift2", "x1 - 2*x2" },
        { "diffusion1_1", "1" },
        { "diffusion1_2", "0" },
        { "diffusion2_1", "0" },
        { "diffusion2_2", "0.5" },
        { "T", "2" } },
      { 0.5, -0.5 } },
  };
  // A dyadic step keeps s + kT and the Euler times exactly representable, so
  // the atoms of the sigma = 0 jump model coincide bit for bit.
  const double h = 1.0 / 1024.0;
  std::uint64_t seed = 500;
  for (const auto& c : cases) {
    const PeriodicSDEModel model = catalog_model(c.name, c.params);
    const TestResult r = periodicity_check(model, 0.25, c.x, 0.5, 5000, seed++, level, h);
    out.require(r.pass && !r.inconclusive,
                fmt("%-12s N = 5000: max D = %.4f, threshold %.4f", c.name.c_str(), r.statistic, r.threshold));
  }

  ModelParts parts;
  parts.name = "broken-wrap";
  parts.drift = [](double t, std::span<const double> x, std::span<double> o) { o[0] = -t * x[0]; };
  parts.diffusion = [](std::span<const double>, std::span<double> o) { o[0] = 1.0; };
  parts.wrap_drift_time = false;
  const PeriodicSDEModel broken(parts);
  const TestResult b = periodicity_check(broken, 0.25, std::vector<double>{ 2.0 }, 0.5, 5000, seed, level, h);
  out.require(!b.pass, fmt("broken-wrap fixture: D = %.4f, threshold %.4f, rejected", b.statistic, b.threshold));
  return out;
}

// --- 10: parser suite --------------------------------------------------------------------------

bool
same_value(double a, double b)
{
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

double
eval_or_nan(const coeffexpr::Expr& e, std::span<const double> slots)
{
  try {
    return e.eval(slots);
  } catch (const coeffexpr::EvalError&) {
    return NAN;
  }
}

Outcome
parser_suite()
{
  Outcome out;
  const double v14 = coeffexpr::eval(coeffexpr::parse("2+3*4", 1), {});
  const double v512 = coeffexpr::eval(coeffexpr::parse("2^3^2", 1), {});
  out.require(v14 == 14.0 && v512 == 512.0, fmt("2+3*4 = %.17g, 2^3^2 = %.17g", v14, v512));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<std::string> params{ "a" };
  int exact = 0;
  for (int n = 0; n < 1000; ++n) {
    const coeffexpr::Expr e = coeffexpr::parse(fixtures::random_expr(rng, 6), 2, params);
    const coeffexpr::Expr back = coeffexpr::parse(e.print(), 2, params);
    bool ok = true;
    for (int k = 0; k < 10; ++k) {
      const std::vector<double> slots{ u(rng), u(rng), u(rng), u(rng) };
      ok = ok && same_value(eval_or_nan(e, slots), eval_or_nan(back, slots));
    }
    exact += ok;
  }
  out.require(exact == 1000, fmt("%d/1000 random print/parse round-trips evaluate bit-identically", exact));

  int positioned = 0;
  for (const auto& text : fixtures::malformed_expressions) {
    try {
      (void)coeffexpr::parse(text, 2);
    } catch (const coeffexpr::ParseError& err) {
      positioned += err.offset() <= text.size();
    } catch (...) {
    }
  }
  out.require(positioned == static_cast<int>(fixtures::malformed_expressions.size()),
              fmt("%d/%zu malformed fixtures give positioned parse errors", positioned,
                  fixtures::malformed_expressions.size()));

  int crashes = 0;
  for (int n = 0; n < 5000; ++n) {
    std::string s(std::uniform_int_distribution<int>(0, 24)(rng), ' ');
    for (auto& c : s)
      c = fixtures::fuzz_alphabet[std::uniform_int_distribution<std::size_t>(0, fixtures::fuzz_alphabet.size() - 1)(rng)];
    try {
      (void)coeffexpr::parse(s, 2).print();
    } catch (const coeffexpr::ParseError&) {
    } catch (...) {
      ++crashes;
    }
  }
  out.require(crashes == 0, fmt("5000 random inputs: %d unexpected exceptions", crashes));
  return out;
}

} // namespace

int
main()
{
  struct Criterion
  {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
    { 1, "OU invariant law of the grid chain", ou_invariant_law },
    { 2, "ergodic limit of the time average", ergodic_limit_ou },
    { 3, "certificate regression (Pearson, GBM)", certificate_regression },
    { 4, "minimal radius arithmetic", minimal_radius },
    { 5, "Euler-Maruyama weak accuracy", euler_weak_accuracy },
    { 6, "drift inequality", drift_inequality },
    { 7, "Bernstein tail bound", bernstein_tail },
    { 8, "Levy OU invariant law and stable-index rule", levy_invariant_law },
    { 9, "periodicity of the transition law", periodicity },
    { 10, "expression parser suite", parser_suite },
  };

  int failed = 0;
  const auto start = Clock::now();
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& err) {
      o.pass = false;
      o.details.push_back(std::string("FAILED  exception: ") + err.what());
    }
    const double elapsed = seconds_since(t0);
    failed += !o.pass;
    std::printf("%s  %2d  %-46s %7.2f s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, elapsed);
    for (const auto& d : o.details)
      std::printf("          %s\n", d.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed, total %.2f s\n", criteria.size(), failed, seconds_since(start));
  return failed == 0 ? 0 : 1;
}
