#include "pergo/stats.hpp"
#include "pergo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace pergo {

double
ks_coefficient(double level)
{
  if (level == 0.05)
    return 1.358;
  if (level == 0.01)
    return 1.628;
  throw std::invalid_argument("KS level must be 0.05 or 0.01");
}

namespace {

void
check_samples(std::span<const double> v, const char* what)
{
  if (v.size() < 10)
    throw std::invalid_argument(std::string(what) + ": need at least 10 samples");
  for (double x : v)
    if (!std::isfinite(x))
      throw std::invalid_argument(std::string(what) + ": samples must be finite");
}

std::string
fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

} // namespace

TestResult
ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf, double level)
{
  check_samples(samples, "ks_one_sample");
  const double c = ks_coefficient(level);
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double D = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    D = std::max({ D, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n });
  }
  TestResult r;
  r.name = "ks_one_sample";
  r.statistic = D;
  r.threshold = c / std::sqrt(n);
  r.n = s.size();
  r.pass = D <= r.threshold;
  r.description = "one-sample KS at level " + fmt(level) + ": D = " + fmt(D) + ", threshold " + fmt(r.threshold);
  return r;
}

TestResult
ks_two_sample(std::span<const double> a, std::span<const double> b, double level)
{
  check_samples(a, "ks_two_sample");
  check_samples(b, "ks_two_sample");
  const double c = ks_coefficient(level);
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double D = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v)
      ++i;
    while (j < y.size() && y[j] == v)
      ++j;
    D = std::max(D, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  TestResult r;
  r.name = "ks_two_sample";
  r.statistic = D;
  r.threshold = c * std::sqrt((na + nb) / (na * nb));
  r.n = std::min(x.size(), y.size());
  r.pass = D <= r.threshold;
  r.description = "two-sample KS at level " + fmt(level) + ": D = " + fmt(D) + ", threshold " + fmt(r.threshold);
  return r;
}

namespace {

bool
finite_state(std::span<const double> x)
{
  for (double v : x)
    if (!std::isfinite(v) || std::fabs(v) > 1e300)
      return false;
  return true;
}

// N draws of X_t given X_s = x, row-major; bad[i] marks non-finite draws.
void
draw_transitions(const TransitionSampler& sampler,
                 double s,
                 double t,
                 std::span<const double> x,
                 std::size_t N,
                 std::uint64_t seed,
                 std::vector<double>& out,
                 std::vector<char>& bad)
{
  const std::size_t d = x.size();
  out.assign(N * d, 0.0);
  bad.assign(N, 0);
  parallel_for(N, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    std::span<double> y(out.data() + i * d, d);
    sampler(s, t, x, rng, y);
    bad[i] = !finite_state(y);
  });
}

} // namespace

TestResult
periodicity_check(const PeriodicSDEModel& model,
                  double s,
                  std::span<const double> x,
                  double delta,
                  std::size_t N,
                  std::uint64_t seed,
                  double level,
                  double h,
                  const TransitionSampler& sampler)
{
  if (x.size() != model.d())
    throw std::invalid_argument("periodicity_check: state dimension mismatch");
  if (!(delta > 0.0))
    throw std::invalid_argument("periodicity_check: delta must be > 0");
  const TransitionSampler run = sampler ? sampler : em_sampler(model, h);
  const double T = model.period();
  std::vector<double> a, b;
  std::vector<char> bad_a, bad_b;
  draw_transitions(run, s, s + delta, x, N, seed, a, bad_a);
  draw_transitions(run, s + T, s + T + delta, x, N, mix64(seed) ^ 0x9e3779b97f4a7c15ULL, b, bad_b);

  const std::size_t d = model.d();
  const std::size_t n_bad = static_cast<std::size_t>(std::count(bad_a.begin(), bad_a.end(), 1) +
                                                     std::count(bad_b.begin(), bad_b.end(), 1));
  TestResult r;
  r.name = "periodicity";
  r.n = N;
  r.extras["exploded"] = static_cast<double>(n_bad);
  if (static_cast<double>(n_bad) > 0.01 * 2.0 * static_cast<double>(N)) {
    r.inconclusive = true;
    r.description = "periodicity: more than 1% exploded draws";
    return r;
  }
  r.pass = true;
  for (std::size_t c = 0; c < d; ++c) {
    std::vector<double> ca, cb;
    for (std::size_t i = 0; i < N; ++i) {
      if (!bad_a[i])
        ca.push_back(a[i * d + c]);
      if (!bad_b[i])
        cb.push_back(b[i * d + c]);
    }
    const TestResult k = ks_two_sample(ca, cb, level);
    r.extras["D_x" + std::to_string(c + 1)] = k.statistic;
    if (c == 0 || k.statistic > r.statistic) {
      r.statistic = k.statistic;
      r.threshold = k.threshold;
    }
    r.pass = r.pass && k.pass;
  }
  r.description = "law of X_{s+delta} from (s, x) vs from (s+T, x), per-coordinate two-sample KS at level " +
                  fmt(level) + ": max D = " + fmt(r.statistic) + ", threshold " + fmt(r.threshold);
  return r;
}

namespace {

double
lyapunov_value(LyapunovFunction V, std::span<const double> x)
{
  double n2 = 0.0;
  for (double v : x)
    n2 += v * v;
  return V == LyapunovFunction::squared_norm ? n2 : std::sqrt(n2);
}

constexpr double z99 = 2.5758293035489004;

} // namespace

TestResult
drift_check(const TransitionSampler& sampler,
            LyapunovFunction V,
            std::span<const double> x,
            double eps,
            double T,
            std::size_t N,
            std::uint64_t seed,
            double slack)
{
  if (N < 10)
    throw std::invalid_argument("drift_check: need N >= 10");
  std::vector<double> y;
  std::vector<char> bad;
  draw_transitions(sampler, 0.0, T, x, N, seed, y, bad);
  const std::size_t d = x.size();
  const double v0 = lyapunov_value(V, x);
  double m = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (bad[i])
      continue;
    const double v = lyapunov_value(V, std::span<const double>(y.data() + i * d, d)) - v0;
    ++n;
    const double delta = v - m;
    m += delta / static_cast<double>(n);
    m2 += delta * (v - m);
  }
  TestResult r;
  r.name = "drift_check";
  r.n = n;
  r.extras["exploded"] = static_cast<double>(N - n);
  if (static_cast<double>(N - n) > 0.01 * static_cast<double>(N) || n < 2) {
    r.inconclusive = true;
    r.description = "drift check: more than 1% exploded draws";
    return r;
  }
  const double se = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  r.extras["mean"] = m;
  r.extras["standard_error"] = se;
  r.extras["ci_lower"] = m - z99 * se;
  r.extras["ci_upper"] = m + z99 * se;
  r.statistic = m + z99 * se;
  r.threshold = -eps * T + slack;
  r.pass = r.statistic <= r.threshold;
  r.description = "99% CI for P_{0,T}V(x) - V(x): [" + fmt(m - z99 * se) + ", " + fmt(m + z99 * se) +
                  "]; upper bound must be <= " + fmt(r.threshold);
  return r;
}

std::pair<double, double>
wilson_interval(std::size_t k, std::size_t n, double z)
{
  if (n == 0)
    throw std::invalid_argument("wilson_interval: n must be > 0");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  return { std::max(0.0, centre - half), std::min(1.0, centre + half) };
}

TestResult
escape_probability_check(const TransitionSampler& sampler,
                         std::span<const double> x,
                         double r_tilde,
                         const std::vector<double>& s_grid,
                         std::size_t N,
                         std::uint64_t seed,
                         double bound)
{
  if (!(lyapunov_value(LyapunovFunction::norm, x) > r_tilde))
    throw std::invalid_argument("escape_probability_check: the start must satisfy |x| > R~");
  if (s_grid.empty())
    throw std::invalid_argument("escape_probability_check: empty s grid");
  TestResult r;
  r.name = "escape_probability";
  r.n = N;
  r.threshold = bound;
  if (bound >= 1.0) {
    r.pass = true;
    r.description = "bound >= 1: vacuous";
    return r;
  }
  const std::size_t d = x.size();
  r.pass = true;
  std::size_t total_bad = 0;
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const double s = s_grid[k];
    if (!(s > 0.0))
      throw std::invalid_argument("escape_probability_check: s must be > 0");
    std::vector<double> y;
    std::vector<char> bad;
    draw_transitions(sampler, 0.0, s, x, N, seed + k, y, bad);
    std::size_t inside = 0, good = 0;
    for (std::size_t i = 0; i < N; ++i) {
      if (bad[i])
        continue;
      ++good;
      inside += lyapunov_value(LyapunovFunction::norm, std::span<const double>(y.data() + i * d, d)) <= r_tilde;
    }
    total_bad += N - good;
    const auto [lo, hi] = wilson_interval(inside, std::max<std::size_t>(good, 1));
    r.extras["p_hat[" + fmt(s) + "]"] = static_cast<double>(inside) / static_cast<double>(std::max<std::size_t>(good, 1));
    r.statistic = std::max(r.statistic, hi);
    (void)lo;
  }
  r.extras["exploded"] = static_cast<double>(total_bad);
  if (static_cast<double>(total_bad) > 0.01 * static_cast<double>(N * s_grid.size())) {
    r.inconclusive = true;
    r.pass = false;
    r.description = "escape probability: more than 1% exploded draws";
    return r;
  }
  r.pass = r.statistic <= bound;
  r.description = "largest 99% upper bound of P_x(|X_s| <= R~) over the s grid: " + fmt(r.statistic) +
                  ", must be <= " + fmt(bound);
  return r;
}

SupSampler
scaled_bm_sup_sampler(double scale, double T, std::size_t n_steps)
{
  if (!(T > 0.0) || n_steps < 1)
    throw std::invalid_argument("scaled_bm_sup_sampler: need T > 0 and n_steps >= 1");
  return [scale, T, n_steps](Rng& rng) {
    std::normal_distribution<double> normal;
    const double root = std::sqrt(T / static_cast<double>(n_steps));
    double w = 0.0, sup = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      w += root * normal(rng);
      sup = std::max(sup, std::fabs(scale * w));
    }
    return sup;
  };
}

std::vector<TestResult>
bernstein_tail_check(const SupSampler& sampler, double B, const std::vector<double>& x_grid, std::size_t N, std::uint64_t seed)
{
  if (!(B > 0.0))
    throw std::invalid_argument("bernstein_tail_check: bracket bound must be > 0");
  if (N < 10)
    throw std::invalid_argument("bernstein_tail_check: need N >= 10");
  std::vector<double> sups(N);
  parallel_for(N, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    sups[i] = sampler(rng);
  });
  std::vector<TestResult> out;
  for (double x : x_grid) {
    const auto k = static_cast<std::size_t>(std::count_if(sups.begin(), sups.end(), [&](double v) { return v >= x; }));
    const auto [lo, hi] = wilson_interval(k, N);
    TestResult r;
    r.name = "bernstein_tail";
    r.n = N;
    r.statistic = lo;
    r.threshold = 2.0 * std::exp(-x * x / (2.0 * B));
    r.pass = r.statistic <= r.threshold;
    r.extras["x"] = x;
    r.extras["p_hat"] = static_cast<double>(k) / static_cast<double>(N);
    r.extras["ci_upper"] = hi;
    r.description = "P(sup|M| >= " + fmt(x) + ") = " + fmt(r.extras["p_hat"]) + " (99% lower bound " + fmt(lo) +
                    ") vs 2 exp(-x^2 / 2B) = " + fmt(r.threshold) + "; grid supremum underestimates the true one";
    out.push_back(std::move(r));
  }
  return out;
}

double
silverman_bandwidth(std::span<const double> samples)
{
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double m = 0.0;
  for (double v : s)
    m += v;
  m /= n;
  double ss = 0.0;
  for (double v : s)
    ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / (n - 1.0));
  auto quantile = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < s.size() ? s[i] * (1.0 - frac) + s[i + 1] * frac : s[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

std::vector<double>
kde_density(std::span<const double> samples, std::optional<double> bandwidth, std::span<const double> points)
{
  if (samples.size() < 30)
    throw std::invalid_argument("kde_density: need at least 30 samples");
  for (double v : samples)
    if (!std::isfinite(v))
      throw std::invalid_argument("kde_density: samples must be finite");
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0) || !std::isfinite(h))
    throw std::invalid_argument("kde_density: bandwidth must be positive");
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(points.size());
  parallel_for(points.size(), [&](std::size_t k) {
    double acc = 0.0;
    for (double v : samples) {
      const double z = (points[k] - v) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[k] = acc * norm;
  });
  return out;
}

void
write_kde_csv(std::ostream& os, std::span<const double> points, std::span<const double> density)
{
  os << "point,density\n";
  char buf[64];
  for (std::size_t k = 0; k < points.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", points[k], density[k]);
    os << buf;
  }
}

} // namespace pergo
