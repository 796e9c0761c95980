#pragma once

// Reference values computed independently of the library code paths.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline double
normal_cdf(double x, double mean = 0.0, double sd = 1.0)
{
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

inline double
normal_pdf(double x, double mean = 0.0, double sd = 1.0)
{
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

//! Composite Simpson rule with n (even) panels.
inline double
simpson(const std::function<double(double)>& f, double a, double b, int n = 20000)
{
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i)
    acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

//! E[X_t | X_0 = x] for dX = -gamma X dt + sigma dW.
inline double
ou_mean(double gamma, double x, double t)
{
  return x * std::exp(-gamma * t);
}

inline double
ou_variance(double gamma, double sigma, double t)
{
  return sigma * sigma * (1.0 - std::exp(-2.0 * gamma * t)) / (2.0 * gamma);
}

//! Periodic mean for S(t) = sin(omega t): [gamma sin(omega s) - omega cos(omega s)] / (gamma^2 + omega^2).
inline double
ou_sine_mean(double gamma, double omega, double s)
{
  return (gamma * std::sin(omega * s) - omega * std::cos(omega * s)) / (gamma * gamma + omega * omega);
}

/// Smallest R with 2 exp(-(log R - log Rt - C2 T)^2 / (16 d^3 (m+1) C0^2 T)) <= eps / (2 (C + eps)),
/// searched by plain bisection on log R above log Rt + C2 T.
inline double
minimal_log_R_bisection(int d, int m, double C0, double T, double r_tilde, double eps, double C)
{
  const double c2 = std::pow(2.0 * d, 1.5) * std::sqrt(m + 1.0) * C0 + 4.0 * d * d * d * (m + 1.0) * C0 * C0;
  const double base = std::log(r_tilde) + c2 * T;
  const double denom = 16.0 * d * d * d * (m + 1.0) * C0 * C0 * T;
  const double rhs = eps / (2.0 * (C + eps));
  auto holds = [&](double logR) {
    const double u = logR - base;
    return 2.0 * std::exp(-u * u / denom) <= rhs;
  };
  double lo = base, hi = base + 1.0;
  while (!holds(hi))
    hi = base + 2.0 * (hi - base);
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? hi : lo) = mid;
  }
  return hi;
}

//! Grid maximum of f over [a, b] with n + 1 points.
inline double
grid_max(const std::function<double(double)>& f, double a, double b, int n)
{
  double best = -INFINITY;
  for (int i = 0; i <= n; ++i)
    best = std::max(best, f(a + (b - a) * i / n));
  return best;
}

//! Sample mean and unbiased variance.
inline std::pair<double, double>
mean_variance(const std::vector<double>& v)
{
  double m = 0.0;
  for (double x : v)
    m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v)
    s += (x - m) * (x - m);
  return { m, s / static_cast<double>(v.size() - 1) };
}

//! P(sup_{s <= 1} |W_s| >= a) for standard Brownian motion, by the reflection series.
inline double
bm_abs_sup_tail(double a)
{
  double inside = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double j = 2.0 * k + 1.0;
    inside += (k % 2 ? -1.0 : 1.0) / j * std::exp(-j * j * std::numbers::pi * std::numbers::pi / (8.0 * a * a));
  }
  return 1.0 - 4.0 / std::numbers::pi * inside;
}

} // namespace oracle
