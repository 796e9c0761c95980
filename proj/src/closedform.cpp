#include "pergo/closedform.hpp"
#include "pergo/quadrature.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pergo {

double
GaussianLaw::sd() const
{
  return std::sqrt(variance);
}

double
GaussianLaw::cdf(double x) const
{
  return 0.5 * std::erfc(-(x - mean) / (sd() * std::numbers::sqrt2));
}

double
GaussianLaw::pdf(double x) const
{
  const double z = (x - mean) / sd();
  return std::exp(-0.5 * z * z) / (sd() * std::sqrt(2.0 * std::numbers::pi));
}

double
GaussianLaw::quantile(double p) const
{
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("quantile: p must lie in (0, 1)");
  return mean - sd() * std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

void
check_gamma(double gamma)
{
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("gamma must be positive and finite");
}

// int_0^delta exp(-gamma (delta - u)) S(a + u) du with 0 <= delta <= T.
double
window(const Signal& S, double gamma, double a, double delta, double abs_tol)
{
  if (delta <= 0.0)
    return 0.0;
  const double T = S.period();
  const double a0 = wrap_time(a, T);
  std::vector<double> cuts;
  for (int k = 0; k <= 2; ++k) {
    const double u0 = k * T - a0;
    if (u0 > 0.0 && u0 < delta)
      cuts.push_back(u0);
    for (double bp : S.breakpoints()) {
      const double u = k * T + bp - a0;
      if (u > 0.0 && u < delta)
        cuts.push_back(u);
    }
  }
  return quad::integrate([&](double u) { return std::exp(-gamma * (delta - u)) * S(a0 + u); }, 0.0, delta,
                         abs_tol, cuts)
    .value;
}

} // namespace

double
signal_convolution(const Signal& S, double gamma, double s, double t, double abs_tol)
{
  check_gamma(gamma);
  if (!(t >= s))
    throw std::invalid_argument("signal_convolution: need t >= s");
  const double delta = t - s;
  if (S.is_constant())
    return S(0.0) * -std::expm1(-gamma * delta) / gamma;

  const double T = S.period();
  if (delta <= T)
    return window(S, gamma, s, delta, abs_tol);
  const double n = std::floor(delta / T);
  const double r = std::max(0.0, delta - n * T);
  const double one = window(S, gamma, s, T, abs_tol);
  const double geometric = std::expm1(-gamma * n * T) / std::expm1(-gamma * T);
  return window(S, gamma, t - r, r, abs_tol) + std::exp(-gamma * r) * one * geometric;
}

double
compute_M(const Signal& S, double gamma, double T, double s)
{
  check_gamma(gamma);
  if (!(T > 0.0))
    throw std::invalid_argument("compute_M: T must be positive");
  const double norm = -std::expm1(-gamma * T);
  // window accuracy scaled so that the quotient meets 1e-10
  const double base = wrap_time(s, T);
  return signal_convolution(S, gamma, base - T, base, 1e-11 * norm) / norm;
}

GaussianLaw
ou_transition(double gamma, double sigma, const Signal& S, double s, double t, double x)
{
  check_gamma(gamma);
  if (!(sigma > 0.0))
    throw std::invalid_argument("ou_transition: sigma must be positive");
  if (!(t > s))
    throw std::invalid_argument("ou_transition: need t > s");
  const double delta = t - s;
  GaussianLaw law;
  law.mean = x * std::exp(-gamma * delta) + signal_convolution(S, gamma, s, t);
  law.variance = -std::expm1(-2.0 * gamma * delta) * sigma * sigma / (2.0 * gamma);
  return law;
}

GaussianLaw
ou_invariant(double gamma, double sigma, const Signal& S, double T, double s)
{
  check_gamma(gamma);
  if (!(sigma > 0.0))
    throw std::invalid_argument("ou_invariant: sigma must be positive");
  return { compute_M(S, gamma, T, s), sigma * sigma / (2.0 * gamma) };
}

} // namespace pergo
