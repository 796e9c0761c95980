#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pergo::quad {

struct Result
{
  double value;
  double error;
};

/// Globally adaptive 15-point Gauss-Kronrod integration of f over [a, b].
///
/// The interval is first split at every breakpoint lying strictly inside
/// (a, b); panels are then bisected, largest error first, until the summed
/// error estimate drops below abs_tol. Throws NumericalError carrying the
/// achieved estimate when max_panels is exhausted or the integrand is not
/// finite.
Result integrate(const std::function<double(double)>& f,
                 double a,
                 double b,
                 double abs_tol,
                 std::span<const double> breakpoints = {},
                 std::size_t max_panels = 4000);

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1): sum_k w_k f(z_k).
/// Exact for polynomials of degree < 2n.
struct GaussHermite
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussHermite& gauss_hermite(std::size_t n = 64);

} // namespace pergo::quad
