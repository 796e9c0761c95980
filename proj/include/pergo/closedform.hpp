#pragma once

#include "pergo/model.hpp"

namespace pergo {

/// Scalar normal law N(mean, variance).
struct GaussianLaw
{
  double mean = 0.0;
  double variance = 1.0;

  double sd() const;
  double cdf(double x) const;
  double pdf(double x) const;
  //! Inverse cdf for p in (0, 1).
  double quantile(double p) const;
};

/// int_s^t exp(-gamma (t - v)) S(v) dv for t >= s.
///
/// Whole periods are summed as a geometric series, so the cost does not
/// grow with t - s. Each window is integrated adaptively, split at the
/// signal's breakpoints, to an absolute tolerance of abs_tol.
double signal_convolution(const Signal& S, double gamma, double s, double t, double abs_tol = 1e-12);

/// T-periodic mean of the OU model:
/// M(s) = int_0^T exp(-gamma v) / (1 - exp(-gamma T)) S(s - v) dv.
double compute_M(const Signal& S, double gamma, double T, double s);

/// Law of X_t given X_s = x for dX = (S(t) - gamma X) dt + sigma dW.
GaussianLaw ou_transition(double gamma, double sigma, const Signal& S, double s, double t, double x);

/// N(M(s), sigma^2 / (2 gamma)): the invariant law of the T-grid chain for
/// s = 0, and its push-forward to phase s otherwise.
GaussianLaw ou_invariant(double gamma, double sigma, const Signal& S, double T, double s);

} // namespace pergo
