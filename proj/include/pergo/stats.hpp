#pragma once

#include "pergo/model.hpp"
#include "pergo/random.hpp"
#include "pergo/simulate.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pergo {

struct TestResult
{
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  std::size_t n = 0;
  bool pass = false;
  //! Too many exploded paths to judge; pass is false.
  bool inconclusive = false;
  std::string description;
  std::map<std::string, double> extras;
};

//! Asymptotic Kolmogorov coefficient: 1.358 at 0.05, 1.628 at 0.01.
double ks_coefficient(double level);

/// D_n = sup |F_n - cdf| against c(level) / sqrt(n). Needs n >= 10.
TestResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf, double level);

/// D = sup |F_a - F_b| against c(level) sqrt((n_a + n_b) / (n_a n_b)).
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b, double level);

/// Runs N transitions from (s, x) over delta and N from (s + T, x) with
/// independent streams, then a two-sample KS test per coordinate.
/// The sampler defaults to Euler-Maruyama with step h.
TestResult periodicity_check(const PeriodicSDEModel& model,
                             double s,
                             std::span<const double> x,
                             double delta,
                             std::size_t N,
                             std::uint64_t seed,
                             double level = 0.01,
                             double h = 1e-3,
                             const TransitionSampler& sampler = {});

enum class LyapunovFunction
{
  squared_norm, // |x|^2
  norm          // |x|
};

/// Monte Carlo estimate of P_{0,T} V(x) - V(x) with a 99% confidence
/// interval; passes when the upper bound is <= -eps T + slack. Exploded or
/// non-finite draws are dropped; more than 1% of them is inconclusive.
TestResult drift_check(const TransitionSampler& sampler,
                       LyapunovFunction V,
                       std::span<const double> x,
                       double eps,
                       double T,
                       std::size_t N,
                       std::uint64_t seed,
                       double slack = 0.0);

/// P_x(|X_s| <= R~) for each s of s_grid, each bounded above by a 99%
/// Wilson interval; passes when every upper bound is <= bound.
/// Throws std::invalid_argument if |x| <= R~.
TestResult escape_probability_check(const TransitionSampler& sampler,
                                    std::span<const double> x,
                                    double r_tilde,
                                    const std::vector<double>& s_grid,
                                    std::size_t N,
                                    std::uint64_t seed,
                                    double bound);

//! Draws sup_{s <= T} |M_s| for one path.
using SupSampler = std::function<double(Rng& rng)>;

//! scale * W on [0, T], running max of |.| over n_steps grid points.
SupSampler scaled_bm_sup_sampler(double scale, double T, std::size_t n_steps = 1000);

/// For each x: passes when the 99% Wilson lower bound of P(sup |M| >= x)
/// is <= 2 exp(-x^2 / (2 B)). The grid maximum underestimates the true
/// supremum.
std::vector<TestResult> bernstein_tail_check(const SupSampler& sampler,
                                             double B,
                                             const std::vector<double>& x_grid,
                                             std::size_t N,
                                             std::uint64_t seed);

//! 99% Wilson score interval for k successes in n trials.
std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 2.5758293035489004);

/// Gaussian kernel density estimate; bandwidth nullopt selects Silverman's
/// rule 0.9 min(sd, IQR / 1.34) n^{-1/5}. Needs n >= 30 and bandwidth > 0.
std::vector<double> kde_density(std::span<const double> samples,
                                std::optional<double> bandwidth,
                                std::span<const double> points);

double silverman_bandwidth(std::span<const double> samples);

void write_kde_csv(std::ostream& os, std::span<const double> points, std::span<const double> density);

} // namespace pergo
