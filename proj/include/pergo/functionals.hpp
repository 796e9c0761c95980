#pragma once

#include "pergo/closedform.hpp"
#include "pergo/model.hpp"
#include "pergo/random.hpp"
#include "pergo/simulate.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pergo {

struct Atom
{
  double s; // in [0, T)
  double w; // > 0
};

/// F(s, x) with a T-periodic measure Lambda_T = g(s) ds + sum_i w_i delta_{s_i},
/// both evaluated at s mod T.
class PeriodicFunctional
{
public:
  using Field = std::function<double(double s, std::span<const double> x)>;
  using Density = std::function<double(double s)>;

  //! An empty density means g = 0.
  PeriodicFunctional(Field F, Density g, std::vector<Atom> atoms, double period, std::vector<double> density_breaks = {});

  /// F and g are expressions; the time variable may be written t or s.
  /// An empty density text means g = 0.
  static PeriodicFunctional from_expressions(const std::string& F,
                                             const std::string& density,
                                             std::vector<Atom> atoms,
                                             double period,
                                             std::size_t d,
                                             const std::map<std::string, double>& params = {});

  double F(double s, std::span<const double> x) const;
  double g(double s) const;
  bool has_density() const noexcept { return static_cast<bool>(g_); }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  double period() const noexcept { return period_; }
  const std::vector<double>& density_breaks() const noexcept { return breaks_; }

private:
  Field F_;
  Density g_;
  std::vector<Atom> atoms_;
  double period_;
  std::vector<double> breaks_;
};

/// A_{t_j} for every path on the bundle's record grid.
class AccumulatedFunctional
{
public:
  AccumulatedFunctional(std::size_t n_paths, std::size_t n_records, double record_dt);

  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_records() const noexcept { return n_records_; }
  double record_dt() const noexcept { return dt_; }
  double time(std::size_t j) const { return static_cast<double>(j) * dt_; }
  std::span<const double> path(std::size_t i) const { return { data_.data() + i * n_records_, n_records_ }; }
  std::span<double> path(std::size_t i) { return { data_.data() + i * n_records_, n_records_ }; }

private:
  std::size_t n_paths_, n_records_;
  double dt_;
  std::vector<double> data_;
};

/// Left-endpoint Riemann sum for the density part,
///   A_{t_{j+1}} = A_{t_j} + F(t_j, x_j) g(t_j) dt,
/// plus w_i F at every grid time congruent to an atom. Atoms are counted on
/// the closed interval [0, t], so an atom at 0 contributes to A_0.
/// Throws std::invalid_argument listing atoms that are off the grid.
AccumulatedFunctional accumulate(const TrajectoryBundle& bundle, const PeriodicFunctional& f);

/// A_t / t at the grid time nearest to t. Throws for t <= 0.
double time_average(std::span<const double> A, double record_dt, double t);

struct TimeAverageEstimate
{
  double value = 0.0;
  //! Batch-means standard error over whole periods.
  double standard_error = 0.0;
  std::size_t n_batches = 0;
};

/// A_t / t at the last whole period of one path, with a batch-means error.
TimeAverageEstimate time_average_estimate(const AccumulatedFunctional& A,
                                          std::size_t path,
                                          double T,
                                          std::size_t n_batches = 50);

void write_time_average_csv(std::ostream& os, const AccumulatedFunctional& A);

struct ErgodicLimit
{
  double value = 0.0;
  double standard_error = 0.0; // 0 for the closed-form route
};

/// (1/T) [int_0^T g(s) E[F(s, Y_s)] ds + sum_i w_i E[F(s_i, Y_{s_i})]], Y_s ~ marginal(s).
/// Inner expectations by 64-point Gauss-Hermite, outer integral adaptive
/// with tolerance 1e-8. d = 1 only.
ErgodicLimit ergodic_limit(const PeriodicFunctional& f, const std::function<GaussianLaw(double s)>& marginal);

//! Draws one state of the phase-s marginal into out.
using MarginalSampler = std::function<void(double s, Rng& rng, std::span<double> out)>;

/// Nested Monte Carlo: midpoint rule with n_outer phases for the density
/// part, n_inner draws per phase and per atom.
ErgodicLimit ergodic_limit(const PeriodicFunctional& f,
                           const MarginalSampler& marginal,
                           std::size_t d,
                           std::size_t n_outer,
                           std::size_t n_inner,
                           std::uint64_t seed);

} // namespace pergo
