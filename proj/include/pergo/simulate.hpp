#pragma once

#include "pergo/model.hpp"
#include "pergo/random.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace pergo {

enum class Scheme
{
  euler_maruyama,
  exact_ou, // exact Gaussian transitions of a scalar OU model
  levy_ou   // exact flow between compound-Poisson events of a scalar OU model
};

Scheme parse_scheme(const std::string& name);
std::string scheme_name(Scheme s);

//! Draws an initial state into out (length d) from the path's own stream.
using InitialSampler = std::function<void(Rng& rng, std::span<double> out)>;

struct SimulationPlan
{
  double step = 0.01;
  std::size_t horizon_periods = 1;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  std::vector<double> initial_state; // used when initial_sampler is empty
  InitialSampler initial_sampler;
  Scheme scheme = Scheme::euler_maruyama;
  //! Keep every record_stride-th grid state; must divide T/h.
  std::size_t record_stride = 1;
  //! Euler-Maruyama only: paths 2k and 2k+1 share noise with opposite signs.
  bool antithetic = false;
  //! Path i draws from stream path_offset + i, so a large run can be split
  //! into chunks that reproduce the unsplit run exactly.
  std::size_t path_offset = 0;
};

/// round(T/h), after checking |T - round(T/h) h| <= 1e-12 T.
/// Throws std::invalid_argument otherwise.
std::size_t steps_per_period(double T, double h);

/// States of N paths on the grid t_j = j * h * stride, stored path-major.
class TrajectoryBundle
{
public:
  TrajectoryBundle(std::size_t d,
                   std::size_t n_paths,
                   std::size_t n_records,
                   double step,
                   std::size_t stride,
                   double period,
                   SimulationPlan plan);

  std::size_t d() const noexcept { return d_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_records() const noexcept { return n_records_; }
  double step() const noexcept { return step_; }
  std::size_t stride() const noexcept { return stride_; }
  double period() const noexcept { return period_; }
  double record_dt() const noexcept { return step_ * static_cast<double>(stride_); }
  //! (j * stride) * h
  double time(std::size_t j) const;
  const SimulationPlan& plan() const noexcept { return plan_; }

  std::span<const double> state(std::size_t path, std::size_t j) const;
  std::span<double> state(std::size_t path, std::size_t j);
  //! All records of one path, record-major (n_records * d values).
  std::span<const double> path(std::size_t i) const;

  //! Record index of the first exploded state (|x| > 1e300 or non-finite).
  const std::optional<std::size_t>& exploded_at(std::size_t path) const { return exploded_[path]; }
  void mark_exploded(std::size_t path, std::size_t record);
  std::size_t n_exploded() const;
  bool exploded(std::size_t path) const { return exploded_[path].has_value(); }

private:
  std::size_t d_, n_paths_, n_records_;
  double step_;
  std::size_t stride_;
  double period_;
  SimulationPlan plan_;
  std::vector<double> data_;
  std::vector<std::optional<std::size_t>> exploded_;
};

/// Simulates the model on [0, K T] with the scheme named in the plan.
///
/// Euler-Maruyama adds compound-Poisson jumps at their exact event times
/// by splitting the step. exact_ou and levy_ou need a model with OU
/// coefficients; exact_ou rejects jump parts. Each path uses the stream
/// make_stream(seed, path), so results do not depend on the thread count.
TrajectoryBundle simulate_paths(const PeriodicSDEModel& model, const SimulationPlan& plan);

//! Builds an ou-gauss model and runs the exact scheme.
TrajectoryBundle simulate_ou_exact(double gamma, double sigma, const Signal& S, SimulationPlan plan);

//! Builds a jump OU model and runs the exact flow scheme.
TrajectoryBundle simulate_levy_ou(double gamma, const Signal& S, const CompoundPoissonJumps& jumps, SimulationPlan plan);

/// Samples Z_tau with tau ~ Exp(gamma) independent of the compound Poisson
/// process Z (compensated per the descriptor), from one stream of seed.
std::vector<double> sample_invariant_U(double gamma, const CompoundPoissonJumps& jumps, std::size_t n, std::uint64_t seed);

/// X_k = xi_{kT} for every path, k = 0..K.
class GridChain
{
public:
  GridChain(std::size_t d, std::size_t n_paths, std::size_t n_points);

  std::size_t d() const noexcept { return d_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_points() const noexcept { return n_points_; }
  std::span<const double> at(std::size_t path, std::size_t k) const;
  std::span<double> at(std::size_t path, std::size_t k);
  bool exploded(std::size_t path) const { return exploded_[path]; }
  void set_exploded(std::size_t path) { exploded_[path] = true; }

private:
  std::size_t d_, n_paths_, n_points_;
  std::vector<double> data_;
  std::vector<bool> exploded_;
};

GridChain extract_grid_chain(const TrajectoryBundle& bundle, double T);

/// Segment k of a path: the n_per + 1 recorded states on [kT, (k+1)T].
struct Segment
{
  std::size_t path;
  std::size_t k;
  std::span<const double> states; // (n_per + 1) * d values, record-major
};

std::vector<Segment> extract_segments(const TrajectoryBundle& bundle, double T);

//! Rows path_id,t,x1..xd; path ids include the plan's path offset.
void write_bundle_csv(std::ostream& os, const TrajectoryBundle& bundle, bool header = true);
//! Rows path_id,k,x1..xd.
void write_grid_chain_csv(std::ostream& os, const GridChain& chain, std::size_t path_offset = 0, bool header = true);

/// Draws X_t given X_s = x into out.
using TransitionSampler =
  std::function<void(double s, double t, std::span<const double> x, Rng& rng, std::span<double> out)>;

/// Euler-Maruyama from s to t with step h (the last step may be shorter),
/// evaluating the drift at absolute times.
TransitionSampler em_sampler(const PeriodicSDEModel& model, double h);

/// Exact Gaussian transition of an OU model.
TransitionSampler exact_ou_sampler(const PeriodicSDEModel& model);

} // namespace pergo
