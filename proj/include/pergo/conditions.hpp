#pragma once

#include "pergo/coeffexpr.hpp"
#include "pergo/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pergo {

/// Grid settings shared by all certificate scans. Every sup/inf below is a
/// maximum/minimum over these grids, not a proof over the continuum.
struct CheckConfig
{
  double r_min = 1e-3;
  double r_max = 10.0;
  //! Linear radial points on [0, r_max]; a geometric extension to
  //! 10 * r_max with n_radial / 4 points is added for the "outside" scans.
  std::size_t n_radial = 1000;
  std::size_t n_angular = 16;
  std::size_t n_time = 64;
  std::optional<double> epsilon;
  double delta_lambda = 1e-8;
  std::size_t refine_passes = 1;
  //! Half-width of the box used by the Aronson and degenerate-2D scans.
  double box = 100.0;
  //! Coefficient and derivative cap for the Aronson boundedness checks.
  double bound_cap = 1e3;
  //! Grid points per axis used to estimate C0 when the model declares none.
  std::size_t c0_grid = 41;

  void validate() const;
};

//! A grid point (s, x) and the scanned value there.
struct Witness
{
  double s = 0.0;
  std::vector<double> x;
  double value = 0.0;
};

/// L_s V(x) = 2 x^T b(s, x) + tr a(x) for V(x) = |x|^2.
double lyapunov_generator(const PeriodicSDEModel& model, double s, std::span<const double> x);

//! Field scanned by the radial searches.
using ScanField = std::function<double(double s, std::span<const double> x)>;

/// Outcome of a "f < -eps outside a ball" search.
struct RadialScan
{
  bool pass = false;
  double epsilon = 0.0;
  //! Smallest passing radius (boundary refined by bisection).
  double radius = 0.0;
  //! Largest grid value of f outside the radius (or on the whole scan on failure).
  Witness max_outside;
  //! Largest difference between the maximiser and its grid neighbours; an
  //! estimate of how much f can exceed the grid maximum between grid points.
  double grid_margin = 0.0;
  double radial_step = 0.0;
  std::size_t n_points = 0;
};

/// Scans f over [0, T] x {r <= |x| <= 10 r_max}. With eps unset, the largest
/// eps in [1e-6, 1e3] that passes is found by bisection on a log scale.
RadialScan radial_scan(const ScanField& f,
                       std::size_t d,
                       double period,
                       bool time_dependent,
                       const CheckConfig& config,
                       std::optional<double> eps);

struct TildeK
{
  RadialScan scan;
  //! max(radius, e)
  double r_tilde = 0.0;
  //! Grid sup of |L_s V| over [0, T] x {|x| <= radius}.
  double c_sup = 0.0;
  Witness c_witness;
};

TildeK find_tilde_K(const PeriodicSDEModel& model, const CheckConfig& config);

/// (2d)^{3/2} (m+1)^{1/2} C0 + 4 d^3 (m+1) C0^2
double compute_C2(std::size_t d, std::size_t m, double C0);

/// Smallest R with
///   2 exp(-(log R - log R~ - C2 T)^2 / (16 d^3 (m+1) C0^2 T)) <= eps / (2 (C + eps)),
/// from the closed form; throws NumericalError if the bisection cross-check
/// disagrees by more than 1e-9 relative.
double compute_minimal_R(std::size_t d,
                         std::size_t m,
                         double C0,
                         double T,
                         double r_tilde,
                         double eps,
                         double C);

//! The same R found by bisection on log R.
double minimal_R_by_bisection(std::size_t d,
                              std::size_t m,
                              double C0,
                              double T,
                              double r_tilde,
                              double eps,
                              double C);

struct Nondegeneracy
{
  double lambda_min = 0.0;
  std::vector<double> argmin;
  bool pass = false;
  double radius = 0.0;
  //! Radial spacing of the linear part of the grid.
  double grid_step = 0.0;
};

/// Grid minimum of the smallest eigenvalue of a(x) over {|x| <= R}.
Nondegeneracy check_nondegeneracy(const PeriodicSDEModel& model, double R, const CheckConfig& config);

struct C0Estimate
{
  double value = 0.0;
  std::vector<double> argmax; // (t, x...)
  int max_order = 2;
  double half_width = 0.0;
};

/// Grid max over [0, T] x [-r_max, r_max]^d of |D^a sigma_ij| + |D^a b^i|,
/// 1 <= |a| <= 2, by central differences.
C0Estimate estimate_C0(const PeriodicSDEModel& model, const CheckConfig& config);

struct Theorem11Report
{
  std::string model;
  std::size_t d = 1, m = 1;
  double period = 1.0;
  bool m_at_least_d = true;
  double C0 = 0.0;
  bool C0_estimated = false;
  std::optional<C0Estimate> C0_estimate;
  TildeK tilde_K;
  double C2 = 0.0;
  //! R may overflow a double; log_R is always finite when verdict_minimal_R holds.
  double R = 0.0;
  double log_R = 0.0;
  double R_bisection = 0.0;
  Nondegeneracy nondegeneracy;
  bool verdict_lyapunov = false;
  bool verdict_minimal_R = false;
  bool verdict_nondegeneracy = false;
  bool overall = false;
  std::vector<std::string> notes;
};

Theorem11Report check_theorem11(const PeriodicSDEModel& model, const CheckConfig& config);

/// G_S(x) = 2 sum_i (x_i^- max S_i^- + x_i^+ max S_i^+)
double compute_G_S(const std::vector<Signal>& S, std::span<const double> x);

/// Time-free criterion 2 x^T b_hat(x) + G_S(x) + tr a(x) < -eps outside a
/// ball; a pass implies the time-dependent Lyapunov inequality.
RadialScan check_signal_condition(const VectorField& b_hat,
                                  const std::vector<Signal>& S,
                                  const PeriodicSDEModel& model,
                                  const CheckConfig& config);

// --- Levy measures -------------------------------------------------------------

/// nu(dx) on the real line.
struct LevyDescriptor
{
  enum class Kind
  {
    compound_poisson, // rate * law(dx)
    stable,           // c |x|^{-1-alpha} dx, 0 < alpha < 2
    user_density      // density(x1) dx with optional power-law exponents
  };
  Kind kind = Kind::compound_poisson;
  CompoundPoissonJumps jumps;
  double alpha = 1.0;
  double c = 1.0;
  coeffexpr::Expr density;
  //! density ~ |x|^{-origin_exponent} near 0
  std::optional<double> origin_exponent;
  //! density ~ |x|^{-tail_exponent} at infinity
  std::optional<double> tail_exponent;

  static LevyDescriptor compound_poisson(CompoundPoissonJumps j);
  //! Throws std::invalid_argument unless 0 < alpha < 2 and c > 0.
  static LevyDescriptor stable(double alpha, double c = 1.0);
};

struct LevyConditionReport
{
  //! int_{|x|>1} |x| nu(dx) < infinity
  bool cond11 = false;
  double tail_moment = 0.0;
  //! g(eps) = int (x^2 ^ eps^2) nu(dx) / (eps^2 ln(1/eps)) -> infinity
  bool cond12 = false;
  std::vector<std::pair<double, double>> g_values; // (eps, g(eps)), eps = 1e-1..1e-6
  std::string cond12_rule;
};

LevyConditionReport check_levy_conditions(const LevyDescriptor& nu);

// --- Aronson / Veretennikov / degenerate 2-D ---------------------------------------

struct AronsonReport
{
  bool ellipticity = false;
  double lambda_min = 0.0;
  Witness ellipticity_witness;
  bool bounded_coefficients = false;
  double sup_b = 0.0, sup_a = 0.0;
  Witness bounded_witness;
  bool bounded_first_derivatives = false;
  double sup_derivative = 0.0;
  Witness derivative_witness;
  double box = 0.0;
  double cap = 0.0;
};

AronsonReport check_aronson(const PeriodicSDEModel& model, const CheckConfig& config);

struct VeretennikovReport
{
  double lambda_minus = 0.0, lambda_plus = 0.0, Lambda_tilde = 0.0;
  double sup_xb_outside = 0.0; // grid max of x^T b(x) over |x| > M
  Witness drift_witness;
  bool drift_condition = false;
  bool spectral_condition = false;
  bool pass = false;
  //! 2 x^T b + tr a < -2 lambda_plus on |x| > M, on the grid
  bool implied_inequality = false;
  double implied_max = 0.0;
  double M = 0.0, r = 0.0;
};

/// Throws std::invalid_argument for time-dependent models.
VeretennikovReport check_veretennikov(const PeriodicSDEModel& model, double M, double r, const CheckConfig& config);

struct Degenerate2DReport
{
  double inf_sigma = 0.0;
  Witness sigma_witness;
  double inf_db2_dx1 = 0.0;
  Witness derivative_witness;
  bool condition_i = false;
  RadialScan condition_ii;
  bool pass = false;
};

/// Throws std::invalid_argument unless d = 2, m = 1 and the second row of
/// sigma vanishes on the grid.
Degenerate2DReport check_degenerate_2d(const PeriodicSDEModel& model, const CheckConfig& config);

} // namespace pergo
