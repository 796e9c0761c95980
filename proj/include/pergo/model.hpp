#pragma once

#include "pergo/coeffexpr.hpp"
#include "pergo/random.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace pergo {

/// t modulo T, in [0, T). Negative t is wrapped the same way.
/// Throws std::invalid_argument for non-finite t or T <= 0.
double wrap_time(double t, double period);

// --- periodic signals ----------------------------------------------------------

/// A scalar T-periodic function of time: constant, sinusoid,
/// piecewise-constant or a parsed expression in t (with T bound).
class Signal
{
public:
  static Signal constant(double value, double period);
  /// offset + amplitude * sin(2*pi*harmonic*t/T + phase)
  static Signal sinusoid(double amplitude,
                         double period,
                         double phase = 0.0,
                         int harmonic = 1,
                         double offset = 0.0);
  /// Value values[k] on [starts[k], starts[k+1]), starts ascending in [0, T),
  /// starts[0] == 0, wrapping past the last start.
  static Signal piecewise_constant(std::vector<double> starts,
                                   std::vector<double> values,
                                   double period);
  /// e may use t and the parameters named in `params`; T is bound
  /// automatically when it is one of e's parameters.
  static Signal expression(coeffexpr::Expr e,
                           double period,
                           std::map<std::string, double> params = {});

  Signal() = default;

  double operator()(double t) const;
  double period() const noexcept { return period_; }
  bool is_constant() const noexcept;
  //! Discontinuities within one period, in [0, T).
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

  //! max over one period of S^+ and S^- (grid of 4096 points plus breakpoints).
  double max_positive_part() const;
  double max_negative_part() const;

  std::string describe() const;

  //! Same signal multiplied by c.
  Signal scaled(double c) const;

private:
  struct Constant
  {
    double value;
  };
  struct Sinusoid
  {
    double amplitude, phase, offset;
    int harmonic;
  };
  struct Piecewise
  {
    std::vector<double> starts, values;
  };
  struct Expression
  {
    coeffexpr::Expr expr;
    std::vector<double> slots;
  };

  double eval_wrapped(double s) const;
  void compute_extrema();

  std::variant<Constant, Sinusoid, Piecewise, Expression> kind_{ Constant{ 0.0 } };
  double period_ = 1.0;
  double scale_ = 1.0;
  std::vector<double> breakpoints_;
  double max_pos_ = 0.0;
  double max_neg_ = 0.0;
};

// --- jump part -----------------------------------------------------------------

/// Jump-size distribution of a compound Poisson process.
struct JumpLaw
{
  enum class Kind
  {
    constant,    // a
    normal,      // mean a, sd b
    exponential, // mean a > 0
    uniform      // on [a, b]
  };
  Kind kind = Kind::constant;
  double a = 1.0;
  double b = 0.0;

  double sample(Rng& rng) const;
  double mean() const;
  double second_moment() const;
  //! E[|J|; |J| > 1]
  double tail_abs_moment() const;
  //! E[J; |J| <= 1]
  double small_jump_mean() const;
  //! E[min(J^2, eps^2)]
  double truncated_second_moment(double eps) const;
  std::string describe() const;
};

/// Finite-activity jump part with Levy measure rate * law(dx).
struct CompoundPoissonJumps
{
  enum class Compensation
  {
    none,       // Z_t is the plain sum of jumps
    small_jumps // subtract t * rate * E[J; |J| <= 1]
  };
  double rate = 0.0;
  JumpLaw law;
  Compensation compensation = Compensation::none;

  //! Drift subtracted from the jump sum per unit time.
  double compensator_drift() const;
};

// --- the model -----------------------------------------------------------------

/// x -> out (length d), evaluated at wrapped time.
using DriftField =
  std::function<void(double t, std::span<const double> x, std::span<double> out)>;
/// x -> sigma(x), row-major d x m.
using DiffusionField = std::function<void(std::span<const double> x, std::span<double> out)>;
/// Time-free vector field x -> out (length d).
using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Drift of the form b(t, x) = S(t) + b_hat(x).
struct DriftSplit
{
  std::vector<Signal> signal;
  VectorField hat;
};

/// Coefficients of a scalar OU model dX = (S(t) - gamma X) dt + sigma dW (+ dZ).
struct OuCoefficients
{
  double gamma;
  double sigma;
  Signal signal;
};

struct ModelParts
{
  std::string name = "custom";
  std::size_t d = 1;
  std::size_t m = 1;
  double period = 1.0;
  DriftField drift;
  DiffusionField diffusion;
  std::optional<CompoundPoissonJumps> jumps;
  std::optional<double> declared_C0;
  std::optional<DriftSplit> split;
  std::optional<OuCoefficients> ou;
  bool time_homogeneous = false;
  //! Only fault-injection fixtures set this to false: the drift then sees
  //! absolute time instead of t mod T.
  bool wrap_drift_time = true;
  //! name -> value of every scalar parameter used to build the model
  std::map<std::string, double> parameters;
};

/// Diffusion evaluation: sigma (d x m), a = sigma sigma^T (d x d) and the
/// extreme eigenvalues of a, both clamped at 0 from below.
struct DiffusionEval
{
  std::vector<double> sigma;
  std::vector<double> a;
  double lambda_min;
  double lambda_max;
};

/// dX_t = b(t, X_t) dt + sigma(X_t) dW_t (+ dZ_t) with b(t, x) = b(t mod T, x).
/// Immutable after construction; evaluation is pure and thread-safe.
class PeriodicSDEModel
{
public:
  explicit PeriodicSDEModel(ModelParts parts);

  const std::string& name() const noexcept { return parts_.name; }
  std::size_t d() const noexcept { return parts_.d; }
  std::size_t m() const noexcept { return parts_.m; }
  double period() const noexcept { return parts_.period; }
  bool m_at_least_d() const noexcept { return parts_.m >= parts_.d; }
  const std::optional<CompoundPoissonJumps>& jumps() const noexcept { return parts_.jumps; }
  const std::optional<double>& declared_C0() const noexcept { return parts_.declared_C0; }
  const std::optional<DriftSplit>& split() const noexcept { return parts_.split; }
  const std::optional<OuCoefficients>& ou() const noexcept { return parts_.ou; }
  bool time_homogeneous() const noexcept { return parts_.time_homogeneous; }
  const std::map<std::string, double>& parameters() const noexcept { return parts_.parameters; }

  //! Unchecked hot-path evaluation; out must have length d.
  void drift_into(double t, std::span<const double> x, std::span<double> out) const;
  //! Unchecked hot-path evaluation; out must have length d * m.
  void diffusion_into(std::span<const double> x, std::span<double> out) const
  {
    parts_.diffusion(x, out);
  }

private:
  ModelParts parts_;
};

/// b(t mod T, x). Throws std::invalid_argument on dimension mismatch and
/// EvaluationError (carrying t, x) on non-finite output.
std::vector<double> eval_drift(const PeriodicSDEModel& model, double t, std::span<const double> x);

DiffusionEval eval_diffusion(const PeriodicSDEModel& model, std::span<const double> x);

/// Extreme eigenvalues of a symmetric d x d matrix (row-major); closed form
/// for d <= 2, otherwise a symmetric eigen-solver. Clamped at 0 from below.
std::pair<double, double> extreme_eigenvalues(std::span<const double> a, std::size_t d);

// --- catalog -------------------------------------------------------------------

/// Raw name -> value strings (numbers or expressions) from a config section.
using ParamMap = std::map<std::string, std::string>;

/// Builds one of: ou-gauss, ou-levy, pearson, gbm, degenerate2d, custom.
/// Throws ValidationError naming the offending parameter.
PeriodicSDEModel catalog_model(const std::string& name, const ParamMap& params);

//! Keys accepted by catalog_model for a given model name.
std::vector<std::string> catalog_keys(const std::string& name);
const std::vector<std::string>& catalog_names();

/// Parses a signal from text: "piecewise: s0:v0, s1:v1, ..." or an expression
/// in t (params may be referenced by name, T is always available).
Signal parse_signal(const std::string& text,
                    double period,
                    const std::map<std::string, double>& params = {});

} // namespace pergo
