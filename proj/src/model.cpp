#include "pergo/model.hpp"
#include "pergo/error.hpp"
#include "pergo/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pergo {

double
wrap_time(double t, double period)
{
  if (!std::isfinite(t))
    throw std::invalid_argument("wrap_time: time must be finite");
  if (!(period > 0.0) || !std::isfinite(period))
    throw std::invalid_argument("wrap_time: period must be positive and finite");
  // fmod is exact, so the result is the correctly rounded t - floor(t/T) T
  double r = std::fmod(t, period);
  if (r < 0.0) {
    r += period;
    if (r >= period)
      r = 0.0;
  }
  return r;
}

// --- Signal --------------------------------------------------------------------

Signal
Signal::constant(double value, double period)
{
  if (!std::isfinite(value))
    throw std::invalid_argument("constant signal must be finite");
  wrap_time(0.0, period);
  Signal s;
  s.kind_ = Constant{ value };
  s.period_ = period;
  s.compute_extrema();
  return s;
}

Signal
Signal::sinusoid(double amplitude, double period, double phase, int harmonic, double offset)
{
  if (!std::isfinite(amplitude) || !std::isfinite(phase) || !std::isfinite(offset))
    throw std::invalid_argument("sinusoid parameters must be finite");
  if (harmonic < 1)
    throw std::invalid_argument("sinusoid harmonic must be >= 1");
  wrap_time(0.0, period);
  Signal s;
  s.kind_ = Sinusoid{ amplitude, phase, offset, harmonic };
  s.period_ = period;
  s.compute_extrema();
  return s;
}

Signal
Signal::piecewise_constant(std::vector<double> starts, std::vector<double> values, double period)
{
  wrap_time(0.0, period);
  if (starts.empty() || starts.size() != values.size())
    throw std::invalid_argument("piecewise signal needs matching starts and values");
  if (starts.front() != 0.0)
    throw std::invalid_argument("piecewise signal must start at 0");
  for (std::size_t k = 0; k < starts.size(); ++k) {
    if (!std::isfinite(values[k]))
      throw std::invalid_argument("piecewise signal values must be finite");
    if (!(starts[k] >= 0.0 && starts[k] < period))
      throw std::invalid_argument("piecewise breakpoints must lie in [0, T)");
    if (k > 0 && !(starts[k] > starts[k - 1]))
      throw std::invalid_argument("piecewise breakpoints must be increasing");
  }
  Signal s;
  s.breakpoints_ = starts;
  s.kind_ = Piecewise{ std::move(starts), std::move(values) };
  s.period_ = period;
  s.compute_extrema();
  return s;
}

Signal
Signal::expression(coeffexpr::Expr e, double period, std::map<std::string, double> params)
{
  wrap_time(0.0, period);
  if (e.uses_state())
    throw std::invalid_argument("signal expression may not depend on the state");
  params.emplace("T", period);
  std::vector<double> slots(e.slot_count(), 0.0);
  for (std::size_t p = 0; p < e.parameters().size(); ++p) {
    const auto it = params.find(e.parameters()[p]);
    if (it == params.end())
      throw std::invalid_argument("signal parameter '" + e.parameters()[p] + "' is unbound");
    slots[1 + e.dimension() + p] = it->second;
  }
  Signal s;
  s.kind_ = Expression{ std::move(e), std::move(slots) };
  s.period_ = period;
  s.compute_extrema();
  return s;
}

double
Signal::eval_wrapped(double s) const
{
  return std::visit(
    [&](const auto& k) -> double {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, Constant>) {
        return k.value;
      } else if constexpr (std::is_same_v<K, Sinusoid>) {
        return k.offset +
               k.amplitude * std::sin(2.0 * std::numbers::pi * k.harmonic * s / period_ + k.phase);
      } else if constexpr (std::is_same_v<K, Piecewise>) {
        const auto it = std::upper_bound(k.starts.begin(), k.starts.end(), s);
        return k.values[static_cast<std::size_t>(it - k.starts.begin()) - 1];
      } else {
        thread_local std::vector<double> slots;
        slots = k.slots;
        slots[0] = s;
        return k.expr.eval(slots);
      }
    },
    kind_);
}

double
Signal::operator()(double t) const
{
  return scale_ * eval_wrapped(wrap_time(t, period_));
}

bool
Signal::is_constant() const noexcept
{
  if (scale_ == 0.0 || std::holds_alternative<Constant>(kind_))
    return true;
  if (const auto* s = std::get_if<Sinusoid>(&kind_))
    return s->amplitude == 0.0;
  if (const auto* p = std::get_if<Piecewise>(&kind_))
    return std::all_of(p->values.begin(), p->values.end(),
                       [&](double v) { return v == p->values.front(); });
  return !std::get<Expression>(kind_).expr.uses_time();
}

void
Signal::compute_extrema()
{
  double lo = 0.0, hi = 0.0;
  if (const auto* c = std::get_if<Constant>(&kind_)) {
    lo = hi = c->value;
  } else if (const auto* s = std::get_if<Sinusoid>(&kind_)) {
    lo = s->offset - std::fabs(s->amplitude);
    hi = s->offset + std::fabs(s->amplitude);
  } else if (const auto* p = std::get_if<Piecewise>(&kind_)) {
    lo = *std::min_element(p->values.begin(), p->values.end());
    hi = *std::max_element(p->values.begin(), p->values.end());
  } else {
    constexpr int n = 4096;
    lo = INFINITY;
    hi = -INFINITY;
    for (int i = 0; i < n; ++i) {
      const double v = eval_wrapped(period_ * i / n);
      if (!std::isfinite(v))
        throw std::invalid_argument("signal is not finite at t = " + std::to_string(period_ * i / n));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  max_pos_ = std::max(0.0, hi);
  max_neg_ = std::max(0.0, -lo);
}

double
Signal::max_positive_part() const
{
  return scale_ >= 0.0 ? scale_ * max_pos_ : -scale_ * max_neg_;
}

double
Signal::max_negative_part() const
{
  return scale_ >= 0.0 ? scale_ * max_neg_ : -scale_ * max_pos_;
}

Signal
Signal::scaled(double c) const
{
  Signal s = *this;
  s.scale_ *= c;
  return s;
}

std::string
Signal::describe() const
{
  std::ostringstream os;
  if (scale_ != 1.0)
    os << scale_ << " * ";
  std::visit(
    [&](const auto& k) {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, Constant>) {
        os << k.value;
      } else if constexpr (std::is_same_v<K, Sinusoid>) {
        os << k.offset << " + " << k.amplitude << " * sin(2*pi*" << k.harmonic << "*t/T + " << k.phase
           << ")";
      } else if constexpr (std::is_same_v<K, Piecewise>) {
        os << "piecewise:";
        for (std::size_t i = 0; i < k.starts.size(); ++i)
          os << (i ? ", " : " ") << k.starts[i] << ":" << k.values[i];
      } else {
        os << k.expr.print();
      }
    },
    kind_);
  os << " (T = " << period_ << ")";
  return os.str();
}

// --- jumps -------------------------------------------------------------------

namespace {

double
normal_pdf(double x, double mean, double sd)
{
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double
normal_cdf(double x, double mean, double sd)
{
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

// Integral of g against the N(a, b^2) density, split at the given points.
double
normal_expectation(const std::function<double(double)>& g,
                   double a,
                   double b,
                   std::vector<double> cuts,
                   double lo,
                   double hi)
{
  lo = std::max(lo, a - 40.0 * b);
  hi = std::min(hi, a + 40.0 * b);
  if (!(hi > lo))
    return 0.0;
  return quad::integrate([&](double x) { return g(x) * normal_pdf(x, a, b); }, lo, hi, 1e-15, cuts)
    .value;
}

// Integral of x^k over [lo, hi].
double
power_integral(int k, double lo, double hi)
{
  if (!(hi > lo))
    return 0.0;
  return (std::pow(hi, k + 1) - std::pow(lo, k + 1)) / (k + 1);
}

// Integral of |x| over [lo, hi].
double
abs_integral(double lo, double hi)
{
  if (!(hi > lo))
    return 0.0;
  if (lo >= 0.0)
    return power_integral(1, lo, hi);
  if (hi <= 0.0)
    return power_integral(1, -hi, -lo);
  return power_integral(1, 0.0, hi) + power_integral(1, 0.0, -lo);
}

} // namespace

double
JumpLaw::sample(Rng& rng) const
{
  switch (kind) {
    case Kind::constant: return a;
    case Kind::normal: return a + b * std::normal_distribution<double>()(rng);
    case Kind::exponential: return std::exponential_distribution<double>(1.0 / a)(rng);
    case Kind::uniform: return std::uniform_real_distribution<double>(a, b)(rng);
  }
  return NAN;
}

double
JumpLaw::mean() const
{
  switch (kind) {
    case Kind::constant: return a;
    case Kind::normal: return a;
    case Kind::exponential: return a;
    case Kind::uniform: return 0.5 * (a + b);
  }
  return NAN;
}

double
JumpLaw::second_moment() const
{
  switch (kind) {
    case Kind::constant: return a * a;
    case Kind::normal: return a * a + b * b;
    case Kind::exponential: return 2.0 * a * a;
    case Kind::uniform: return (a * a + a * b + b * b) / 3.0;
  }
  return NAN;
}

double
JumpLaw::tail_abs_moment() const
{
  switch (kind) {
    case Kind::constant: return std::fabs(a) > 1.0 ? std::fabs(a) : 0.0;
    case Kind::normal: {
      auto g = [](double x) { return std::fabs(x); };
      return normal_expectation(g, a, b, {}, -INFINITY, -1.0) +
             normal_expectation(g, a, b, {}, 1.0, INFINITY);
    }
    case Kind::exponential: return (1.0 + a) * std::exp(-1.0 / a);
    case Kind::uniform:
      return (abs_integral(a, std::min(b, -1.0)) + abs_integral(std::max(a, 1.0), b)) / (b - a);
  }
  return NAN;
}

double
JumpLaw::small_jump_mean() const
{
  switch (kind) {
    case Kind::constant: return std::fabs(a) <= 1.0 ? a : 0.0;
    case Kind::normal:
      return normal_expectation([](double x) { return x; }, a, b, { 0.0 }, -1.0, 1.0);
    case Kind::exponential: return a - (1.0 + a) * std::exp(-1.0 / a);
    case Kind::uniform: return power_integral(1, std::max(a, -1.0), std::min(b, 1.0)) / (b - a);
  }
  return NAN;
}

double
JumpLaw::truncated_second_moment(double eps) const
{
  const double e2 = eps * eps;
  switch (kind) {
    case Kind::constant: return std::min(a * a, e2);
    case Kind::normal: {
      const double outside = normal_cdf(-eps, a, b) + (1.0 - normal_cdf(eps, a, b));
      return e2 * outside +
             normal_expectation([](double x) { return x * x; }, a, b, { 0.0 }, -eps, eps);
    }
    case Kind::exponential: {
      const double u = eps / a;
      return 2.0 * a * a * boost::math::gamma_p(3.0, u) + e2 * std::exp(-u);
    }
    case Kind::uniform: {
      const double lo = std::max(a, -eps), hi = std::min(b, eps);
      const double inner = power_integral(2, lo, hi);
      const double outer = e2 * (std::max(0.0, std::min(b, -eps) - a) + std::max(0.0, b - std::max(a, eps)));
      return (inner + outer) / (b - a);
    }
  }
  return NAN;
}

std::string
JumpLaw::describe() const
{
  std::ostringstream os;
  switch (kind) {
    case Kind::constant: os << "constant(" << a << ")"; break;
    case Kind::normal: os << "normal(" << a << ", " << b << ")"; break;
    case Kind::exponential: os << "exponential(mean " << a << ")"; break;
    case Kind::uniform: os << "uniform(" << a << ", " << b << ")"; break;
  }
  return os.str();
}

double
CompoundPoissonJumps::compensator_drift() const
{
  return compensation == Compensation::small_jumps ? rate * law.small_jump_mean() : 0.0;
}

// --- model -------------------------------------------------------------------

PeriodicSDEModel::PeriodicSDEModel(ModelParts parts)
  : parts_(std::move(parts))
{
  if (parts_.d < 1 || parts_.m < 1)
    throw std::invalid_argument("model dimensions d and m must be >= 1");
  if (!(parts_.period > 0.0) || !std::isfinite(parts_.period))
    throw ValidationError("T", "period T must be positive and finite");
  if (!parts_.drift || !parts_.diffusion)
    throw std::invalid_argument("model needs drift and diffusion fields");
  if (parts_.jumps) {
    if (!(parts_.jumps->rate >= 0.0) || !std::isfinite(parts_.jumps->rate))
      throw ValidationError("jump_rate", "jump rate must be finite and >= 0");
    if (parts_.d != 1)
      throw UnsupportedModel("jump parts are supported for d = 1 only");
  }
  if (parts_.declared_C0 && !(*parts_.declared_C0 >= 0.0))
    throw ValidationError("C0", "declared C0 must be >= 0");
}

void
PeriodicSDEModel::drift_into(double t, std::span<const double> x, std::span<double> out) const
{
  parts_.drift(parts_.wrap_drift_time ? wrap_time(t, parts_.period) : t, x, out);
}

std::vector<double>
eval_drift(const PeriodicSDEModel& model, double t, std::span<const double> x)
{
  if (x.size() != model.d())
    throw std::invalid_argument("eval_drift: state has length " + std::to_string(x.size()) +
                                ", model dimension is " + std::to_string(model.d()));
  std::vector<double> out(model.d());
  model.drift_into(t, x, out);
  for (double v : out)
    if (!std::isfinite(v))
      throw EvaluationError("drift is not finite at t = " + std::to_string(t), t,
                            std::vector<double>(x.begin(), x.end()));
  return out;
}

std::pair<double, double>
extreme_eigenvalues(std::span<const double> a, std::size_t d)
{
  double lo = 0.0, hi = 0.0;
  if (d == 1) {
    lo = hi = a[0];
  } else if (d == 2) {
    const double tr = a[0] + a[3];
    const double det = a[0] * a[3] - a[1] * a[2];
    const double diff = a[0] - a[3];
    const double disc = std::sqrt(diff * diff + 4.0 * a[1] * a[2]);
    hi = 0.5 * (tr + disc);
    // the product form avoids cancellation when the small eigenvalue is tiny
    lo = hi > 0.0 ? det / hi : 0.5 * (tr - disc);
  } else {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      a.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    lo = solver.eigenvalues().minCoeff();
    hi = solver.eigenvalues().maxCoeff();
  }
  return { std::max(0.0, lo), std::max(0.0, hi) };
}

DiffusionEval
eval_diffusion(const PeriodicSDEModel& model, std::span<const double> x)
{
  const std::size_t d = model.d(), m = model.m();
  if (x.size() != d)
    throw std::invalid_argument("eval_diffusion: state has length " + std::to_string(x.size()) +
                                ", model dimension is " + std::to_string(d));
  DiffusionEval out;
  out.sigma.assign(d * m, 0.0);
  model.diffusion_into(x, out.sigma);
  for (double v : out.sigma)
    if (!std::isfinite(v))
      throw EvaluationError("diffusion is not finite", 0.0, std::vector<double>(x.begin(), x.end()));
  out.a.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k)
        s += out.sigma[i * m + k] * out.sigma[j * m + k];
      out.a[i * d + j] = s;
      out.a[j * d + i] = s;
    }
  std::tie(out.lambda_min, out.lambda_max) = extreme_eigenvalues(out.a, d);
  if (out.lambda_min > out.lambda_max)
    out.lambda_min = out.lambda_max;
  return out;
}

// --- catalog -------------------------------------------------------------------

namespace {

std::string
trim(std::string s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

class Params
{
public:
  Params(std::string model, const ParamMap& raw)
    : model_(std::move(model))
    , raw_(raw)
  {
  }

  bool has(const std::string& key) const { return raw_.count(key) > 0; }

  double number(const std::string& key) const
  {
    const auto it = raw_.find(key);
    if (it == raw_.end())
      throw ValidationError(key, model_ + ": missing required parameter '" + key + "'");
    return to_number(key, it->second);
  }

  double number_or(const std::string& key, double fallback) const
  {
    return has(key) ? number(key) : fallback;
  }

  std::string text_or(const std::string& key, const std::string& fallback) const
  {
    const auto it = raw_.find(key);
    return it == raw_.end() ? fallback : trim(it->second);
  }

  double positive(const std::string& key) const
  {
    const double v = number(key);
    if (!(v > 0.0))
      throw ValidationError(key, model_ + ": parameter '" + key + "' must be > 0, got " + std::to_string(v));
    return v;
  }

  double to_number(const std::string& key, const std::string& text) const
  {
    const std::string s = trim(text);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(v))
      return v;
    // constant expressions such as 2*pi
    try {
      const auto e = coeffexpr::parse(s, 1);
      if (!e.uses_time() && !e.uses_state()) {
        const std::vector<double> slots(e.slot_count(), 0.0);
        v = e.eval(slots);
        if (std::isfinite(v))
          return v;
      }
    } catch (const std::exception&) {
    }
    throw ValidationError(key, model_ + ": parameter '" + key + "' is not a number: '" + s + "'");
  }

  void check_keys(const std::vector<std::string>& allowed) const
  {
    for (const auto& [k, v] : raw_)
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        throw ValidationError(k, model_ + ": unknown parameter '" + k + "'");
  }

private:
  std::string model_;
  const ParamMap& raw_;
};

coeffexpr::Expr
parse_coefficient(const std::string& key,
                  const std::string& text,
                  std::size_t d,
                  const std::map<std::string, double>& params,
                  std::vector<double>& slots)
{
  std::vector<std::string> names;
  for (const auto& [k, v] : params)
    names.push_back(k);
  try {
    auto e = coeffexpr::parse(text, d, names);
    slots.assign(e.slot_count(), 0.0);
    std::size_t p = 0;
    for (const auto& [k, v] : params)
      slots[1 + d + p++] = v;
    return e;
  } catch (const coeffexpr::ParseError& err) {
    throw ValidationError(key, key + ": " + err.what());
  }
}

// An expression-backed scalar coefficient (t, x) -> value.
struct ExprField
{
  coeffexpr::Expr expr;
  std::vector<double> slots;

  double operator()(double t, std::span<const double> x) const
  {
    thread_local std::vector<double> s;
    s = slots;
    s[0] = t;
    std::copy(x.begin(), x.end(), s.begin() + 1);
    return expr.eval(s);
  }
};

ExprField
make_field(const std::string& key,
           const std::string& text,
           std::size_t d,
           const std::map<std::string, double>& params)
{
  ExprField f;
  f.expr = parse_coefficient(key, text, d, params, f.slots);
  return f;
}

std::map<std::string, double>
numeric_params(const Params& p, const std::vector<std::string>& keys)
{
  std::map<std::string, double> out;
  for (const auto& k : keys)
    if (p.has(k))
      out[k] = p.number(k);
  return out;
}

Signal
signal_param(const Params& p,
             const std::string& key,
             const std::string& fallback,
             double T,
             const std::map<std::string, double>& params)
{
  const std::string text = p.text_or(key, fallback);
  try {
    return parse_signal(text, T, params);
  } catch (const std::exception& err) {
    throw ValidationError(key, key + ": " + err.what());
  }
}

std::optional<double>
declared_c0(const Params& p)
{
  if (!p.has("C0"))
    return std::nullopt;
  const double v = p.number("C0");
  if (!(v >= 0.0))
    throw ValidationError("C0", "C0 must be >= 0");
  return v;
}

PeriodicSDEModel
make_ou_gauss(const Params& p)
{
  const double gamma = p.positive("gamma");
  const double sigma = p.positive("sigma");
  const double T = p.positive("T");
  const auto params = numeric_params(p, { "gamma", "sigma", "T" });
  Signal S = signal_param(p, "signal", "0", T, params);

  ModelParts parts;
  parts.name = "ou-gauss";
  parts.period = T;
  parts.drift = [S, gamma](double t, std::span<const double> x, std::span<double> out) {
    out[0] = S(t) - gamma * x[0];
  };
  parts.diffusion = [sigma](std::span<const double>, std::span<double> out) { out[0] = sigma; };
  parts.declared_C0 = p.has("C0") ? declared_c0(p) : std::optional<double>(gamma);
  parts.split = DriftSplit{ { S }, [gamma](std::span<const double> x, std::span<double> out) {
                             out[0] = -gamma * x[0];
                           } };
  parts.ou = OuCoefficients{ gamma, sigma, S };
  parts.time_homogeneous = S.is_constant();
  parts.parameters = params;
  return PeriodicSDEModel(std::move(parts));
}

JumpLaw::Kind
parse_jump_kind(const std::string& s)
{
  if (s == "constant")
    return JumpLaw::Kind::constant;
  if (s == "normal")
    return JumpLaw::Kind::normal;
  if (s == "exponential")
    return JumpLaw::Kind::exponential;
  if (s == "uniform")
    return JumpLaw::Kind::uniform;
  throw ValidationError("jump_law", "jump_law must be constant, normal, exponential or uniform, got '" + s + "'");
}

PeriodicSDEModel
make_ou_levy(const Params& p)
{
  const double gamma = p.positive("gamma");
  const double T = p.positive("T");
  const auto params = numeric_params(p, { "gamma", "T", "jump_rate", "jump_a", "jump_b" });
  Signal S = signal_param(p, "signal", "0", T, params);

  CompoundPoissonJumps jumps;
  jumps.rate = p.number("jump_rate");
  if (!(jumps.rate >= 0.0))
    throw ValidationError("jump_rate", "ou-levy: jump_rate must be >= 0");
  jumps.law.kind = parse_jump_kind(p.text_or("jump_law", "constant"));
  jumps.law.a = p.number_or("jump_a", 1.0);
  jumps.law.b = p.number_or("jump_b", 0.0);
  if (jumps.law.kind == JumpLaw::Kind::normal && !(jumps.law.b > 0.0))
    throw ValidationError("jump_b", "ou-levy: normal jumps need jump_b (sd) > 0");
  if (jumps.law.kind == JumpLaw::Kind::exponential && !(jumps.law.a > 0.0))
    throw ValidationError("jump_a", "ou-levy: exponential jumps need jump_a (mean) > 0");
  if (jumps.law.kind == JumpLaw::Kind::uniform && !(jumps.law.b > jumps.law.a))
    throw ValidationError("jump_b", "ou-levy: uniform jumps need jump_b > jump_a");
  const std::string comp = p.text_or("compensation", "none");
  if (comp == "none")
    jumps.compensation = CompoundPoissonJumps::Compensation::none;
  else if (comp == "small_jumps")
    jumps.compensation = CompoundPoissonJumps::Compensation::small_jumps;
  else
    throw ValidationError("compensation", "compensation must be none or small_jumps");

  const double comp_drift = jumps.compensator_drift();
  ModelParts parts;
  parts.name = "ou-levy";
  parts.period = T;
  // the compensator of the small jumps enters as a constant drift
  parts.drift = [S, gamma, comp_drift](double t, std::span<const double> x, std::span<double> out) {
    out[0] = S(t) - gamma * x[0] - comp_drift;
  };
  parts.diffusion = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  parts.jumps = jumps;
  parts.declared_C0 = p.has("C0") ? declared_c0(p) : std::optional<double>(gamma);
  parts.split = DriftSplit{ { S }, [gamma, comp_drift](std::span<const double> x, std::span<double> out) {
                             out[0] = -gamma * x[0] - comp_drift;
                           } };
  parts.ou = OuCoefficients{ gamma, 0.0, S };
  parts.time_homogeneous = S.is_constant();
  parts.parameters = params;
  return PeriodicSDEModel(std::move(parts));
}

PeriodicSDEModel
make_pearson(const Params& p)
{
  const double theta = p.positive("theta");
  const double c0 = p.positive("c0");
  const double c1 = p.number_or("c1", 0.0);
  const double T = p.positive("T");
  auto params = numeric_params(p, { "theta", "c0", "c1", "T" });
  params["c1"] = c1;
  Signal S = signal_param(p, "signal", "1", T, params);
  ExprField sig = make_field("sigma", p.text_or("sigma", "1"), 1, params);
  if (sig.expr.uses_time())
    throw ValidationError("sigma", "pearson: sigma(x) may not depend on t");

  ModelParts parts;
  parts.name = "pearson";
  parts.period = T;
  parts.drift = [S, theta](double t, std::span<const double> x, std::span<double> out) {
    out[0] = theta * (S(t) - x[0]);
  };
  parts.diffusion = [sig, c0, c1](std::span<const double> x, std::span<double> out) {
    const double u = x[0] - c1;
    out[0] = sig(0.0, x) * std::sqrt(c0 + u * u);
  };
  parts.declared_C0 = declared_c0(p);
  parts.split = DriftSplit{ { S.scaled(theta) }, [theta](std::span<const double> x, std::span<double> out) {
                             out[0] = -theta * x[0];
                           } };
  parts.time_homogeneous = S.is_constant();
  parts.parameters = params;
  return PeriodicSDEModel(std::move(parts));
}

PeriodicSDEModel
make_gbm(const Params& p)
{
  const double mu = p.number("mu");
  const double sigma = p.number("sigma");
  const double T = p.has("T") ? p.positive("T") : 1.0;
  ModelParts parts;
  parts.name = "gbm";
  parts.period = T;
  parts.drift = [mu](double, std::span<const double> x, std::span<double> out) { out[0] = mu * x[0]; };
  parts.diffusion = [sigma](std::span<const double> x, std::span<double> out) { out[0] = sigma * x[0]; };
  parts.declared_C0 = p.has("C0") ? declared_c0(p) : std::optional<double>(std::fabs(mu) + std::fabs(sigma));
  parts.split = DriftSplit{ { Signal::constant(0.0, T) }, [mu](std::span<const double> x, std::span<double> out) {
                             out[0] = mu * x[0];
                           } };
  parts.time_homogeneous = true;
  parts.parameters = { { "mu", mu }, { "sigma", sigma }, { "T", T } };
  return PeriodicSDEModel(std::move(parts));
}

PeriodicSDEModel
make_degenerate2d(const Params& p)
{
  const double T = p.has("T") ? p.positive("T") : 1.0;
  std::map<std::string, double> params{ { "T", T } };
  ExprField b1 = make_field("b1", p.text_or("b1", "-x1"), 2, params);
  ExprField b2 = make_field("b2", p.text_or("b2", "x1 - x2"), 2, params);
  ExprField sig = make_field("sigma", p.text_or("sigma", "1"), 2, params);
  if (sig.expr.uses_time())
    throw ValidationError("sigma", "degenerate2d: sigma(x) may not depend on t");

  ModelParts parts;
  parts.name = "degenerate2d";
  parts.d = 2;
  parts.m = 1;
  parts.period = T;
  parts.drift = [b1, b2](double t, std::span<const double> x, std::span<double> out) {
    out[0] = b1(t, x);
    out[1] = b2(t, x);
  };
  parts.diffusion = [sig](std::span<const double> x, std::span<double> out) {
    out[0] = sig(0.0, x);
    out[1] = 0.0;
  };
  parts.declared_C0 = declared_c0(p);
  parts.time_homogeneous = !b1.expr.uses_time() && !b2.expr.uses_time();
  parts.parameters = params;
  return PeriodicSDEModel(std::move(parts));
}

bool
starts_with(const std::string& s, const std::string& prefix)
{
  return s.rfind(prefix, 0) == 0;
}

PeriodicSDEModel
make_custom(const Params& p, const ParamMap& raw)
{
  const double dd = p.number("d");
  const double mm = p.number_or("m", dd);
  if (!(dd >= 1 && dd <= 16 && dd == std::floor(dd)))
    throw ValidationError("d", "custom: d must be an integer in [1, 16]");
  if (!(mm >= 1 && mm <= 16 && mm == std::floor(mm)))
    throw ValidationError("m", "custom: m must be an integer in [1, 16]");
  const auto d = static_cast<std::size_t>(dd), m = static_cast<std::size_t>(mm);
  const double T = p.has("T") ? p.positive("T") : 1.0;

  std::map<std::string, double> params{ { "T", T } };
  for (const auto& [k, v] : raw)
    if (starts_with(k, "p_"))
      params[k.substr(2)] = p.number(k);

  std::vector<std::string> allowed{ "d", "m", "T", "C0" };
  for (const auto& [k, v] : raw)
    if (starts_with(k, "p_"))
      allowed.push_back(k);

  const bool split_form = p.has("hat1");
  std::vector<ExprField> drift, hat;
  std::vector<Signal> signals;
  for (std::size_t i = 1; i <= d; ++i) {
    const std::string idx = std::to_string(i);
    if (split_form) {
      allowed.push_back("hat" + idx);
      allowed.push_back("signal" + idx);
      if (!p.has("hat" + idx))
        throw ValidationError("hat" + idx, "custom: missing 'hat" + idx + "'");
      hat.push_back(make_field("hat" + idx, p.text_or("hat" + idx, ""), d, params));
      if (hat.back().expr.uses_time())
        throw ValidationError("hat" + idx, "custom: hat" + idx + " may not depend on t");
      signals.push_back(signal_param(p, "signal" + idx, "0", T, params));
    } else {
      allowed.push_back("drift" + idx);
      if (!p.has("drift" + idx))
        throw ValidationError("drift" + idx, "custom: missing 'drift" + idx + "'");
      drift.push_back(make_field("drift" + idx, p.text_or("drift" + idx, ""), d, params));
    }
  }
  std::vector<ExprField> diff;
  for (std::size_t i = 1; i <= d; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::string key = "diffusion" + std::to_string(i) + "_" + std::to_string(j);
      allowed.push_back(key);
      const std::string fallback = (i == j) ? "1" : "0";
      diff.push_back(make_field(key, p.text_or(key, fallback), d, params));
      if (diff.back().expr.uses_time())
        throw ValidationError(key, "custom: diffusion entries may not depend on t");
    }
  p.check_keys(allowed);

  ModelParts parts;
  parts.name = "custom";
  parts.d = d;
  parts.m = m;
  parts.period = T;
  if (split_form) {
    parts.drift = [hat, signals](double t, std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < hat.size(); ++i)
        out[i] = signals[i](t) + hat[i](t, x);
    };
    parts.split = DriftSplit{ signals, [hat](std::span<const double> x, std::span<double> out) {
                               for (std::size_t i = 0; i < hat.size(); ++i)
                                 out[i] = hat[i](0.0, x);
                             } };
    parts.time_homogeneous = std::all_of(signals.begin(), signals.end(), [](const Signal& s) {
      return s.is_constant();
    });
  } else {
    parts.drift = [drift](double t, std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < drift.size(); ++i)
        out[i] = drift[i](t, x);
    };
    parts.time_homogeneous =
      std::none_of(drift.begin(), drift.end(), [](const ExprField& f) { return f.expr.uses_time(); });
  }
  parts.diffusion = [diff](std::span<const double> x, std::span<double> out) {
    for (std::size_t k = 0; k < diff.size(); ++k)
      out[k] = diff[k](0.0, x);
  };
  parts.declared_C0 = declared_c0(p);
  parts.parameters = params;
  return PeriodicSDEModel(std::move(parts));
}

} // namespace

const std::vector<std::string>&
catalog_names()
{
  static const std::vector<std::string> names{ "ou-gauss", "ou-levy", "pearson", "gbm", "degenerate2d", "custom" };
  return names;
}

std::vector<std::string>
catalog_keys(const std::string& name)
{
  if (name == "ou-gauss")
    return { "gamma", "sigma", "signal", "T", "C0" };
  if (name == "ou-levy")
    return { "gamma", "signal", "T", "jump_rate", "jump_law", "jump_a", "jump_b", "compensation", "C0" };
  if (name == "pearson")
    return { "theta", "c0", "c1", "sigma", "signal", "T", "C0" };
  if (name == "gbm")
    return { "mu", "sigma", "T", "C0" };
  if (name == "degenerate2d")
    return { "b1", "b2", "sigma", "T", "C0" };
  if (name == "custom")
    return {};
  throw ValidationError("name", "unknown model '" + name + "'");
}

PeriodicSDEModel
catalog_model(const std::string& name, const ParamMap& params)
{
  const Params p(name, params);
  if (name == "custom")
    return make_custom(p, params);
  p.check_keys(catalog_keys(name));
  if (name == "ou-gauss")
    return make_ou_gauss(p);
  if (name == "ou-levy")
    return make_ou_levy(p);
  if (name == "pearson")
    return make_pearson(p);
  if (name == "gbm")
    return make_gbm(p);
  return make_degenerate2d(p);
}

Signal
parse_signal(const std::string& raw, double period, const std::map<std::string, double>& params)
{
  const std::string text = trim(raw);
  if (starts_with(text, "piecewise:")) {
    std::vector<double> starts, values;
    std::stringstream ss(text.substr(10));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("piecewise entries must be start:value, got '" + trim(item) + "'");
      const std::string a = trim(item.substr(0, colon)), b = trim(item.substr(colon + 1));
      double s = 0.0, v = 0.0;
      const auto r1 = std::from_chars(a.data(), a.data() + a.size(), s);
      const auto r2 = std::from_chars(b.data(), b.data() + b.size(), v);
      if (r1.ec != std::errc() || r1.ptr != a.data() + a.size() || r2.ec != std::errc() ||
          r2.ptr != b.data() + b.size())
        throw std::invalid_argument("bad piecewise entry '" + trim(item) + "'");
      starts.push_back(s);
      values.push_back(v);
    }
    return Signal::piecewise_constant(std::move(starts), std::move(values), period);
  }

  std::map<std::string, double> bound = params;
  bound["T"] = period;
  std::vector<std::string> names;
  for (const auto& [k, v] : bound)
    names.push_back(k);
  auto e = coeffexpr::parse(text, 1, names);
  if (e.uses_state())
    throw std::invalid_argument("signal may not depend on x");
  if (!e.uses_time()) {
    std::vector<double> slots(e.slot_count(), 0.0);
    std::size_t p = 0;
    for (const auto& [k, v] : bound)
      slots[2 + p++] = v;
    return Signal::constant(e.eval(slots), period);
  }
  return Signal::expression(std::move(e), period, bound);
}

} // namespace pergo
