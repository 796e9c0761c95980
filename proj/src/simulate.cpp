#include "pergo/simulate.hpp"
#include "pergo/closedform.hpp"
#include "pergo/error.hpp"
#include "pergo/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace pergo {

Scheme
parse_scheme(const std::string& name)
{
  if (name == "euler-maruyama" || name == "em")
    return Scheme::euler_maruyama;
  if (name == "exact-ou")
    return Scheme::exact_ou;
  if (name == "levy-ou")
    return Scheme::levy_ou;
  throw std::invalid_argument("unknown scheme '" + name + "' (euler-maruyama, exact-ou, levy-ou)");
}

std::string
scheme_name(Scheme s)
{
  switch (s) {
    case Scheme::euler_maruyama: return "euler-maruyama";
    case Scheme::exact_ou: return "exact-ou";
    case Scheme::levy_ou: return "levy-ou";
  }
  return "?";
}

std::size_t
steps_per_period(double T, double h)
{
  if (!(h > 0.0) || !std::isfinite(h))
    throw std::invalid_argument("step h must be positive and finite");
  if (!(T > 0.0) || !std::isfinite(T))
    throw std::invalid_argument("period T must be positive and finite");
  const double n = std::round(T / h);
  if (n < 1.0 || std::fabs(T - n * h) > 1e-12 * T)
    throw std::invalid_argument("step h = " + std::to_string(h) + " does not divide T = " + std::to_string(T));
  return static_cast<std::size_t>(n);
}

// --- bundle ----------------------------------------------------------------------

TrajectoryBundle::TrajectoryBundle(std::size_t d,
                                   std::size_t n_paths,
                                   std::size_t n_records,
                                   double step,
                                   std::size_t stride,
                                   double period,
                                   SimulationPlan plan)
  : d_(d)
  , n_paths_(n_paths)
  , n_records_(n_records)
  , step_(step)
  , stride_(stride)
  , period_(period)
  , plan_(std::move(plan))
  , data_(d * n_paths * n_records, NAN)
  , exploded_(n_paths)
{
}

double
TrajectoryBundle::time(std::size_t j) const
{
  return static_cast<double>(j * stride_) * step_;
}

std::span<const double>
TrajectoryBundle::state(std::size_t path, std::size_t j) const
{
  return { data_.data() + (path * n_records_ + j) * d_, d_ };
}

std::span<double>
TrajectoryBundle::state(std::size_t path, std::size_t j)
{
  return { data_.data() + (path * n_records_ + j) * d_, d_ };
}

std::span<const double>
TrajectoryBundle::path(std::size_t i) const
{
  return { data_.data() + i * n_records_ * d_, n_records_ * d_ };
}

void
TrajectoryBundle::mark_exploded(std::size_t path, std::size_t record)
{
  if (!exploded_[path])
    exploded_[path] = record;
}

std::size_t
TrajectoryBundle::n_exploded() const
{
  std::size_t n = 0;
  for (const auto& e : exploded_)
    n += e.has_value();
  return n;
}

// --- stepping kernels ------------------------------------------------------------

namespace {

bool
blown_up(std::span<const double> x)
{
  for (double v : x)
    if (!std::isfinite(v) || std::fabs(v) > 1e300)
      return true;
  return false;
}

// Poisson event clock of a compound Poisson part.
struct EventClock
{
  const CompoundPoissonJumps* jumps = nullptr;
  double next = INFINITY;

  void start(const std::optional<CompoundPoissonJumps>& j, double t0, Rng& rng)
  {
    jumps = j && j->rate > 0.0 ? &*j : nullptr;
    next = jumps ? t0 + std::exponential_distribution<double>(jumps->rate)(rng) : INFINITY;
  }

  double advance(Rng& rng)
  {
    const double size = jumps->law.sample(rng);
    next += std::exponential_distribution<double>(jumps->rate)(rng);
    return size;
  }
};

class EulerStepper
{
public:
  explicit EulerStepper(const PeriodicSDEModel& model)
    : model_(model)
    , b_(model.d())
    , sig_(model.d() * model.m())
    , z_(model.m())
  {
  }

  void step(double t, double dt, std::span<double> x, Rng& rng, double sign)
  {
    const std::size_t d = model_.d(), m = model_.m();
    model_.drift_into(t, x, b_);
    model_.diffusion_into(x, sig_);
    const double root = std::sqrt(dt);
    for (auto& z : z_)
      z = sign * normal_(rng);
    for (std::size_t i = 0; i < d; ++i) {
      double noise = 0.0;
      for (std::size_t k = 0; k < m; ++k)
        noise += sig_[i * m + k] * z_[k];
      x[i] += b_[i] * dt + root * noise;
    }
  }

  // From t to t + dt, splitting at jump events.
  void step_with_jumps(double t, double dt, std::span<double> x, Rng& rng, double sign, EventClock& clock)
  {
    const double end = t + dt;
    double cur = t;
    while (clock.next <= end) {
      const double tau = clock.next;
      if (tau > cur)
        step(cur, tau - cur, x, rng, sign);
      x[0] += clock.advance(rng);
      cur = tau;
    }
    if (end > cur)
      step(cur, end - cur, x, rng, sign);
  }

private:
  const PeriodicSDEModel& model_;
  std::vector<double> b_, sig_, z_;
  std::normal_distribution<double> normal_;
};

void
initial_state(const PeriodicSDEModel& model, const SimulationPlan& plan, Rng& rng, std::span<double> out)
{
  if (plan.initial_sampler) {
    plan.initial_sampler(rng, out);
    return;
  }
  std::copy(plan.initial_state.begin(), plan.initial_state.end(), out.begin());
  (void)model;
}

// Exact OU transition over [s, t] with optional jumps, given the deterministic
// part of the mean.
double
ou_step(const OuCoefficients& ou,
        double comp_drift,
        double x,
        double s,
        double t,
        double decay,
        double conv,
        double sd,
        EventClock& clock,
        Rng& rng,
        std::normal_distribution<double>& normal)
{
  double y = decay * x + conv;
  if (comp_drift != 0.0)
    y -= comp_drift * -std::expm1(-ou.gamma * (t - s)) / ou.gamma;
  while (clock.next <= t) {
    const double tau = clock.next;
    y += std::exp(-ou.gamma * (t - tau)) * clock.advance(rng);
  }
  if (sd > 0.0)
    y += sd * normal(rng);
  return y;
}

} // namespace

TrajectoryBundle
simulate_paths(const PeriodicSDEModel& model, const SimulationPlan& plan)
{
  const double T = model.period();
  const double h = plan.step;
  const std::size_t n_per = steps_per_period(T, h);
  if (plan.horizon_periods < 1)
    throw std::invalid_argument("horizon_periods must be >= 1");
  if (plan.n_paths < 1)
    throw std::invalid_argument("n_paths must be >= 1");
  if (plan.record_stride < 1 || n_per % plan.record_stride != 0)
    throw std::invalid_argument("record_stride must divide T/h = " + std::to_string(n_per));
  if (!plan.initial_sampler && plan.initial_state.size() != model.d())
    throw std::invalid_argument("initial state has length " + std::to_string(plan.initial_state.size()) +
                                ", model dimension is " + std::to_string(model.d()));

  const bool has_jumps = model.jumps() && model.jumps()->rate > 0.0;
  const OuCoefficients* ou = model.ou() ? &*model.ou() : nullptr;
  if (plan.scheme != Scheme::euler_maruyama) {
    if (!ou)
      throw UnsupportedModel("scheme " + scheme_name(plan.scheme) + " needs an OU model, got '" + model.name() + "'");
    if (plan.scheme == Scheme::exact_ou && model.jumps())
      throw UnsupportedModel("exact-ou does not handle jump parts; use levy-ou");
    if (plan.scheme == Scheme::levy_ou && !model.jumps())
      throw UnsupportedModel("levy-ou needs a jump part");
  }
  if (plan.antithetic && (plan.scheme != Scheme::euler_maruyama || has_jumps))
    throw std::invalid_argument("antithetic pairing is only available for Euler-Maruyama without jumps");
  if (plan.antithetic && plan.path_offset % 2 != 0)
    throw std::invalid_argument("antithetic pairing needs an even path offset");

  const std::size_t n_steps = plan.horizon_periods * n_per;
  const std::size_t stride = plan.record_stride;
  TrajectoryBundle bundle(model.d(), plan.n_paths, n_steps / stride + 1, h, stride, T, plan);

  // exact schemes: per-phase deterministic parts are shared by all paths
  std::vector<double> conv;
  double decay = 0.0, sd = 0.0, comp = 0.0;
  if (ou) {
    if (plan.scheme != Scheme::euler_maruyama) {
      conv.resize(n_per);
      for (std::size_t p = 0; p < n_per; ++p)
        conv[p] = signal_convolution(ou->signal, ou->gamma, static_cast<double>(p) * h,
                                     static_cast<double>(p + 1) * h);
    }
    decay = std::exp(-ou->gamma * h);
    sd = ou->sigma * std::sqrt(-std::expm1(-2.0 * ou->gamma * h) / (2.0 * ou->gamma));
    comp = model.jumps() ? model.jumps()->compensator_drift() : 0.0;
  }

  parallel_for(plan.n_paths, [&](std::size_t i) {
    const std::size_t g = plan.path_offset + i;
    const bool mirrored = plan.antithetic && (g % 2 == 1);
    Rng rng = make_stream(plan.seed, plan.antithetic ? g / 2 : g);
    const double sign = mirrored ? -1.0 : 1.0;
    std::vector<double> x(model.d());
    initial_state(model, plan, rng, x);
    auto first = bundle.state(i, 0);
    std::copy(x.begin(), x.end(), first.begin());
    if (blown_up(x)) {
      bundle.mark_exploded(i, 0);
      return;
    }

    EventClock clock;
    clock.start(model.jumps(), 0.0, rng);
    EulerStepper em(model);
    std::normal_distribution<double> normal;
    for (std::size_t j = 0; j < n_steps; ++j) {
      const double t = static_cast<double>(j) * h;
      const double t_next = static_cast<double>(j + 1) * h;
      if (plan.scheme == Scheme::euler_maruyama) {
        if (clock.jumps)
          em.step_with_jumps(t, t_next - t, x, rng, sign, clock);
        else
          em.step(t, h, x, rng, sign);
      } else {
        x[0] = ou_step(*ou, comp, x[0], t, t_next, decay, conv[j % n_per], sd, clock, rng, normal);
      }
      if (blown_up(x)) {
        bundle.mark_exploded(i, (j + stride) / stride);
        return;
      }
      if ((j + 1) % stride == 0) {
        auto rec = bundle.state(i, (j + 1) / stride);
        std::copy(x.begin(), x.end(), rec.begin());
      }
    }
  });
  return bundle;
}

TrajectoryBundle
simulate_ou_exact(double gamma, double sigma, const Signal& S, SimulationPlan plan)
{
  ModelParts parts;
  if (!(gamma > 0.0))
    throw std::invalid_argument("gamma must be > 0");
  if (!(sigma > 0.0))
    throw std::invalid_argument("sigma must be > 0");
  parts.name = "ou-gauss";
  parts.period = S.period();
  parts.drift = [S, gamma](double t, std::span<const double> x, std::span<double> out) {
    out[0] = S(t) - gamma * x[0];
  };
  parts.diffusion = [sigma](std::span<const double>, std::span<double> out) { out[0] = sigma; };
  parts.ou = OuCoefficients{ gamma, sigma, S };
  plan.scheme = Scheme::exact_ou;
  return simulate_paths(PeriodicSDEModel(std::move(parts)), plan);
}

TrajectoryBundle
simulate_levy_ou(double gamma, const Signal& S, const CompoundPoissonJumps& jumps, SimulationPlan plan)
{
  if (!(gamma > 0.0))
    throw std::invalid_argument("gamma must be > 0");
  if (!std::isfinite(jumps.rate))
    throw UnsupportedModel("infinite-activity jump parts are not supported");
  const double comp = jumps.compensator_drift();
  ModelParts parts;
  parts.name = "ou-levy";
  parts.period = S.period();
  parts.drift = [S, gamma, comp](double t, std::span<const double> x, std::span<double> out) {
    out[0] = S(t) - gamma * x[0] - comp;
  };
  parts.diffusion = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  parts.jumps = jumps;
  parts.ou = OuCoefficients{ gamma, 0.0, S };
  plan.scheme = Scheme::levy_ou;
  return simulate_paths(PeriodicSDEModel(std::move(parts)), plan);
}

std::vector<double>
sample_invariant_U(double gamma, const CompoundPoissonJumps& jumps, std::size_t n, std::uint64_t seed)
{
  if (!(gamma > 0.0))
    throw std::invalid_argument("gamma must be > 0");
  if (!std::isfinite(jumps.rate) || jumps.rate < 0.0)
    throw UnsupportedModel("jump rate must be finite and >= 0");
  Rng rng = make_stream(seed, 0);
  std::exponential_distribution<double> clock(gamma);
  const double comp = jumps.compensator_drift();
  std::vector<double> out(n);
  for (auto& u : out) {
    const double tau = clock(rng);
    double z = -comp * tau;
    if (jumps.rate > 0.0) {
      const auto count = std::poisson_distribution<long long>(jumps.rate * tau)(rng);
      for (long long k = 0; k < count; ++k)
        z += jumps.law.sample(rng);
    }
    u = z;
  }
  return out;
}

// --- chains ------------------------------------------------------------------------

GridChain::GridChain(std::size_t d, std::size_t n_paths, std::size_t n_points)
  : d_(d)
  , n_paths_(n_paths)
  , n_points_(n_points)
  , data_(d * n_paths * n_points, NAN)
  , exploded_(n_paths, false)
{
}

std::span<const double>
GridChain::at(std::size_t path, std::size_t k) const
{
  return { data_.data() + (path * n_points_ + k) * d_, d_ };
}

std::span<double>
GridChain::at(std::size_t path, std::size_t k)
{
  return { data_.data() + (path * n_points_ + k) * d_, d_ };
}

namespace {

std::size_t
records_per_period(const TrajectoryBundle& bundle, double T)
{
  try {
    return steps_per_period(T, bundle.record_dt());
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("T = " + std::to_string(T) + " is not a multiple of the record spacing " +
                                std::to_string(bundle.record_dt()));
  }
}

} // namespace

GridChain
extract_grid_chain(const TrajectoryBundle& bundle, double T)
{
  const std::size_t q = records_per_period(bundle, T);
  const std::size_t n_points = (bundle.n_records() - 1) / q + 1;
  GridChain chain(bundle.d(), bundle.n_paths(), n_points);
  for (std::size_t i = 0; i < bundle.n_paths(); ++i) {
    if (bundle.exploded(i))
      chain.set_exploded(i);
    for (std::size_t k = 0; k < n_points; ++k) {
      const auto src = bundle.state(i, k * q);
      std::copy(src.begin(), src.end(), chain.at(i, k).begin());
    }
  }
  return chain;
}

std::vector<Segment>
extract_segments(const TrajectoryBundle& bundle, double T)
{
  const std::size_t q = records_per_period(bundle, T);
  const std::size_t K = (bundle.n_records() - 1) / q;
  std::vector<Segment> out;
  out.reserve(bundle.n_paths() * K);
  for (std::size_t i = 0; i < bundle.n_paths(); ++i) {
    const auto p = bundle.path(i);
    for (std::size_t k = 0; k < K; ++k)
      out.push_back({ i, k, p.subspan(k * q * bundle.d(), (q + 1) * bundle.d()) });
  }
  return out;
}

namespace {

void
put(std::ostream& os, double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

} // namespace

void
write_bundle_csv(std::ostream& os, const TrajectoryBundle& bundle, bool header)
{
  if (header) {
    os << "path_id,t";
    for (std::size_t c = 1; c <= bundle.d(); ++c)
      os << ",x" << c;
    os << '\n';
  }
  for (std::size_t i = 0; i < bundle.n_paths(); ++i)
    for (std::size_t j = 0; j < bundle.n_records(); ++j) {
      os << bundle.plan().path_offset + i << ',';
      put(os, bundle.time(j));
      for (double v : bundle.state(i, j)) {
        os << ',';
        put(os, v);
      }
      os << '\n';
    }
}

void
write_grid_chain_csv(std::ostream& os, const GridChain& chain, std::size_t path_offset, bool header)
{
  if (header) {
    os << "path_id,k";
    for (std::size_t c = 1; c <= chain.d(); ++c)
      os << ",x" << c;
    os << '\n';
  }
  for (std::size_t i = 0; i < chain.n_paths(); ++i)
    for (std::size_t k = 0; k < chain.n_points(); ++k) {
      os << path_offset + i << ',' << k;
      for (double v : chain.at(i, k)) {
        os << ',';
        put(os, v);
      }
      os << '\n';
    }
}

// --- transition samplers -----------------------------------------------------------

TransitionSampler
em_sampler(const PeriodicSDEModel& model, double h)
{
  if (!(h > 0.0))
    throw std::invalid_argument("em_sampler: h must be positive");
  return [model, h](double s, double t, std::span<const double> x, Rng& rng, std::span<double> out) {
    if (!(t >= s))
      throw std::invalid_argument("transition needs t >= s");
    std::copy(x.begin(), x.end(), out.begin());
    EulerStepper em(model);
    EventClock clock;
    clock.start(model.jumps(), s, rng);
    double cur = s;
    while (cur < t) {
      double dt = std::min(h, t - cur);
      if (t - (cur + dt) <= 1e-12 * h)
        dt = t - cur;
      if (clock.jumps)
        em.step_with_jumps(cur, dt, out, rng, 1.0, clock);
      else
        em.step(cur, dt, out, rng, 1.0);
      cur = (dt == t - cur) ? t : cur + dt;
    }
  };
}

TransitionSampler
exact_ou_sampler(const PeriodicSDEModel& model)
{
  if (!model.ou())
    throw UnsupportedModel("exact transitions need an OU model");
  const OuCoefficients ou = *model.ou();
  const auto jumps = model.jumps();
  const double comp = jumps ? jumps->compensator_drift() : 0.0;
  return [ou, jumps, comp](double s, double t, std::span<const double> x, Rng& rng, std::span<double> out) {
    if (!(t > s))
      throw std::invalid_argument("transition needs t > s");
    EventClock clock;
    clock.start(jumps, s, rng);
    std::normal_distribution<double> normal;
    const double delta = t - s;
    const double sd = ou.sigma * std::sqrt(-std::expm1(-2.0 * ou.gamma * delta) / (2.0 * ou.gamma));
    out[0] = ou_step(ou, comp, x[0], s, t, std::exp(-ou.gamma * delta), signal_convolution(ou.signal, ou.gamma, s, t),
                     sd, clock, rng, normal);
  };
}

} // namespace pergo
