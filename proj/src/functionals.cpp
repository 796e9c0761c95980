#include "pergo/functionals.hpp"
#include "pergo/error.hpp"
#include "pergo/parallel.hpp"
#include "pergo/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace pergo {

PeriodicFunctional::PeriodicFunctional(Field F, Density g, std::vector<Atom> atoms, double period, std::vector<double> density_breaks)
  : F_(std::move(F))
  , g_(std::move(g))
  , atoms_(std::move(atoms))
  , period_(period)
  , breaks_(std::move(density_breaks))
{
  if (!F_)
    throw std::invalid_argument("functional needs F");
  wrap_time(0.0, period_);
  for (const auto& a : atoms_) {
    if (!(a.s >= 0.0 && a.s < period_))
      throw std::invalid_argument("atom location " + std::to_string(a.s) + " is outside [0, T)");
    if (!(a.w > 0.0) || !std::isfinite(a.w))
      throw std::invalid_argument("atom weight must be positive and finite");
  }
}

namespace {

struct BoundExpr
{
  coeffexpr::Expr e;
  std::vector<double> slots;
  std::size_t s_slot = 0; // 0 when s is not a parameter

  double operator()(double s, std::span<const double> x) const
  {
    thread_local std::vector<double> buf;
    buf = slots;
    buf[0] = s;
    std::copy(x.begin(), x.end(), buf.begin() + 1);
    if (s_slot)
      buf[s_slot] = s;
    return e.eval(buf);
  }
};

BoundExpr
bind_expression(const std::string& text, std::size_t d, const std::map<std::string, double>& params)
{
  std::vector<std::string> names{ "s" };
  for (const auto& [k, v] : params)
    if (k != "s")
      names.push_back(k);
  BoundExpr b;
  b.e = coeffexpr::parse(text, d, names);
  b.slots.assign(b.e.slot_count(), 0.0);
  b.s_slot = 1 + d;
  for (std::size_t p = 1; p < names.size(); ++p)
    b.slots[1 + d + p] = params.at(names[p]);
  return b;
}

} // namespace

PeriodicFunctional
PeriodicFunctional::from_expressions(const std::string& F,
                                     const std::string& density,
                                     std::vector<Atom> atoms,
                                     double period,
                                     std::size_t d,
                                     const std::map<std::string, double>& params)
{
  auto params_t = params;
  params_t["T"] = period;
  BoundExpr f = bind_expression(F, d, params_t);
  Density g;
  if (!density.empty()) {
    BoundExpr gd = bind_expression(density, 1, params_t);
    if (gd.e.uses_state())
      throw std::invalid_argument("density may not depend on x");
    g = [gd](double s) {
      const double zero = 0.0;
      return gd(s, std::span<const double>(&zero, 1));
    };
  }
  return PeriodicFunctional([f](double s, std::span<const double> x) { return f(s, x); }, std::move(g), std::move(atoms),
                            period);
}

double
PeriodicFunctional::F(double s, std::span<const double> x) const
{
  return F_(wrap_time(s, period_), x);
}

double
PeriodicFunctional::g(double s) const
{
  return g_ ? g_(wrap_time(s, period_)) : 0.0;
}

AccumulatedFunctional::AccumulatedFunctional(std::size_t n_paths, std::size_t n_records, double record_dt)
  : n_paths_(n_paths)
  , n_records_(n_records)
  , dt_(record_dt)
  , data_(n_paths * n_records, 0.0)
{
}

AccumulatedFunctional
accumulate(const TrajectoryBundle& bundle, const PeriodicFunctional& f)
{
  const double T = f.period();
  const double dt = bundle.record_dt();
  const std::size_t q = steps_per_period(T, dt);

  std::vector<std::pair<std::size_t, double>> atom_phase;
  std::string offenders;
  for (const auto& a : f.atoms()) {
    const double k = std::round(a.s / dt);
    if (std::fabs(a.s - k * dt) > 1e-12 * T)
      offenders += (offenders.empty() ? "" : ", ") + std::to_string(a.s);
    else
      atom_phase.emplace_back(static_cast<std::size_t>(k) % q, a.w);
  }
  if (!offenders.empty())
    throw std::invalid_argument("atoms not on the time grid: " + offenders);

  // g(t_j) depends only on the phase
  std::vector<double> g(q, 0.0);
  if (f.has_density())
    for (std::size_t p = 0; p < q; ++p)
      g[p] = f.g(static_cast<double>(p) * dt);

  AccumulatedFunctional out(bundle.n_paths(), bundle.n_records(), dt);
  parallel_for(bundle.n_paths(), [&](std::size_t i) {
    auto A = out.path(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < bundle.n_records(); ++j) {
      const double t = bundle.time(j);
      const auto x = bundle.state(i, j);
      const std::size_t phase = j % q;
      for (const auto& [p, w] : atom_phase)
        if (p == phase)
          acc += w * f.F(t, x);
      A[j] = acc;
      if (f.has_density() && g[phase] != 0.0)
        acc += f.F(t, x) * g[phase] * dt;
    }
  });
  return out;
}

double
time_average(std::span<const double> A, double record_dt, double t)
{
  if (!(t > 0.0))
    throw std::invalid_argument("time_average: t must be > 0");
  if (A.size() < 2)
    throw std::invalid_argument("time_average: need at least two records");
  auto j = static_cast<std::size_t>(std::llround(t / record_dt));
  j = std::clamp<std::size_t>(j, 1, A.size() - 1);
  return A[j] / (static_cast<double>(j) * record_dt);
}

TimeAverageEstimate
time_average_estimate(const AccumulatedFunctional& A, std::size_t path, double T, std::size_t n_batches)
{
  const std::size_t q = steps_per_period(T, A.record_dt());
  const std::size_t K = (A.n_records() - 1) / q;
  if (K < 2 * n_batches || n_batches < 2)
    throw std::invalid_argument("time_average_estimate: need at least two periods per batch");
  const auto a = A.path(path);
  TimeAverageEstimate out;
  out.n_batches = n_batches;
  out.value = a[K * q] / (static_cast<double>(K) * T);
  // batches of whole periods; the remainder joins the last batch
  const std::size_t per = K / n_batches;
  std::vector<double> means(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    const std::size_t k0 = b * per, k1 = (b + 1 == n_batches) ? K : (b + 1) * per;
    means[b] = (a[k1 * q] - a[k0 * q]) / (static_cast<double>(k1 - k0) * T);
  }
  double m = 0.0;
  for (double v : means)
    m += v;
  m /= static_cast<double>(n_batches);
  double ss = 0.0;
  for (double v : means)
    ss += (v - m) * (v - m);
  out.standard_error = std::sqrt(ss / static_cast<double>(n_batches - 1) / static_cast<double>(n_batches));
  return out;
}

void
write_time_average_csv(std::ostream& os, const AccumulatedFunctional& A)
{
  os << "path_id,t,A_t,A_t_over_t\n";
  char buf[128];
  for (std::size_t i = 0; i < A.n_paths(); ++i) {
    const auto a = A.path(i);
    for (std::size_t j = 1; j < A.n_records(); ++j) {
      const double t = A.time(j);
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, t, a[j], a[j] / t);
      os << buf;
    }
  }
}

ErgodicLimit
ergodic_limit(const PeriodicFunctional& f, const std::function<GaussianLaw(double s)>& marginal)
{
  const auto& gh = quad::gauss_hermite(64);
  auto expect = [&](double s) {
    const GaussianLaw law = marginal(s);
    const double sd = law.sd();
    double v = 0.0;
    for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
      const double x = law.mean + sd * gh.nodes[k];
      v += gh.weights[k] * f.F(s, std::span<const double>(&x, 1));
    }
    return v;
  };
  const double T = f.period();
  double total = 0.0;
  if (f.has_density())
    total += quad::integrate([&](double s) { return f.g(s) * expect(s); }, 0.0, T, 1e-8 * T, f.density_breaks()).value;
  for (const auto& a : f.atoms())
    total += a.w * expect(a.s);
  return { total / T, 0.0 };
}

ErgodicLimit
ergodic_limit(const PeriodicFunctional& f,
              const MarginalSampler& marginal,
              std::size_t d,
              std::size_t n_outer,
              std::size_t n_inner,
              std::uint64_t seed)
{
  if (n_outer < 1 || n_inner < 2)
    throw std::invalid_argument("ergodic_limit: need n_outer >= 1 and n_inner >= 2");
  const double T = f.period();
  struct Node
  {
    double s, weight;
  };
  std::vector<Node> nodes;
  if (f.has_density())
    for (std::size_t k = 0; k < n_outer; ++k) {
      const double s = (static_cast<double>(k) + 0.5) * T / static_cast<double>(n_outer);
      nodes.push_back({ s, f.g(s) * T / static_cast<double>(n_outer) });
    }
  for (const auto& a : f.atoms())
    nodes.push_back({ a.s, a.w });

  std::vector<double> mean(nodes.size()), var(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t k) {
    Rng rng = make_stream(seed, k);
    std::vector<double> x(d);
    double m = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n_inner; ++i) {
      marginal(nodes[k].s, rng, x);
      const double v = f.F(nodes[k].s, x);
      // Welford update
      const double delta = v - m;
      m += delta / static_cast<double>(i + 1);
      m2 += delta * (v - m);
    }
    mean[k] = m;
    var[k] = m2 / static_cast<double>(n_inner - 1);
  });
  ErgodicLimit out;
  double v2 = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    out.value += nodes[k].weight * mean[k];
    v2 += nodes[k].weight * nodes[k].weight * var[k] / static_cast<double>(n_inner);
  }
  out.value /= T;
  out.standard_error = std::sqrt(v2) / T;
  return out;
}

} // namespace pergo
