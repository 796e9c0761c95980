#include "pergo/conditions.hpp"
#include "pergo/error.hpp"
#include "pergo/parallel.hpp"
#include "pergo/quadrature.hpp"
#include "pergo/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pergo {

void
CheckConfig::validate() const
{
  if (!(r_min > 0.0))
    throw std::invalid_argument("check: r_min must be > 0");
  if (!(r_max > r_min))
    throw std::invalid_argument("check: r_max must exceed r_min");
  if (n_radial < 8 || n_angular < 8 || n_time < 8)
    throw std::invalid_argument("check: grid resolutions must be >= 8");
  if (!(delta_lambda > 0.0))
    throw std::invalid_argument("check: delta_lambda must be > 0");
  if (epsilon && !(*epsilon > 0.0))
    throw std::invalid_argument("check: epsilon must be > 0");
  if (!(box > 0.0) || !(bound_cap > 0.0))
    throw std::invalid_argument("check: box and bound_cap must be > 0");
  if (c0_grid < 3)
    throw std::invalid_argument("check: c0_grid must be >= 3");
}

double
lyapunov_generator(const PeriodicSDEModel& model, double s, std::span<const double> x)
{
  const auto b = eval_drift(model, s, x);
  const auto a = eval_diffusion(model, x);
  double v = 0.0;
  for (std::size_t i = 0; i < model.d(); ++i)
    v += 2.0 * x[i] * b[i] + a.a[i * model.d() + i];
  return v;
}

namespace {

// --- grids -------------------------------------------------------------------------

std::vector<std::vector<double>>
directions(std::size_t d, std::size_t n_angular)
{
  std::vector<std::vector<double>> out;
  if (d == 1) {
    out = { { -1.0 }, { 1.0 } };
  } else if (d == 2) {
    for (std::size_t k = 0; k < n_angular; ++k) {
      const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_angular);
      out.push_back({ std::cos(phi), std::sin(phi) });
    }
  } else {
    for (std::size_t i = 0; i < d; ++i)
      for (double sign : { -1.0, 1.0 }) {
        std::vector<double> e(d, 0.0);
        e[i] = sign;
        out.push_back(e);
      }
    Rng rng = make_stream(0x5eedULL, d);
    std::normal_distribution<double> normal;
    for (std::size_t k = 0; k < n_angular; ++k) {
      std::vector<double> v(d);
      double n2 = 0.0;
      for (auto& c : v) {
        c = normal(rng);
        n2 += c * c;
      }
      for (auto& c : v)
        c /= std::sqrt(n2);
      out.push_back(v);
    }
  }
  return out;
}

std::vector<double>
time_grid(double period, bool time_dependent, std::size_t n_time)
{
  if (!time_dependent)
    return { 0.0 };
  std::vector<double> out(n_time);
  for (std::size_t k = 0; k < n_time; ++k)
    out[k] = period * static_cast<double>(k) / static_cast<double>(n_time);
  return out;
}

std::size_t
extension_points(const CheckConfig& c)
{
  return std::max<std::size_t>(8, c.n_radial / 4);
}

// Linear on [lo, hi] with n intervals, then geometric from hi up to top.
std::vector<double>
radial_grid(double lo, double hi, std::size_t n, double top, std::size_t n_ext)
{
  std::vector<double> out;
  for (std::size_t k = 0; k <= n; ++k)
    out.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n));
  if (top > hi) {
    const double ratio = std::log(top / hi);
    for (std::size_t k = 1; k <= n_ext; ++k)
      out.push_back(hi * std::exp(ratio * static_cast<double>(k) / static_cast<double>(n_ext)));
  }
  return out;
}

struct ShellMax
{
  double value = -INFINITY;
  std::size_t t_idx = 0, dir_idx = 0;
};

// max over the time grid and directions of f(s, rho * dir)
class ShellScanner
{
public:
  ShellScanner(const ScanField& f, std::size_t d, std::vector<double> times, std::vector<std::vector<double>> dirs)
    : f_(f)
    , d_(d)
    , times_(std::move(times))
    , dirs_(std::move(dirs))
  {
  }

  ShellMax shell(double rho, bool absolute = false) const
  {
    std::vector<double> x(d_);
    ShellMax best;
    for (std::size_t di = 0; di < dirs_.size(); ++di) {
      for (std::size_t c = 0; c < d_; ++c)
        x[c] = rho * dirs_[di][c];
      for (std::size_t ti = 0; ti < times_.size(); ++ti) {
        double v = f_(times_[ti], x);
        if (absolute)
          v = std::fabs(v);
        if (std::isnan(v))
          v = INFINITY;
        if (v > best.value)
          best = { v, ti, di };
      }
    }
    return best;
  }

  std::vector<ShellMax> shells(const std::vector<double>& radii, bool absolute = false) const
  {
    std::vector<ShellMax> out(radii.size());
    parallel_for(radii.size(), [&](std::size_t k) { out[k] = shell(radii[k], absolute); });
    return out;
  }

  Witness witness(double rho, const ShellMax& m) const
  {
    Witness w;
    w.s = times_[m.t_idx];
    w.x.resize(d_);
    for (std::size_t c = 0; c < d_; ++c)
      w.x[c] = rho * dirs_[m.dir_idx][c];
    w.value = m.value;
    return w;
  }

  double eval(double s, double rho, std::span<const double> dir, bool absolute) const
  {
    std::vector<double> x(d_);
    for (std::size_t c = 0; c < d_; ++c)
      x[c] = rho * dir[c];
    const double v = f_(s, x);
    return absolute ? std::fabs(v) : v;
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<std::vector<double>>& dirs() const { return dirs_; }
  std::size_t d() const { return d_; }

private:
  const ScanField& f_;
  std::size_t d_;
  std::vector<double> times_;
  std::vector<std::vector<double>> dirs_;
};

std::vector<double>
rotate(std::span<const double> dir, double dphi)
{
  return { dir[0] * std::cos(dphi) - dir[1] * std::sin(dphi), dir[0] * std::sin(dphi) + dir[1] * std::cos(dphi) };
}

// Local search around a grid maximiser; returns the best point found and the
// largest difference to its grid neighbours.
struct Refined
{
  Witness best;
  double margin = 0.0;
};

Refined
refine(const ShellScanner& scan,
       Witness start,
       double rho,
       std::size_t t_idx,
       std::size_t dir_idx,
       double d_rho,
       double rho_lo,
       double rho_hi,
       double period,
       std::size_t passes,
       bool absolute)
{
  const auto& times = scan.times();
  const auto& dirs = scan.dirs();
  const bool timed = times.size() > 1;
  const double d_t = timed ? period / static_cast<double>(times.size()) : 0.0;
  const bool planar = scan.d() == 2;
  const double d_phi = planar ? 2.0 * std::numbers::pi / static_cast<double>(dirs.size()) : 0.0;

  Refined out;
  out.best = start;
  // neighbour differences at the grid resolution
  const std::vector<double> dir = dirs[dir_idx];
  const double s0 = times[t_idx];
  for (double dr : { -d_rho, d_rho }) {
    const double r = std::clamp(rho + dr, rho_lo, rho_hi);
    out.margin = std::max(out.margin, std::fabs(scan.eval(s0, r, dir, absolute) - start.value));
  }
  if (timed)
    for (double dt : { -d_t, d_t })
      out.margin = std::max(out.margin, std::fabs(scan.eval(s0 + dt, rho, dir, absolute) - start.value));
  if (planar)
    for (double dp : { -d_phi, d_phi })
      out.margin = std::max(out.margin, std::fabs(scan.eval(s0, rho, rotate(dir, dp), absolute) - start.value));

  // progressively finer local grids
  double best_rho = rho, best_s = s0, best_phi = 0.0;
  double hr = d_rho, ht = d_t, hp = d_phi;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    const double c_rho = best_rho, c_s = best_s, c_phi = best_phi;
    constexpr int k = 4;
    for (int a = -k; a <= k; ++a) {
      const double r = std::clamp(c_rho + hr * a / k, rho_lo, rho_hi);
      for (int b = (timed ? -k : 0); b <= (timed ? k : 0); ++b) {
        const double s = c_s + ht * b / k;
        for (int c = (planar ? -k : 0); c <= (planar ? k : 0); ++c) {
          const double phi = c_phi + hp * c / k;
          const auto u = planar ? rotate(dir, phi) : dir;
          const double v = scan.eval(s, r, u, absolute);
          if (v > out.best.value) {
            out.best.value = v;
            out.best.s = wrap_time(s, period);
            out.best.x.assign(scan.d(), 0.0);
            for (std::size_t q = 0; q < scan.d(); ++q)
              out.best.x[q] = r * u[q];
            best_rho = r;
            best_s = s;
            best_phi = phi;
          }
        }
      }
    }
    hr /= 4.0;
    ht /= 4.0;
    hp /= 4.0;
  }
  return out;
}

} // namespace

RadialScan
radial_scan(const ScanField& f,
            std::size_t d,
            double period,
            bool time_dependent,
            const CheckConfig& config,
            std::optional<double> eps)
{
  config.validate();
  const ShellScanner scan(f, d, time_grid(period, time_dependent, config.n_time), directions(d, config.n_angular));
  const auto radii = radial_grid(0.0, config.r_max, config.n_radial, 10.0 * config.r_max, extension_points(config));
  const auto shells = scan.shells(radii);

  // suffix maxima: suffix[k] = max over radii[k..]
  std::vector<double> suffix(radii.size());
  std::vector<std::size_t> suffix_arg(radii.size());
  for (std::size_t k = radii.size(); k-- > 0;) {
    if (k + 1 == radii.size() || shells[k].value > suffix[k + 1]) {
      suffix[k] = shells[k].value;
      suffix_arg[k] = k;
    } else {
      suffix[k] = suffix[k + 1];
      suffix_arg[k] = suffix_arg[k + 1];
    }
  }
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < radii.size(); ++k)
    if (radii[k] >= config.r_min && radii[k] <= config.r_max * (1.0 + 1e-12))
      candidates.push_back(k);
  if (candidates.empty())
    throw std::invalid_argument("check: no radial grid point in [r_min, r_max]");
  double best_suffix = INFINITY;
  for (auto k : candidates)
    best_suffix = std::min(best_suffix, suffix[k]);
  auto passes = [&](double e) { return best_suffix < -e; };

  RadialScan out;
  out.radial_step = config.r_max / static_cast<double>(config.n_radial);
  out.n_points = radii.size() * scan.times().size() * scan.dirs().size();
  if (eps) {
    out.epsilon = *eps;
  } else {
    double lo = 1e-6, hi = 1e3;
    if (passes(hi)) {
      out.epsilon = hi;
    } else if (!passes(lo)) {
      out.epsilon = lo;
    } else {
      for (int it = 0; it < 100; ++it) {
        const double mid = std::sqrt(lo * hi);
        (passes(mid) ? lo : hi) = mid;
      }
      out.epsilon = lo;
    }
  }
  const double e = out.epsilon;

  std::optional<std::size_t> first;
  for (auto k : candidates)
    if (suffix[k] < -e) {
      first = k;
      break;
    }

  if (!first) {
    // failure: the witness is the largest value beyond r_max
    const std::size_t k = suffix_arg[candidates.back()];
    out.pass = false;
    out.radius = config.r_max;
    out.max_outside = scan.witness(radii[k], shells[k]);
    return out;
  }

  out.pass = true;
  const std::size_t i = *first;
  if (i == candidates.front()) {
    out.radius = radii[i];
  } else {
    double lo = radii[i - 1], hi = radii[i];
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi))
        break;
      (scan.shell(mid).value < -e ? hi : lo) = mid;
    }
    out.radius = hi;
  }

  // maximiser outside the radius, including the boundary shell itself
  std::size_t k = suffix_arg[i];
  double rho = radii[k];
  ShellMax m = shells[k];
  const ShellMax boundary = scan.shell(out.radius);
  if (boundary.value >= m.value) {
    m = boundary;
    rho = out.radius;
  }
  Witness w = scan.witness(rho, m);
  const double step = rho <= config.r_max ? out.radial_step : rho * std::log(10.0) / static_cast<double>(extension_points(config));
  const Refined r = refine(scan, w, rho, m.t_idx, m.dir_idx, step, out.radius, 10.0 * config.r_max, period,
                           config.refine_passes, false);
  out.max_outside = r.best;
  out.grid_margin = r.margin;
  return out;
}

TildeK
find_tilde_K(const PeriodicSDEModel& model, const CheckConfig& config)
{
  const ScanField L = [&model](double s, std::span<const double> x) { return lyapunov_generator(model, s, x); };
  TildeK out;
  out.scan = radial_scan(L, model.d(), model.period(), !model.time_homogeneous(), config, config.epsilon);
  if (!out.scan.pass)
    return out;
  out.r_tilde = std::max(out.scan.radius, std::numbers::e);

  // sup |L_s V| over the ball of the passing radius
  const ShellScanner scan(L, model.d(), time_grid(model.period(), !model.time_homogeneous(), config.n_time),
                          directions(model.d(), config.n_angular));
  const double r = out.scan.radius;
  const auto radii = radial_grid(0.0, r, config.n_radial, r, 0);
  const auto shells = scan.shells(radii, true);
  std::size_t best = 0;
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (shells[k].value > shells[best].value)
      best = k;
  const Witness w = scan.witness(radii[best], shells[best]);
  const Refined ref = refine(scan, w, radii[best], shells[best].t_idx, shells[best].dir_idx,
                             r / static_cast<double>(config.n_radial), 0.0, r, model.period(), config.refine_passes, true);
  out.c_sup = ref.best.value;
  out.c_witness = ref.best;
  return out;
}

double
compute_C2(std::size_t d, std::size_t m, double C0)
{
  const double dd = static_cast<double>(d), mm = static_cast<double>(m);
  return std::pow(2.0 * dd, 1.5) * std::sqrt(mm + 1.0) * C0 + 4.0 * dd * dd * dd * (mm + 1.0) * C0 * C0;
}

namespace {

struct MinimalRInputs
{
  double log_floor; // log R~ + C2 T
  double denom;     // 16 d^3 (m+1) C0^2 T
  double rhs;       // eps / (2 (C + eps))
};

MinimalRInputs
minimal_R_inputs(std::size_t d, std::size_t m, double C0, double T, double r_tilde, double eps, double C)
{
  if (d < 1 || m < 1)
    throw std::invalid_argument("minimal R: d and m must be >= 1");
  if (!(C0 >= 0.0) || !(T > 0.0) || !(eps > 0.0) || !(C >= 0.0))
    throw std::invalid_argument("minimal R: need C0 >= 0, T > 0, eps > 0, C >= 0");
  if (!(r_tilde >= std::numbers::e * (1.0 - 1e-12)))
    throw std::invalid_argument("minimal R: R~ must be >= e");
  const double dd = static_cast<double>(d);
  return { std::log(r_tilde) + compute_C2(d, m, C0) * T, 16.0 * dd * dd * dd * (static_cast<double>(m) + 1.0) * C0 * C0 * T,
           eps / (2.0 * (C + eps)) };
}

double
log_minimal_R(const MinimalRInputs& in)
{
  if (in.denom == 0.0 || in.rhs >= 1.0)
    return in.log_floor + std::log1p(1e-9);
  return in.log_floor + std::sqrt(in.denom * std::log(2.0 / in.rhs));
}

double
log_minimal_R_bisection(const MinimalRInputs& in)
{
  if (in.denom == 0.0 || in.rhs >= 1.0)
    return in.log_floor + std::log1p(1e-9);
  // lhs(u) = 2 exp(-u^2 / denom) - rhs, decreasing in u = log R - log_floor >= 0
  auto holds = [&](double u) { return 2.0 * std::exp(-u * u / in.denom) <= in.rhs; };
  double lo = 0.0, hi = 1.0;
  while (!holds(hi))
    hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi))
      break;
    (holds(mid) ? hi : lo) = mid;
  }
  return in.log_floor + hi;
}

} // namespace

double
compute_minimal_R(std::size_t d, std::size_t m, double C0, double T, double r_tilde, double eps, double C)
{
  const auto in = minimal_R_inputs(d, m, C0, T, r_tilde, eps, C);
  const double closed = log_minimal_R(in);
  const double bisected = log_minimal_R_bisection(in);
  // relative error in R is the absolute error in log R
  if (std::fabs(closed - bisected) > 1e-9)
    throw NumericalError("minimal R: closed form and bisection disagree", std::fabs(closed - bisected));
  return std::exp(closed);
}

double
minimal_R_by_bisection(std::size_t d, std::size_t m, double C0, double T, double r_tilde, double eps, double C)
{
  return std::exp(log_minimal_R_bisection(minimal_R_inputs(d, m, C0, T, r_tilde, eps, C)));
}

Nondegeneracy
check_nondegeneracy(const PeriodicSDEModel& model, double R, const CheckConfig& config)
{
  config.validate();
  if (!(R > 0.0))
    throw std::invalid_argument("nondegeneracy: R must be > 0");
  Nondegeneracy out;
  out.radius = R;
  const double linear = std::min(R, config.r_max);
  out.grid_step = linear / static_cast<double>(config.n_radial);
  const auto radii = radial_grid(0.0, linear, config.n_radial, R, extension_points(config));
  const auto dirs = directions(model.d(), config.n_angular);

  struct Min
  {
    double value = INFINITY;
    std::size_t dir = 0;
  };
  std::vector<Min> mins(radii.size());
  parallel_for(radii.size(), [&](std::size_t k) {
    std::vector<double> x(model.d());
    for (std::size_t di = 0; di < dirs.size(); ++di) {
      for (std::size_t c = 0; c < model.d(); ++c)
        x[c] = radii[k] * dirs[di][c];
      double v = eval_diffusion(model, x).lambda_min;
      if (std::isnan(v))
        v = -INFINITY;
      if (v < mins[k].value)
        mins[k] = { v, di };
      if (radii[k] == 0.0)
        break;
    }
  });
  std::size_t best = 0;
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (mins[k].value < mins[best].value)
      best = k;
  out.lambda_min = mins[best].value;
  out.argmin.resize(model.d());
  for (std::size_t c = 0; c < model.d(); ++c)
    out.argmin[c] = radii[best] * dirs[mins[best].dir][c];
  out.pass = out.lambda_min > config.delta_lambda;
  return out;
}

namespace {

// Box grid [-w, w]^d with n points per axis (n odd keeps 0 on the grid).
std::vector<std::vector<double>>
box_grid(std::size_t d, double w, std::size_t n)
{
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> idx(d, 0);
  while (true) {
    std::vector<double> x(d);
    for (std::size_t c = 0; c < d; ++c)
      x[c] = -w + 2.0 * w * static_cast<double>(idx[c]) / static_cast<double>(n - 1);
    out.push_back(std::move(x));
    std::size_t c = 0;
    while (c < d && ++idx[c] == n)
      idx[c++] = 0;
    if (c == d)
      break;
  }
  return out;
}

std::size_t
box_points_per_axis(std::size_t d)
{
  switch (d) {
    case 1: return 2001;
    case 2: return 201;
    case 3: return 41;
    default: return 11;
  }
}

// Central-difference partials of every component of g at x, orders 1..2.
// Layout: partial index major, component minor.
std::vector<double>
vector_partials(const std::function<void(std::span<const double>, std::span<double>)>& g,
                std::size_t n_out,
                std::span<const double> x,
                double h)
{
  const std::size_t d = x.size();
  const std::size_t n_part = d + d * (d + 1) / 2;
  std::vector<double> out(n_part * n_out, 0.0);
  std::vector<double> p(x.begin(), x.end()), f0(n_out), fa(n_out), fb(n_out), fc(n_out), fd(n_out);
  g(x, f0);
  auto eval = [&](std::size_t i, double di, std::size_t j, double dj, std::vector<double>& into) {
    p[i] += di;
    p[j] += dj;
    g(p, into);
    p[i] = x[i];
    p[j] = x[j];
  };
  std::size_t part = 0;
  for (std::size_t i = 0; i < d; ++i, ++part) {
    eval(i, h, i, 0.0, fa);
    eval(i, -h, i, 0.0, fb);
    for (std::size_t q = 0; q < n_out; ++q)
      out[part * n_out + q] = (fa[q] - fb[q]) / (2.0 * h);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j, ++part) {
      if (i == j) {
        eval(i, h, i, 0.0, fa);
        eval(i, -h, i, 0.0, fb);
        for (std::size_t q = 0; q < n_out; ++q)
          out[part * n_out + q] = (fa[q] - 2.0 * f0[q] + fb[q]) / (h * h);
      } else {
        eval(i, h, j, h, fa);
        eval(i, h, j, -h, fb);
        eval(i, -h, j, h, fc);
        eval(i, -h, j, -h, fd);
        for (std::size_t q = 0; q < n_out; ++q)
          out[part * n_out + q] = (fa[q] - fb[q] - fc[q] + fd[q]) / (4.0 * h * h);
      }
    }
  return out;
}

} // namespace

C0Estimate
estimate_C0(const PeriodicSDEModel& model, const CheckConfig& config)
{
  config.validate();
  const std::size_t d = model.d(), m = model.m();
  const std::size_t n_axis = d <= 2 ? config.c0_grid : std::min<std::size_t>(config.c0_grid, 11);
  const auto points = box_grid(d, config.r_max, n_axis | 1);
  const auto times = time_grid(model.period(), !model.time_homogeneous(), std::max<std::size_t>(8, config.n_time / 4));
  const double h = 1e-3;

  struct Best
  {
    double value = 0.0;
    double t = 0.0;
    std::size_t point = 0;
  };
  std::vector<Best> best(points.size());
  parallel_for(points.size(), [&](std::size_t k) {
    const auto& x = points[k];
    const auto dsig = vector_partials([&](std::span<const double> y, std::span<double> out) { model.diffusion_into(y, out); },
                                      d * m, x, h);
    const std::size_t n_part = d + d * (d + 1) / 2;
    for (double t : times) {
      const auto db = vector_partials([&](std::span<const double> y, std::span<double> out) { model.drift_into(t, y, out); },
                                      d, x, h);
      for (std::size_t part = 0; part < n_part; ++part)
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            const double v = std::fabs(dsig[part * d * m + i * m + j]) + std::fabs(db[part * d + i]);
            if (std::isfinite(v) && v > best[k].value)
              best[k] = { v, t, k };
          }
    }
  });
  C0Estimate out;
  out.half_width = config.r_max;
  Best top;
  for (const auto& b : best)
    if (b.value > top.value)
      top = b;
  out.value = top.value;
  out.argmax = { top.t };
  out.argmax.insert(out.argmax.end(), points[top.point].begin(), points[top.point].end());
  return out;
}

Theorem11Report
check_theorem11(const PeriodicSDEModel& model, const CheckConfig& config)
{
  config.validate();
  Theorem11Report rep;
  rep.model = model.name();
  rep.d = model.d();
  rep.m = model.m();
  rep.period = model.period();
  rep.m_at_least_d = model.m_at_least_d();
  if (!rep.m_at_least_d)
    rep.notes.push_back("m < d: the model has fewer noise dimensions than state dimensions");

  if (model.declared_C0()) {
    rep.C0 = *model.declared_C0();
  } else {
    rep.C0_estimate = estimate_C0(model, config);
    rep.C0 = rep.C0_estimate->value;
    rep.C0_estimated = true;
    rep.notes.push_back("C0 estimated by central differences of orders 1-2 on a grid over [-r_max, r_max]^d; "
                        "this is a lower bound for the true supremum");
  }
  rep.notes.push_back("minimal R uses the numerator (log R - log R~ - C2 T)^2 from the Bernstein bound; the "
                      "condition as usually displayed squares only the C2 T term");
  rep.notes.push_back("all suprema and infima are maxima and minima over finite grids (certified on grid only)");

  rep.tilde_K = find_tilde_K(model, config);
  rep.verdict_lyapunov = rep.tilde_K.scan.pass;

  double nondeg_radius = config.r_max;
  if (rep.verdict_lyapunov) {
    rep.C2 = compute_C2(rep.d, rep.m, rep.C0);
    const auto in = minimal_R_inputs(rep.d, rep.m, rep.C0, rep.period, rep.tilde_K.r_tilde, rep.tilde_K.scan.epsilon,
                                     rep.tilde_K.c_sup);
    rep.log_R = log_minimal_R(in);
    const double log_bisect = log_minimal_R_bisection(in);
    rep.R = std::exp(rep.log_R);
    rep.R_bisection = std::exp(log_bisect);
    rep.verdict_minimal_R =
      std::isfinite(rep.log_R) && std::fabs(rep.log_R - log_bisect) <= 1e-9 && rep.log_R > std::log(rep.tilde_K.r_tilde);
    if (!rep.verdict_minimal_R)
      rep.notes.push_back("minimal R: closed form and bisection disagree or R is not finite");
    // grids beyond 1e150 only add overflow in a(x)
    nondeg_radius = std::min(rep.R, 1e150);
    if (rep.R > 1e150)
      rep.notes.push_back("non-degeneracy scanned up to |x| = 1e150 only");
  } else {
    rep.notes.push_back("Lyapunov scan failed; non-degeneracy reported on |x| <= r_max for information");
  }
  rep.nondegeneracy = check_nondegeneracy(model, nondeg_radius, config);
  rep.verdict_nondegeneracy = rep.nondegeneracy.pass;
  rep.overall = rep.verdict_lyapunov && rep.verdict_minimal_R && rep.verdict_nondegeneracy;
  return rep;
}

double
compute_G_S(const std::vector<Signal>& S, std::span<const double> x)
{
  if (S.size() != x.size())
    throw std::invalid_argument("G_S: signal and state dimensions differ");
  double g = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pos = std::max(0.0, x[i]), neg = std::max(0.0, -x[i]);
    g += 2.0 * (neg * S[i].max_negative_part() + pos * S[i].max_positive_part());
  }
  return g;
}

RadialScan
check_signal_condition(const VectorField& b_hat,
                       const std::vector<Signal>& S,
                       const PeriodicSDEModel& model,
                       const CheckConfig& config)
{
  if (S.size() != model.d())
    throw std::invalid_argument("signal condition: need one signal per coordinate");
  const ScanField f = [&](double, std::span<const double> x) {
    std::vector<double> b(model.d());
    b_hat(x, b);
    const auto a = eval_diffusion(model, x);
    double v = compute_G_S(S, x);
    for (std::size_t i = 0; i < model.d(); ++i)
      v += 2.0 * x[i] * b[i] + a.a[i * model.d() + i];
    return v;
  };
  return radial_scan(f, model.d(), model.period(), false, config, config.epsilon);
}

// --- Levy measures -------------------------------------------------------------

LevyDescriptor
LevyDescriptor::compound_poisson(CompoundPoissonJumps j)
{
  LevyDescriptor out;
  out.kind = Kind::compound_poisson;
  out.jumps = j;
  return out;
}

LevyDescriptor
LevyDescriptor::stable(double alpha, double c)
{
  if (!(alpha > 0.0 && alpha < 2.0))
    throw std::invalid_argument("stable Levy measure needs 0 < alpha < 2, got " + std::to_string(alpha));
  if (!(c > 0.0))
    throw std::invalid_argument("stable Levy measure needs c > 0");
  LevyDescriptor out;
  out.kind = Kind::stable;
  out.alpha = alpha;
  out.c = c;
  out.origin_exponent = 1.0 + alpha;
  out.tail_exponent = 1.0 + alpha;
  return out;
}

namespace {

// int min(x^2, eps^2) nu(dx)
double
truncated_moment(const LevyDescriptor& nu, double eps)
{
  switch (nu.kind) {
    case LevyDescriptor::Kind::compound_poisson: return nu.jumps.rate * nu.jumps.law.truncated_second_moment(eps);
    case LevyDescriptor::Kind::stable: {
      const double a = nu.alpha;
      return 2.0 * nu.c * std::pow(eps, 2.0 - a) * (1.0 / (2.0 - a) + 1.0 / a);
    }
    case LevyDescriptor::Kind::user_density: break;
  }
  std::vector<double> slots(nu.density.slot_count(), 0.0);
  auto dens = [&](double x) {
    thread_local std::vector<double> s;
    s = slots;
    s[1] = x;
    return nu.density.eval(s);
  };
  // inner part in the log variable x = eps * e^{-u} is not needed: x^2 f(x) is integrable
  const double scale = eps * eps;
  double inner = 0.0;
  for (double sign : { -1.0, 1.0 })
    inner += quad::integrate([&](double x) { return x * x * dens(sign * x); }, 0.0, eps, 1e-10 * scale).value;
  // outer part: x = eps * e^u, u in [0, U]
  const double U = std::log(1e6 / eps);
  double outer = 0.0;
  for (double sign : { -1.0, 1.0 })
    outer += quad::integrate(
               [&](double u) {
                 const double x = eps * std::exp(u);
                 return x * dens(sign * x);
               },
               0.0, U, 1e-10)
               .value;
  return inner + scale * outer;
}

double
levy_tail_moment(const LevyDescriptor& nu, bool& finite)
{
  finite = true;
  switch (nu.kind) {
    case LevyDescriptor::Kind::compound_poisson: return nu.jumps.rate * nu.jumps.law.tail_abs_moment();
    case LevyDescriptor::Kind::stable:
      if (nu.alpha <= 1.0) {
        finite = false;
        return INFINITY;
      }
      return 2.0 * nu.c / (nu.alpha - 1.0);
    case LevyDescriptor::Kind::user_density: break;
  }
  if (nu.tail_exponent && *nu.tail_exponent <= 2.0) {
    finite = false;
    return INFINITY;
  }
  std::vector<double> slots(nu.density.slot_count(), 0.0);
  auto dens = [&](double x) {
    thread_local std::vector<double> s;
    s = slots;
    s[1] = x;
    return nu.density.eval(s);
  };
  // x = e^u; compare the integral up to 1e4 and 1e8 to detect divergence
  auto upto = [&](double L) {
    double v = 0.0;
    for (double sign : { -1.0, 1.0 })
      v += quad::integrate(
             [&](double u) {
               const double x = std::exp(u);
               return x * x * dens(sign * x);
             },
             0.0, std::log(L), 1e-9, {}, 20000)
             .value;
    return v;
  };
  const double a = upto(1e4), b = upto(1e8);
  if (!nu.tail_exponent && b - a > 1e-3 * std::max(1.0, a)) {
    finite = false;
    return INFINITY;
  }
  return b;
}

} // namespace

LevyConditionReport
check_levy_conditions(const LevyDescriptor& nu)
{
  LevyConditionReport rep;
  if (nu.kind == LevyDescriptor::Kind::stable && !(nu.alpha > 0.0 && nu.alpha < 2.0))
    throw std::invalid_argument("stable Levy measure needs 0 < alpha < 2");
  if (nu.kind == LevyDescriptor::Kind::user_density) {
    if (nu.density.empty())
      throw std::invalid_argument("user Levy density missing");
    if (nu.origin_exponent && *nu.origin_exponent >= 3.0)
      throw UnsupportedModel("Levy density is not integrable against x^2 near 0");
  }
  if (nu.kind == LevyDescriptor::Kind::compound_poisson && !std::isfinite(nu.jumps.rate))
    throw UnsupportedModel("compound Poisson rate must be finite");

  bool finite = true;
  rep.tail_moment = levy_tail_moment(nu, finite);
  rep.cond11 = finite && std::isfinite(rep.tail_moment);

  for (int k = 1; k <= 6; ++k) {
    const double eps = std::pow(10.0, -k);
    rep.g_values.emplace_back(eps, truncated_moment(nu, eps) / (eps * eps * std::log(1.0 / eps)));
  }
  if (nu.origin_exponent) {
    // int (x^2 ^ eps^2) nu(dx) ~ eps^{3-p}; g ~ eps^{1-p} / ln(1/eps) diverges iff p > 1
    rep.cond12 = *nu.origin_exponent > 1.0;
    rep.cond12_rule = "origin exponent p = " + std::to_string(*nu.origin_exponent) + ": diverges iff p > 1";
  } else {
    bool increasing = true;
    for (std::size_t k = 1; k < rep.g_values.size(); ++k)
      increasing = increasing && rep.g_values[k].second >= rep.g_values[k - 1].second;
    rep.cond12 = increasing && rep.g_values.back().second >= 2.0 * rep.g_values.front().second;
    rep.cond12_rule = "numeric: g nondecreasing over eps = 1e-1..1e-6 and g(1e-6) >= 2 g(1e-1)";
  }
  return rep;
}

// --- Aronson -----------------------------------------------------------------------

AronsonReport
check_aronson(const PeriodicSDEModel& model, const CheckConfig& config)
{
  config.validate();
  const std::size_t d = model.d(), m = model.m();
  const auto points = box_grid(d, config.box, box_points_per_axis(d));
  const auto times = time_grid(model.period(), !model.time_homogeneous(), config.n_time);
  AronsonReport rep;
  rep.box = config.box;
  rep.cap = config.bound_cap;

  struct Local
  {
    double lambda = INFINITY, b = 0.0, a = 0.0, der = 0.0;
    double t_b = 0.0, t_der = 0.0;
  };
  std::vector<Local> loc(points.size());
  parallel_for(points.size(), [&](std::size_t k) {
    const auto& x = points[k];
    Local& L = loc[k];
    const auto diff = eval_diffusion(model, x);
    L.lambda = diff.lambda_min;
    for (double v : diff.a)
      L.a = std::max(L.a, std::fabs(v));
    const double h = 1e-4 * std::max(1.0, config.box);
    // first space derivatives of a(x) = sigma sigma^T
    const auto da = vector_partials(
      [&](std::span<const double> y, std::span<double> out) {
        const auto e = eval_diffusion(model, y);
        std::copy(e.a.begin(), e.a.end(), out.begin());
      },
      d * d, x, h);
    for (std::size_t q = 0; q < d * d * d; ++q)
      L.der = std::max(L.der, std::fabs(da[q]));
    std::vector<double> b(d);
    for (double t : times) {
      model.drift_into(t, x, b);
      for (double v : b)
        if (std::fabs(v) > L.b || std::isnan(v)) {
          L.b = std::isnan(v) ? INFINITY : std::fabs(v);
          L.t_b = t;
        }
      const auto db = vector_partials([&](std::span<const double> y, std::span<double> out) { model.drift_into(t, y, out); },
                                      d, x, h);
      for (std::size_t q = 0; q < d * d; ++q)
        if (std::fabs(db[q]) > L.der) {
          L.der = std::fabs(db[q]);
          L.t_der = t;
        }
    }
    (void)m;
  });

  std::size_t kl = 0, kb = 0, kd = 0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (loc[k].lambda < loc[kl].lambda)
      kl = k;
    if (std::max(loc[k].b, loc[k].a) > std::max(loc[kb].b, loc[kb].a))
      kb = k;
    if (loc[k].der > loc[kd].der)
      kd = k;
  }
  rep.lambda_min = loc[kl].lambda;
  rep.ellipticity = rep.lambda_min > config.delta_lambda;
  rep.ellipticity_witness = { 0.0, points[kl], rep.lambda_min };
  for (const auto& L : loc) {
    rep.sup_b = std::max(rep.sup_b, L.b);
    rep.sup_a = std::max(rep.sup_a, L.a);
  }
  rep.bounded_coefficients = rep.sup_b <= config.bound_cap && rep.sup_a <= config.bound_cap;
  rep.bounded_witness = { loc[kb].t_b, points[kb], std::max(loc[kb].b, loc[kb].a) };
  rep.sup_derivative = loc[kd].der;
  rep.bounded_first_derivatives = rep.sup_derivative <= config.bound_cap;
  rep.derivative_witness = { loc[kd].t_der, points[kd], rep.sup_derivative };
  return rep;
}

// --- Veretennikov --------------------------------------------------------------------

VeretennikovReport
check_veretennikov(const PeriodicSDEModel& model, double M, double r, const CheckConfig& config)
{
  config.validate();
  if (!model.time_homogeneous())
    throw std::invalid_argument("Veretennikov's condition applies to time-homogeneous models only");
  if (!(M >= 0.0) || !std::isfinite(r))
    throw std::invalid_argument("Veretennikov: need M >= 0 and finite r");
  const std::size_t d = model.d();
  const auto dirs = directions(d, config.n_angular);
  VeretennikovReport rep;
  rep.M = M;
  rep.r = r;

  // spectral quantities over the whole scan range
  const double top = 10.0 * std::max(config.r_max, M);
  const auto radii = radial_grid(0.0, config.r_max, config.n_radial, top, extension_points(config));
  rep.lambda_minus = INFINITY;
  rep.lambda_plus = 0.0;
  rep.Lambda_tilde = 0.0;
  std::vector<double> x(d);
  for (double rho : radii)
    for (const auto& u : dirs) {
      for (std::size_t c = 0; c < d; ++c)
        x[c] = rho * u[c];
      const auto a = eval_diffusion(model, x);
      double tr = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        tr += a.a[i * d + i];
      rep.Lambda_tilde = std::max(rep.Lambda_tilde, tr);
      if (rho == 0.0)
        continue;
      double q = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          q += x[i] * a.a[i * d + j] * x[j];
      q /= rho * rho;
      rep.lambda_minus = std::min(rep.lambda_minus, q);
      rep.lambda_plus = std::max(rep.lambda_plus, q);
    }

  // drift condition outside M
  const double start = std::max(M, 1e-12);
  const auto outside = radial_grid(start, std::max(config.r_max, 2.0 * start), config.n_radial, top, extension_points(config));
  rep.sup_xb_outside = -INFINITY;
  rep.implied_max = -INFINITY;
  for (double rho : outside)
    for (const auto& u : dirs) {
      for (std::size_t c = 0; c < d; ++c)
        x[c] = rho * u[c];
      const auto b = eval_drift(model, 0.0, x);
      const auto a = eval_diffusion(model, x);
      double xb = 0.0, tr = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        xb += x[i] * b[i];
        tr += a.a[i * d + i];
      }
      if (xb > rep.sup_xb_outside) {
        rep.sup_xb_outside = xb;
        rep.drift_witness = { 0.0, x, xb };
      }
      rep.implied_max = std::max(rep.implied_max, 2.0 * xb + tr + 2.0 * rep.lambda_plus);
    }
  rep.drift_condition = rep.sup_xb_outside <= -r;
  rep.spectral_condition = 1.5 * rep.lambda_plus < r - 0.5 * (rep.Lambda_tilde - rep.lambda_minus);
  rep.pass = rep.drift_condition && rep.spectral_condition;
  rep.implied_inequality = rep.implied_max < 0.0;
  return rep;
}

// --- degenerate 2-D ---------------------------------------------------------------------

Degenerate2DReport
check_degenerate_2d(const PeriodicSDEModel& model, const CheckConfig& config)
{
  config.validate();
  if (model.d() != 2 || model.m() != 1)
    throw std::invalid_argument("degenerate 2-D check needs d = 2 and m = 1");
  const auto points = box_grid(2, config.box, box_points_per_axis(2));
  const auto times = time_grid(model.period(), !model.time_homogeneous(), config.n_time);

  struct Local
  {
    double sigma = INFINITY, deriv = INFINITY, t = 0.0;
    bool shape_ok = true;
  };
  std::vector<Local> loc(points.size());
  parallel_for(points.size(), [&](std::size_t k) {
    const auto& x = points[k];
    Local& L = loc[k];
    std::vector<double> sig(2);
    model.diffusion_into(x, sig);
    L.shape_ok = sig[1] == 0.0;
    L.sigma = std::fabs(sig[0]);
    const double h = 1e-5 * std::max(1.0, std::fabs(x[0]));
    std::vector<double> p(x), bp(2), bm(2);
    for (double t : times) {
      p[0] = x[0] + h;
      model.drift_into(t, p, bp);
      p[0] = x[0] - h;
      model.drift_into(t, p, bm);
      const double v = std::fabs((bp[1] - bm[1]) / (2.0 * h));
      if (v < L.deriv || std::isnan(v)) {
        L.deriv = std::isnan(v) ? 0.0 : v;
        L.t = t;
      }
    }
  });
  for (std::size_t k = 0; k < points.size(); ++k)
    if (!loc[k].shape_ok)
      throw std::invalid_argument("degenerate 2-D check: second row of sigma does not vanish at (" +
                                  std::to_string(points[k][0]) + ", " + std::to_string(points[k][1]) + ")");

  Degenerate2DReport rep;
  std::size_t ks = 0, kd = 0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (loc[k].sigma < loc[ks].sigma)
      ks = k;
    if (loc[k].deriv < loc[kd].deriv)
      kd = k;
  }
  rep.inf_sigma = loc[ks].sigma;
  rep.sigma_witness = { 0.0, points[ks], rep.inf_sigma };
  rep.inf_db2_dx1 = loc[kd].deriv;
  rep.derivative_witness = { loc[kd].t, points[kd], rep.inf_db2_dx1 };
  rep.condition_i = rep.inf_sigma > config.delta_lambda && rep.inf_db2_dx1 > config.delta_lambda;

  const ScanField L = [&model](double s, std::span<const double> x) { return lyapunov_generator(model, s, x); };
  rep.condition_ii = radial_scan(L, 2, model.period(), !model.time_homogeneous(), config, config.epsilon);
  rep.pass = rep.condition_i && rep.condition_ii.pass;
  return rep;
}

} // namespace pergo
