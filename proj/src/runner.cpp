#include "pergo/runner.hpp"
#include "pergo/closedform.hpp"
#include "pergo/error.hpp"
#include "pergo/report.hpp"
#include "pergo/stats.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace pergo {

namespace fs = std::filesystem;

namespace {

// Doubles kept in memory per simulation chunk.
constexpr std::size_t chunk_budget = std::size_t{ 1 } << 24;

struct Outcome
{
  bool pass = true;
  std::vector<std::string> artifacts;
};

std::string
g17(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream
open_out(const fs::path& p)
{
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

void
write_json(const fs::path& p, const Json& j)
{
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

std::string
relative_to(const fs::path& p, const fs::path& root)
{
  return p.lexically_relative(root).generic_string();
}

SimulationPlan
effective_plan(const RunConfig& cfg, const RunOptions& opt)
{
  SimulationPlan plan = cfg.simulation_plan();
  if (opt.seed)
    plan.seed = *opt.seed;
  return plan;
}

std::uint64_t
effective_seed(const RunConfig& cfg, const RunOptions& opt)
{
  return opt.seed ? *opt.seed : cfg.plan.seed;
}

// Runs the plan in chunks of paths, calling visit(bundle) for each chunk.
template<class Visit>
void
chunked(const PeriodicSDEModel& model, SimulationPlan plan, Visit&& visit)
{
  const std::size_t n_per = steps_per_period(model.period(), plan.step);
  const std::size_t records = plan.horizon_periods * n_per / plan.record_stride + 1;
  const std::size_t per_path = records * model.d();
  std::size_t chunk = std::max<std::size_t>(1, chunk_budget / per_path);
  const std::size_t total = plan.n_paths;
  for (std::size_t first = 0; first < total; first += chunk) {
    SimulationPlan part = plan;
    part.path_offset = first;
    part.n_paths = std::min(chunk, total - first);
    visit(simulate_paths(model, part));
  }
}

Json
plan_json(const SimulationPlan& p)
{
  return Json{ { "scheme", scheme_name(p.scheme) },   { "h", p.step },
               { "K", p.horizon_periods },            { "N", p.n_paths },
               { "seed", p.seed },                    { "record_stride", p.record_stride },
               { "x0", p.initial_state } };
}

// --- check --------------------------------------------------------------------------

Outcome
run_check(const RunConfig& cfg, const RunOptions& opt, const fs::path& dir, std::ostream& log)
{
  const PeriodicSDEModel& model = *cfg.model;
  const CheckConfig& grid = cfg.check.grid;
  Outcome out;
  Json j;
  j["model"] = model.name();

  const Theorem11Report t11 = check_theorem11(model, grid);
  j["theorem11"] = to_json(t11);
  out.pass = t11.overall;
  log << "check: lyapunov=" << t11.verdict_lyapunov << " minimal_r=" << t11.verdict_minimal_R
      << " nondegeneracy=" << t11.verdict_nondegeneracy << " overall=" << t11.overall << '\n';

  if (cfg.check.aronson) {
    const AronsonReport r = check_aronson(model, grid);
    j["aronson"] = to_json(r);
    const bool ok = r.ellipticity && r.bounded_coefficients && r.bounded_first_derivatives;
    out.pass = out.pass && ok;
    log << "check: aronson=" << ok << '\n';
  }
  if (cfg.check.veretennikov_M) {
    const VeretennikovReport r = check_veretennikov(model, *cfg.check.veretennikov_M, cfg.check.veretennikov_r, grid);
    j["veretennikov"] = to_json(r);
    out.pass = out.pass && r.pass;
    log << "check: veretennikov=" << r.pass << '\n';
  }
  if (cfg.check.degenerate) {
    const Degenerate2DReport r = check_degenerate_2d(model, grid);
    j["degenerate_2d"] = to_json(r);
    out.pass = out.pass && r.pass;
    log << "check: degenerate_2d=" << r.pass << '\n';
  }
  if (cfg.check.levy) {
    if (!model.jumps())
      throw UnsupportedModel("levy check needs a model with a jump part");
    const LevyConditionReport r = check_levy_conditions(LevyDescriptor::compound_poisson(*model.jumps()));
    j["levy"] = to_json(r);
    out.pass = out.pass && r.cond11 && r.cond12;
    log << "check: levy tail_moment=" << r.cond11 << " small_jump_growth=" << r.cond12 << '\n';
  }
  if (cfg.check.levy_stable_alpha) {
    const double alpha = *cfg.check.levy_stable_alpha;
    try {
      Json s = to_json(check_levy_conditions(LevyDescriptor::stable(alpha)));
      s["alpha"] = alpha;
      out.pass = out.pass && s["small_jump_growth"].get<bool>() && s["finite_first_tail_moment"].get<bool>();
      j["levy_stable"] = std::move(s);
    } catch (const std::invalid_argument& err) {
      j["levy_stable"] = Json{ { "alpha", alpha }, { "rejected", err.what() } };
      out.pass = false;
    }
  }
  if (cfg.check.periodicity) {
    SimulationPlan plan = effective_plan(cfg, opt);
    const TestResult r = periodicity_check(model, cfg.check.periodicity_s, plan.initial_state,
                                           cfg.check.periodicity_delta, cfg.check.periodicity_n, plan.seed, opt.level,
                                           plan.step);
    j["periodicity"] = to_json(r);
    out.pass = out.pass && r.pass && !r.inconclusive;
    log << "check: periodicity=" << r.pass << (r.inconclusive ? " (inconclusive)" : "") << '\n';
  }
  j["overall"] = out.pass;
  const fs::path p = dir / "check.json";
  write_json(p, j);
  out.artifacts.push_back(p.string());
  return out;
}

// --- simulate -----------------------------------------------------------------------

Outcome
run_simulate(const RunConfig& cfg,
             const RunOptions& opt,
             const fs::path& dir,
             std::ostream& log,
             std::optional<std::size_t> trajectory_paths)
{
  const PeriodicSDEModel& model = *cfg.model;
  const SimulationPlan plan = effective_plan(cfg, opt);
  Outcome out;
  std::optional<std::ofstream> traj, chain;
  if (cfg.output.csv) {
    traj.emplace(open_out(dir / "trajectories.csv"));
    chain.emplace(open_out(dir / "grid_chain.csv"));
  }
  Json exploded = Json::array();
  bool first = true;
  chunked(model, plan, [&](const TrajectoryBundle& b) {
    const std::size_t offset = b.plan().path_offset;
    for (std::size_t i = 0; i < b.n_paths(); ++i)
      if (b.exploded(i))
        exploded.push_back(Json{ { "path", offset + i }, { "record", *b.exploded_at(i) } });
    if (traj) {
      const bool keep = !trajectory_paths || offset < *trajectory_paths;
      if (keep && trajectory_paths && offset + b.n_paths() > *trajectory_paths) {
        SimulationPlan part = b.plan();
        part.n_paths = *trajectory_paths - offset;
        write_bundle_csv(*traj, simulate_paths(model, part), first);
      } else if (keep) {
        write_bundle_csv(*traj, b, first);
      }
      write_grid_chain_csv(*chain, extract_grid_chain(b, model.period()), offset, first);
    }
    first = false;
  });
  if (traj) {
    out.artifacts.push_back((dir / "trajectories.csv").string());
    out.artifacts.push_back((dir / "grid_chain.csv").string());
  }
  Json j{ { "model", model.name() }, { "plan", plan_json(plan) }, { "n_exploded", exploded.size() },
          { "exploded", exploded } };
  if (trajectory_paths)
    j["trajectory_paths_written"] = std::min(*trajectory_paths, plan.n_paths);
  const fs::path p = dir / "simulate.json";
  write_json(p, j);
  out.artifacts.push_back(p.string());
  log << "simulate: " << plan.n_paths << " paths, " << exploded.size() << " exploded\n";
  return out;
}

// --- ergodic ------------------------------------------------------------------------

Outcome
run_ergodic(const RunConfig& cfg, const RunOptions& opt, const fs::path& dir, std::ostream& log)
{
  const PeriodicSDEModel& model = *cfg.model;
  const SimulationPlan plan = effective_plan(cfg, opt);
  const PeriodicFunctional f = cfg.make_functional();
  const double T = model.period();
  Outcome out;
  if (plan.horizon_periods < 4)
    throw std::invalid_argument("ergodic: K must be at least 4 periods");
  // Up to 50 batches of at least two periods each.
  const std::size_t n_batches = std::min<std::size_t>(50, plan.horizon_periods / 2);

  std::optional<std::ofstream> trace;
  if (cfg.output.csv) {
    trace.emplace(open_out(dir / "time_average.csv"));
    *trace << "path_id,t,A_t,A_t_over_t\n";
  }
  Json per_path = Json::array();
  double sum = 0.0, sum_se2 = 0.0;
  std::size_t n_ok = 0, n_exploded = 0;
  chunked(model, plan, [&](const TrajectoryBundle& b) {
    const AccumulatedFunctional A = accumulate(b, f);
    const std::size_t per_period = steps_per_period(T, b.step()) / b.stride();
    for (std::size_t i = 0; i < b.n_paths(); ++i) {
      const std::size_t id = b.plan().path_offset + i;
      if (b.exploded(i)) {
        ++n_exploded;
        continue;
      }
      const TimeAverageEstimate est = time_average_estimate(A, i, T, n_batches);
      sum += est.value;
      sum_se2 += est.standard_error * est.standard_error;
      ++n_ok;
      per_path.push_back(Json{ { "path", id }, { "time_average", est.value }, { "standard_error", est.standard_error } });
      if (trace) {
        const auto a = A.path(i);
        for (std::size_t k = 1; k <= plan.horizon_periods; ++k) {
          const std::size_t j = k * per_period;
          const double t = A.time(j);
          *trace << id << ',' << g17(t) << ',' << g17(a[j]) << ',' << g17(a[j] / t) << '\n';
        }
      }
    }
  });
  if (trace)
    out.artifacts.push_back((dir / "time_average.csv").string());
  if (n_ok == 0)
    throw NumericalError("every path exploded; no time average available", 0.0);

  const double value = sum / static_cast<double>(n_ok);
  const double se = std::sqrt(sum_se2) / static_cast<double>(n_ok);
  Json j{ { "model", model.name() },
          { "plan", plan_json(plan) },
          { "functional",
            Json{ { "F", cfg.functional.F }, { "density", cfg.functional.density }, { "atoms", Json::array() } } },
          { "n_exploded", n_exploded },
          { "time_average", value },
          { "standard_error", se } };
  for (const auto& a : cfg.functional.atoms)
    j["functional"]["atoms"].push_back(Json{ { "s", a.s }, { "w", a.w } });

  if (model.ou() && !model.jumps()) {
    const auto& ou = *model.ou();
    const ErgodicLimit lim =
      ergodic_limit(f, [&](double s) { return ou_invariant(ou.gamma, ou.sigma, ou.signal, T, s); });
    const double diff = std::fabs(value - lim.value);
    const bool pass = diff <= 3.0 * se && diff <= 0.05;
    j["limit"] = lim.value;
    j["limit_method"] = "closed-form invariant marginals, Gauss-Hermite and adaptive quadrature";
    j["abs_difference"] = diff;
    j["tolerance"] = Json{ { "standard_errors", 3.0 }, { "absolute", 0.05 } };
    j["pass"] = pass;
    out.pass = pass;
    log << "ergodic: time average " << g17(value) << " +- " << g17(se) << ", limit " << g17(lim.value)
        << ", pass=" << pass << '\n';
  } else {
    j["limit"] = nullptr;
    j["limit_method"] = "none: no closed-form invariant marginals for this model";
    log << "ergodic: time average " << g17(value) << " +- " << g17(se) << " (no reference limit)\n";
  }
  if (n_exploded * 100 > plan.n_paths) {
    j["inconclusive"] = true;
    out.pass = false;
  }
  j["per_path"] = std::move(per_path);
  const fs::path p = dir / "ergodic.json";
  write_json(p, j);
  out.artifacts.push_back(p.string());
  return out;
}

// --- invariant-test -----------------------------------------------------------------

Outcome
run_invariant_test(const RunConfig& cfg, const RunOptions& opt, const fs::path& dir, std::ostream& log)
{
  const PeriodicSDEModel& model = *cfg.model;
  if (!model.ou())
    throw UnsupportedModel("invariant-test needs an ou-gauss or ou-levy model, got '" + model.name() + "'");
  const auto& ou = *model.ou();
  const double T = model.period();
  SimulationPlan plan = effective_plan(cfg, opt);
  plan.record_stride = steps_per_period(T, plan.step);
  if (plan.horizon_periods <= cfg.plan.burn_in)
    throw std::invalid_argument("invariant-test: K must exceed burn_in");

  std::vector<double> samples;
  std::size_t n_exploded = 0;
  chunked(model, plan, [&](const TrajectoryBundle& b) {
    for (std::size_t i = 0; i < b.n_paths(); ++i) {
      if (b.exploded(i)) {
        ++n_exploded;
        continue;
      }
      for (std::size_t k = cfg.plan.burn_in; k < b.n_records(); k += cfg.plan.thin)
        samples.push_back(b.state(i, k)[0]);
    }
  });
  if (samples.size() < 10)
    throw std::invalid_argument("invariant-test: fewer than 10 retained grid points");

  Outcome out;
  Json j{ { "model", model.name() },
          { "plan", plan_json(plan) },
          { "burn_in", cfg.plan.burn_in },
          { "thin", cfg.plan.thin },
          { "n_exploded", n_exploded } };
  TestResult r;
  if (!model.jumps()) {
    const GaussianLaw law = ou_invariant(ou.gamma, ou.sigma, ou.signal, T, 0.0);
    r = ks_one_sample(samples, [&](double x) { return law.cdf(x); }, opt.level);
    r.name = "invariant_law_ks";
    r.extras["oracle_mean"] = law.mean;
    r.extras["oracle_variance"] = law.variance;
    j["oracle"] = "N(M(0), sigma^2 / (2 gamma))";
  } else {
    const double M0 = compute_M(ou.signal, ou.gamma, T, 0.0);
    std::vector<double> u = sample_invariant_U(ou.gamma, *model.jumps(), samples.size(), mix64(plan.seed ^ 0x5bd1e995ULL));
    for (double& v : u)
      v += M0;
    r = ks_two_sample(samples, u, opt.level);
    r.name = "invariant_law_two_sample_ks";
    r.extras["M0"] = M0;
    j["oracle"] = "M(0) + Z_tau, tau ~ Exp(gamma) independent of the jump process";
  }
  double mean = 0.0;
  for (double v : samples)
    mean += v;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double v : samples)
    var += (v - mean) * (v - mean);
  r.extras["sample_mean"] = mean;
  r.extras["sample_variance"] = var / static_cast<double>(samples.size() - 1);
  if (n_exploded * 100 > plan.n_paths) {
    r.inconclusive = true;
    r.pass = false;
  }
  j["result"] = to_json(r);
  out.pass = r.pass && !r.inconclusive;

  if (cfg.output.csv && samples.size() >= 30) {
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    std::vector<double> pts(201);
    for (std::size_t k = 0; k < pts.size(); ++k)
      pts[k] = *lo + (*hi - *lo) * static_cast<double>(k) / 200.0;
    const auto dens = kde_density(samples, std::nullopt, pts);
    auto os = open_out(dir / "kde.csv");
    write_kde_csv(os, pts, dens);
    out.artifacts.push_back((dir / "kde.csv").string());
  }
  const fs::path p = dir / "invariant_test.json";
  write_json(p, j);
  out.artifacts.push_back(p.string());
  log << "invariant-test: D = " << g17(r.statistic) << ", threshold " << g17(r.threshold) << ", pass=" << out.pass
      << '\n';
  return out;
}

void
write_manifest(const fs::path& dir,
               const std::string& command,
               const RunConfig& cfg,
               const RunOptions& opt,
               const std::vector<std::string>& artifacts)
{
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(cfg.source)));
  Json files = Json::array();
  for (const auto& a : artifacts)
    files.push_back(relative_to(a, dir));
  Json j{ { "tool", "pergo" },
          { "version", version },
          { "command", command },
          { "config_hash", std::string("fnv1a64:") + hash },
          { "seed", effective_seed(cfg, opt) },
          { "level", opt.level },
          { "model", cfg.model_name },
          { "artifacts", files },
          { "versions",
            Json{ { "compiler", __VERSION__ },
                  { "eigen",
                    std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION) },
                  { "boost", BOOST_LIB_VERSION },
                  { "nlohmann_json",
                    std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                      "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH) } } } };
  write_json(dir / "manifest.json", j);
}

} // namespace

const std::vector<std::string>&
command_names()
{
  static const std::vector<std::string> names{ "check", "simulate", "ergodic", "invariant-test", "report" };
  return names;
}

int
run_command(const std::string& command, const RunConfig& cfg, const RunOptions& opt, std::ostream& log)
{
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end())
    throw std::invalid_argument("unknown command '" + command + "'");
  if (opt.level != 0.05 && opt.level != 0.01)
    throw std::invalid_argument("level must be 0.05 or 0.01");
  if (!cfg.model)
    throw std::invalid_argument("config has no model");

  const fs::path dir = opt.out_dir ? fs::path(*opt.out_dir) : fs::path(cfg.output.directory);
  fs::create_directories(dir);

  Outcome out;
  if (command == "check") {
    out = run_check(cfg, opt, dir, log);
  } else if (command == "simulate") {
    out = run_simulate(cfg, opt, dir, log, std::nullopt);
  } else if (command == "ergodic") {
    out = run_ergodic(cfg, opt, dir, log);
  } else if (command == "invariant-test") {
    out = run_invariant_test(cfg, opt, dir, log);
  } else {
    Json sections = Json::array();
    auto section = [&](const std::string& name, auto&& body, const std::string& skip_reason) {
      Json s{ { "name", name }, { "directory", name } };
      if (!skip_reason.empty()) {
        s["status"] = "skipped";
        s["reason"] = skip_reason;
      } else {
        const fs::path sub = dir / name;
        fs::create_directories(sub);
        Outcome o = body(sub);
        s["status"] = o.pass ? "pass" : "fail";
        Json files = Json::array();
        for (const auto& a : o.artifacts)
          files.push_back(relative_to(a, dir));
        s["artifacts"] = files;
        out.pass = out.pass && o.pass;
        out.artifacts.insert(out.artifacts.end(), o.artifacts.begin(), o.artifacts.end());
      }
      sections.push_back(std::move(s));
    };
    const PeriodicSDEModel& model = *cfg.model;
    section("check", [&](const fs::path& d) { return run_check(cfg, opt, d, log); }, "");
    section(
      "simulate", [&](const fs::path& d) { return run_simulate(cfg, opt, d, log, std::size_t{ 1 }); }, "");
    section("ergodic", [&](const fs::path& d) { return run_ergodic(cfg, opt, d, log); }, "");
    section(
      "invariant-test",
      [&](const fs::path& d) { return run_invariant_test(cfg, opt, d, log); },
      model.ou() ? "" : "no invariant-law oracle for model '" + model.name() + "'");
    const fs::path p = dir / "index.json";
    write_json(p, Json{ { "model", model.name() }, { "sections", sections }, { "overall", out.pass } });
    out.artifacts.push_back(p.string());
  }
  write_manifest(dir, command, cfg, opt, out.artifacts);
  return out.pass ? 0 : 2;
}

} // namespace pergo
