#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pergo/config.hpp"
#include "pergo/parallel.hpp"
#include "pergo/report.hpp"
#include "pergo/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pergo;
namespace fs = std::filesystem;

namespace {

const char* minimal_ou = R"ini(# minimal OU run
[model]
name = ou-gauss
gamma = 1
sigma = 1
signal = "sin(2*pi*t/T)"
T = 1

[plan]
h = 1e-3
K = 1000
N = 100
seed = 42
)ini";

std::vector<std::string>
errors_of(const std::string& text)
{
  try {
    load_config_text(text);
  } catch (const ConfigError& err) {
    return err.messages();
  }
  return {};
}

bool
any_contains(const std::vector<std::string>& v, const std::string& needle)
{
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos)
      return true;
  return false;
}

std::string
slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path
scratch(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("pergo-test-" + name);
  fs::remove_all(p);
  return p;
}

} // namespace

TEST_CASE("minimal OU config loads")
{
  const RunConfig cfg = load_config_text(minimal_ou);
  REQUIRE(cfg.model);
  CHECK(cfg.model->name() == "ou-gauss");
  CHECK(cfg.plan.step == 1e-3);
  CHECK(cfg.plan.horizon_periods == 1000);
  CHECK(cfg.plan.n_paths == 100);
  CHECK(cfg.plan.seed == 42);
  CHECK(cfg.simulation_plan().initial_state == std::vector<double>{ 0.0 });
}

TEST_CASE("unknown keys are named with their line")
{
  std::string text = minimal_ou;
  text.replace(text.find("gamma = 1"), 9, "gamm = 1");
  const auto errs = errors_of(text);
  REQUIRE_FALSE(errs.empty());
  CHECK(any_contains(errs, "line 4"));
  CHECK(any_contains(errs, "'gamm'"));
}

TEST_CASE("expression syntax errors are positioned")
{
  std::string text = minimal_ou;
  text.replace(text.find("\"sin(2*pi*t/T)\""), 15, "\"sin(2*pi*t/T\"");
  const auto errs = errors_of(text);
  REQUIRE(errs.size() == 1);
  CHECK(any_contains(errs, "line 6"));
  CHECK(any_contains(errs, "offset 12"));
}

TEST_CASE("all problems are reported together")
{
  const std::string text = R"ini([model]
name = ou-gauss
gamma = 1
sigma = 1
T = 1
[plan]
h = abc
K = 0
seed = 1
seed = 2
scheme = rk4
nonsense line
[check]
r_max = -1
colour = blue
[extra]
[output]
formats = csv, xml
)ini";
  const auto errs = errors_of(text);
  CHECK(errs.size() >= 8);
  for (const std::string needle : { "line 7", "line 8", "line 10", "line 11", "line 12", "line 14", "line 15", "line 16",
                                    "line 18" })
    CHECK_MESSAGE(any_contains(errs, needle), needle);
}

TEST_CASE("plan validation uses the model period")
{
  std::string text = minimal_ou;
  text.replace(text.find("h = 1e-3"), 8, "h = 0.3");
  CHECK(any_contains(errors_of(text), "line 10"));
  CHECK(any_contains(errors_of("[plan]\nh = 0.1\n"), "name"));
}

TEST_CASE("quoted values and comments")
{
  const auto ini = parse_ini("[functional]\nF = \"x # not a comment\" # comment\nK = 3 # trailing\n");
  CHECK(ini.at("functional").at("F").value == "x # not a comment");
  CHECK(ini.at("functional").at("K").value == "3");
  CHECK(ini.at("functional").at("K").line == 3);
  CHECK_THROWS_AS(parse_ini("[plan]\nh = \"open\n"), ConfigError);
}

TEST_CASE("config hash")
{
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("check command exit codes")
{
  const RunConfig pearson = load_config_text(R"ini([model]
name = pearson
theta = 1
c0 = 1
c1 = 0
sigma = "1"
signal = "1 + 0.5*sin(2*pi*t/T)"
T = 1
[check]
epsilon = 1
)ini");
  std::ostringstream log;
  RunOptions opt;
  opt.out_dir = scratch("pearson").string();
  CHECK(run_command("check", pearson, opt, log) == 0);
  const Json j = Json::parse(slurp(fs::path(*opt.out_dir) / "check.json"));
  CHECK(j["theorem11"]["overall"].get<bool>());
  CHECK(fs::exists(fs::path(*opt.out_dir) / "manifest.json"));

  const RunConfig gbm = load_config_text("[model]\nname = gbm\nmu = -1\nsigma = 1\n[check]\nepsilon = 1\n");
  opt.out_dir = scratch("gbm").string();
  CHECK(run_command("check", gbm, opt, log) == 2);
  const Json g = Json::parse(slurp(fs::path(*opt.out_dir) / "check.json"));
  const double step = g["theorem11"]["nondegeneracy_grid_step"].get<double>();
  CHECK(std::fabs(g["theorem11"]["witnesses"]["lambda_min_argmin"][0].get<double>()) <= step);
  CHECK_FALSE(g["theorem11"]["verdicts"]["nondegeneracy"].get<bool>());
}

TEST_CASE("artifacts are identical across worker counts")
{
  const RunConfig cfg = load_config_text(R"ini([model]
name = ou-gauss
gamma = 1
sigma = 1
signal = "sin(2*pi*t/T)"
T = 1
[plan]
h = 0.01
K = 40
N = 6
burn_in = 10
thin = 1
seed = 9
scheme = exact-ou
[functional]
F = "x1"
)ini");
  RunOptions opt;
  std::ostringstream log;
  const fs::path a = scratch("threads-a"), b = scratch("threads-b");
  set_thread_count(1);
  opt.out_dir = a.string();
  run_command("report", cfg, opt, log);
  set_thread_count(3);
  opt.out_dir = b.string();
  run_command("report", cfg, opt, log);
  set_thread_count(1);
  std::size_t n_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file())
      continue;
    ++n_files;
    const fs::path rel = fs::relative(e.path(), a);
    CAPTURE(rel.string());
    CHECK(slurp(e.path()) == slurp(b / rel));
  }
  CHECK(n_files >= 8);
  const Json index = Json::parse(slurp(a / "index.json"));
  CHECK(index["sections"].size() == 4);
  const Json manifest = Json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["seed"].get<std::uint64_t>() == 9);
  CHECK(manifest["config_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("seed override and unknown commands")
{
  const RunConfig cfg = load_config_text("[model]\nname = gbm\nmu = -1\nsigma = 1\n[plan]\nh = 0.1\nK = 2\nx0 = 1\n");
  RunOptions opt;
  opt.out_dir = scratch("seed").string();
  opt.seed = 77;
  std::ostringstream log;
  CHECK(run_command("simulate", cfg, opt, log) == 0);
  const Json s = Json::parse(slurp(fs::path(*opt.out_dir) / "simulate.json"));
  CHECK(s["plan"]["seed"].get<std::uint64_t>() == 77);
  CHECK(slurp(fs::path(*opt.out_dir) / "trajectories.csv").rfind("path_id,t,x1\n", 0) == 0);
  CHECK_THROWS_AS(run_command("plot", cfg, opt, log), std::invalid_argument);
  CHECK_THROWS(run_command("invariant-test", cfg, opt, log));
}
