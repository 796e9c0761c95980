#pragma once

#include "pergo/conditions.hpp"
#include "pergo/functionals.hpp"
#include "pergo/model.hpp"
#include "pergo/simulate.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pergo {

/// Every problem found while loading a config file, one "line N: ..."
/// message each.
class ConfigError : public std::runtime_error
{
public:
  explicit ConfigError(std::vector<std::string> messages);
  const std::vector<std::string>& messages() const noexcept { return messages_; }

private:
  std::vector<std::string> messages_;
};

/// One INI value with the line it came from.
struct ConfigEntry
{
  std::string value;
  std::size_t line = 0;
};

using ConfigSection = std::map<std::string, ConfigEntry>;

/// Parses "[section]" headers, "key = value" lines and "#" comments.
/// Values may be double-quoted. Throws ConfigError listing all syntax errors.
std::map<std::string, ConfigSection> parse_ini(const std::string& text);

struct PlanSettings
{
  double step = 0.01;
  std::size_t horizon_periods = 100;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::euler_maruyama;
  std::vector<double> initial_state; // zeros when empty
  std::size_t record_stride = 1;
  //! Grid points dropped before the invariant test.
  std::size_t burn_in = 100;
  //! Keep every thin-th grid point in the invariant test.
  std::size_t thin = 5;
};

struct CheckSettings
{
  CheckConfig grid;
  bool aronson = false;
  std::optional<double> veretennikov_M;
  double veretennikov_r = 0.0;
  bool degenerate = false;
  bool levy = false;
  std::optional<double> levy_stable_alpha;
  //! Periodicity test settings.
  bool periodicity = false;
  double periodicity_s = 0.25;
  double periodicity_delta = 0.5;
  std::size_t periodicity_n = 5000;
};

struct FunctionalSettings
{
  std::string F = "x1";
  std::string density = "1";
  std::vector<Atom> atoms;
};

struct OutputSettings
{
  std::string directory = "pergo-out";
  bool csv = true;
  bool json = true;
};

struct RunConfig
{
  std::string source;
  std::string model_name;
  ParamMap model_params;
  std::shared_ptr<const PeriodicSDEModel> model;
  PlanSettings plan;
  CheckSettings check;
  FunctionalSettings functional;
  OutputSettings output;

  SimulationPlan simulation_plan() const;
  PeriodicFunctional make_functional() const;
};

/// Loads and validates a config. All problems are reported together in
/// one ConfigError; I/O failures throw std::runtime_error.
RunConfig load_config(const std::string& path);
RunConfig load_config_text(const std::string& text);

//! 64-bit FNV-1a of the bytes of text.
std::uint64_t fnv1a(const std::string& text);

} // namespace pergo
