#pragma once

#include "pergo/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pergo {

inline constexpr const char* version = "0.1.0";

struct RunOptions
{
  //! Overrides [output] directory when set.
  std::optional<std::string> out_dir;
  //! Overrides [plan] seed when set.
  std::optional<std::uint64_t> seed;
  //! KS level, 0.05 or 0.01.
  double level = 0.01;
};

const std::vector<std::string>& command_names();

/// Runs check, simulate, ergodic, invariant-test or report and writes the
/// artifacts plus manifest.json into the output directory. Returns 0 when
/// every verdict passes and 2 when one fails; execution errors throw.
/// A short summary goes to log.
int run_command(const std::string& command, const RunConfig& config, const RunOptions& options, std::ostream& log);

} // namespace pergo
