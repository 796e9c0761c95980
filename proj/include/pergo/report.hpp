#pragma once

#include "pergo/conditions.hpp"
#include "pergo/stats.hpp"

#include <json.hpp>

namespace pergo {

using Json = nlohmann::ordered_json;

//! Finite numbers as-is; infinities and NaN as null.
Json number(double v);

Json to_json(const Witness& w);
Json to_json(const RadialScan& s);
Json to_json(const Theorem11Report& r);
Json to_json(const LevyConditionReport& r);
Json to_json(const AronsonReport& r);
Json to_json(const VeretennikovReport& r);
Json to_json(const Degenerate2DReport& r);
Json to_json(const TestResult& r);

} // namespace pergo
