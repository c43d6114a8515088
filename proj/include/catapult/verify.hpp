#pragma once

#include "catapult/config.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace catapult::verify {

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;  // the measured quantity
  double limit = 0.0;  // what it was compared against
  std::string detail;
};

struct Report {
  std::vector<Check> checks;
  bool all_passed() const;
};

// Every theorem/lemma invariant, plus the experiment-level invariants when include_ldn is set.
Report verify_theory(const config::ExperimentConfig& config);

nlohmann::json to_json(const Report& report);

// 3 z^3 - 8 sqrt(2) z^2 + 14 z - 4 sqrt(2) on n points of [lo, hi]; returns the minimum margin
// above the rounding allowance (negative means a violation).
double lemma4_grid_margin(double lo, double hi, long n);

}  // namespace catapult::verify
