#pragma once
// Central-difference gradient checks for the two scorers on random inputs.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "reg/retriever.hpp"

namespace reg::testing {

struct GradientCheck {
  std::vector<std::size_t> coordinates;
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_relative_error = 0.0;
};

// |a - n| / max(|a|, |n|), 0 when both vanish.
double relative_error(double analytic, double numeric);

// Random batch and randomly perturbed weights (so no layer sits at its zero
// initialization), then `coords` random flat coordinates.
GradientCheck check_triple_scorer(std::uint64_t seed, std::size_t coords = 10);
GradientCheck check_entity_scorer(std::uint64_t seed, std::size_t coords = 10);

}  // namespace reg::testing
