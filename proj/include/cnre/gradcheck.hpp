#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "cnre/params.hpp"
#include "cnre/tape.hpp"

namespace cnre {

/// Builds a scalar loss on `tape` from the current values in `store`.
using LossBuilder = std::function<Var(Tape& tape, ParameterStore& store)>;

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  /// Minimum number of coordinates probed (all of them if the store is smaller).
  std::size_t min_coordinates = 200;
  std::uint64_t seed = 7;
  /// Denominator floor of the relative error, so that gradients near zero are
  /// judged on absolute error instead.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  /// Coordinates where both gradients sit below the finite-difference
  /// resolution of the loss; these are counted but not scored.
  std::size_t below_resolution = 0;
  std::map<std::string, double> per_slot;  // max rel error per parameter slot
  std::string worst_slot;
  bool passed = false;
};

/// Compares tape gradients against central differences on a sampled subset
/// of coordinates. Every slot gets probed; coordinates are spread across
/// slots in proportion to their size. Relative error per coordinate is
/// |analytic − numeric| / max(|analytic|, |numeric|, floor). A coordinate
/// whose analytic and numeric values both fall under 8·eps·|loss|/(2h) is not
/// measurable at this step size and is skipped (see below_resolution).
///
/// Throws InvalidArgument for h <= 0 and Error if two evaluations of the
/// loss at the same point differ.
GradCheckResult finite_difference_check(const LossBuilder& loss, ParameterStore& store,
                                        const GradCheckOptions& options = {});

}  // namespace cnre
