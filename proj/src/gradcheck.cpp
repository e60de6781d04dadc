#include "cnre/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cnre/error.hpp"

namespace cnre {
namespace {

double evaluate(const LossBuilder& loss, ParameterStore& store) {
  Tape tape(false);
  return tape.scalar(loss(tape, store));
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& loss, ParameterStore& store,
                                        const GradCheckOptions& options) {
  if (!(options.h > 0.0)) throw InvalidArgument("finite_difference_check: h must be > 0");

  const double base = evaluate(loss, store);
  if (evaluate(loss, store) != base) {
    throw Error("finite_difference_check: loss function is not deterministic");
  }

  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape, store));
  }

  const std::size_t total = store.parameter_count();
  const std::size_t budget = std::min(total, options.min_coordinates);
  std::mt19937_64 rng(options.seed);

  GradCheckResult result;
  for (auto& slot : store.slots()) {
    const std::size_t n = slot.value.size();
    if (n == 0) continue;
    // Proportional share, at least 2 per slot.
    std::size_t share = std::max<std::size_t>(
        2, (budget * n + total - 1) / std::max<std::size_t>(total, 1));
    share = std::min(share, n);

    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(share);

    double slot_max = 0.0;
    for (const std::size_t k : coords) {
      double& x = slot.value.values()[k];
      const double original = x;
      x = original + options.h;
      const double plus = evaluate(loss, store);
      x = original - options.h;
      const double minus = evaluate(loss, store);
      x = original;

      const double numeric = (plus - minus) / (2.0 * options.h);
      const double analytic = slot.grad.values()[k];
      // A few ulps of the loss over 2h: anything smaller is rounding noise.
      const double resolution = 8.0 * std::numeric_limits<double>::epsilon() *
                                std::max(std::abs(plus), std::abs(minus)) / (2.0 * options.h);
      ++result.coordinates;
      if (std::max(std::abs(analytic), std::abs(numeric)) <= resolution) {
        ++result.below_resolution;
        continue;
      }
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      slot_max = std::max(slot_max, rel);
    }
    result.per_slot[slot.name] = slot_max;
    if (slot_max >= result.max_rel_error) {
      result.max_rel_error = slot_max;
      result.worst_slot = slot.name;
    }
  }
  store.zero_grad();
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

}  // namespace cnre
