#pragma once

#include <cstdint>
#include <functional>

#include "reco/params.hpp"

namespace reco {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central-difference check of analytic gradients. grad_fn must populate the
// .grad tensors for the current parameter values; loss_fn must evaluate the
// same scalar loss without touching gradients. Checks a random subsample of
// at least min_coords coordinates per group (all of them if the group is
// smaller). Relative error per coordinate:
//   |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport gradient_check(ParameterSet& params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& grad_fn,
                               std::uint64_t seed,
                               std::size_t min_coords = 50, double h = 1e-4);

} // namespace reco
