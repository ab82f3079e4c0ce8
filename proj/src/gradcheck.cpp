#include "reco/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reco/rng.hpp"

namespace reco {

GradCheckReport gradient_check(ParameterSet& params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& grad_fn,
                               std::uint64_t seed, std::size_t min_coords,
                               double h) {
  params.zero_grads();
  grad_fn();

  // Snapshot analytic grads; the perturbed loss evaluations must not see them.
  std::vector<std::vector<Tensor2D>> analytic;
  for (auto& g : params.groups()) {
    analytic.emplace_back();
    for (auto& t : g.tensors) analytic.back().push_back(t.grad);
  }

  GradCheckReport report;
  auto eng = make_engine(seed);
  for (std::size_t gi = 0; gi < params.groups().size(); ++gi) {
    auto& g = params.groups()[gi];
    std::size_t total = 0;
    for (auto& t : g.tensors) total += t.value.size();
    if (total == 0) continue;

    // Flat coordinate indices into this group, sampled without replacement
    // when the group is larger than the quota.
    std::vector<std::size_t> coords;
    if (total <= min_coords) {
      coords.resize(total);
      for (std::size_t i = 0; i < total; ++i) coords[i] = i;
    } else {
      std::vector<std::size_t> all(total);
      for (std::size_t i = 0; i < total; ++i) all[i] = i;
      std::shuffle(all.begin(), all.end(), eng);
      coords.assign(all.begin(), all.begin() + static_cast<long>(min_coords));
    }

    for (std::size_t flat : coords) {
      std::size_t ti = 0, off = flat;
      while (off >= g.tensors[ti].value.size()) {
        off -= g.tensors[ti].value.size();
        ++ti;
      }
      double* w = g.tensors[ti].value.data() + off;
      const double orig = *w;
      *w = orig + h;
      const double lp = loss_fn();
      *w = orig - h;
      const double lm = loss_fn();
      *w = orig;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw std::runtime_error("gradient_check: non-finite loss");
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[gi][ti].data()[off];
      const double rel =
          std::fabs(a - numeric) /
          std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.coords_checked;
    }
  }
  return report;
}

} // namespace reco
