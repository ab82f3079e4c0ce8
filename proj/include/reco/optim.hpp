#pragma once

#include <memory>
#include <string>
#include <vector>

#include "reco/params.hpp"

namespace reco {

struct Optimizer {
  virtual ~Optimizer() = default;
  virtual void step(ParameterSet& ps) = 0;
};

// w ← w − lr·g over every tensor in the set.
struct Sgd final : Optimizer {
  double lr;
  explicit Sgd(double lr_) : lr(lr_) {}
  void step(ParameterSet& ps) override;
};

// Adam with bias correction. Moment state is allocated lazily on the first
// step and then required to keep matching the parameter structure.
class Adam final : public Optimizer {
 public:
  explicit Adam(double lr_ = 1e-3, double beta1_ = 0.9, double beta2_ = 0.999,
                double eps_ = 1e-8)
      : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {}

  void step(ParameterSet& ps) override;
  void reset();

  double lr, beta1, beta2, eps;

 private:
  long t_ = 0;
  std::vector<std::vector<Tensor2D>> m_, v_; // [group][tensor]
};

// "sgd" or "adam"; anything else is rejected.
std::unique_ptr<Optimizer> make_optimizer(const std::string& kind, double lr);

} // namespace reco
