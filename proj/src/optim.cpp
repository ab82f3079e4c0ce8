#include "reco/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace reco {

void Sgd::step(ParameterSet& ps) {
  for (auto& g : ps.groups())
    for (auto& t : g.tensors) t.value.axpy_(-lr, t.grad);
}

void Adam::step(ParameterSet& ps) {
  auto& groups = ps.groups();
  if (m_.empty()) {
    m_.resize(groups.size());
    v_.resize(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      for (const auto& t : groups[gi].tensors) {
        m_[gi].emplace_back(t.value.rows(), t.value.cols(), 0.0);
        v_[gi].emplace_back(t.value.rows(), t.value.cols(), 0.0);
      }
    }
  }
  if (m_.size() != groups.size())
    throw std::invalid_argument("adam: parameter structure changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    auto& g = groups[gi];
    if (m_[gi].size() != g.tensors.size())
      throw std::invalid_argument("adam: parameter structure changed");
    for (std::size_t ti = 0; ti < g.tensors.size(); ++ti) {
      auto& t = g.tensors[ti];
      Tensor2D& m = m_[gi][ti];
      Tensor2D& v = v_[gi][ti];
      if (!m.same_shape(t.value))
        throw std::invalid_argument("adam: state shape mismatch");
      double* wp = t.value.data();
      const double* gp = t.grad.data();
      double* mp = m.data();
      double* vp = v.data();
      for (std::size_t i = 0; i < t.value.size(); ++i) {
        mp[i] = beta1 * mp[i] + (1.0 - beta1) * gp[i];
        vp[i] = beta2 * vp[i] + (1.0 - beta2) * gp[i] * gp[i];
        const double mhat = mp[i] / bc1;
        const double vhat = vp[i] / bc2;
        wp[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& kind, double lr) {
  if (kind == "sgd") return std::make_unique<Sgd>(lr);
  if (kind == "adam") return std::make_unique<Adam>(lr);
  throw std::invalid_argument("unknown optimizer: " + kind);
}

} // namespace reco
