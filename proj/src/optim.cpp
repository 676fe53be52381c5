#include "diagfuse/optim.hpp"

#include <cmath>

#include "diagfuse/errors.hpp"

namespace diagfuse {

void Adam::step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size()) throw ShapeError("Adam: gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.dims(), 0.0);
      v_.emplace_back(p.value.dims(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = params[k].value;
    const Tensor& g = grads[k];
    if (g.dims() != w.dims()) throw ShapeError("Adam: gradient dims differ for " + params[k].name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
    }
  }
}

}  // namespace diagfuse
