#pragma once

#include <string>
#include <vector>

#include "diagfuse/tensor.hpp"

namespace diagfuse {

struct NamedTensor {
  std::string name;
  Tensor value;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<NamedTensor>& params, const std::vector<Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace diagfuse
