// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_OPTIM_HPP_
#define REMIXSEP_OPTIM_HPP_

#include "remixsep/tensor.hpp"

namespace remixsep {

// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::int64_t dim, double weight_decay)
      : weight_decay_(weight_decay), m_(Tensor::zeros({dim})), v_(Tensor::zeros({dim})) {}

  void step(Tensor& params, const Tensor& grad, double lr);
  std::int64_t steps_taken() const { return t_; }

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

 private:
  double weight_decay_;
  Tensor m_, v_;
  std::int64_t t_ = 0;
};

// Linear warmup over optimizer steps (1-based) to `peak`, then multiplied by
// decay_factor^floor(epoch / decay_every_epochs).
double scheduled_lr(double peak, int warmup_steps, double decay_factor, int decay_every_epochs,
                    std::int64_t opt_step, int epoch);

}  // namespace remixsep

#endif  // REMIXSEP_OPTIM_HPP_
