// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/optim.hpp"

#include <cmath>

namespace remixsep {

void AdamW::step(Tensor& params, const Tensor& grad, double lr) {
  RS_REQUIRE(params.numel() == m_.numel() && grad.numel() == m_.numel(),
             "AdamW: dimension mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::int64_t i = 0; i < params.numel(); ++i) {
    const double g = grad.v[i];
    m_.v[i] = beta1 * m_.v[i] + (1.0 - beta1) * g;
    v_.v[i] = beta2 * v_.v[i] + (1.0 - beta2) * g * g;
    const double mhat = m_.v[i] / bc1;
    const double vhat = v_.v[i] / bc2;
    params.v[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay_ * params.v[i]);
  }
}

double scheduled_lr(double peak, int warmup_steps, double decay_factor, int decay_every_epochs,
                    std::int64_t opt_step, int epoch) {
  double lr = peak;
  if (warmup_steps > 0 && opt_step < warmup_steps)
    lr *= static_cast<double>(opt_step) / static_cast<double>(warmup_steps);
  if (decay_every_epochs > 0 && decay_factor > 0.0)
    lr *= std::pow(decay_factor, epoch / decay_every_epochs);
  return lr;
}

}  // namespace remixsep
