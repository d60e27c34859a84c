#pragma once

#include <vector>

#include "glpe/tensor.hpp"

namespace glpe {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction: p -= lr * m_hat / (sqrt(v_hat) + eps).
// Moment buffers are keyed by position in the parameter list, so the list
// must stay stable for the optimizer's lifetime. step() consumes gradients
// as-is and leaves them in place; callers zero them between updates.
class Adam {
  public:
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    void step();
    void zero_grad();
    long step_count() const { return t_; }
    AdamConfig& config() { return cfg_; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    long t_ = 0;
};

double global_grad_norm(const std::vector<Tensor>& params);
// Scales all gradients so their global norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

}  // namespace glpe
