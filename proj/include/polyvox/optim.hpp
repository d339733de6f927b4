#pragma once

#include "polyvox/nn.hpp"

namespace polyvox::nn {

struct AdamConfig {
  double lr = 1e-3;       // peak learning rate
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  int warmup_steps = 0;   // 0 disables the schedule (constant lr)
  double grad_clip = 5.0; // global L2 norm; <= 0 disables
};

// Adam with linear warmup followed by inverse-square-root decay. The peak
// rate is reached at warmup_steps.
class Adam {
 public:
  Adam() = default;
  Adam(ParamSet* params, AdamConfig cfg);

  // Applies one update from the currently accumulated grads, then clears them.
  void step();

  int64_t steps_done() const { return t_; }
  double current_lr() const { return lr_at(t_ + 1); }

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

  // Keeps moment shapes in sync after a parameter grew (new rows get zero
  // moments); required when a language table gains a row at fine-tune time.
  void sync_shapes();

  const AdamConfig& config() const { return cfg_; }

 private:
  double lr_at(int64_t step) const;

  ParamSet* params_ = nullptr;
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

}  // namespace polyvox::nn
