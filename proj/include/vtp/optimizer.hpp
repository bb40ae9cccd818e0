#pragma once

#include <cstdint>
#include <vector>

#include "vtp/tensor.hpp"

namespace vtp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;  // 0.999 for fine-tuning
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

/// Per-parameter first/second moments plus the shared step counter.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<Tensor>& params, AdamConfig cfg);

  /// Bias-corrected AdamW update from the gradients currently on `params`.
  /// Weight decay shrinks parameters by lr*wd independently of the moments.
  void step(std::vector<Tensor>& params, double lr);

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t step_ = 0;
};

double global_grad_norm(std::vector<Tensor>& params);

/// Scales all gradients by max_norm/norm when the global L2 norm exceeds
/// max_norm. Returns the scale applied (1.0 when no clipping happened).
double clip_global_norm(std::vector<Tensor>& params, double max_norm = 1.0);

struct LrSchedule {
  double peak_lr = 1e-3;
  int total_steps = 1;
  double warmup_ratio = 0.0;  // fraction of total_steps spent ramping up
};

/// Linear 0 -> peak over the warmup steps, then linear peak -> 0 at
/// total_steps. Valid for step in [1, total_steps].
double lr_at(int step, const LrSchedule& schedule);

}  // namespace vtp
