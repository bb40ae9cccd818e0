#include "vtp/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace vtp {

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig cfg)
    : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.values().size(), 0.0);
    v_.emplace_back(p.values().size(), 0.0);
  }
}

void AdamState::step(std::vector<Tensor>& params, double lr) {
  if (params.size() != m_.size())
    throw std::invalid_argument("adam state does not match parameter list");
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& val = params[p].values();
    auto& g = params[p].grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < val.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      const double decay = cfg_.weight_decay * val[i];
      val[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + decay);
    }
  }
}

double global_grad_norm(std::vector<Tensor>& params) {
  double sq = 0.0;
  for (auto& p : params)
    for (double g : p.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_global_norm(std::vector<Tensor>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double scale = max_norm / norm;
  for (auto& p : params)
    for (double& g : p.grad()) g *= scale;
  return scale;
}

double lr_at(int step, const LrSchedule& schedule) {
  if (schedule.total_steps < 1)
    throw std::invalid_argument("total_steps must be >= 1");
  if (schedule.warmup_ratio < 0.0 || schedule.warmup_ratio >= 1.0)
    throw std::invalid_argument("warmup_ratio must be in [0,1)");
  if (step < 1 || step > schedule.total_steps)
    throw std::out_of_range("step " + std::to_string(step) +
                            " outside [1," +
                            std::to_string(schedule.total_steps) + "]");
  const int warmup = static_cast<int>(schedule.warmup_ratio *
                                      schedule.total_steps);
  if (warmup > 0 && step <= warmup)
    return schedule.peak_lr * step / warmup;
  return schedule.peak_lr * (schedule.total_steps - step) /
         static_cast<double>(schedule.total_steps - warmup);
}

}  // namespace vtp
