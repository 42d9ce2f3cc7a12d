#include "w2s/optim.hpp"

#include <cmath>
#include <string>

#include "w2s/error.hpp"

namespace w2s {

void adam_step(Matrix& params, const Matrix& grad, AdamState& state, double lr) {
  if (params.rows() != grad.rows() || params.cols() != grad.cols()) {
    throw ShapeError("adam_step: gradient shape " + std::to_string(grad.rows()) + "x" +
                     std::to_string(grad.cols()) + " vs parameters " +
                     std::to_string(params.rows()) + "x" + std::to_string(params.cols()));
  }
  if (state.first_moment.empty() && !params.empty()) {
    state.first_moment = Matrix(params.rows(), params.cols());
    state.second_moment = Matrix(params.rows(), params.cols());
  }
  if (state.first_moment.rows() != params.rows() ||
      state.first_moment.cols() != params.cols()) {
    throw ShapeError("adam_step: optimizer state shape does not match parameters");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw DomainError("adam_step: learning rate must be finite and >= 0");
  }

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  auto p = params.values();
  auto g = grad.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    if (lr == 0.0) continue;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw ConfigError("learning rate must be finite and > 0");
  }
  if (total_steps == 0) throw ConfigError("schedule needs total_steps >= 1");
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) {
    throw ConfigError("warmup_ratio must lie in [0, 1), got " +
                      std::to_string(warmup_ratio));
  }
}

double lr_at(const LrSchedule& schedule, std::uint64_t step) {
  schedule.validate();
  if (step > schedule.total_steps) {
    throw ConfigError("step " + std::to_string(step) + " beyond schedule of " +
                      std::to_string(schedule.total_steps) + " steps");
  }
  const double total = static_cast<double>(schedule.total_steps);
  const double warmup = schedule.warmup_ratio * total;
  const double s = static_cast<double>(step);
  if (s < warmup) return schedule.base_lr * s / warmup;
  if (schedule.decay == LrDecay::kConstant) return schedule.base_lr;
  return schedule.base_lr * (total - s) / (total - warmup);
}

}  // namespace w2s
