#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fuq/error.hpp"

namespace fuq {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 5e-5;

  static AdamState zeros(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
  }
};

/// One bias-corrected Adam update, in place. Throws NonFiniteUpdate (and
/// leaves everything untouched) if the gradient or the update is not finite.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    fail(ErrorKind::ShapeMismatch, "adam_step: array lengths differ");
  for (double g : grads)
    if (!std::isfinite(g)) fail(ErrorKind::NonFiniteUpdate, "adam_step: non-finite gradient");

  const std::uint64_t t = state.t + 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const double lr = state.learning_rate;

  // Validate before committing so a failed step leaves the state untouched.
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double m = b1 * state.m[i] + (1.0 - b1) * grads[i];
    const double v = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double next = params[i] - lr * (m / correction1) / (std::sqrt(v / correction2) + state.epsilon);
    if (!std::isfinite(next)) fail(ErrorKind::NonFiniteUpdate, "adam_step: update is not finite");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    params[i] -= lr * (state.m[i] / correction1) / (std::sqrt(state.v[i] / correction2) + state.epsilon);
  }
  state.t = t;
}

/// Reduce-on-plateau: after `patience` consecutive epochs without a strict
/// improvement of the best loss, multiply the rate by `factor` (clamped at
/// `min_lr`) and restart the count.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(double lr, std::size_t patience = 10, double factor = 0.1, double min_lr = 0.0)
      : lr_(lr), patience_(patience), factor_(factor), min_lr_(min_lr) {}

  double step(double epoch_loss) {
    if (epoch_loss < best_) {
      best_ = epoch_loss;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= patience_) {
      lr_ = std::max(lr_ * factor_, min_lr_);
      bad_epochs_ = 0;
    }
    return lr_;
  }

  double lr() const noexcept { return lr_; }
  double best() const noexcept { return best_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double min_lr_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

/// Learning rate after feeding `loss_history` through a fresh scheduler.
inline double plateau_scheduler_step(double lr, std::span<const double> loss_history, std::size_t patience = 10,
                                     double factor = 0.1, double min_lr = 0.0) {
  if (loss_history.empty()) fail(ErrorKind::InvalidArgument, "loss history must not be empty");
  PlateauScheduler sched(lr, patience, factor, min_lr);
  for (double loss : loss_history) sched.step(loss);
  return sched.lr();
}

}  // namespace fuq
