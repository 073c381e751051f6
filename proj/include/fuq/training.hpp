#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fuq/error.hpp"
#include "fuq/field.hpp"
#include "fuq/model.hpp"
#include "fuq/network.hpp"
#include "fuq/optim.hpp"
#include "fuq/parallel.hpp"
#include "fuq/random.hpp"

namespace fuq {

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 2048;
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 10;
  double decay_factor = 0.1;
  double min_lr = 0.0;
  std::uint64_t seed = 0;
  bool target_scaling = false;  // min-max scale targets to [-1, 1] per component

  void validate() const {
    if (batch_size < 1) fail(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      fail(ErrorKind::InvalidConfig, "Adam betas must lie in [0,1)");
    if (!(epsilon > 0.0)) fail(ErrorKind::InvalidConfig, "epsilon must be > 0");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) fail(ErrorKind::InvalidConfig, "decay_factor must lie in (0,1]");
    if (!(min_lr >= 0.0)) fail(ErrorKind::InvalidConfig, "min_lr must be >= 0");
  }
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_lr;  // rate used during the epoch
  std::vector<double> epoch_seconds;
  double total_seconds = 0.0;
};

struct TrainResult {
  NeuralField model;
  TrainReport report;
};

/// Uniform random permutation of [0, n) cut into consecutive chunks of
/// `batch_size`; the last chunk may be short.
inline std::vector<std::vector<std::size_t>> make_epoch_batches(std::size_t n_samples, std::size_t batch_size,
                                                               Rng& rng) {
  if (n_samples < 1) fail(ErrorKind::InvalidArgument, "need at least one sample");
  if (batch_size < 1) fail(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  std::vector<std::size_t> perm(n_samples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n_samples - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n_samples; start += batch_size) {
    const std::size_t end = std::min(n_samples, start + batch_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

/// Mean over batch entries and components of the squared error, and its
/// gradient with respect to the predictions.
inline double mse_loss(const Matrix& pred, const Matrix& target, Matrix* grad = nullptr) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    fail(ErrorKind::ShapeMismatch, "prediction and target shapes differ");
  const double denom = static_cast<double>(pred.size());
  const Matrix diff = pred - target;
  if (grad) *grad = diff * (2.0 / denom);
  return diff.squaredNorm() / denom;
}

namespace detail {

struct TargetScaling {
  std::vector<double> shift;
  std::vector<double> scale;
};

inline TargetScaling fit_target_scaling(const GridVectorField& field, bool enabled) {
  const std::size_t v = field.components();
  TargetScaling s{std::vector<double>(v, 0.0), std::vector<double>(v, 1.0)};
  if (!enabled) return s;
  for (std::size_t c = 0; c < v; ++c) {
    double lo = field.at(0, c), hi = lo;
    for (std::size_t i = 1; i < field.node_count(); ++i) {
      lo = std::min(lo, field.at(i, c));
      hi = std::max(hi, field.at(i, c));
    }
    s.shift[c] = 0.5 * (lo + hi);
    s.scale[c] = hi > lo ? 0.5 * (hi - lo) : 1.0;
  }
  return s;
}

}  // namespace detail

/// Stream indices derived from TrainConfig::seed.
inline constexpr std::uint64_t kShuffleStream = 1;
inline constexpr std::uint64_t kDropoutStream = 2;

/// Fits one network to every node of `field` (normalized coordinate ->
/// node vector) with minibatch Adam and per-epoch plateau decay.
inline TrainResult train_single_model(const GridVectorField& field, NetworkConfig net, const TrainConfig& cfg) {
  net.input_dim = field.domain().axes();
  net.output_dim = field.components();
  net.validate();
  cfg.validate();

  const auto scaling = detail::fit_target_scaling(field, cfg.target_scaling);
  TrainResult result{NeuralField::identity_scaling(net, init_parameters(net, cfg.seed), field.domain(), cfg.seed), {}};
  result.model.output_shift = scaling.shift;
  result.model.output_scale = scaling.scale;

  const std::size_t n = field.node_count();
  const std::size_t v = field.components();
  const Matrix coords = normalized_node_matrix(field.domain(), field.domain());
  Matrix targets(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < v; ++c)
      targets(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = (field.at(i, c) - scaling.shift[c]) / scaling.scale[c];

  Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  Rng dropout_rng(derive_seed(cfg.seed, kDropoutStream));
  const bool use_dropout = net.dropout_placement != DropoutPlacement::none && net.dropout_p_train > 0.0;
  const ForwardMode mode =
      use_dropout ? ForwardMode::dropout(net.dropout_p_train, dropout_rng) : ForwardMode::deterministic();

  Parameters& params = result.model.params;
  AdamState adam = AdamState::zeros(params.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  PlateauScheduler scheduler(cfg.learning_rate, cfg.patience, cfg.decay_factor, cfg.min_lr);
  TrainReport& report = result.report;

  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  Matrix grad_out;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t_epoch = clock::now();
    adam.learning_rate = scheduler.lr();
    double loss_sum = 0.0;
    const auto batches = make_epoch_batches(n, cfg.batch_size, shuffle_rng);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      const Matrix x = coords(Eigen::all, idx);
      const Matrix y = targets(Eigen::all, idx);
      ForwardResult fwd;
      try {
        fwd = forward(params, net, x, mode);
      } catch (const Error& e) {
        fail(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) + ": " + e.what());
      }
      const double loss = mse_loss(fwd.output, y, &grad_out);
      if (!std::isfinite(loss))
        fail(ErrorKind::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
      const auto grads = backward(fwd.trace, params, net, grad_out);
      adam_step(adam, params.values, grads);
      loss_sum += loss * static_cast<double>(idx.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    report.epoch_loss.push_back(epoch_loss);
    report.epoch_lr.push_back(adam.learning_rate);
    scheduler.step(epoch_loss);
    report.epoch_seconds.push_back(std::chrono::duration<double>(clock::now() - t_epoch).count());
  }
  report.total_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return result;
}

/// Seed for ensemble member k: derive_seed(base_seed, k).
inline std::uint64_t member_seed(std::uint64_t base_seed, std::size_t member) noexcept {
  return derive_seed(base_seed, static_cast<std::uint64_t>(member));
}

/// Independently trained members, each with its own derived seed (hence
/// its own initialisation and shuffling). Members never use dropout.
inline std::vector<TrainResult> train_ensemble(const GridVectorField& field, const NetworkConfig& net,
                                               const TrainConfig& cfg, std::size_t members, std::size_t jobs = 1) {
  if (members < 1) fail(ErrorKind::InvalidArgument, "an ensemble needs at least one member");
  if (net.dropout_placement != DropoutPlacement::none)
    fail(ErrorKind::InvalidConfig, "ensemble members are trained without dropout (placement must be none)");
  std::vector<TrainResult> results(members);
  parallel_for(members, jobs, [&](std::size_t k) {
    TrainConfig member_cfg = cfg;
    member_cfg.seed = member_seed(cfg.seed, k);
    try {
      results[k] = train_single_model(field, net, member_cfg);
    } catch (const Error& e) {
      fail(e.kind(), "ensemble member " + std::to_string(k) + ": " + e.what());
    }
  });
  return results;
}

}  // namespace fuq
