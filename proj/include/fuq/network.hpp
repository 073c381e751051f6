#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fuq/error.hpp"
#include "fuq/random.hpp"

namespace fuq {

/// Which residual blocks carry a post-activation dropout layer.
enum class DropoutPlacement { none, last_block, last_half, all_blocks };

inline std::string_view to_string(DropoutPlacement p) noexcept {
  switch (p) {
    case DropoutPlacement::none: return "none";
    case DropoutPlacement::last_block: return "last_block";
    case DropoutPlacement::last_half: return "last_half";
    case DropoutPlacement::all_blocks: return "all_blocks";
  }
  return "none";
}

inline DropoutPlacement parse_dropout_placement(std::string_view s) {
  if (s == "none") return DropoutPlacement::none;
  if (s == "last_block" || s == "last") return DropoutPlacement::last_block;
  if (s == "last_half" || s == "last-half") return DropoutPlacement::last_half;
  if (s == "all_blocks" || s == "all") return DropoutPlacement::all_blocks;
  fail(ErrorKind::InvalidArgument, "unknown dropout placement '" + std::string(s) + "'");
}

/// Column-major batch: one column per sample.
using Matrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LayerShape {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t out = 0;
  std::size_t in = 0;
};

/// Residual sine MLP:
///   h0 = sin(w0 (W_in x + b_in))
///   h_{k+1} = drop_k(h_k + sin(w0 (W2 sin(w0 (W1 h_k + b1)) + b2)))
///   y = W_out h_B + b_out
struct NetworkConfig {
  std::size_t input_dim = 2;
  std::size_t output_dim = 2;
  std::size_t hidden_width = 100;
  std::size_t num_res_blocks = 10;
  double omega0 = 30.0;
  DropoutPlacement dropout_placement = DropoutPlacement::last_block;
  double dropout_p_train = 0.05;
  double dropout_p_test = 0.1;

  void validate() const {
    if (input_dim != 2 && input_dim != 3) fail(ErrorKind::InvalidConfig, "input_dim must be 2 or 3");
    if (output_dim != 2 && output_dim != 3) fail(ErrorKind::InvalidConfig, "output_dim must be 2 or 3");
    if (hidden_width < 1) fail(ErrorKind::InvalidConfig, "hidden_width must be >= 1");
    if (num_res_blocks < 1) fail(ErrorKind::InvalidConfig, "num_res_blocks must be >= 1");
    if (!(omega0 > 0.0) || !std::isfinite(omega0)) fail(ErrorKind::InvalidConfig, "omega0 must be > 0");
    for (double p : {dropout_p_train, dropout_p_test})
      if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::InvalidConfig, "dropout probabilities must lie in [0,1)");
  }

  /// Input layer, two layers per block, output layer.
  std::size_t layer_count() const noexcept { return 2 * num_res_blocks + 2; }
  std::size_t output_layer() const noexcept { return layer_count() - 1; }

  /// Layer k in canonical order: input; block b -> 1+2b (first), 2+2b (second); output.
  LayerShape layer(std::size_t k) const noexcept {
    std::size_t offset = 0;
    LayerShape shape;
    for (std::size_t i = 0; i <= k; ++i) {
      const std::size_t in = i == 0 ? input_dim : hidden_width;
      const std::size_t out = i == output_layer() ? output_dim : hidden_width;
      shape = {offset, offset + out * in, out, in};
      offset += out * in + out;
    }
    return shape;
  }

  std::size_t parameter_count() const noexcept {
    const std::size_t w = hidden_width;
    return (input_dim * w + w) + num_res_blocks * 2 * (w * w + w) + (w * output_dim + output_dim);
  }

  bool block_has_dropout(std::size_t block) const noexcept {
    switch (dropout_placement) {
      case DropoutPlacement::none: return false;
      case DropoutPlacement::last_block: return block + 1 == num_res_blocks;
      case DropoutPlacement::last_half: return block >= num_res_blocks / 2;
      case DropoutPlacement::all_blocks: return true;
    }
    return false;
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Flat parameter storage in canonical order: each layer's row-major
/// weight matrix (out x in) followed by its bias.
struct Parameters {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }

  Eigen::Map<const RowMajorMatrix> weights(const LayerShape& s) const {
    return {values.data() + s.weight_offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in)};
  }
  Eigen::Map<RowMajorMatrix> weights(const LayerShape& s) {
    return {values.data() + s.weight_offset, static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in)};
  }
  Eigen::Map<const Eigen::VectorXd> bias(const LayerShape& s) const {
    return {values.data() + s.bias_offset, static_cast<Eigen::Index>(s.out)};
  }
  Eigen::Map<Eigen::VectorXd> bias(const LayerShape& s) {
    return {values.data() + s.bias_offset, static_cast<Eigen::Index>(s.out)};
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// SIREN initialisation: first layer U(-1/d, 1/d), every later layer
/// U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0), zero biases.
inline Parameters init_parameters(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Parameters params;
  params.values.assign(config.parameter_count(), 0.0);
  Rng rng(seed);
  for (std::size_t k = 0; k < config.layer_count(); ++k) {
    const LayerShape s = config.layer(k);
    const double bound = k == 0 ? 1.0 / static_cast<double>(config.input_dim)
                                : std::sqrt(6.0 / static_cast<double>(s.in)) / config.omega0;
    for (std::size_t i = 0; i < s.out * s.in; ++i) params.values[s.weight_offset + i] = rng.uniform(-bound, bound);
  }
  return params;
}

/// Dropout on or off for a forward pass. A dropout pass draws fresh masks
/// from the caller's generator on every call.
class ForwardMode {
 public:
  static ForwardMode deterministic() noexcept { return ForwardMode(); }
  static ForwardMode dropout(double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::InvalidArgument, "dropout probability must lie in [0,1)");
    ForwardMode m;
    m.p_ = p;
    m.rng_ = &rng;
    return m;
  }

  bool active() const noexcept { return rng_ != nullptr && p_ > 0.0; }
  double p() const noexcept { return p_; }
  Rng& rng() const noexcept { return *rng_; }

 private:
  double p_ = 0.0;
  Rng* rng_ = nullptr;
};

/// Everything backward() needs from one forward pass.
struct ForwardTrace {
  std::size_t batch = 0;
  std::vector<Matrix> inputs;        // input of every layer, (in x n)
  std::vector<Matrix> cos_pre;       // cos of the scaled pre-activation of every sine layer
  std::vector<std::optional<Matrix>> masks;  // per block, scaled keep-mask (0 or 1/(1-p))
};

struct ForwardResult {
  Matrix output;  // (v x n)
  ForwardTrace trace;
};

namespace detail {

inline Matrix scaled_preactivation(const Parameters& params, const LayerShape& s, double omega0, const Matrix& x) {
  Matrix z(static_cast<Eigen::Index>(s.out), x.cols());
  z.noalias() = params.weights(s) * x;
  z.colwise() += params.bias(s);
  z *= omega0;
  return z;
}

inline Matrix draw_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

template <bool kRecord>
Matrix run_forward(const Parameters& params, const NetworkConfig& config, const Matrix& batch,
                   const ForwardMode& mode, ForwardTrace* trace) {
  if (static_cast<std::size_t>(batch.rows()) != config.input_dim)
    fail(ErrorKind::ShapeMismatch, "batch rows must equal input_dim");
  if (params.size() != config.parameter_count())
    fail(ErrorKind::ShapeMismatch, "parameter count does not match the network configuration");
  if (!batch.allFinite()) fail(ErrorKind::InvalidArgument, "batch coordinates must be finite");

  const double w0 = config.omega0;
  if constexpr (kRecord) {
    trace->batch = static_cast<std::size_t>(batch.cols());
    trace->inputs.clear();
    trace->cos_pre.clear();
    trace->masks.assign(config.num_res_blocks, std::nullopt);
    trace->inputs.reserve(config.layer_count());
    trace->cos_pre.reserve(config.layer_count() - 1);
  }

  auto sine_layer = [&](std::size_t k, const Matrix& x) {
    Matrix z = scaled_preactivation(params, config.layer(k), w0, x);
    if constexpr (kRecord) {
      trace->inputs.push_back(x);
      trace->cos_pre.push_back(z.array().cos().matrix());
    }
    return Matrix(z.array().sin().matrix());
  };

  Matrix h = sine_layer(0, batch);
  for (std::size_t b = 0; b < config.num_res_blocks; ++b) {
    Matrix a1 = sine_layer(1 + 2 * b, h);
    Matrix a2 = sine_layer(2 + 2 * b, a1);
    h += a2;
    if (mode.active() && config.block_has_dropout(b)) {
      Matrix mask = draw_mask(h.rows(), h.cols(), mode.p(), mode.rng());
      h.array() *= mask.array();
      if constexpr (kRecord) trace->masks[b] = std::move(mask);
    }
  }

  const LayerShape out = config.layer(config.output_layer());
  Matrix y(static_cast<Eigen::Index>(out.out), batch.cols());
  y.noalias() = params.weights(out) * h;
  y.colwise() += params.bias(out);
  if constexpr (kRecord) trace->inputs.push_back(std::move(h));
  if (!y.allFinite()) fail(ErrorKind::NonFiniteActivation, "network produced a non-finite output");
  return y;
}

}  // namespace detail

/// Forward pass over a (d x n) batch of normalized coordinates, recording
/// the trace for backward().
inline ForwardResult forward(const Parameters& params, const NetworkConfig& config, const Matrix& batch,
                             const ForwardMode& mode = ForwardMode::deterministic()) {
  ForwardResult result;
  result.output = detail::run_forward<true>(params, config, batch, mode, &result.trace);
  return result;
}

/// Forward pass without recording a trace.
inline Matrix predict(const Parameters& params, const NetworkConfig& config, const Matrix& batch,
                      const ForwardMode& mode = ForwardMode::deterministic()) {
  return detail::run_forward<false>(params, config, batch, mode, nullptr);
}

/// Gradient of the loss with respect to every parameter, given the
/// gradient of the loss with respect to the (v x n) predictions.
inline std::vector<double> backward(const ForwardTrace& trace, const Parameters& params, const NetworkConfig& config,
                                    const Matrix& upstream) {
  if (static_cast<std::size_t>(upstream.rows()) != config.output_dim ||
      static_cast<std::size_t>(upstream.cols()) != trace.batch)
    fail(ErrorKind::ShapeMismatch, "upstream gradient shape does not match the traced forward pass");
  if (trace.inputs.size() != config.layer_count() || trace.cos_pre.size() + 1 != config.layer_count() ||
      trace.masks.size() != config.num_res_blocks)
    fail(ErrorKind::ShapeMismatch, "trace does not match the network configuration");
  if (params.size() != config.parameter_count())
    fail(ErrorKind::ShapeMismatch, "parameter count does not match the network configuration");

  Parameters grad;
  grad.values.assign(config.parameter_count(), 0.0);
  const double w0 = config.omega0;

  auto accumulate = [&](std::size_t k, const Matrix& gz) {
    const LayerShape s = config.layer(k);
    grad.weights(s).noalias() = gz * trace.inputs[k].transpose();
    grad.bias(s) = gz.rowwise().sum();
  };
  // Gradient through y = sin(w0 z): returns gradient w.r.t. the layer input.
  auto sine_back = [&](std::size_t k, const Matrix& g_out) {
    Matrix gz = (g_out.array() * trace.cos_pre[k].array() * w0).matrix();
    accumulate(k, gz);
    const LayerShape s = config.layer(k);
    Matrix g_in(static_cast<Eigen::Index>(s.in), gz.cols());
    g_in.noalias() = params.weights(s).transpose() * gz;
    return g_in;
  };

  const std::size_t out_k = config.output_layer();
  accumulate(out_k, upstream);
  const LayerShape out = config.layer(out_k);
  Matrix g(static_cast<Eigen::Index>(out.in), upstream.cols());
  g.noalias() = params.weights(out).transpose() * upstream;

  for (std::size_t b = config.num_res_blocks; b-- > 0;) {
    if (trace.masks[b]) g.array() *= trace.masks[b]->array();
    Matrix g_a1 = sine_back(2 + 2 * b, g);
    g += sine_back(1 + 2 * b, g_a1);
  }
  sine_back(0, g);
  return std::move(grad.values);
}

}  // namespace fuq
