#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fuq/field.hpp"
#include "fuq/network.hpp"

namespace fuq {

/// A trained network plus the coordinate normalization and optional output
/// scaling needed to map physical positions to physical vectors.
struct NeuralField {
  NetworkConfig config;
  Parameters params;
  DomainSpec domain;                 // coordinates are normalized against these bounds
  std::vector<double> output_shift;  // physical = raw * scale + shift
  std::vector<double> output_scale;
  std::uint64_t seed = 0;

  static NeuralField identity_scaling(NetworkConfig config, Parameters params, DomainSpec domain,
                                      std::uint64_t seed = 0) {
    NeuralField f{config, std::move(params), std::move(domain), {}, {}, seed};
    f.output_shift.assign(config.output_dim, 0.0);
    f.output_scale.assign(config.output_dim, 1.0);
    return f;
  }

  void apply_output_scaling(Matrix& raw) const {
    for (Eigen::Index c = 0; c < raw.rows(); ++c)
      raw.row(c) = (raw.row(c).array() * output_scale[static_cast<std::size_t>(c)] +
                    output_shift[static_cast<std::size_t>(c)])
                       .matrix();
  }

  /// Physical-space evaluation of a batch of physical points.
  std::vector<Vec> evaluate(const std::vector<Vec>& points, const ForwardMode& mode = ForwardMode::deterministic()) const {
    Matrix batch(static_cast<Eigen::Index>(config.input_dim), static_cast<Eigen::Index>(points.size()));
    for (std::size_t j = 0; j < points.size(); ++j) {
      const Vec q = normalize_coords(points[j], domain);
      for (std::size_t a = 0; a < config.input_dim; ++a) batch(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) = q[a];
    }
    Matrix y = predict(params, config, batch, mode);
    apply_output_scaling(y);
    std::vector<Vec> out(points.size(), Vec(config.output_dim));
    for (std::size_t j = 0; j < points.size(); ++j)
      for (std::size_t c = 0; c < config.output_dim; ++c) out[j][c] = y(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
    return out;
  }

  Vec evaluate(const Vec& p) const { return evaluate(std::vector<Vec>{p}).front(); }
};

/// (d x N) matrix of the normalized coordinates of every node of `grid`,
/// normalized against `bounds`.
inline Matrix normalized_node_matrix(const DomainSpec& grid, const DomainSpec& bounds) {
  Matrix x(static_cast<Eigen::Index>(grid.axes()), static_cast<Eigen::Index>(grid.node_count()));
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const Vec q = normalize_coords(grid.node_position(i), bounds);
    for (std::size_t a = 0; a < grid.axes(); ++a) x(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i)) = q[a];
  }
  return x;
}

/// Evaluates the model on every node of `grid`, in chunks of `chunk` nodes.
/// Each chunk is one forward call; in dropout mode each call draws new masks.
inline GridVectorField infer_grid(const NeuralField& model, const DomainSpec& grid, std::size_t chunk,
                                  const ForwardMode& mode = ForwardMode::deterministic()) {
  if (grid.axes() != model.config.input_dim || model.config.output_dim != grid.axes())
    fail(ErrorKind::DimensionMismatch, "grid dimension does not match the model");
  if (chunk == 0) fail(ErrorKind::InvalidArgument, "chunk size must be >= 1");
  const Matrix coords = normalized_node_matrix(grid, model.domain);
  GridVectorField out(grid);
  const auto n = static_cast<Eigen::Index>(grid.node_count());
  for (Eigen::Index start = 0; start < n; start += static_cast<Eigen::Index>(chunk)) {
    const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), n - start);
    Matrix y = predict(model.params, model.config, coords.middleCols(start, len), mode);
    model.apply_output_scaling(y);
    for (Eigen::Index j = 0; j < len; ++j)
      for (Eigen::Index c = 0; c < y.rows(); ++c)
        out.at(static_cast<std::size_t>(start + j), static_cast<std::size_t>(c)) = y(c, j);
  }
  return out;
}

}  // namespace fuq
