#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "fuq/network.hpp"
#include "fuq/random.hpp"

namespace gradcheck {

struct Result {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

/// One draw: a SIREN-initialized net with random biases, random dropout
/// placement and masks, random inputs, and loss = <r, y> for a random r.
/// Per-entry error is |fd - g| / max(|fd|, |g|, 1e-3 * max|g|).
inline Result check_draw(fuq::Rng& rng, std::size_t max_d = 3, std::size_t max_w = 8, std::size_t max_blocks = 3,
                         double h = 1e-6) {
  using namespace fuq;
  NetworkConfig c;
  c.input_dim = 2 + rng.below(max_d - 1);
  c.output_dim = c.input_dim;
  c.hidden_width = 1 + rng.below(max_w);
  c.num_res_blocks = 1 + rng.below(max_blocks);
  const DropoutPlacement placements[] = {DropoutPlacement::none, DropoutPlacement::last_block, DropoutPlacement::last_half,
                                         DropoutPlacement::all_blocks};
  c.dropout_placement = placements[rng.below(4)];

  Parameters p = init_parameters(c, rng());
  for (std::size_t k = 0; k < c.layer_count(); ++k) {
    const LayerShape s = c.layer(k);
    for (std::size_t i = 0; i < s.out; ++i) p.values[s.bias_offset + i] = rng.uniform(-0.2, 0.2);
  }
  const auto n = static_cast<Eigen::Index>(1 + rng.below(4));
  const auto d = static_cast<Eigen::Index>(c.input_dim);
  Matrix x(d, n), r(d, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = rng.uniform(-1, 1);
    r.data()[i] = rng.uniform(-1, 1);
  }
  const std::uint64_t mask_seed = rng();
  const double p_drop = 0.3;

  auto loss = [&](const Parameters& q) {
    Rng mr(mask_seed);
    return (predict(q, c, x, ForwardMode::dropout(p_drop, mr)).array() * r.array()).sum();
  };
  Rng mr(mask_seed);
  const auto res = forward(p, c, x, ForwardMode::dropout(p_drop, mr));
  const auto g = backward(res.trace, p, c, r);
  double gmax = 0.0;
  for (double v : g) gmax = std::max(gmax, std::abs(v));

  Result out;
  out.entries = g.size();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Parameters plus = p, minus = p;
    plus.values[i] += h;
    minus.values[i] -= h;
    const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-3 * gmax});
    if (denom > 0.0) out.max_rel_error = std::max(out.max_rel_error, std::abs(fd - g[i]) / denom);
  }
  return out;
}

}  // namespace gradcheck
