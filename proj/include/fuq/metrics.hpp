#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fuq/error.hpp"
#include "fuq/field.hpp"

namespace fuq {

inline double rmse(const GridVectorField& pred, const GridVectorField& truth) {
  if (!(pred.domain() == truth.domain())) fail(ErrorKind::DomainMismatch, "prediction and truth domains differ");
  double sum = 0.0;
  const auto& a = pred.data();
  const auto& b = truth.data();
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum / static_cast<double>(a.size()));
}

/// 20 log10(range / rmse) with range = max - min of the truth over all
/// components jointly. A perfect prediction gives +infinity.
inline double psnr(const GridVectorField& pred, const GridVectorField& truth) {
  const auto [lo, hi] = std::minmax_element(truth.data().begin(), truth.data().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) fail(ErrorKind::ZeroRange, "PSNR undefined for a constant ground truth");
  const double err = rmse(pred, truth);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(range / err);
}

namespace detail {

inline double nearest_distance(const Vec& p, const std::vector<Vec>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set) best = std::min(best, distance(p, q));
  return best;
}

inline void require_nonempty(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.empty() || b.empty()) fail(ErrorKind::EmptySet, "point sets must be non-empty");
}

}  // namespace detail

/// Symmetric mean-of-nearest-neighbour distance, halved.
inline double chamfer(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  detail::require_nonempty(a, b);
  double ab = 0.0, ba = 0.0;
  for (const auto& p : a) ab += detail::nearest_distance(p, b);
  for (const auto& q : b) ba += detail::nearest_distance(q, a);
  return 0.5 * (ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size()));
}

inline double hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  detail::require_nonempty(a, b);
  double h = 0.0;
  for (const auto& p : a) h = std::max(h, detail::nearest_distance(p, b));
  for (const auto& q : b) h = std::max(h, detail::nearest_distance(q, a));
  return h;
}

struct CriticalPointError {
  std::optional<double> rmse;  // absent when nothing matched
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t spurious = 0;
};

/// Index pairs (pred, truth) of a one-to-one assignment covering the smaller
/// set with minimum total distance: exhaustive branch-and-bound when both sets
/// have at most `exhaustive_limit` points, greedy closest-pair otherwise.
inline std::vector<std::pair<std::size_t, std::size_t>> assign_points(const std::vector<Vec>& pred,
                                                                      const std::vector<Vec>& truth,
                                                                      std::size_t exhaustive_limit = 10) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (pred.empty() || truth.empty()) return pairs;

  if (pred.size() <= exhaustive_limit && truth.size() <= exhaustive_limit) {
    // Assign every element of the smaller set to a distinct element of the larger one.
    const bool pred_small = pred.size() <= truth.size();
    const auto& small = pred_small ? pred : truth;
    const auto& large = pred_small ? truth : pred;
    std::vector<std::size_t> current(small.size()), best_choice;
    std::vector<bool> used(large.size(), false);
    double best = std::numeric_limits<double>::infinity();
    auto search = [&](auto&& self, std::size_t i, double cost) -> void {
      if (cost >= best) return;
      if (i == small.size()) {
        best = cost;
        best_choice = current;
        return;
      }
      for (std::size_t j = 0; j < large.size(); ++j) {
        if (used[j]) continue;
        used[j] = true;
        current[i] = j;
        self(self, i + 1, cost + distance(small[i], large[j]));
        used[j] = false;
      }
    };
    search(search, 0, 0.0);
    for (std::size_t i = 0; i < small.size(); ++i)
      pairs.emplace_back(pred_small ? i : best_choice[i], pred_small ? best_choice[i] : i);
    return pairs;
  }

  std::vector<bool> pred_used(pred.size(), false), truth_used(truth.size(), false);
  const std::size_t n = std::min(pred.size(), truth.size());
  for (std::size_t k = 0; k < n; ++k) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> arg{0, 0};
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred_used[i]) continue;
      for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth_used[j]) continue;
        const double dist = distance(pred[i], truth[j]);
        if (dist < best) {
          best = dist;
          arg = {i, j};
        }
      }
    }
    pred_used[arg.first] = truth_used[arg.second] = true;
    pairs.push_back(arg);
  }
  return pairs;
}

/// Position error of predicted critical points against the truth. Assigned
/// pairs farther apart than `match_radius` count as one miss plus one
/// spurious detection.
inline CriticalPointError critical_point_rmse(const std::vector<Vec>& pred, const std::vector<Vec>& truth,
                                              double match_radius) {
  if (truth.empty()) fail(ErrorKind::EmptyTruth, "ground-truth critical point set is empty");
  CriticalPointError out;
  double sum = 0.0;
  for (const auto& [i, j] : assign_points(pred, truth)) {
    const double dist = distance(pred[i], truth[j]);
    if (dist > match_radius) continue;
    sum += dist * dist;
    ++out.matched;
  }
  out.missed = truth.size() - out.matched;
  out.spurious = pred.size() - out.matched;
  if (out.matched > 0) out.rmse = std::sqrt(sum / static_cast<double>(out.matched));
  return out;
}

/// Default matching radius: 5 % of the domain diagonal.
inline double default_match_radius(const DomainSpec& domain) noexcept { return 0.05 * domain.diagonal(); }

/// Named results in insertion order plus the settings that produced them.
struct MetricReport {
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<std::pair<std::string, double>> values;

  void set(const std::string& key, double value) {
    for (auto& [k, v] : values)
      if (k == key) {
        v = value;
        return;
      }
    values.emplace_back(key, value);
  }
  void setting(const std::string& key, const std::string& value) {
    for (auto& [k, v] : settings)
      if (k == key) {
        v = value;
        return;
      }
    settings.emplace_back(key, value);
  }
  std::optional<double> get(const std::string& key) const {
    for (const auto& [k, v] : values)
      if (k == key) return v;
    return std::nullopt;
  }
};

}  // namespace fuq
