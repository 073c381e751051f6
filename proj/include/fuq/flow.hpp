#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fuq/error.hpp"
#include "fuq/field.hpp"
#include "fuq/model.hpp"
#include "fuq/parallel.hpp"
#include "fuq/uq.hpp"

namespace fuq {

/// Anything that can be asked for a vector at a physical point of its domain.
template <class S>
concept VectorSampler = requires(const S& s, const Vec& p) {
  { s.domain() } -> std::convertible_to<const DomainSpec&>;
  { s(p) } -> std::convertible_to<Vec>;
};

class GridSampler {
 public:
  explicit GridSampler(const GridVectorField& field) : field_(&field) {}
  const DomainSpec& domain() const noexcept { return field_->domain(); }
  Vec operator()(const Vec& p) const { return sample_interpolated(*field_, p); }

 private:
  const GridVectorField* field_;
};

/// Deterministic network evaluation at arbitrary points.
class NeuralSampler {
 public:
  explicit NeuralSampler(const NeuralField& model) : model_(&model) {}
  const DomainSpec& domain() const noexcept { return model_->domain; }
  Vec operator()(const Vec& p) const { return model_->evaluate(p); }

 private:
  const NeuralField* model_;
};

class FunctionSampler {
 public:
  FunctionSampler(DomainSpec domain, std::function<Vec(const Vec&)> fn)
      : domain_(std::move(domain)), fn_(std::move(fn)) {}
  const DomainSpec& domain() const noexcept { return domain_; }
  Vec operator()(const Vec& p) const {
    require_point_in(domain_, p);
    return fn_(p);
  }

 private:
  DomainSpec domain_;
  std::function<Vec(const Vec&)> fn_;
};

namespace detail {

template <VectorSampler S>
std::optional<Vec> try_rk4_step(const S& sampler, const Vec& p, double h) {
  const DomainSpec& dom = sampler.domain();
  if (!dom.contains(p)) return std::nullopt;
  const Vec k1 = sampler(p);
  const Vec p2 = p + k1 * (0.5 * h);
  if (!dom.contains(p2)) return std::nullopt;
  const Vec k2 = sampler(p2);
  const Vec p3 = p + k2 * (0.5 * h);
  if (!dom.contains(p3)) return std::nullopt;
  const Vec k3 = sampler(p3);
  const Vec p4 = p + k3 * h;
  if (!dom.contains(p4)) return std::nullopt;
  const Vec k4 = sampler(p4);
  return p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

}  // namespace detail

/// Classic fourth-order Runge-Kutta step; negative h integrates backward.
/// Throws OutOfDomain if any stage point leaves the domain.
template <VectorSampler S>
Vec rk4_step(const S& sampler, const Vec& p, double h) {
  if (h == 0.0 || !std::isfinite(h)) fail(ErrorKind::InvalidArgument, "step size must be finite and non-zero");
  if (p.size() != sampler.domain().axes()) fail(ErrorKind::DimensionMismatch, "point dimension does not match domain");
  auto next = detail::try_rk4_step(sampler, p, h);
  if (!next) fail(ErrorKind::OutOfDomain, "RK4 stage left the domain");
  return *next;
}

enum class Termination { domain_exit, max_steps, zero_velocity };

inline std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::domain_exit: return "domain_exit";
    case Termination::max_steps: return "max_steps";
    case Termination::zero_velocity: return "zero_velocity";
  }
  return "unknown";
}

/// Points run backward-trace (reversed), seed, forward-trace.
struct Streamline {
  std::vector<Vec> points;
  std::size_t seed_index = 0;
  Termination forward_termination = Termination::max_steps;
  Termination backward_termination = Termination::max_steps;

  std::size_t forward_steps() const noexcept { return points.size() - 1 - seed_index; }
  std::size_t backward_steps() const noexcept { return seed_index; }
  const Vec& seed() const { return points[seed_index]; }
  /// Point at a signed step index relative to the seed; caller checks range.
  const Vec& at_step(std::ptrdiff_t k) const {
    return points[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(seed_index) + k)];
  }
};

inline constexpr double kStagnationSpeed = 1e-12;

/// Default integration step: a quarter of the smallest grid spacing.
inline double default_step_size(const DomainSpec& domain) noexcept { return 0.25 * domain.min_spacing(); }

template <VectorSampler S>
Streamline trace_streamline(const S& sampler, const Vec& seed, double h, std::size_t max_steps_per_direction) {
  const DomainSpec& dom = sampler.domain();
  if (seed.size() != dom.axes()) fail(ErrorKind::DimensionMismatch, "seed dimension does not match domain");
  if (!dom.contains(seed)) fail(ErrorKind::SeedOutOfDomain, "seed lies outside the domain");
  if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorKind::InvalidArgument, "step size must be > 0");

  auto run = [&](double step, std::vector<Vec>& out) {
    Vec p = seed;
    for (std::size_t i = 0; i < max_steps_per_direction; ++i) {
      if (sampler(p).norm() < kStagnationSpeed) return Termination::zero_velocity;
      auto next = detail::try_rk4_step(sampler, p, step);
      if (!next || !dom.contains(*next)) return Termination::domain_exit;
      p = *next;
      out.push_back(p);
    }
    return Termination::max_steps;
  };

  std::vector<Vec> fwd, bwd;
  Streamline line;
  line.forward_termination = run(h, fwd);
  line.backward_termination = run(-h, bwd);
  line.points.reserve(fwd.size() + bwd.size() + 1);
  line.points.assign(bwd.rbegin(), bwd.rend());
  line.seed_index = line.points.size();
  line.points.push_back(seed);
  line.points.insert(line.points.end(), fwd.begin(), fwd.end());
  return line;
}

/// Mean/median polyline of a bundle, aligned by signed step index; each
/// step uses only the realizations that reach it.
struct StreamlineAggregate {
  std::vector<Vec> mean;
  std::vector<Vec> median;
  std::vector<double> uncertainty;   // sum over axes of the population std
  std::vector<std::size_t> support;  // surviving realizations per step
  std::size_t seed_index = 0;
};

struct StreamlineBundle {
  std::vector<Streamline> realizations;
  StreamlineAggregate aggregate;
};

inline StreamlineAggregate aggregate_streamlines(const std::vector<Streamline>& lines) {
  if (lines.empty()) fail(ErrorKind::EmptyBundle, "cannot aggregate an empty bundle");
  const Vec& seed = lines.front().seed();
  std::size_t max_fwd = 0, max_bwd = 0;
  for (const auto& l : lines) {
    if (l.points.empty() || l.seed_index >= l.points.size())
      fail(ErrorKind::InvalidArgument, "malformed streamline");
    if (!(l.seed() == seed)) fail(ErrorKind::InvalidArgument, "all realizations must share the seed");
    max_fwd = std::max(max_fwd, l.forward_steps());
    max_bwd = std::max(max_bwd, l.backward_steps());
  }

  const std::size_t d = seed.size();
  StreamlineAggregate agg;
  agg.seed_index = max_bwd;
  std::vector<double> coords;
  for (auto k = -static_cast<std::ptrdiff_t>(max_bwd); k <= static_cast<std::ptrdiff_t>(max_fwd); ++k) {
    Vec mean(d), m2(d), median(d);
    std::size_t count = 0;
    for (const auto& l : lines) {
      const bool alive = k >= 0 ? static_cast<std::size_t>(k) <= l.forward_steps()
                                : static_cast<std::size_t>(-k) <= l.backward_steps();
      if (!alive) continue;
      ++count;
      const Vec& p = l.at_step(k);
      for (std::size_t a = 0; a < d; ++a) {
        const double delta = p[a] - mean[a];
        mean[a] += delta / static_cast<double>(count);
        m2[a] += delta * (p[a] - mean[a]);
      }
    }
    double spread = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      coords.clear();
      for (const auto& l : lines) {
        const bool alive = k >= 0 ? static_cast<std::size_t>(k) <= l.forward_steps()
                                  : static_cast<std::size_t>(-k) <= l.backward_steps();
        if (alive) coords.push_back(l.at_step(k)[a]);
      }
      const std::size_t mid = coords.size() / 2;
      std::nth_element(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(mid), coords.end());
      double med = coords[mid];
      if (coords.size() % 2 == 0) {
        const double lower = *std::max_element(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (lower + med);
      }
      median[a] = med;
      spread += std::sqrt(std::max(0.0, m2[a]) / static_cast<double>(count));
    }
    agg.mean.push_back(mean);
    agg.median.push_back(median);
    agg.uncertainty.push_back(spread);
    agg.support.push_back(count);
  }
  return agg;
}

/// Traces one streamline per realization field (interpolated) from `seed`
/// and aggregates them.
inline StreamlineBundle trace_bundle(const FieldRealizationSet& set, const Vec& seed, double h,
                                     std::size_t max_steps_per_direction, std::size_t jobs = 1) {
  set.validate();
  StreamlineBundle bundle;
  bundle.realizations.resize(set.size());
  parallel_for(set.size(), jobs, [&](std::size_t r) {
    bundle.realizations[r] = trace_streamline(GridSampler(set.realizations[r]), seed, h, max_steps_per_direction);
  });
  bundle.aggregate = aggregate_streamlines(bundle.realizations);
  return bundle;
}

enum class CriticalKind { source, sink, saddle, center, spiral_source, spiral_sink, degenerate };

inline std::string_view to_string(CriticalKind k) noexcept {
  switch (k) {
    case CriticalKind::source: return "source";
    case CriticalKind::sink: return "sink";
    case CriticalKind::saddle: return "saddle";
    case CriticalKind::center: return "center";
    case CriticalKind::spiral_source: return "spiral_source";
    case CriticalKind::spiral_sink: return "spiral_sink";
    case CriticalKind::degenerate: return "degenerate";
  }
  return "unknown";
}

struct CriticalPoint {
  Vec position;
  CriticalKind kind = CriticalKind::degenerate;
  Eigen::MatrixXd jacobian;
};

/// Eigenvalue-based classification. Real parts count as zero below
/// 1e-9 * ||J||_F; a zero-real-part pair next to a strictly positive
/// (negative) eigenvalue is reported as spiral_source (spiral_sink).
inline CriticalKind classify_critical_point(const Eigen::MatrixXd& jacobian) {
  if (jacobian.rows() != jacobian.cols()) fail(ErrorKind::NonSquare, "Jacobian must be square");
  if (jacobian.rows() != 2 && jacobian.rows() != 3) fail(ErrorKind::NonSquare, "Jacobian must be 2x2 or 3x3");
  const double scale = jacobian.norm();
  if (!(scale > 0.0) || !std::isfinite(scale)) return CriticalKind::degenerate;
  const double tol = 1e-9 * scale;

  const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(jacobian, false).eigenvalues();
  bool pos = false, neg = false, zero_re = false, rotating = false;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (std::abs(eig[i]) < tol) return CriticalKind::degenerate;
    const double re = eig[i].real();
    if (re > tol)
      pos = true;
    else if (re < -tol)
      neg = true;
    else
      zero_re = true;
    if (std::abs(eig[i].imag()) > tol) rotating = true;
  }
  if (pos && neg) return CriticalKind::saddle;
  if (!pos && !neg) return rotating ? CriticalKind::center : CriticalKind::degenerate;
  if (pos) return (rotating || zero_re) ? CriticalKind::spiral_source : CriticalKind::source;
  return (rotating || zero_re) ? CriticalKind::spiral_sink : CriticalKind::sink;
}

namespace detail {

/// d v / d t_a of the cell polynomial by central differences in local
/// coordinates; exact up to rounding because the interpolant is linear per axis.
inline Eigen::MatrixXd cell_jacobian_local(const GridVectorField& f, const std::array<std::size_t, 3>& lower,
                                           const std::array<double, 3>& t) {
  const std::size_t d = f.domain().axes();
  constexpr double delta = 1e-3;
  Eigen::MatrixXd j(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < d; ++a) {
    auto tp = t, tm = t;
    tp[a] += delta;
    tm[a] -= delta;
    const Vec diff = cell_interpolate(f, lower, tp) - cell_interpolate(f, lower, tm);
    for (std::size_t c = 0; c < d; ++c)
      j(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(a)) = diff[c] / (2.0 * delta);
  }
  return j;
}

}  // namespace detail

/// Sign-test screening per cell followed by clamped Newton iterations on the
/// cell's multilinear interpolant, starting at the cell center.
inline std::vector<CriticalPoint> detect_critical_points(const GridVectorField& f, double zero_tolerance = 1e-6,
                                                         std::size_t refine_iters = 50) {
  const DomainSpec& dom = f.domain();
  const std::size_t d = dom.axes();
  if (f.components() != d) fail(ErrorKind::DimensionMismatch, "critical points need as many components as axes");

  std::size_t cells = 1;
  for (auto n : dom.dims()) cells *= n - 1;
  const std::size_t corners = std::size_t{1} << d;
  const double dedup_radius = 0.5 * dom.min_spacing();
  constexpr double kInsideTol = 1e-6;

  std::vector<CriticalPoint> found;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::array<std::size_t, 3> lower{};
    std::size_t rest = cell;
    for (std::size_t a = 0; a < d; ++a) {
      lower[a] = rest % (dom.dims()[a] - 1);
      rest /= dom.dims()[a] - 1;
    }

    bool candidate = true;
    for (std::size_t c = 0; c < d && candidate; ++c) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t corner = 0; corner < corners; ++corner) {
        auto idx = lower;
        for (std::size_t a = 0; a < d; ++a) idx[a] += (corner >> a) & 1U;
        const double val = f.at(dom.linear_index(idx), c);
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
      candidate = lo <= 0.0 && hi >= 0.0;
    }
    if (!candidate) continue;

    std::array<double, 3> t{0.5, 0.5, 0.5};
    Vec value = cell_interpolate(f, lower, t);
    for (std::size_t it = 0; it < refine_iters; ++it) {
      if (value.norm() == 0.0) break;
      const Eigen::MatrixXd j = detail::cell_jacobian_local(f, lower, t);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
      if (!lu.isInvertible()) break;
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(d));
      for (std::size_t c = 0; c < d; ++c) rhs[static_cast<Eigen::Index>(c)] = -value[c];
      const Eigen::VectorXd step = lu.solve(rhs);
      // Largest fraction of the step that stays inside the cell.
      double alpha = 1.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double s = step[static_cast<Eigen::Index>(a)];
        if (t[a] + s > 1.0) alpha = std::min(alpha, (1.0 - t[a]) / s);
        if (t[a] + s < 0.0) alpha = std::min(alpha, -t[a] / s);
      }
      for (std::size_t a = 0; a < d; ++a) t[a] = std::clamp(t[a] + alpha * step[static_cast<Eigen::Index>(a)], 0.0, 1.0);
      value = cell_interpolate(f, lower, t);
      if (step.norm() * alpha < 1e-15) break;
    }

    if (!(value.norm() < zero_tolerance)) continue;
    bool inside = true;
    for (std::size_t a = 0; a < d; ++a) inside = inside && t[a] >= -kInsideTol && t[a] <= 1.0 + kInsideTol;
    if (!inside) continue;

    Vec pos(d);
    for (std::size_t a = 0; a < d; ++a)
      pos[a] = dom.physical_min()[a] + (static_cast<double>(lower[a]) + t[a]) * dom.spacing(a);
    const bool duplicate = std::any_of(found.begin(), found.end(),
                                       [&](const CriticalPoint& cp) { return distance(cp.position, pos) < dedup_radius; });
    if (duplicate) continue;

    Eigen::MatrixXd jac = detail::cell_jacobian_local(f, lower, t);
    for (std::size_t a = 0; a < d; ++a) jac.col(static_cast<Eigen::Index>(a)) /= dom.spacing(a);
    found.push_back({pos, classify_critical_point(jac), std::move(jac)});
  }
  return found;
}

/// Positions of the critical points of every realization, pooled.
inline std::vector<Vec> critical_points_all_realizations(const FieldRealizationSet& set, double zero_tolerance,
                                                         std::size_t refine_iters, std::size_t jobs = 1) {
  set.validate();
  std::vector<std::vector<Vec>> per(set.size());
  parallel_for(set.size(), jobs, [&](std::size_t r) {
    for (const auto& cp : detect_critical_points(set.realizations[r], zero_tolerance, refine_iters))
      per[r].push_back(cp.position);
  });
  std::vector<Vec> all;
  for (auto& p : per) all.insert(all.end(), p.begin(), p.end());
  return all;
}

/// Per node: sum over points of 1 / max(distance, clamp_radius).
inline ScalarField variability_field(const std::vector<Vec>& points, const DomainSpec& domain,
                                     std::optional<double> clamp_radius = std::nullopt) {
  const double clamp = clamp_radius.value_or(0.5 * domain.min_spacing());
  if (!(clamp > 0.0)) fail(ErrorKind::InvalidArgument, "clamp_radius must be > 0");
  ScalarField out(domain);
  for (std::size_t node = 0; node < domain.node_count(); ++node) {
    const Vec p = domain.node_position(node);
    double acc = 0.0;
    for (const auto& c : points) {
      if (c.size() != domain.axes()) fail(ErrorKind::DimensionMismatch, "critical point dimension does not match domain");
      acc += 1.0 / std::max(distance(p, c), clamp);
    }
    out[node] = acc;
  }
  return out;
}

}  // namespace fuq
