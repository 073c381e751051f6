#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fuq/error.hpp"

namespace fuq {

/// Small fixed-capacity vector for 2D/3D points and field values.
class Vec {
 public:
  static constexpr std::size_t kMaxDim = 3;

  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : n_(n) {
    if (n > kMaxDim) fail(ErrorKind::DimensionMismatch, "Vec supports at most 3 components");
    c_.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) c_[i] = fill;
  }
  Vec(std::initializer_list<double> values) : n_(values.size()) {
    if (n_ > kMaxDim) fail(ErrorKind::DimensionMismatch, "Vec supports at most 3 components");
    std::size_t i = 0;
    for (double v : values) c_[i++] = v;
  }

  std::size_t size() const noexcept { return n_; }
  double& operator[](std::size_t i) noexcept { return c_[i]; }
  double operator[](std::size_t i) const noexcept { return c_[i]; }
  const double* begin() const noexcept { return c_.data(); }
  const double* end() const noexcept { return c_.data() + n_; }

  Vec& operator+=(const Vec& o) noexcept {
    for (std::size_t i = 0; i < n_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) noexcept {
    for (std::size_t i = 0; i < n_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Vec& operator*=(double s) noexcept {
    for (std::size_t i = 0; i < n_; ++i) c_[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) noexcept { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) noexcept { return a -= b; }
  friend Vec operator*(Vec a, double s) noexcept { return a *= s; }
  friend Vec operator*(double s, Vec a) noexcept { return a *= s; }
  friend bool operator==(const Vec& a, const Vec& b) noexcept {
    if (a.n_ != b.n_) return false;
    for (std::size_t i = 0; i < a.n_; ++i)
      if (a.c_[i] != b.c_[i]) return false;
    return true;
  }

  double squared_norm() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += c_[i] * c_[i];
    return s;
  }
  double norm() const noexcept { return std::sqrt(squared_norm()); }

 private:
  std::array<double, kMaxDim> c_{};
  std::size_t n_ = 0;
};

inline double distance(const Vec& a, const Vec& b) noexcept { return (a - b).norm(); }

/// Node-centered rectilinear grid: node i on an axis sits at
/// physical_min + i * (physical_max - physical_min) / (dim - 1).
class DomainSpec {
 public:
  DomainSpec() = default;

  DomainSpec(std::vector<std::size_t> dims, Vec physical_min, Vec physical_max)
      : dims_(std::move(dims)), min_(physical_min), max_(physical_max) {
    if (dims_.size() != 2 && dims_.size() != 3)
      fail(ErrorKind::InvalidArgument, "domain must have 2 or 3 axes");
    if (min_.size() != dims_.size() || max_.size() != dims_.size())
      fail(ErrorKind::DimensionMismatch, "bounds must have one entry per axis");
    for (std::size_t a = 0; a < dims_.size(); ++a) {
      if (dims_[a] < 2) fail(ErrorKind::InvalidArgument, "every axis needs at least 2 nodes");
      if (!(min_[a] < max_[a]) || !std::isfinite(min_[a]) || !std::isfinite(max_[a]))
        fail(ErrorKind::InvalidArgument, "physical bounds must be finite and strictly ordered");
    }
  }

  /// Bounds default to [0, dim - 1] per axis.
  static DomainSpec with_index_bounds(std::vector<std::size_t> dims) {
    Vec lo(dims.size()), hi(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a) hi[a] = static_cast<double>(dims[a]) - 1.0;
    return DomainSpec(std::move(dims), lo, hi);
  }

  std::size_t axes() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  const Vec& physical_min() const noexcept { return min_; }
  const Vec& physical_max() const noexcept { return max_; }

  std::size_t node_count() const noexcept {
    std::size_t n = 1;
    for (auto d : dims_) n *= d;
    return n;
  }
  double spacing(std::size_t axis) const noexcept {
    return (max_[axis] - min_[axis]) / static_cast<double>(dims_[axis] - 1);
  }
  double min_spacing() const noexcept {
    double s = spacing(0);
    for (std::size_t a = 1; a < axes(); ++a) s = std::min(s, spacing(a));
    return s;
  }
  double diagonal() const noexcept { return distance(min_, max_); }

  /// Row-major with x varying fastest: index = i + nx * (j + ny * k).
  std::size_t linear_index(const std::array<std::size_t, 3>& idx) const noexcept {
    std::size_t lin = 0;
    for (std::size_t a = axes(); a-- > 0;) lin = lin * dims_[a] + idx[a];
    return lin;
  }
  std::array<std::size_t, 3> multi_index(std::size_t lin) const noexcept {
    std::array<std::size_t, 3> idx{};
    for (std::size_t a = 0; a < axes(); ++a) {
      idx[a] = lin % dims_[a];
      lin /= dims_[a];
    }
    return idx;
  }
  Vec node_position(std::size_t lin) const noexcept {
    const auto idx = multi_index(lin);
    Vec p(axes());
    for (std::size_t a = 0; a < axes(); ++a) p[a] = min_[a] + static_cast<double>(idx[a]) * spacing(a);
    return p;
  }

  /// Inside the closed box, allowing 1e-9 of the axis width of slack.
  bool contains(const Vec& p) const noexcept {
    if (p.size() != axes()) return false;
    for (std::size_t a = 0; a < axes(); ++a) {
      const double tol = 1e-9 * (max_[a] - min_[a]);
      if (!(p[a] >= min_[a] - tol && p[a] <= max_[a] + tol)) return false;
    }
    return true;
  }

  friend bool operator==(const DomainSpec& a, const DomainSpec& b) noexcept {
    return a.dims_ == b.dims_ && a.min_ == b.min_ && a.max_ == b.max_;
  }

 private:
  std::vector<std::size_t> dims_;
  Vec min_;
  Vec max_;
};

inline void require_point_in(const DomainSpec& domain, const Vec& p, ErrorKind kind = ErrorKind::OutOfDomain) {
  if (p.size() != domain.axes()) fail(ErrorKind::DimensionMismatch, "point dimension does not match domain");
  if (!domain.contains(p)) fail(kind, "point lies outside the physical domain");
}

/// Affine map of each axis onto [-1, 1].
inline Vec normalize_coords(const Vec& p, const DomainSpec& domain) {
  require_point_in(domain, p);
  Vec out(p.size());
  const Vec& lo = domain.physical_min();
  const Vec& hi = domain.physical_max();
  for (std::size_t a = 0; a < p.size(); ++a) out[a] = 2.0 * (p[a] - lo[a]) / (hi[a] - lo[a]) - 1.0;
  return out;
}

inline Vec denormalize_coords(const Vec& q, const DomainSpec& domain) {
  if (q.size() != domain.axes()) fail(ErrorKind::DimensionMismatch, "point dimension does not match domain");
  Vec out(q.size());
  const Vec& lo = domain.physical_min();
  const Vec& hi = domain.physical_max();
  for (std::size_t a = 0; a < q.size(); ++a) out[a] = lo[a] + 0.5 * (q[a] + 1.0) * (hi[a] - lo[a]);
  return out;
}

inline std::vector<Vec> grid_nodes(const DomainSpec& domain) {
  std::vector<Vec> nodes;
  nodes.reserve(domain.node_count());
  for (std::size_t i = 0; i < domain.node_count(); ++i) nodes.push_back(domain.node_position(i));
  return nodes;
}

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(DomainSpec domain, double fill = 0.0)
      : domain_(std::move(domain)), data_(domain_.node_count(), fill) {}
  ScalarField(DomainSpec domain, std::vector<double> data) : domain_(std::move(domain)), data_(std::move(data)) {
    if (data_.size() != domain_.node_count()) fail(ErrorKind::SizeMismatch, "scalar data length != node count");
  }

  const DomainSpec& domain() const noexcept { return domain_; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }
  double operator[](std::size_t node) const noexcept { return data_[node]; }
  double& operator[](std::size_t node) noexcept { return data_[node]; }

 private:
  DomainSpec domain_;
  std::vector<double> data_;
};

/// One vector per node; component count equals the axis count.
class GridVectorField {
 public:
  GridVectorField() = default;
  explicit GridVectorField(DomainSpec domain)
      : domain_(std::move(domain)), data_(domain_.node_count() * domain_.axes(), 0.0) {}
  GridVectorField(DomainSpec domain, std::vector<double> data) : domain_(std::move(domain)), data_(std::move(data)) {
    if (data_.size() != domain_.node_count() * components())
      fail(ErrorKind::SizeMismatch, "vector data length != node count * components");
    for (double v : data_)
      if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "vector field values must be finite");
  }

  const DomainSpec& domain() const noexcept { return domain_; }
  std::size_t components() const noexcept { return domain_.axes(); }
  std::size_t node_count() const noexcept { return domain_.node_count(); }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  double at(std::size_t node, std::size_t comp) const noexcept { return data_[node * components() + comp]; }
  double& at(std::size_t node, std::size_t comp) noexcept { return data_[node * components() + comp]; }

  Vec node_value(std::size_t node) const noexcept {
    Vec v(components());
    for (std::size_t c = 0; c < components(); ++c) v[c] = at(node, c);
    return v;
  }
  void set_node_value(std::size_t node, const Vec& v) noexcept {
    for (std::size_t c = 0; c < components(); ++c) at(node, c) = v[c];
  }

 private:
  DomainSpec domain_;
  std::vector<double> data_;
};

/// Lower corner index and local coordinates in [0,1] of the cell containing p.
/// Coordinates within 1e-12 of a node snap onto it so that node samples are exact.
struct CellLocation {
  std::array<std::size_t, 3> lower{};
  std::array<double, 3> local{};
};

inline CellLocation locate_cell(const DomainSpec& domain, const Vec& p) {
  CellLocation loc;
  for (std::size_t a = 0; a < domain.axes(); ++a) {
    double t = (p[a] - domain.physical_min()[a]) / domain.spacing(a);
    const double r = std::round(t);
    if (std::abs(t - r) < 1e-12) t = r;
    const double last = static_cast<double>(domain.dims()[a] - 1);
    t = std::clamp(t, 0.0, last);
    double base = std::floor(t);
    if (base >= last) base = last - 1.0;
    loc.lower[a] = static_cast<std::size_t>(base);
    loc.local[a] = t - base;
  }
  return loc;
}

/// Multilinear interpolant of one cell evaluated at local coordinates
/// (which may lie outside [0,1]; the cell polynomial is then extrapolated).
inline Vec cell_interpolate(const GridVectorField& f, const std::array<std::size_t, 3>& lower,
                            const std::array<double, 3>& local) {
  const auto& domain = f.domain();
  const std::size_t d = domain.axes();
  Vec out(f.components());
  const std::size_t corners = std::size_t{1} << d;
  for (std::size_t corner = 0; corner < corners; ++corner) {
    double w = 1.0;
    std::array<std::size_t, 3> idx{};
    for (std::size_t a = 0; a < d; ++a) {
      const bool hi = (corner >> a) & 1U;
      idx[a] = lower[a] + (hi ? 1 : 0);
      w *= hi ? local[a] : 1.0 - local[a];
    }
    if (w == 0.0) continue;
    const std::size_t node = domain.linear_index(idx);
    for (std::size_t c = 0; c < f.components(); ++c) out[c] += w * f.at(node, c);
  }
  return out;
}

/// Bilinear (2D) / trilinear (3D) sample at a physical point.
inline Vec sample_interpolated(const GridVectorField& f, const Vec& p) {
  require_point_in(f.domain(), p);
  const auto loc = locate_cell(f.domain(), p);
  return cell_interpolate(f, loc.lower, loc.local);
}

enum class AnalyticKind { center, saddle, source, sink, rankine_vortex, double_gyre_steady, tornado_swirl_3d };

inline std::string_view to_string(AnalyticKind k) noexcept {
  switch (k) {
    case AnalyticKind::center: return "center";
    case AnalyticKind::saddle: return "saddle";
    case AnalyticKind::source: return "source";
    case AnalyticKind::sink: return "sink";
    case AnalyticKind::rankine_vortex: return "rankine_vortex";
    case AnalyticKind::double_gyre_steady: return "double_gyre_steady";
    case AnalyticKind::tornado_swirl_3d: return "tornado_swirl_3d";
  }
  return "unknown";
}

inline AnalyticKind parse_analytic_kind(std::string_view name) {
  for (auto k : {AnalyticKind::center, AnalyticKind::saddle, AnalyticKind::source, AnalyticKind::sink,
                 AnalyticKind::rankine_vortex, AnalyticKind::double_gyre_steady, AnalyticKind::tornado_swirl_3d})
    if (to_string(k) == name) return k;
  fail(ErrorKind::InvalidArgument, "unknown analytic field kind '" + std::string(name) + "'");
}

/// Analytic test field. `center` defaults to the domain midpoint.
///   center:  (-(y-cy), x-cx) * strength
///   saddle:  (x-cx, -(y-cy)) * strength
///   source/sink: +/-(x-c) * strength, any dimension
///   rankine_vortex: solid-body rotation inside core_radius, 1/r decay outside
///   double_gyre_steady: (-pi A sin(pi x) cos(pi y), pi A cos(pi x) sin(pi y))
///   tornado_swirl_3d: rotation about z with radial inflow and axial stretching
///     (-swirl*dy - inflow*dx, swirl*dx - inflow*dy, 2*inflow*dz), divergence free
struct AnalyticField {
  AnalyticKind kind = AnalyticKind::center;
  std::optional<Vec> center;
  double strength = 1.0;
  double core_radius = 0.25;
  double amplitude = 0.1;
  double swirl = 1.0;
  double inflow = 0.2;

  std::size_t required_axes() const noexcept {
    switch (kind) {
      case AnalyticKind::source:
      case AnalyticKind::sink: return 0;
      case AnalyticKind::tornado_swirl_3d: return 3;
      default: return 2;
    }
  }

  Vec evaluate(const Vec& x, const Vec& c) const {
    constexpr double pi = 3.14159265358979323846;
    const Vec d = x - c;
    switch (kind) {
      case AnalyticKind::center: return Vec{-d[1], d[0]} * strength;
      case AnalyticKind::saddle: return Vec{d[0], -d[1]} * strength;
      case AnalyticKind::source: return d * strength;
      case AnalyticKind::sink: return d * -strength;
      case AnalyticKind::rankine_vortex: {
        const double r = d.norm();
        const double gamma = strength;
        double vtheta_over_r = 0.0;
        if (r <= core_radius)
          vtheta_over_r = gamma / (2.0 * pi * core_radius * core_radius);
        else
          vtheta_over_r = gamma / (2.0 * pi * r * r);
        return Vec{-d[1] * vtheta_over_r, d[0] * vtheta_over_r};
      }
      case AnalyticKind::double_gyre_steady:
        return Vec{-pi * amplitude * std::sin(pi * x[0]) * std::cos(pi * x[1]),
                   pi * amplitude * std::cos(pi * x[0]) * std::sin(pi * x[1])};
      case AnalyticKind::tornado_swirl_3d:
        return Vec{-swirl * d[1] - inflow * d[0], swirl * d[0] - inflow * d[1], 2.0 * inflow * d[2]};
    }
    return Vec(x.size());
  }
};

/// Samples an arbitrary function of the physical position at every node.
inline GridVectorField generate_from_function(const DomainSpec& domain, const std::function<Vec(const Vec&)>& fn) {
  GridVectorField f(domain);
  for (std::size_t i = 0; i < domain.node_count(); ++i) {
    const Vec v = fn(domain.node_position(i));
    if (v.size() != f.components()) fail(ErrorKind::DimensionMismatch, "function returned wrong component count");
    f.set_node_value(i, v);
  }
  return f;
}

inline GridVectorField generate_analytic(const AnalyticField& kind, const DomainSpec& domain) {
  const std::size_t need = kind.required_axes();
  if (need != 0 && need != domain.axes())
    fail(ErrorKind::DimensionMismatch, std::string(to_string(kind.kind)) + " requires a " +
                                           std::to_string(need) + "D domain");
  const Vec c = kind.center.value_or((domain.physical_min() + domain.physical_max()) * 0.5);
  if (c.size() != domain.axes()) fail(ErrorKind::DimensionMismatch, "center dimension does not match domain");
  return generate_from_function(domain, [&](const Vec& x) { return kind.evaluate(x, c); });
}

}  // namespace fuq
