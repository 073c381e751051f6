#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fuq/flow.hpp"

using namespace fuq;

namespace {

DomainSpec square(std::size_t n, double lo = -1.0, double hi = 1.0) { return DomainSpec({n, n}, Vec{lo, lo}, Vec{hi, hi}); }

FunctionSampler rotation(double extent = 2.0) {
  return FunctionSampler(square(3, -extent, extent), [](const Vec& p) { return Vec{-p[1], p[0]}; });
}

Streamline line_of(std::vector<Vec> pts, std::size_t seed_index) {
  Streamline s;
  s.points = std::move(pts);
  s.seed_index = seed_index;
  return s;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(Rk4, Examples) {
  const FunctionSampler constant(square(3), [](const Vec&) { return Vec{1, 0}; });
  const Vec p = rk4_step(constant, Vec{0, 0}, 0.1);
  EXPECT_NEAR(p[0], 0.1, 1e-15);
  EXPECT_EQ(p[1], 0.0);

  const Vec q = rk4_step(rotation(), Vec{1, 0}, 0.01);
  EXPECT_NEAR(q[0], std::cos(0.01), 1e-9);
  EXPECT_NEAR(q[1], std::sin(0.01), 1e-9);

  const FunctionSampler zero(square(3), [](const Vec&) { return Vec{0, 0}; });
  EXPECT_EQ(rk4_step(zero, Vec{0.3, -0.2}, 0.5), (Vec{0.3, -0.2}));

  try {
    rk4_step(constant, Vec{0.95, 0}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfDomain);
  }
}

TEST(Rk4, FourthOrderConvergence) {
  const auto s = rotation();
  double prev = 0.0;
  for (int level = 0; level < 4; ++level) {
    const int steps = 10 << level;
    const double h = (std::numbers::pi / 2) / steps;
    Vec p{1, 0};
    for (int i = 0; i < steps; ++i) p = rk4_step(s, p, h);
    const double err = distance(p, Vec{0, 1});
    if (level > 0) {
      EXPECT_GE(prev / err, 8.0);
      EXPECT_LE(prev / err, 32.0);
    }
    prev = err;
  }
}

TEST(Rk4, FullPeriodReturns) {
  const auto s = rotation();
  const double period = 2 * std::numbers::pi, h = period / 1000;
  Vec p{1, 0};
  for (int i = 0; i < 1000; ++i) p = rk4_step(s, p, h);
  EXPECT_LT(distance(p, Vec{1, 0}), 1e-4);
}

TEST(Trace, StagnationAtSeed) {
  const auto f = generate_analytic(AnalyticField{AnalyticKind::center}, square(5));
  const auto line = trace_streamline(GridSampler(f), Vec{0, 0}, 0.1, 100);
  EXPECT_EQ(line.points.size(), 1u);
  EXPECT_EQ(line.forward_termination, Termination::zero_velocity);
  EXPECT_EQ(line.backward_termination, Termination::zero_velocity);
}

TEST(Trace, ConstantFieldStepCount) {
  const auto f = generate_from_function(square(5, 0, 1), [](const Vec&) { return Vec{1, 0}; });
  const auto line = trace_streamline(GridSampler(f), Vec{0.5, 0.5}, 0.1, 100);
  EXPECT_EQ(line.points.size(), 11u);
  EXPECT_EQ(line.forward_steps(), 5u);
  EXPECT_EQ(line.backward_steps(), 5u);
  EXPECT_EQ(line.forward_termination, Termination::domain_exit);
  EXPECT_EQ(line.backward_termination, Termination::domain_exit);
  EXPECT_EQ(line.seed(), (Vec{0.5, 0.5}));
}

TEST(Trace, ZeroStepsAndErrors) {
  const auto f = generate_analytic(AnalyticField{AnalyticKind::center}, square(5));
  const auto line = trace_streamline(GridSampler(f), Vec{0.5, 0}, 0.1, 0);
  EXPECT_EQ(line.points.size(), 1u);
  try {
    trace_streamline(GridSampler(f), Vec{2, 0}, 0.1, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SeedOutOfDomain);
  }
  EXPECT_THROW(trace_streamline(GridSampler(f), Vec{0, 0.5}, 0.0, 5), Error);
}

TEST(Trace, PointsStayInDomainProperty) {
  Rng rng(21);
  const auto d = square(9);
  for (auto kind : {AnalyticKind::saddle, AnalyticKind::source, AnalyticKind::double_gyre_steady, AnalyticKind::rankine_vortex}) {
    const auto f = generate_analytic(AnalyticField{kind}, d);
    for (int k = 0; k < 20; ++k) {
      const Vec seed{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const auto line = trace_streamline(GridSampler(f), seed, default_step_size(d), 200);
      EXPECT_EQ(line.seed(), seed);
      for (const auto& p : line.points) EXPECT_TRUE(d.contains(p));
      EXPECT_LE(line.forward_steps(), 200u);
    }
  }
}

TEST(Trace, CircleOnInterpolatedCenter) {
  // Linear fields are reproduced exactly by the interpolant, so the trace
  // follows the analytic circle to RK4 accuracy.
  const auto f = generate_analytic(AnalyticField{AnalyticKind::center}, square(9));
  const auto line = trace_streamline(GridSampler(f), Vec{0.5, 0}, 0.01, 100);
  for (const auto& p : line.points) EXPECT_NEAR(p.norm(), 0.5, 1e-9);
}

TEST(Aggregate, SupportAndSurvivorMean) {
  // Forward lengths 5 and 3 from a shared seed.
  std::vector<Vec> a = {Vec{0, 0}}, b = {Vec{0, 0}};
  for (int i = 1; i <= 5; ++i) a.push_back(Vec{0.1 * i, 0.0});
  for (int i = 1; i <= 3; ++i) b.push_back(Vec{0.1 * i, 0.2});
  const auto agg = aggregate_streamlines({line_of(a, 0), line_of(b, 0)});
  ASSERT_EQ(agg.mean.size(), 6u);
  EXPECT_EQ(agg.support, (std::vector<std::size_t>{2, 2, 2, 2, 1, 1}));
  EXPECT_EQ(agg.mean[4], a[4]);
  EXPECT_EQ(agg.mean[5], a[5]);
  EXPECT_EQ(agg.uncertainty[5], 0.0);
  EXPECT_NEAR(agg.uncertainty[1], 0.1, 1e-15);
  EXPECT_EQ(agg.uncertainty.size(), agg.mean.size());
  const auto shared = line_of({Vec{0.5, 0}}, 0);
  EXPECT_THROW(aggregate_streamlines({line_of(a, 0), shared}), Error);
}

TEST(Aggregate, BackwardAlignment) {
  const auto l1 = line_of({Vec{-0.2, 0}, Vec{-0.1, 0}, Vec{0, 0}, Vec{0.1, 0}}, 2);
  const auto l2 = line_of({Vec{-0.1, 0.2}, Vec{0, 0}}, 1);
  const auto agg = aggregate_streamlines({l1, l2});
  EXPECT_EQ(agg.seed_index, 2u);
  EXPECT_EQ(agg.support, (std::vector<std::size_t>{1, 2, 2, 1}));
  EXPECT_EQ(agg.mean[0], (Vec{-0.2, 0}));
  EXPECT_NEAR(agg.mean[1][1], 0.1, 1e-15);
}

TEST(Aggregate, IdenticalAndSingle) {
  const auto l = line_of({Vec{0, 0}, Vec{0.3, 0.1}, Vec{0.5, 0.7}}, 0);
  const auto one = aggregate_streamlines({l});
  EXPECT_EQ(one.mean, l.points);
  EXPECT_EQ(one.median, l.points);
  const auto three = aggregate_streamlines({l, l, l});
  EXPECT_EQ(three.mean, l.points);
  EXPECT_EQ(three.median, l.points);
  for (double u : three.uncertainty) EXPECT_EQ(u, 0.0);
  EXPECT_THROW(aggregate_streamlines({}), Error);
}

TEST(Aggregate, MedianRejectsOutlier) {
  const auto a = line_of({Vec{0, 0}, Vec{0.1, 0.0}}, 0);
  const auto b = line_of({Vec{0, 0}, Vec{0.2, 0.1}}, 0);
  const auto c = line_of({Vec{0, 0}, Vec{9.0, -5.0}}, 0);
  const auto agg = aggregate_streamlines({a, c, b});
  EXPECT_EQ(agg.median[1], (Vec{0.2, 0.0}));
  const auto even = aggregate_streamlines({a, b});
  EXPECT_NEAR(even.median[1][0], 0.15, 1e-15);
}

TEST(Aggregate, SpreadIsZeroOnlyWhenCoincidentProperty) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Streamline> lines;
    const std::size_t n = 1 + rng.below(5);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Vec> pts = {Vec{0, 0}};
      const std::size_t len = rng.below(6);
      for (std::size_t k = 0; k < len; ++k) pts.push_back(Vec{rng.below(2) * 0.5, 1.0 * (k + 1)});
      lines.push_back(line_of(pts, 0));
    }
    const auto agg = aggregate_streamlines(lines);
    for (std::size_t k = 0; k < agg.mean.size(); ++k) {
      EXPECT_GE(agg.support[k], 1u);
      EXPECT_LE(agg.support[k], n);
      bool coincide = true;
      const Vec* first = nullptr;
      for (const auto& l : lines)
        if (k <= l.forward_steps()) {
          if (first && !(l.points[k] == *first)) coincide = false;
          first = &l.points[k];
        }
      EXPECT_EQ(agg.uncertainty[k] == 0.0, coincide);
    }
  }
}

TEST(Bundle, TracesEveryRealization) {
  FieldRealizationSet set;
  const auto d = square(9);
  set.realizations.push_back(generate_analytic(AnalyticField{AnalyticKind::center}, d));
  AnalyticField strong{AnalyticKind::center};
  strong.strength = 1.2;
  set.realizations.push_back(generate_analytic(strong, d));
  const auto serial = trace_bundle(set, Vec{0.5, 0}, 0.05, 40, 1);
  const auto parallel = trace_bundle(set, Vec{0.5, 0}, 0.05, 40, 2);
  ASSERT_EQ(serial.realizations.size(), 2u);
  EXPECT_EQ(serial.aggregate.mean, parallel.aggregate.mean);
  EXPECT_GT(serial.aggregate.uncertainty.back(), 0.0);
  EXPECT_EQ(serial.aggregate.uncertainty[serial.aggregate.seed_index], 0.0);
}

TEST(Classify, Examples) {
  EXPECT_EQ(classify_critical_point(mat2(1, 0, 0, 1)), CriticalKind::source);
  EXPECT_EQ(classify_critical_point(mat2(-1, 0, 0, -2)), CriticalKind::sink);
  EXPECT_EQ(classify_critical_point(mat2(1, 0, 0, -1)), CriticalKind::saddle);
  EXPECT_EQ(classify_critical_point(mat2(0, -1, 1, 0)), CriticalKind::center);
  EXPECT_EQ(classify_critical_point(mat2(0.5, -1, 1, 0.5)), CriticalKind::spiral_source);
  EXPECT_EQ(classify_critical_point(mat2(-0.5, -1, 1, -0.5)), CriticalKind::spiral_sink);
  EXPECT_EQ(classify_critical_point(mat2(1, 0, 0, 0)), CriticalKind::degenerate);
  EXPECT_EQ(classify_critical_point(mat2(0, 0, 0, 0)), CriticalKind::degenerate);
  Eigen::MatrixXd swirl(3, 3);
  swirl << 0, -1, 0, 1, 0, 0, 0, 0, 2;
  EXPECT_EQ(classify_critical_point(swirl), CriticalKind::spiral_source);
  swirl(2, 2) = -2;
  EXPECT_EQ(classify_critical_point(swirl), CriticalKind::spiral_sink);
  try {
    classify_critical_point(Eigen::MatrixXd::Identity(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonSquare);
  }
}

TEST(Classify, ScaleInvariantProperty) {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(2));
    Eigen::MatrixXd j(n, n);
    for (Eigen::Index i = 0; i < j.size(); ++i) j.data()[i] = rng.uniform(-1, 1);
    const auto kind = classify_critical_point(j);
    for (double c : {1e-6, 0.3, 7.0, 1e5}) EXPECT_EQ(classify_critical_point(c * j), kind);
  }
}

TEST(Detect, Examples) {
  const auto src = detect_critical_points(generate_analytic(AnalyticField{AnalyticKind::source}, square(8)), 1e-9);
  ASSERT_EQ(src.size(), 1u);
  EXPECT_LT(src[0].position.norm(), 1e-6);
  EXPECT_EQ(src[0].kind, CriticalKind::source);

  const auto none = detect_critical_points(generate_from_function(square(6), [](const Vec&) { return Vec{1, -2}; }));
  EXPECT_TRUE(none.empty());

  AnalyticField c{AnalyticKind::center};
  c.center = Vec{0.3, -0.2};
  const auto pts = detect_critical_points(generate_analytic(c, square(11)));
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_LT(distance(pts[0].position, Vec{0.3, -0.2}), 1e-6);
  EXPECT_EQ(pts[0].kind, CriticalKind::center);
}

TEST(Detect, NodeCoincidentZeroReportedOnce) {
  const auto pts = detect_critical_points(generate_analytic(AnalyticField{AnalyticKind::saddle}, square(9)));
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].kind, CriticalKind::saddle);
}

TEST(Detect, RecoversConstructedZerosProperty) {
  Rng rng(51);
  const auto d = square(13);
  for (int trial = 0; trial < 40; ++trial) {
    AnalyticField f{static_cast<AnalyticKind>(rng.below(4))};
    f.center = Vec{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    f.strength = rng.uniform(0.5, 2.0);
    const auto field = generate_analytic(f, d);
    const auto pts = detect_critical_points(field, 1e-9);
    ASSERT_FALSE(pts.empty());
    bool found = false;
    for (const auto& p : pts) {
      EXPECT_LT(distance(p.position, *f.center), d.min_spacing()) << "spurious point";
      EXPECT_LT(sample_interpolated(field, p.position).norm(), 1e-9);
      found = found || distance(p.position, *f.center) < 1e-6;
    }
    EXPECT_TRUE(found);
    EXPECT_EQ(pts.size(), 1u);
  }
}

TEST(Detect, ThreeDimensional) {
  const DomainSpec d({7, 7, 7}, Vec{-1, -1, -1}, Vec{1, 1, 1});
  AnalyticField src{AnalyticKind::source};
  src.center = Vec{0.1, -0.25, 0.4};
  const auto pts = detect_critical_points(generate_analytic(src, d), 1e-9);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_LT(distance(pts[0].position, *src.center), 1e-6);
  EXPECT_EQ(pts[0].kind, CriticalKind::source);
}

TEST(Variability, Examples) {
  const DomainSpec d({3, 3}, Vec{0, 0}, Vec{2, 2});
  for (const auto zero = variability_field({}, d); double v : zero.data()) EXPECT_EQ(v, 0.0);
  const auto one = variability_field({Vec{2, 0}}, d);
  EXPECT_DOUBLE_EQ(one[0], 0.5);  // node (0,0) at distance 2
  const auto clamped = variability_field({Vec{1, 1}}, d, 0.25);
  EXPECT_DOUBLE_EQ(clamped[4], 4.0);
  EXPECT_THROW(variability_field({}, d, 0.0), Error);
}

TEST(Variability, NonNegativeProperty) {
  Rng rng(61);
  const auto d = square(7);
  std::vector<Vec> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(Vec{rng.uniform(-1, 1), rng.uniform(-1, 1)});
  for (const auto var = variability_field(pts, d); double v : var.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_TRUE(std::isfinite(v));
  }
}
