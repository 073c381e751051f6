#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fuq/training.hpp"
#include "fuq/uq.hpp"

using namespace fuq;

namespace {

DomainSpec square(std::size_t n) { return DomainSpec({n, n}, Vec{-1, -1}, Vec{1, 1}); }

FieldRealizationSet random_set(const DomainSpec& d, std::size_t m, Rng& rng) {
  FieldRealizationSet set;
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<double> data(d.node_count() * d.axes());
    for (auto& x : data) x = rng.uniform(-3, 3);
    set.realizations.emplace_back(d, std::move(data));
  }
  return set;
}

NeuralField small_model(DropoutPlacement placement, std::uint64_t seed = 3) {
  NetworkConfig c;
  c.hidden_width = 16;
  c.num_res_blocks = 2;
  c.dropout_placement = placement;
  return NeuralField::identity_scaling(c, init_parameters(c, seed), square(9), seed);
}

}  // namespace

TEST(Reduce, HandValues) {
  const DomainSpec d({2, 2}, Vec{0, 0}, Vec{1, 1});
  FieldRealizationSet set;
  set.realizations.emplace_back(d, std::vector<double>(8, 0.0));
  std::vector<double> second(8, 0.0);
  second[0] = 2.0;  // node 0: u in {0,2}, v in {0,0}
  set.realizations.emplace_back(d, second);
  EXPECT_EQ(mean_field(set).at(0, 0), 1.0);
  const auto u = uncertainty_field(set);
  EXPECT_EQ(u[0], 1.0);
  EXPECT_EQ(u[1], 0.0);
}

TEST(Reduce, ErrorFieldExamples) {
  const DomainSpec d2({2, 2}, Vec{0, 0}, Vec{1, 1});
  GridVectorField pred(d2), truth(d2);
  pred.set_node_value(0, Vec{1, 2});
  EXPECT_EQ(error_field(pred, truth)[0], 3.0);
  EXPECT_EQ(error_field(truth, truth)[0], 0.0);
  const DomainSpec d3({2, 2, 2}, Vec{0, 0, 0}, Vec{1, 1, 1});
  GridVectorField p3(d3), t3(d3);
  p3.set_node_value(5, Vec{1, -1, 0.5});
  EXPECT_EQ(error_field(p3, t3)[5], 2.5);
  EXPECT_THROW(error_field(pred, GridVectorField(square(3))), Error);
}

TEST(Reduce, IdenticalRealizationsProperty) {
  Rng rng(5);
  for (std::size_t m : {1u, 2u, 7u, 100u}) {
    auto one = random_set(square(5), 1, rng);
    FieldRealizationSet set;
    for (std::size_t r = 0; r < m; ++r) set.realizations.push_back(one.realizations[0]);
    EXPECT_EQ(mean_field(set).data(), one.realizations[0].data());
    if (m >= 2)
      for (const auto unc = uncertainty_field(set); double u : unc.data()) EXPECT_EQ(u, 0.0);
  }
}

TEST(Reduce, MatchesTwoPassOracle) {
  Rng rng(6);
  const auto d = square(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + rng.below(20);
    const auto set = random_set(d, m, rng);
    const auto mean = mean_field(set);
    const auto unc = uncertainty_field(set);
    for (std::size_t node = 0; node < d.node_count(); ++node) {
      double total = 0.0;
      for (std::size_t c = 0; c < 2; ++c) {
        double sum = 0.0;
        for (const auto& r : set.realizations) sum += r.at(node, c);
        const double mu = sum / static_cast<double>(m);
        double ss = 0.0;
        for (const auto& r : set.realizations) ss += (r.at(node, c) - mu) * (r.at(node, c) - mu);
        total += std::sqrt(ss / static_cast<double>(m));
        EXPECT_NEAR(mean.at(node, c), mu, 1e-12);
      }
      EXPECT_NEAR(unc[node], total, 1e-12);
    }
  }
}

TEST(Reduce, OrderInvariantProperty) {
  Rng rng(7);
  const auto d = square(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto set = random_set(d, 3 + rng.below(10), rng);
    const auto u0 = uncertainty_field(set).data();
    const auto m0 = mean_field(set).data();
    for (std::size_t i = set.size() - 1; i > 0; --i) std::swap(set.realizations[i], set.realizations[rng.below(i + 1)]);
    EXPECT_EQ(uncertainty_field(set).data(), u0);
    EXPECT_EQ(mean_field(set).data(), m0);
  }
}

TEST(Reduce, Errors) {
  FieldRealizationSet empty;
  EXPECT_THROW(mean_field(empty), Error);
  Rng rng(1);
  const auto one = random_set(square(3), 1, rng);
  try {
    uncertainty_field(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientSamples);
  }
  auto mixed = random_set(square(3), 2, rng);
  mixed.realizations.push_back(random_set(square(4), 1, rng).realizations[0]);
  EXPECT_THROW(mean_field(mixed), Error);
}

TEST(McDropout, ZeroProbabilityEqualsDeterministic) {
  const auto model = small_model(DropoutPlacement::all_blocks);
  const auto det = infer_grid(model, square(9), 17);
  const auto set = sample_realizations_mcdropout(model, square(9), 5, 0.0, 1, 17);
  ASSERT_EQ(set.size(), 5u);
  for (const auto& r : set.realizations) EXPECT_EQ(r.data(), det.data());
  EXPECT_EQ(mean_field(set).data(), det.data());
  for (const auto unc = uncertainty_field(set); double u : unc.data()) EXPECT_EQ(u, 0.0);
}

TEST(McDropout, SingleSampleAndDeterminism) {
  const auto model = small_model(DropoutPlacement::last_block);
  const auto one = sample_realizations_mcdropout(model, square(9), 1, 0.2, 4);
  EXPECT_EQ(one.size(), 1u);
  const auto a = sample_realizations_mcdropout(model, square(9), 6, 0.2, 4, 10, 1);
  const auto b = sample_realizations_mcdropout(model, square(9), 6, 0.2, 4, 10, 3);
  for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(a.realizations[r].data(), b.realizations[r].data());
  EXPECT_NE(a.realizations[0].data(), a.realizations[1].data());
  double total = 0.0;
  for (const auto unc = uncertainty_field(a); double u : unc.data()) total += u;
  EXPECT_GT(total, 0.0);
  EXPECT_THROW(sample_realizations_mcdropout(model, square(9), 0, 0.2, 4), Error);
  EXPECT_THROW(sample_realizations_mcdropout(model, square(9), 2, 1.0, 4), Error);
}

TEST(McDropout, ChunksDrawIndependentMasks) {
  // With chunk = 1 every node gets its own forward call and mask draw.
  const auto model = small_model(DropoutPlacement::all_blocks);
  const auto whole = sample_realizations_mcdropout(model, square(9), 1, 0.3, 2, 2048);
  const auto split = sample_realizations_mcdropout(model, square(9), 1, 0.3, 2, 1);
  EXPECT_NE(whole.realizations[0].data(), split.realizations[0].data());
}

TEST(Ensemble, Realizations) {
  const auto m1 = small_model(DropoutPlacement::none, 1);
  const auto m2 = small_model(DropoutPlacement::none, 2);
  const auto single = sample_realizations_ensemble({m1}, square(9));
  EXPECT_EQ(single.realizations[0].data(), infer_grid(m1, square(9), 2048).data());
  const auto same = sample_realizations_ensemble({m1, m1, m1}, square(9));
  for (const auto unc = uncertainty_field(same); double u : unc.data()) EXPECT_EQ(u, 0.0);
  const auto diff = sample_realizations_ensemble({m1, m2}, square(9));
  EXPECT_NE(diff.realizations[0].data(), diff.realizations[1].data());
  EXPECT_THROW(sample_realizations_ensemble({}, square(9)), Error);
  EXPECT_THROW(sample_realizations_ensemble({m1, small_model(DropoutPlacement::last_block)}, square(9)), Error);
}
