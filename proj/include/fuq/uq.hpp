#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fuq/error.hpp"
#include "fuq/field.hpp"
#include "fuq/model.hpp"
#include "fuq/parallel.hpp"
#include "fuq/random.hpp"

namespace fuq {

enum class RealizationSource { mcdropout, ensemble };

inline std::string_view to_string(RealizationSource s) noexcept {
  return s == RealizationSource::mcdropout ? "mcdropout" : "ensemble";
}

/// m predicted fields over one shared domain.
struct FieldRealizationSet {
  RealizationSource source = RealizationSource::mcdropout;
  double p_test = 0.0;  // meaningful for mcdropout only
  std::vector<GridVectorField> realizations;

  std::size_t size() const noexcept { return realizations.size(); }
  const DomainSpec& domain() const { return realizations.front().domain(); }

  void validate() const {
    if (realizations.empty()) fail(ErrorKind::InsufficientSamples, "realization set is empty");
    for (const auto& r : realizations)
      if (!(r.domain() == realizations.front().domain()))
        fail(ErrorKind::DomainMismatch, "realizations do not share a domain");
  }
};

/// Node chunk used for inference; matches the training batch size by default.
inline constexpr std::size_t kDefaultInferenceChunk = 2048;

/// m full-grid passes with dropout active at p_test. Realization r draws its
/// masks from stream derive_seed(seed, r), fresh for every forward call.
inline FieldRealizationSet sample_realizations_mcdropout(const NeuralField& model, const DomainSpec& grid,
                                                         std::size_t m, double p_test, std::uint64_t seed,
                                                         std::size_t chunk = kDefaultInferenceChunk,
                                                         std::size_t jobs = 1) {
  if (m < 1) fail(ErrorKind::InvalidArgument, "need at least one MC sample");
  if (!(p_test >= 0.0 && p_test < 1.0)) fail(ErrorKind::InvalidArgument, "p_test must lie in [0,1)");
  FieldRealizationSet set;
  set.source = RealizationSource::mcdropout;
  set.p_test = p_test;
  set.realizations.resize(m);
  parallel_for(m, jobs, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    set.realizations[r] = infer_grid(model, grid, chunk, ForwardMode::dropout(p_test, rng));
  });
  return set;
}

/// One deterministic full-grid inference per member.
inline FieldRealizationSet sample_realizations_ensemble(const std::vector<NeuralField>& members,
                                                        const DomainSpec& grid,
                                                        std::size_t chunk = kDefaultInferenceChunk,
                                                        std::size_t jobs = 1) {
  if (members.empty()) fail(ErrorKind::InvalidArgument, "ensemble has no members");
  for (const auto& m : members)
    if (!(m.config == members.front().config))
      fail(ErrorKind::InvalidArgument, "ensemble members must share one network configuration");
  FieldRealizationSet set;
  set.source = RealizationSource::ensemble;
  set.realizations.resize(members.size());
  parallel_for(members.size(), jobs,
               [&](std::size_t k) { set.realizations[k] = infer_grid(members[k], grid, chunk); });
  return set;
}

namespace detail {

/// Welford accumulation per node and component over the samples in sorted
/// order, so the result does not depend on realization order. Identical
/// inputs give a mean equal to the input bit for bit and exactly zero spread.
struct RunningMoments {
  std::vector<double> mean;
  std::vector<double> m2;
  std::size_t count = 0;

  explicit RunningMoments(const FieldRealizationSet& set) {
    set.validate();
    const std::size_t len = set.realizations.front().data().size();
    count = set.size();
    mean.assign(len, 0.0);
    m2.assign(len, 0.0);
    std::vector<double> samples(count);
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t r = 0; r < count; ++r) samples[r] = set.realizations[r].data()[i];
      std::sort(samples.begin(), samples.end());
      double mu = 0.0, acc = 0.0;
      for (std::size_t r = 0; r < count; ++r) {
        const double delta = samples[r] - mu;
        mu += delta / static_cast<double>(r + 1);
        acc += delta * (samples[r] - mu);
      }
      mean[i] = mu;
      m2[i] = acc;
    }
  }
};

}  // namespace detail

/// Per-node, per-component mean over realizations.
inline GridVectorField mean_field(const FieldRealizationSet& set) {
  detail::RunningMoments moments(set);
  return GridVectorField(set.domain(), std::move(moments.mean));
}

/// Per node: sum over components of the population standard deviation.
inline ScalarField uncertainty_field(const FieldRealizationSet& set) {
  set.validate();
  if (set.size() < 2) fail(ErrorKind::InsufficientSamples, "uncertainty needs at least 2 realizations");
  detail::RunningMoments moments(set);
  const std::size_t v = set.realizations.front().components();
  const double m = static_cast<double>(set.size());
  ScalarField out(set.domain());
  for (std::size_t node = 0; node < out.data().size(); ++node) {
    double total = 0.0;
    for (std::size_t c = 0; c < v; ++c) total += std::sqrt(std::max(0.0, moments.m2[node * v + c]) / m);
    out[node] = total;
  }
  return out;
}

/// Per node: L1 norm of the prediction error.
inline ScalarField error_field(const GridVectorField& pred, const GridVectorField& truth) {
  if (!(pred.domain() == truth.domain())) fail(ErrorKind::DomainMismatch, "prediction and truth domains differ");
  const std::size_t v = pred.components();
  ScalarField out(truth.domain());
  for (std::size_t node = 0; node < out.data().size(); ++node) {
    double total = 0.0;
    for (std::size_t c = 0; c < v; ++c) total += std::abs(pred.at(node, c) - truth.at(node, c));
    out[node] = total;
  }
  return out;
}

}  // namespace fuq
