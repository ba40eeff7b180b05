#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/error.hpp"
#include "divctl/gateway/types.hpp"

namespace divctl {

inline constexpr double kDefaultKlEpsilon = 1e-6;

/// Percentile by linear interpolation between order statistics
/// (zero-based rank = p * (m - 1)). `values` is taken by value and sorted.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) fail(Errc::EmptySet, "percentile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) fail(Errc::InvalidArgument, "percentile outside [0,1]");
  std::sort(values.begin(), values.end());
  double rank = p * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(rank));
  auto hi = std::min(lo + 1, values.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// 95th percentile of the Euclidean distances from each embedding to the mean.
inline double span(std::span<const EmbeddingVector> embeddings) {
  if (embeddings.empty()) fail(Errc::EmptySet, "span of an empty set");
  const auto d = embeddings.front().dimension();
  // Mean accumulated as offsets from the first vector, so identical inputs
  // give a mean that equals them exactly.
  const auto& origin = embeddings.front().values;
  std::vector<double> offset(d, 0.0);
  for (const auto& e : embeddings) {
    if (e.dimension() != d) fail(Errc::DimensionMismatch, "embeddings differ in dimension");
    for (std::size_t i = 0; i < d; ++i) offset[i] += e.values[i] - origin[i];
  }
  std::vector<double> mean(d);
  for (std::size_t i = 0; i < d; ++i)
    mean[i] = origin[i] + offset[i] / static_cast<double>(embeddings.size());

  std::vector<double> distances;
  distances.reserve(embeddings.size());
  for (const auto& e : embeddings) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double diff = e.values[i] - mean[i];
      sq += diff * diff;
    }
    distances.push_back(std::sqrt(sq));
  }
  return percentile(std::move(distances), 0.95);
}

/// D(p || q) after additive epsilon smoothing and renormalization of both.
inline double kl_divergence(std::span<const double> p, std::span<const double> q,
                            double epsilon = kDefaultKlEpsilon) {
  if (p.size() != q.size())
    fail(Errc::LengthMismatch, std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  if (p.empty()) fail(Errc::EmptySet, "empty distributions");
  if (!(epsilon > 0.0)) fail(Errc::InvalidArgument, "epsilon must be positive");
  double p_total = 0.0, q_total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p_total += p[i] + epsilon;
    q_total += q[i] + epsilon;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double ps = (p[i] + epsilon) / p_total;
    double qs = (q[i] + epsilon) / q_total;
    kl += ps * std::log(ps / qs);
  }
  return std::max(kl, 0.0);
}

inline double kl_divergence(const Distribution& p, const Distribution& q,
                            double epsilon = kDefaultKlEpsilon) {
  return kl_divergence(p.weights(), q.weights(), epsilon);
}

enum class AlignmentForm {
  InverseOnePlus,  ///< 1 / (1 + KLD)
  NegExp,          ///< exp(-KLD)
};

/// Maps KLD(measured || target) into (0, 1]; 1 means the target is met.
inline double alignment(const Distribution& measured, const Distribution& target,
                        AlignmentForm form = AlignmentForm::InverseOnePlus,
                        double epsilon = kDefaultKlEpsilon) {
  double kl = kl_divergence(measured, target, epsilon);
  return form == AlignmentForm::NegExp ? std::exp(-kl) : 1.0 / (1.0 + kl);
}

struct DiversityReport {
  double span = 0.0;
  std::map<std::string, double> alignment;
  std::size_t image_count = 0;
  std::string generated_at;

  friend bool operator==(const DiversityReport&, const DiversityReport&) = default;
};

/// Unweighted mean over attributes; NaN when there are none.
inline double mean_alignment(const DiversityReport& report) {
  if (report.alignment.empty()) return std::nan("");
  double sum = 0.0;
  for (const auto& [name, a] : report.alignment) sum += a;
  return sum / static_cast<double>(report.alignment.size());
}

}  // namespace divctl
