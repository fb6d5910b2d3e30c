#pragma once

// Partitions of unity subordinate to ball covers, and the exhaustion
// function u = sum_j j rho_j.

#include <cmath>
#include <string>
#include <vector>

#include "subcart/cover.hpp"
#include "subcart/error.hpp"
#include "subcart/expr.hpp"

namespace subcart {

inline constexpr double kNormalizerFloor = 1e-12;

struct PartitionOfUnity {
  ExprVec rho;  // rho[i] belongs to cover.elements[i]
  SmoothExpr normalizer;
  Cover cover;

  std::size_t size() const { return static_cast<std::size_t>(rho.target_dim()); }
  const SmoothExpr& operator[](std::size_t i) const { return rho[static_cast<int>(i)]; }
};

/// rho_i = b_i / sum_j b_j, extended by zero outside element i. Throws
/// NormalizerVanishes when the sum is at or below 1e-12 at some sample.
inline PartitionOfUnity partition_of_unity(const Cover& cover, const SampleSet& samples) {
  if (cover.elements.empty()) throw Error(ErrorKind::Invalid, "cannot build a partition over an empty cover");
  const int dim = cover.elements.front().indicator.ambient_dim();
  std::vector<SmoothExpr> bumps;
  for (const auto& e : cover.elements) bumps.push_back(e.indicator);
  SmoothExpr total = sum(bumps, dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = total(samples.points[i]);
    if (!(t > kNormalizerFloor)) {
      throw Error(ErrorKind::NormalizerVanishes,
                  "partition normalizer is " + std::to_string(t) + " at sample " + std::to_string(i));
    }
  }
  std::vector<SmoothExpr> rho;
  for (const auto& b : bumps) rho.push_back(mask(b, b / total));
  return PartitionOfUnity{ExprVec(dim, std::move(rho)), total, cover};
}

struct PartitionReport {
  double max_sum_error = 0.0;  // max |sum rho - 1|
  double min_value = 0.0;
  double max_value = 0.0;
  std::size_t support_violations = 0;  // rho_i != 0 outside element i
};

inline PartitionReport check_partition(const PartitionOfUnity& pou, const SampleSet& samples) {
  PartitionReport r;
  r.min_value = 1.0;
  for (const auto& x : samples.points) {
    const Point v = pou.rho(x);
    r.max_sum_error = std::max(r.max_sum_error, std::abs(v.sum() - 1.0));
    r.min_value = std::min(r.min_value, v.minCoeff());
    r.max_value = std::max(r.max_value, v.maxCoeff());
    for (std::size_t i = 0; i < pou.size(); ++i) {
      if (!pou.cover.elements[i].contains(x) && v[static_cast<Eigen::Index>(i)] != 0.0) ++r.support_violations;
    }
  }
  return r;
}

/// u = sum_j j rho_j with 1-based j in cover order (the cover is sorted by
/// center distance from the base point).
inline SmoothExpr exhaustion_function(const PartitionOfUnity& pou) {
  std::vector<SmoothExpr> terms;
  for (std::size_t j = 0; j < pou.size(); ++j) terms.push_back(static_cast<double>(j + 1) * pou[j]);
  return sum(terms, pou.rho.ambient_dim());
}

struct SublevelCheck {
  double level = 0.0;
  std::size_t samples_below = 0;
  std::size_t violations = 0;  // samples with u <= a outside the first ceil(a) supports
  double bound_radius = 0.0;   // max_{j <= ceil(a)} |c_j - base| + r_j
  double observed_radius = 0.0;  // max |x - base| over samples with u <= a
};

/// For a = 1..J: every sample with u(x) <= a lies in the union of the closed
/// supports of rho_1..rho_ceil(a).
inline std::vector<SublevelCheck> exhaustion_sublevels(const PartitionOfUnity& pou, const SmoothExpr& u,
                                                       const SampleSet& samples, const Point& base) {
  const int J = static_cast<int>(pou.size());
  std::vector<double> values;
  for (const auto& x : samples.points) values.push_back(u(x));
  std::vector<SublevelCheck> out;
  double bound = 0.0;
  for (int a = 1; a <= J; ++a) {
    const auto& e = pou.cover.elements[static_cast<std::size_t>(a - 1)];
    bound = std::max(bound, (e.center - base).norm() + e.r_out);
    SublevelCheck c;
    c.level = a;
    c.bound_radius = bound;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (values[i] > a) continue;
      ++c.samples_below;
      const Point& x = samples.points[i];
      c.observed_radius = std::max(c.observed_radius, (x - base).norm());
      bool inside = false;
      for (int j = 0; j < a && !inside; ++j) inside = pou.cover.elements[static_cast<std::size_t>(j)].in_closure(x);
      if (!inside) ++c.violations;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace subcart
