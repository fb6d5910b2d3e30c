#pragma once

// Distributions on subcartesian spaces: local vector fields on domains,
// tangency checks and global generators through the subbundle construction
// on the trivial bundle S x R^N.

#include <algorithm>
#include <cmath>
#include <vector>

#include "subcart/bundle.hpp"
#include "subcart/cover.hpp"
#include "subcart/embed.hpp"
#include "subcart/expr.hpp"
#include "subcart/linalg.hpp"
#include "subcart/space.hpp"

namespace subcart {

struct LocalField {
  std::vector<SmoothExpr> domain;
  ExprVec field;  // N -> N
};

struct DistributionPresentation {
  SpacePresentation base;
  std::vector<LocalField> fields;
  double tangency_tol = 1e-8;
};

struct TangencyReport {
  double max_residual = 0.0;  // max |<X(x), grad g_i(x)>|
  std::size_t worst_sample = 0;
  bool passed = true;
};

/// X is tangent when it annihilates every equality constraint's differential
/// at the samples inside `domain`.
inline TangencyReport verify_tangency(const ExprVec& field, const SpacePresentation& p, const SampleSet& s,
                                      const std::vector<SmoothExpr>& domain = {}, double tol = 1e-8) {
  TangencyReport r;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Point& x = s.points[i];
    if (!in_domain(domain, x)) continue;
    const Point v = field(x);
    for (const auto& g : p.equalities) {
      const double res = std::abs(g.gradient(x).transpose().dot(v));
      if (res > r.max_residual) {
        r.max_residual = res;
        r.worst_sample = i;
      }
    }
  }
  r.passed = r.max_residual <= tol;
  return r;
}

/// Values of the local fields active at x, as columns.
inline Matrix active_fields(const DistributionPresentation& d, const Point& x) {
  std::vector<Point> cols;
  for (const auto& f : d.fields) {
    if (in_domain(f.domain, x)) cols.push_back(f.field(x));
  }
  Matrix m(d.base.ambient_dim, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
  return m;
}

inline int distribution_rank(const DistributionPresentation& d, const Point& x, double rank_tol) {
  return numerical_rank(active_fields(d, x), rank_tol);
}

/// S x R^N with one global trivialization, each local field its own family.
inline SubbundlePresentation as_subbundle(const DistributionPresentation& d) {
  SubbundlePresentation sub;
  sub.bundle.base = d.base;
  sub.bundle.fiber_dim = d.base.ambient_dim;
  sub.bundle.sources.push_back({});
  complete_bundle(sub.bundle);
  for (const auto& f : d.fields) sub.families.push_back(LocalFamily{f.domain, 0, {f.field}});
  return sub;
}

struct DistributionGenerators {
  std::vector<ExprVec> fields;
  std::vector<int> family;  // local field each generator came from
  SubbundleGenerators raw;
};

/// Finitely many global vector fields spanning D at every sample.
inline DistributionGenerators global_distribution_generators(const DistributionPresentation& d, const SampleSet& s,
                                                             const RadiusParams& rp) {
  DistributionGenerators out;
  out.raw = subbundle_global_generators(as_subbundle(d), s, rp);
  for (const auto& sec : out.raw.sections) out.fields.push_back(sec.reps.front());
  out.family = out.raw.family;
  return out;
}

struct SpanReport {
  std::vector<int> expected_rank;  // distribution_rank per sample
  std::vector<int> observed_rank;  // rank of the generators projected to T_x
  std::size_t mismatches = 0;
  double max_membership_residual = 0.0;
  double max_tangency_residual = 0.0;
  bool passed = false;
};

inline SpanReport span_check(const std::vector<ExprVec>& gens, const DistributionPresentation& d, const SampleSet& s) {
  SpanReport r;
  const double tol = d.base.tolerances.rank_tol;
  for (const auto& g : gens) {
    r.max_tangency_residual = std::max(r.max_tangency_residual, verify_tangency(g, d.base, s, {}, d.tangency_tol).max_residual);
  }
  for (const auto& x : s.points) {
    const Matrix in = active_fields(d, x);
    Matrix out(d.base.ambient_dim, static_cast<Eigen::Index>(gens.size()));
    for (std::size_t i = 0; i < gens.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = gens[i](x);
    const Matrix t = tangent_space(d.base, x, tol);
    const int expected = numerical_rank(in, tol);
    const int observed = numerical_rank(Matrix(t * (t.transpose() * out)), tol);
    r.expected_rank.push_back(expected);
    r.observed_rank.push_back(observed);
    if (expected != observed) ++r.mismatches;
    const Matrix span = column_span(in, tol);
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      r.max_membership_residual = std::max(r.max_membership_residual, projection_residual(span, out.col(c)));
    }
  }
  r.passed = r.mismatches == 0 && r.max_membership_residual <= 1e-8 && r.max_tangency_residual <= d.tangency_tol;
  return r;
}

}  // namespace subcart
