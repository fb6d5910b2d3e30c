#pragma once

// Vector bundles presented by cocycles over strict-inequality domains:
// finite coordinate representations, metrics, global generators, injective
// trivializations and generalized subbundles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subcart/cover.hpp"
#include "subcart/error.hpp"
#include "subcart/expr.hpp"
#include "subcart/linalg.hpp"
#include "subcart/partition.hpp"
#include "subcart/space.hpp"

namespace subcart {

using ExprMatrix = std::vector<std::vector<SmoothExpr>>;

inline Matrix eval(const ExprMatrix& m, const Point& x) {
  const auto rows = static_cast<Eigen::Index>(m.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(m.front().size());
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](x);
  }
  return out;
}

namespace detail {

inline ExprMatrix minor_of(const ExprMatrix& m, std::size_t r, std::size_t c) {
  ExprMatrix out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i == r) continue;
    std::vector<SmoothExpr> row;
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (j != c) row.push_back(m[i][j]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline SmoothExpr determinant(const ExprMatrix& m, int dim) {
  if (m.size() == 1) return m[0][0];
  std::vector<SmoothExpr> terms;
  for (std::size_t j = 0; j < m.size(); ++j) {
    SmoothExpr t = m[0][j] * determinant(minor_of(m, 0, j), dim);
    terms.push_back(j % 2 == 0 ? t : -t);
  }
  return sum(terms, dim);
}

}  // namespace detail

/// Symbolic inverse by cofactors; used when a cocycle lists only one direction.
inline ExprMatrix inverse(const ExprMatrix& m, int dim) {
  const std::size_t k = m.size();
  const SmoothExpr det = detail::determinant(m, dim);
  ExprMatrix out(k, std::vector<SmoothExpr>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (k == 1) {
        out[i][j] = 1.0 / det;
        continue;
      }
      SmoothExpr cof = detail::determinant(detail::minor_of(m, j, i), dim);
      out[i][j] = ((i + j) % 2 == 0 ? cof : -cof) / det;
    }
  }
  return out;
}

/// A piece of a trivialization: the source domain, optionally cut down to a ball.
struct TrivPiece {
  int source = 0;
  std::optional<CoverElement> ball;
};

struct Trivialization {
  std::vector<TrivPiece> pieces;
};

/// (E, pi, S, R^k): source domains U_a with transitions g_ab on sources,
/// g_ab mapping b-coordinates to a-coordinates. Trivializations are unions
/// of pieces of sources; the originals are one piece each.
struct BundlePresentation {
  SpacePresentation base;
  int fiber_dim = 1;
  std::vector<std::vector<SmoothExpr>> sources;
  std::vector<std::vector<std::optional<ExprMatrix>>> cocycle;  // [a][b] = g_ab
  std::vector<Trivialization> trivializations;

  bool in_source(int a, const Point& x) const { return in_domain(sources[static_cast<std::size_t>(a)], x); }

  /// Source of the piece of trivialization t holding x, or -1.
  int source_at(int t, const Point& x) const {
    for (const auto& piece : trivializations[static_cast<std::size_t>(t)].pieces) {
      if (in_source(piece.source, x) && (!piece.ball || piece.ball->contains(x))) return piece.source;
    }
    return -1;
  }

  bool has_transition(int a, int b) const {
    return a == b || cocycle[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].has_value();
  }

  Matrix source_transition(int a, int b, const Point& x) const {
    if (a == b) return Matrix::Identity(fiber_dim, fiber_dim);
    const auto& g = cocycle[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    if (!g) throw Error(ErrorKind::Invalid, "no transition declared from source " + std::to_string(b) + " to " + std::to_string(a));
    return eval(*g, x);
  }

  /// g_ab(x) between trivializations, assembled piecewise from sources.
  Matrix transition(int a, int b, const Point& x) const {
    return source_transition(source_at(a, x), source_at(b, x), x);
  }

  /// Symbolic g_ab on sources; identity on the diagonal.
  ExprMatrix source_transition_expr(int a, int b) const {
    const int dim = base.ambient_dim;
    if (a == b) {
      ExprMatrix id(static_cast<std::size_t>(fiber_dim), std::vector<SmoothExpr>(static_cast<std::size_t>(fiber_dim)));
      for (int i = 0; i < fiber_dim; ++i) {
        for (int j = 0; j < fiber_dim; ++j) id[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = SmoothExpr::constant(dim, i == j ? 1.0 : 0.0);
      }
      return id;
    }
    const auto& g = cocycle[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    if (!g) throw Error(ErrorKind::Invalid, "no transition declared from source " + std::to_string(b) + " to " + std::to_string(a));
    return *g;
  }
};

/// Fill the cocycle's missing reverse directions by symbolic inversion and
/// make every source its own trivialization.
inline void complete_bundle(BundlePresentation& b) {
  const std::size_t n = b.sources.size();
  b.cocycle.resize(n);
  for (auto& row : b.cocycle) row.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t c = 0; c < n; ++c) {
      if (a != c && !b.cocycle[a][c] && b.cocycle[c][a]) b.cocycle[a][c] = inverse(*b.cocycle[c][a], b.base.ambient_dim);
    }
  }
  if (b.trivializations.empty()) {
    for (std::size_t a = 0; a < n; ++a) b.trivializations.push_back(Trivialization{{TrivPiece{static_cast<int>(a), std::nullopt}}});
  }
}

/// Per-sample membership in the bundle's source domains.
inline std::vector<std::vector<bool>> source_membership(const BundlePresentation& b, const SampleSet& s) {
  std::vector<std::vector<bool>> out;
  for (const auto& x : s.points) {
    std::vector<bool> row;
    for (std::size_t a = 0; a < b.sources.size(); ++a) row.push_back(b.in_source(static_cast<int>(a), x));
    out.push_back(std::move(row));
  }
  return out;
}

struct CocycleReport {
  double identity_residual = 0.0;  // max |g_aa - I|
  double inverse_residual = 0.0;   // max |g_ab g_ba - I| on double overlaps
  double triple_residual = 0.0;    // max |g_ab g_bc - g_ac| on triple overlaps
  std::size_t missing = 0;         // overlapping pairs without a transition
  std::size_t uncovered = 0;       // samples in no trivialization
  bool passed = false;
};

inline constexpr double kCocycleTol = 1e-8;

/// Residuals of the cocycle identities over the trivializations at samples.
inline CocycleReport validate_cocycle(const BundlePresentation& b, const SampleSet& s, double tol = kCocycleTol) {
  CocycleReport r;
  const int t = static_cast<int>(b.trivializations.size());
  const Matrix id = Matrix::Identity(b.fiber_dim, b.fiber_dim);
  for (const auto& x : s.points) {
    std::vector<int> here;
    for (int a = 0; a < t; ++a) {
      if (b.source_at(a, x) >= 0) here.push_back(a);
    }
    if (here.empty()) ++r.uncovered;
    auto g = [&](int a, int c) -> std::optional<Matrix> {
      const int sa = b.source_at(a, x), sc = b.source_at(c, x);
      if (!b.has_transition(sa, sc)) return std::nullopt;
      return b.source_transition(sa, sc, x);
    };
    for (int a : here) {
      const int sa = b.source_at(a, x);
      if (b.cocycle[static_cast<std::size_t>(sa)][static_cast<std::size_t>(sa)]) {
        r.identity_residual = std::max(r.identity_residual, (b.source_transition(sa, sa, x) - id).norm());
      }
      for (int c : here) {
        const auto gac = g(a, c);
        const auto gca = g(c, a);
        if (!gac || !gca) {
          ++r.missing;
          continue;
        }
        r.inverse_residual = std::max(r.inverse_residual, (*gac * *gca - id).norm());
        for (int d : here) {
          const auto gcd = g(c, d);
          const auto gad = g(a, d);
          if (gcd && gad) r.triple_residual = std::max(r.triple_residual, (*gac * *gcd - *gad).norm());
        }
      }
    }
  }
  r.passed = r.missing == 0 && r.uncovered == 0 && r.identity_residual < tol && r.inverse_residual < tol &&
             r.triple_residual < tol;
  return r;
}

/// Triple cover subordinate to the bundle's source domains.
inline Cover bundle_cover(const BundlePresentation& b, const SampleSet& s, const RadiusParams& rp) {
  return triple_cover_on(s, source_membership(b, s), rp, b.base.base_point, b.base.working_region);
}

/// <= n+1 trivializations, the i-th the disjoint union of family i's balls,
/// each restricted from the source its ball was fitted in.
inline BundlePresentation finite_coordinate_representation(const BundlePresentation& b, const DisjointFamilies& f) {
  BundlePresentation out = b;
  out.trivializations.clear();
  for (const auto& fam : f.families) {
    Trivialization t;
    for (int idx : fam) {
      const CoverElement& e = f.cover.elements[static_cast<std::size_t>(idx)];
      t.pieces.push_back(TrivPiece{e.chart, e});
    }
    out.trivializations.push_back(std::move(t));
  }
  return out;
}

/// A global section by its representative in every source trivialization.
struct GlobalSection {
  std::vector<ExprVec> reps;  // reps[a]: N -> k, meaningful on source a

  Point value(int source, const Point& x) const { return reps[static_cast<std::size_t>(source)](x); }
};

namespace detail {

// sum_l mask(w_l, w_l * g_{a, src_l} v_l) in source a, over terms whose
// source overlaps a on the samples.
struct Patch {
  SmoothExpr weight;
  int source = 0;
  std::vector<SmoothExpr> local;  // k components in source coordinates
};

inline GlobalSection patch_section(const BundlePresentation& b, const std::vector<Patch>& patches,
                                   const std::vector<std::vector<bool>>& overlap) {
  const int dim = b.base.ambient_dim;
  const int k = b.fiber_dim;
  GlobalSection sec;
  for (std::size_t a = 0; a < b.sources.size(); ++a) {
    std::vector<std::vector<SmoothExpr>> comps(static_cast<std::size_t>(k));
    for (const auto& pt : patches) {
      if (!overlap[a][static_cast<std::size_t>(pt.source)]) continue;
      const ExprMatrix g = b.source_transition_expr(static_cast<int>(a), pt.source);
      for (int i = 0; i < k; ++i) {
        std::vector<SmoothExpr> row;
        for (int j = 0; j < k; ++j) {
          if (static_cast<int>(a) == pt.source && i != j) continue;
          row.push_back(static_cast<int>(a) == pt.source ? pt.local[static_cast<std::size_t>(j)]
                                                          : g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * pt.local[static_cast<std::size_t>(j)]);
        }
        comps[static_cast<std::size_t>(i)].push_back(mask(pt.weight, pt.weight * sum(row, dim)));
      }
    }
    std::vector<SmoothExpr> rep;
    for (auto& c : comps) rep.push_back(sum(c, dim));
    sec.reps.emplace_back(dim, std::move(rep));
  }
  return sec;
}

inline std::vector<std::vector<bool>> source_overlaps(const BundlePresentation& b, const SampleSet& s) {
  const std::size_t n = b.sources.size();
  std::vector<std::vector<bool>> ov(n, std::vector<bool>(n, false));
  for (const auto& row : source_membership(b, s)) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t c = 0; c < n; ++c) ov[a][c] = ov[a][c] || (row[a] && row[c]);
    }
  }
  return ov;
}

}  // namespace detail

/// First source domain holding x, or -1.
inline int home_source(const BundlePresentation& b, const Point& x) {
  for (std::size_t a = 0; a < b.sources.size(); ++a) {
    if (b.in_source(static_cast<int>(a), x)) return static_cast<int>(a);
  }
  return -1;
}

/// Values of `sections` at x in source a, as columns.
inline Matrix section_matrix(const std::vector<GlobalSection>& sections, int a, const Point& x, int k) {
  Matrix m(k, static_cast<Eigen::Index>(sections.size()));
  for (std::size_t i = 0; i < sections.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = sections[i].value(a, x);
  return m;
}

/// sigma_ij = sum_{l in I_i} rho_l gamma_ij over a finite coordinate
/// representation whose trivialization i is the union of the balls in I_i;
/// gamma_ij is the j-th frame vector of trivialization i. `pou` must be
/// built over the representation's pieces, listed family by family as in
/// `pieces_cover`.
inline std::vector<GlobalSection> global_bundle_generators(const BundlePresentation& rep, const PartitionOfUnity& pou,
                                                           const SampleSet& s) {
  const int k = rep.fiber_dim;
  const auto ov = detail::source_overlaps(rep, s);
  std::vector<GlobalSection> out;
  std::size_t l = 0;
  std::vector<std::vector<std::size_t>> members;
  for (const auto& t : rep.trivializations) {
    std::vector<std::size_t> idx;
    for (std::size_t p = 0; p < t.pieces.size(); ++p) idx.push_back(l++);
    members.push_back(std::move(idx));
  }
  if (l != pou.size()) throw Error(ErrorKind::Invalid, "partition does not match the representation's pieces");
  for (std::size_t i = 0; i < rep.trivializations.size(); ++i) {
    for (int j = 0; j < k; ++j) {
      std::vector<detail::Patch> patches;
      const auto& t = rep.trivializations[i];
      for (std::size_t p = 0; p < t.pieces.size(); ++p) {
        detail::Patch pt;
        pt.weight = pou[members[i][p]];
        pt.source = t.pieces[p].source;
        for (int c = 0; c < k; ++c) pt.local.push_back(SmoothExpr::constant(rep.base.ambient_dim, c == j ? 1.0 : 0.0));
        patches.push_back(std::move(pt));
      }
      out.push_back(detail::patch_section(rep, patches, ov));
    }
  }
  return out;
}

/// The representation's pieces as one cover, family by family.
inline Cover pieces_cover(const BundlePresentation& rep) {
  Cover c;
  c.working_region = rep.base.working_region;
  for (const auto& t : rep.trivializations) {
    for (const auto& p : t.pieces) {
      if (!p.ball) throw Error(ErrorKind::Invalid, "trivialization piece has no ball");
      c.elements.push_back(*p.ball);
    }
  }
  return c;
}

struct GeneratorReport {
  std::size_t count = 0;
  int min_rank = 0;
  int max_rank = 0;
  std::size_t rank_deficient = 0;       // samples with rank < k
  std::size_t rank_disagreements = 0;   // rank differs between two sources at a sample
  double compatibility_residual = 0.0;  // max |rep_a - g_ab rep_b| on overlaps
  std::vector<bool> has_zero;           // per section: vanishes at some sample
  bool passed = false;
};

inline GeneratorReport check_bundle_generators(const BundlePresentation& b, const std::vector<GlobalSection>& gens,
                                               const SampleSet& s) {
  GeneratorReport r;
  const int k = b.fiber_dim;
  const double tol = b.base.tolerances.rank_tol;
  r.count = gens.size();
  r.min_rank = std::numeric_limits<int>::max();
  r.has_zero.assign(gens.size(), false);
  for (const auto& x : s.points) {
    std::vector<int> here;
    for (std::size_t a = 0; a < b.sources.size(); ++a) {
      if (b.in_source(static_cast<int>(a), x)) here.push_back(static_cast<int>(a));
    }
    if (here.empty()) continue;
    const Matrix m0 = section_matrix(gens, here[0], x, k);
    const int rank = numerical_rank(m0, tol);
    r.min_rank = std::min(r.min_rank, rank);
    r.max_rank = std::max(r.max_rank, rank);
    if (rank < k) ++r.rank_deficient;
    for (std::size_t i = 0; i < gens.size(); ++i) {
      if (m0.col(static_cast<Eigen::Index>(i)).norm() <= tol) r.has_zero[i] = true;
    }
    for (std::size_t h = 1; h < here.size(); ++h) {
      const Matrix mh = section_matrix(gens, here[h], x, k);
      if (numerical_rank(mh, tol) != rank) ++r.rank_disagreements;
      r.compatibility_residual =
          std::max(r.compatibility_residual, (mh - b.source_transition(here[h], here[0], x) * m0).cwiseAbs().maxCoeff());
    }
  }
  if (r.min_rank == std::numeric_limits<int>::max()) r.min_rank = 0;
  r.passed = r.rank_deficient == 0 && r.rank_disagreements == 0 && r.compatibility_residual <= 1e-8;
  return r;
}

/// Gram matrices G_a = sum_l rho_l g_{src(l), a}^T g_{src(l), a} per source,
/// each element l of the partition's cover carrying its source in `chart`.
struct BundleMetric {
  std::vector<ExprMatrix> gram;  // per source

  Matrix at(int source, const Point& x) const { return eval(gram[static_cast<std::size_t>(source)], x); }
};

inline BundleMetric riemannian_metric(const BundlePresentation& b, const PartitionOfUnity& pou, const SampleSet& s) {
  const int dim = b.base.ambient_dim;
  const int k = b.fiber_dim;
  const auto ov = detail::source_overlaps(b, s);
  BundleMetric g;
  for (std::size_t a = 0; a < b.sources.size(); ++a) {
    ExprMatrix gram(static_cast<std::size_t>(k), std::vector<SmoothExpr>(static_cast<std::size_t>(k)));
    for (int i = 0; i < k; ++i) {
      for (int j = i; j < k; ++j) {
        std::vector<SmoothExpr> terms;
        for (std::size_t l = 0; l < pou.size(); ++l) {
          const int src = pou.cover.elements[l].chart;
          if (!ov[a][static_cast<std::size_t>(src)]) continue;
          const ExprMatrix t = b.source_transition_expr(src, static_cast<int>(a));
          std::vector<SmoothExpr> dot;
          for (int r = 0; r < k; ++r) {
            dot.push_back(t[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] *
                          t[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]);
          }
          terms.push_back(mask(pou[l], pou[l] * sum(dot, dim)));
        }
        gram[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = sum(terms, dim);
        gram[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = gram[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    g.gram.push_back(std::move(gram));
  }
  return g;
}

struct MetricReport {
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double asymmetry = 0.0;            // max |G - G^T|
  double transform_residual = 0.0;   // max |G_a - g_ba^T G_b g_ba| on overlaps
  bool passed = false;
};

inline MetricReport check_metric(const BundlePresentation& b, const BundleMetric& g, const SampleSet& s) {
  MetricReport r;
  for (const auto& x : s.points) {
    std::vector<int> here;
    for (std::size_t a = 0; a < b.sources.size(); ++a) {
      if (b.in_source(static_cast<int>(a), x)) here.push_back(static_cast<int>(a));
    }
    for (int a : here) {
      const Matrix ga = g.at(a, x);
      r.asymmetry = std::max(r.asymmetry, (ga - ga.transpose()).cwiseAbs().maxCoeff());
      Eigen::SelfAdjointEigenSolver<Matrix> es(ga);
      r.min_eigenvalue = std::min(r.min_eigenvalue, es.eigenvalues().minCoeff());
      for (int c : here) {
        const Matrix t = b.source_transition(c, a, x);
        r.transform_residual = std::max(r.transform_residual, (ga - t.transpose() * g.at(c, x) * t).cwiseAbs().maxCoeff());
      }
    }
  }
  r.passed = r.min_eigenvalue > 0.0 && r.asymmetry == 0.0 && r.transform_residual <= 1e-8;
  return r;
}

inline constexpr double kGramConditionCeiling = 1e12;

/// phi = psi^* (psi psi^*)^{-1} with psi^* = psi^T G the adjoint for the
/// fiber metric G and the Euclidean metric on R^l.
inline Matrix right_inverse(const Matrix& psi, const Matrix& gram) {
  const Matrix adj = psi.transpose() * gram;
  const Matrix pp = psi * adj;
  Eigen::JacobiSVD<Matrix> svd(pp);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[sv.size() - 1] > 0.0) || sv[0] / sv[sv.size() - 1] > kGramConditionCeiling) {
    throw Error(ErrorKind::SingularGram, "psi psi^* is singular or too ill-conditioned to invert");
  }
  return adj * pp.inverse();
}

/// Bundle map phi: E -> S x R^l built from l generators and a metric.
struct InjectiveTrivialization {
  const BundlePresentation* bundle = nullptr;
  std::vector<GlobalSection> generators;
  BundleMetric metric;

  /// l x k matrix of phi_x in source a.
  Matrix at(int source, const Point& x) const {
    const Matrix psi = section_matrix(generators, source, x, bundle->fiber_dim);
    return right_inverse(psi, metric.at(source, x));
  }
};

inline InjectiveTrivialization injective_trivialization(const BundlePresentation& b, std::vector<GlobalSection> gens,
                                                        BundleMetric metric) {
  return InjectiveTrivialization{&b, std::move(gens), std::move(metric)};
}

struct TrivializationReport {
  double max_residual = 0.0;  // max |psi(phi(e)) - e| over samples and fiber basis vectors
  double min_singular_value = std::numeric_limits<double>::infinity();  // of phi_x
  bool passed = false;
};

inline TrivializationReport check_trivialization(const InjectiveTrivialization& t, const SampleSet& s) {
  TrivializationReport r;
  const int k = t.bundle->fiber_dim;
  for (const auto& x : s.points) {
    const int a = home_source(*t.bundle, x);
    if (a < 0) continue;
    const Matrix psi = section_matrix(t.generators, a, x, k);
    const Matrix phi = right_inverse(psi, t.metric.at(a, x));
    const Matrix id = Matrix::Identity(k, k);
    for (int j = 0; j < k; ++j) r.max_residual = std::max(r.max_residual, (psi * phi.col(j) - id.col(j)).norm());
    r.min_singular_value = std::min(r.min_singular_value, min_singular_value(phi));
  }
  r.passed = r.max_residual <= 1e-8 && r.min_singular_value > 0.0;
  return r;
}

/// Cover, refinement, representation, partition, generators and metric for
/// a bundle. Throws RankDeficient when the generators miss a fiber.
struct BundleConstruction {
  Cover cover;
  DisjointFamilies families;
  BundlePresentation representation;
  std::optional<PartitionOfUnity> pou;
  std::vector<GlobalSection> generators;
  BundleMetric metric;
};

inline BundleConstruction construct_bundle_generators(const BundlePresentation& b, const SampleSet& s,
                                                      const RadiusParams& rp) {
  BundleConstruction out;
  out.cover = bundle_cover(b, s, rp);
  const int n = b.base.structural_dim;
  out.families = refine_bounded_order(out.cover, n, s);
  out.representation = finite_coordinate_representation(b, out.families);
  out.pou = partition_of_unity(pieces_cover(out.representation), s);
  out.generators = global_bundle_generators(out.representation, *out.pou, s);
  out.metric = riemannian_metric(b, *out.pou, s);
  const GeneratorReport r = check_bundle_generators(b, out.generators, s);
  if (r.rank_deficient > 0) {
    throw Error(ErrorKind::RankDeficient,
                "generators fall below full rank at " + std::to_string(r.rank_deficient) + " samples");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generalized subbundles

/// Local generators xi_{v,1..} on a strict-inequality domain, written in
/// the coordinates of one source trivialization. Each family is expected to
/// span F at every point of its domain.
struct LocalFamily {
  std::vector<SmoothExpr> domain;
  int source = 0;
  std::vector<ExprVec> sections;  // N -> k
};

struct SubbundlePresentation {
  BundlePresentation bundle;
  std::vector<LocalFamily> families;
};

inline bool in_family(const SubbundlePresentation& sub, std::size_t v, const Point& x) {
  const auto& f = sub.families[v];
  return in_domain(f.domain, x) && sub.bundle.in_source(f.source, x);
}

struct SubbundleGenerators {
  std::vector<GlobalSection> sections;
  std::vector<int> family;  // family of each section
  Cover cover;              // empty for the zero subbundle
  std::optional<PartitionOfUnity> pou;
};

/// Global generators sigma_{v,j} = w_v xi_{v,j}, w_v the sum of the
/// partition functions whose balls were fitted inside family v's domain.
inline SubbundleGenerators subbundle_global_generators(const SubbundlePresentation& sub, const SampleSet& s,
                                                       const RadiusParams& rp) {
  SubbundleGenerators out;
  if (sub.families.empty()) return out;  // F = 0: no generators needed
  const BundlePresentation& b = sub.bundle;
  const int dim = b.base.ambient_dim;
  std::vector<std::vector<bool>> dom;
  std::vector<bool> required;
  SampleSet needed;
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<bool> row;
    bool any = false;
    for (std::size_t v = 0; v < sub.families.size(); ++v) {
      row.push_back(in_family(sub, v, s.points[i]));
      any = any || row.back();
    }
    dom.push_back(std::move(row));
    required.push_back(any);
    if (any) needed.points.push_back(s.points[i]);
  }
  out.cover = triple_cover_on(s, dom, rp, b.base.base_point, b.base.working_region, required);
  out.pou = partition_of_unity(out.cover, needed);
  const auto ov = detail::source_overlaps(b, s);
  for (std::size_t v = 0; v < sub.families.size(); ++v) {
    std::vector<SmoothExpr> parts;
    for (std::size_t e = 0; e < out.cover.size(); ++e) {
      if (out.cover.elements[e].chart == static_cast<int>(v)) parts.push_back((*out.pou)[e]);
    }
    if (parts.empty()) continue;
    const SmoothExpr w = sum(parts, dim);
    for (const auto& xi : sub.families[v].sections) {
      detail::Patch pt{w, sub.families[v].source, xi.components()};
      out.sections.push_back(detail::patch_section(b, {pt}, ov));
      out.family.push_back(static_cast<int>(v));
    }
  }
  return out;
}

struct SubbundleReport {
  std::vector<int> input_rank;   // per sample
  std::vector<int> output_rank;  // per sample
  double max_membership_residual = 0.0;
  std::size_t rank_mismatches = 0;
  bool passed = false;
};

/// Pointwise comparison of the generators against the active local families.
inline SubbundleReport check_subbundle(const SubbundlePresentation& sub, const std::vector<GlobalSection>& gens,
                                       const SampleSet& s) {
  SubbundleReport r;
  const BundlePresentation& b = sub.bundle;
  const int k = b.fiber_dim;
  const double tol = b.base.tolerances.rank_tol;
  for (const auto& x : s.points) {
    const int a = home_source(b, x);
    if (a < 0) {
      r.input_rank.push_back(0);
      r.output_rank.push_back(0);
      continue;
    }
    std::vector<Point> cols;
    for (std::size_t v = 0; v < sub.families.size(); ++v) {
      if (!in_family(sub, v, x)) continue;
      const Matrix g = b.source_transition(a, sub.families[v].source, x);
      for (const auto& xi : sub.families[v].sections) cols.push_back(g * xi(x));
    }
    Matrix in(k, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) in.col(static_cast<Eigen::Index>(c)) = cols[c];
    const Matrix out = section_matrix(gens, a, x, k);
    const int ri = numerical_rank(in, tol);
    const int ro = numerical_rank(out, tol);
    r.input_rank.push_back(ri);
    r.output_rank.push_back(ro);
    if (ri != ro) ++r.rank_mismatches;
    const Matrix span = column_span(in, tol);
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      r.max_membership_residual = std::max(r.max_membership_residual, projection_residual(span, out.col(c)));
    }
  }
  r.passed = r.rank_mismatches == 0 && r.max_membership_residual <= 1e-8;
  return r;
}

}  // namespace subcart
