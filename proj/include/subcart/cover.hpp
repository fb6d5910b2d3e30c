#pragma once

// Covers by ball traces: nested exhaustions, triple covers subordinate to
// chart domains, bounded-order refinement and finite atlases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "subcart/error.hpp"
#include "subcart/expr.hpp"
#include "subcart/space.hpp"

namespace subcart {

struct RadiusParams {
  double radius = 0.3;      // r_U
  double ratio_v = 1.2;     // r_V = ratio_v * r_U
  double ratio_w = 1.5;     // r_W = ratio_w * r_U
  double plateau = 0.5;     // indicator equals 1 within plateau * r_U
  double cover_floor = 1e-3;  // a sample counts as covered when b >= floor
};

/// Ball trace {x in S : |x - c| < r_out} carried by the bump indicator
/// make_bump(c, r_in, r_out). Triple data (r_v, r_w > 0) marks U of a
/// nested triple U < V < W.
struct CoverElement {
  Point center;
  double r_in = 0.0;
  double r_out = 0.0;
  double r_v = 0.0;
  double r_w = 0.0;
  int chart = 0;    // index of the domain holding cl(W) (or the element itself)
  int parent = -1;  // element of the cover this one was refined from
  SmoothExpr indicator;

  bool has_triple() const { return r_v > 0.0 && r_w > 0.0; }

  /// Indicator value from the closed-form bump, matching `indicator`.
  double value(const Point& x) const {
    return detail::bump_value(BumpShape{r_in * r_in, r_out * r_out, 1, 0, 0, 0}, (x - center).squaredNorm());
  }

  bool contains(const Point& x) const { return (x - center).squaredNorm() < r_out * r_out; }
  bool in_closure(const Point& x) const { return (x - center).norm() <= r_out; }
};

inline CoverElement make_element(const Point& center, double r_in, double r_out, int chart) {
  CoverElement e;
  e.center = center;
  e.r_in = r_in;
  e.r_out = r_out;
  e.chart = chart;
  e.indicator = make_bump(static_cast<int>(center.size()), center, r_in, r_out);
  return e;
}

struct Cover {
  std::vector<CoverElement> elements;
  Box working_region;

  std::size_t size() const { return elements.size(); }
};

/// Samples with some indicator >= floor; indices of those that are not.
inline std::vector<std::size_t> uncovered_samples(const Cover& c, const SampleSet& s, double floor = 1e-3) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool hit = false;
    for (const auto& e : c.elements) {
      if (e.contains(s.points[i]) && e.indicator(s.points[i]) >= floor) {
        hit = true;
        break;
      }
    }
    if (!hit) out.push_back(i);
  }
  return out;
}

/// Largest nearest-neighbour distance in the sample set (its mesh width).
inline double sample_mesh(const SampleSet& s) {
  double h = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double nn = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i != j) nn = std::min(nn, (s.points[i] - s.points[j]).norm());
    }
    if (std::isfinite(nn)) h = std::max(h, nn);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Nested compact exhaustion

struct Exhaustion {
  Point center;
  std::vector<double> radii;  // G_j = {x in S : |x - center| < radii[j-1]}
  bool covers_region = false;

  bool in_G(int j, const Point& x) const { return (x - center).norm() < radii[static_cast<std::size_t>(j - 1)]; }
  bool in_closure(int j, const Point& x) const {
    return (x - center).norm() <= radii[static_cast<std::size_t>(j - 1)];
  }
};

/// G_1 < ... < G_J about the base point. Default radii r_j = j R / J with R
/// slightly above the farthest corner of the working region, so G_J holds
/// the whole region.
inline Exhaustion compact_exhaustion(const SpacePresentation& p, int horizon,
                                     std::optional<std::vector<double>> radii = std::nullopt) {
  if (horizon < 1) throw Error(ErrorKind::Invalid, "horizon must be at least 1");
  Exhaustion ex;
  ex.center = p.base_point;
  const double reach = p.working_region.max_distance_from(p.base_point);
  if (radii) {
    if (static_cast<int>(radii->size()) != horizon) throw Error(ErrorKind::Invalid, "need one radius per level");
    for (std::size_t j = 0; j < radii->size(); ++j) {
      if (!((*radii)[j] > 0.0) || (j > 0 && !((*radii)[j] > (*radii)[j - 1]))) {
        throw Error(ErrorKind::Invalid, "exhaustion radii must be positive and strictly increasing");
      }
    }
    ex.radii = *radii;
  } else {
    const double r = reach * (1.0 + 1e-9) + 1e-12;
    for (int j = 1; j <= horizon; ++j) ex.radii.push_back(r * j / horizon);
  }
  ex.covers_region = ex.radii.back() > reach;
  return ex;
}

/// Worst violation of cl(G_j) in G_{j+1} over samples (0 when nested).
inline std::size_t exhaustion_nesting_failures(const Exhaustion& ex, const SampleSet& s) {
  std::size_t bad = 0;
  const int J = static_cast<int>(ex.radii.size());
  for (const auto& x : s.points) {
    for (int j = 1; j < J; ++j) {
      if (ex.in_closure(j, x) && !ex.in_G(j + 1, x)) ++bad;
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Triple covers

namespace detail {

inline void order_by_base(std::vector<CoverElement>& els, const Point& base) {
  std::stable_sort(els.begin(), els.end(), [&](const CoverElement& a, const CoverElement& b) {
    return (a.center - base).norm() < (b.center - base).norm();
  });
}

}  // namespace detail

/// Greedy triple cover. `domains[i][d]` says whether sample i lies in domain d;
/// only samples in `required` (all when empty) must be covered. Candidate
/// centers are samples; a candidate is usable for domain d when every sample
/// within r_W of it lies in d.
inline Cover triple_cover_on(const SampleSet& s, const std::vector<std::vector<bool>>& domains,
                             const RadiusParams& rp, const Point& base, const Box& region,
                             const std::vector<bool>& required = {}) {
  if (!(rp.radius > 0.0 && rp.ratio_v > 1.0 && rp.ratio_w > rp.ratio_v && rp.plateau >= 0.0 &&
        rp.plateau < 1.0)) {
    throw Error(ErrorKind::Invalid, "radius parameters must satisfy r > 0, 1 < ratio_v < ratio_w, 0 <= plateau < 1");
  }
  const std::size_t n = s.size();
  const double r_u = rp.radius, r_v = rp.ratio_v * rp.radius, r_w = rp.ratio_w * rp.radius;
  const BumpShape shape{rp.plateau * r_u * rp.plateau * r_u, r_u * r_u, 1, 0, 0, 0};
  auto need = [&](std::size_t i) { return required.empty() || required[i]; };

  std::vector<int> fit(n, -1);
  std::vector<std::vector<std::size_t>> reach(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t nd = domains[c].size();
    std::vector<bool> ok(nd);
    for (std::size_t d = 0; d < nd; ++d) ok[d] = domains[c][d];
    for (std::size_t i = 0; i < n; ++i) {
      const double d2 = (s.points[i] - s.points[c]).squaredNorm();
      if (d2 <= r_w * r_w) {
        for (std::size_t d = 0; d < nd; ++d) ok[d] = ok[d] && domains[i][d];
      }
      if (need(i) && detail::bump_value(shape, d2) >= rp.cover_floor) reach[c].push_back(i);
    }
    for (std::size_t d = 0; d < nd; ++d) {
      if (ok[d]) {
        fit[c] = static_cast<int>(d);
        break;
      }
    }
  }

  std::vector<bool> covered(n, false);
  std::size_t remaining = 0;
  for (std::size_t i = 0; i < n; ++i) remaining += need(i) ? 1 : 0;
  std::vector<bool> reachable(n, false);
  for (std::size_t c = 0; c < n; ++c) {
    if (fit[c] < 0) continue;
    for (std::size_t i : reach[c]) reachable[i] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (need(i) && !reachable[i]) {
      throw Error(ErrorKind::CoverFit, "no chart domain holds a W-ball of radius " + std::to_string(r_w) +
                                           " covering sample " + std::to_string(i));
    }
  }

  std::vector<CoverElement> chosen;
  while (remaining > 0) {
    std::size_t best = n, best_gain = 0;
    double best_dist = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (fit[c] < 0) continue;
      std::size_t gain = 0;
      for (std::size_t i : reach[c]) gain += covered[i] ? 0 : 1;
      const double dist = (s.points[c] - base).norm();
      if (gain > best_gain || (gain == best_gain && gain > 0 && dist < best_dist)) {
        best = c;
        best_gain = gain;
        best_dist = dist;
      }
    }
    for (std::size_t i : reach[best]) {
      if (!covered[i]) {
        covered[i] = true;
        --remaining;
      }
    }
    CoverElement e = make_element(s.points[best], rp.plateau * r_u, r_u, fit[best]);
    e.r_v = r_v;
    e.r_w = r_w;
    chosen.push_back(std::move(e));
  }
  detail::order_by_base(chosen, base);
  return Cover{std::move(chosen), region};
}

/// Radius parameters from the presentation's hints; radius 0 means a tenth
/// of the working region's diagonal.
inline RadiusParams radius_params(const SpacePresentation& p) {
  RadiusParams rp;
  rp.radius = p.cover.radius > 0.0 ? p.cover.radius : 0.1 * (p.working_region.max - p.working_region.min).norm();
  rp.ratio_v = p.cover.ratio_v;
  rp.ratio_w = p.cover.ratio_w;
  rp.plateau = p.cover.plateau;
  return rp;
}

/// Triple cover subordinate to the presentation's charts.
inline Cover triple_cover(const SpacePresentation& p, const SampleSet& s, const RadiusParams& rp) {
  return triple_cover_on(s, s.in_chart, rp, p.base_point, p.working_region);
}

/// Sample sweep of the triple invariants: every sample in some U; the closure
/// of each U inside V; W inside its chart domain. Returns failure count.
inline std::size_t triple_cover_failures(const Cover& c, const SampleSet& s, double floor = 1e-3) {
  std::size_t bad = uncovered_samples(c, s, floor).size();
  for (const auto& e : c.elements) {
    if (!e.has_triple() || !(e.r_out < e.r_v && e.r_v < e.r_w)) ++bad;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double d = (s.points[i] - e.center).norm();
      if (d <= e.r_out && !(d < e.r_v)) ++bad;
      if (d <= e.r_w && !s.in_chart[i][static_cast<std::size_t>(e.chart)]) ++bad;
    }
  }
  return bad;
}

/// Maximum number of elements containing a sample.
inline int cover_order(const Cover& c, const SampleSet& s) {
  int order = 0;
  for (const auto& x : s.points) {
    int k = 0;
    for (const auto& e : c.elements) k += e.contains(x) ? 1 : 0;
    order = std::max(order, k);
  }
  return order;
}

// ---------------------------------------------------------------------------
// Bounded-order refinement

struct DisjointFamilies {
  Cover cover;                             // refined elements
  std::vector<std::vector<int>> families;  // indices into cover.elements
  std::vector<double> margins;             // min |c_i - c_j| - r_i - r_j within a family
  int rounds = 0;                          // shrink/split rounds used
};

namespace detail {

inline bool supports_meet(const CoverElement& a, const CoverElement& b) {
  return (a.center - b.center).norm() <= a.r_out + b.r_out;
}

// DSatur coloring; exact on bipartite graphs.
inline std::vector<int> dsatur(const std::vector<std::vector<int>>& adj) {
  const std::size_t n = adj.size();
  std::vector<int> color(n, -1);
  std::vector<std::vector<bool>> seen(n);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t pick = n;
    std::size_t best_sat = 0, best_deg = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (color[v] >= 0) continue;
      const std::size_t sat = static_cast<std::size_t>(std::count(seen[v].begin(), seen[v].end(), true));
      const std::size_t deg = adj[v].size();
      if (pick == n || sat > best_sat || (sat == best_sat && deg > best_deg)) {
        pick = v;
        best_sat = sat;
        best_deg = deg;
      }
    }
    int c = 0;
    while (static_cast<std::size_t>(c) < seen[pick].size() && seen[pick][static_cast<std::size_t>(c)]) ++c;
    color[pick] = c;
    for (int w : adj[pick]) {
      auto& sw = seen[static_cast<std::size_t>(w)];
      if (sw.size() <= static_cast<std::size_t>(c)) sw.resize(static_cast<std::size_t>(c) + 1, false);
      sw[static_cast<std::size_t>(c)] = true;
    }
  }
  return color;
}

inline std::vector<int> color_cover(const std::vector<CoverElement>& els, int& ncolors) {
  std::vector<std::vector<int>> adj(els.size());
  for (std::size_t i = 0; i < els.size(); ++i) {
    for (std::size_t j = i + 1; j < els.size(); ++j) {
      if (supports_meet(els[i], els[j])) {
        adj[i].push_back(static_cast<int>(j));
        adj[j].push_back(static_cast<int>(i));
      }
    }
  }
  auto color = dsatur(adj);
  ncolors = 0;
  for (int c : color) ncolors = std::max(ncolors, c + 1);
  return color;
}

// Smallest ball about the bounding-box center of `owned` padded by `pad`,
// kept inside the parent's outer ball; falls back to the parent center.
inline CoverElement fit_ball(const CoverElement& parent, const std::vector<Point>& owned, double pad) {
  const double limit = parent.has_triple() ? parent.r_w : parent.r_out;
  Point lo = owned.front(), hi = owned.front();
  for (const auto& x : owned) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  auto build = [&](const Point& c) {
    double r = 0.0;
    for (const auto& x : owned) r = std::max(r, (x - c).norm());
    return std::pair<Point, double>{c, r};
  };
  auto [c, r] = build(0.5 * (lo + hi));
  if ((c - parent.center).norm() + r + pad > limit) std::tie(c, r) = build(parent.center);
  double r_out = std::min(r + pad, limit - (c - parent.center).norm());
  double r_in = std::min(r, 0.999 * r_out);
  return make_element(c, r_in, r_out, parent.chart);
}

}  // namespace detail

/// Refine `cover` into at most n+1 families of pairwise disjoint balls.
/// Round 0 colors the cover as given. Later rounds give every sample one
/// owner, shrink each ball to its owned samples plus a pad of one mesh width
/// (so the shrunk balls still cover the sampled set), and split the balls
/// that needed an extra color in two along their principal direction.
inline DisjointFamilies refine_bounded_order(const Cover& cover, int n, const SampleSet& s, int max_rounds = 8) {
  if (n < 0) throw Error(ErrorKind::Invalid, "structural dimension must be nonnegative");
  const int allowed = n + 1;
  std::vector<CoverElement> els = cover.elements;
  for (std::size_t i = 0; i < els.size(); ++i) els[i].parent = static_cast<int>(i);

  auto finish = [&](std::vector<CoverElement> cur, const std::vector<int>& color, int ncolors, int rounds) {
    DisjointFamilies out;
    out.cover = Cover{std::move(cur), cover.working_region};
    out.families.assign(static_cast<std::size_t>(ncolors), {});
    for (std::size_t i = 0; i < color.size(); ++i) {
      out.families[static_cast<std::size_t>(color[i])].push_back(static_cast<int>(i));
    }
    for (const auto& fam : out.families) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < fam.size(); ++a) {
        for (std::size_t b = a + 1; b < fam.size(); ++b) {
          const auto& ea = out.cover.elements[static_cast<std::size_t>(fam[a])];
          const auto& eb = out.cover.elements[static_cast<std::size_t>(fam[b])];
          m = std::min(m, (ea.center - eb.center).norm() - ea.r_out - eb.r_out);
        }
      }
      out.margins.push_back(m);
    }
    out.rounds = rounds;
    return out;
  };

  int ncolors = 0;
  auto fail = [&](const std::vector<CoverElement>& cur, const std::vector<int>& color) {
    std::string pattern;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (color[i] < allowed) continue;
      pattern += " element " + std::to_string(i) + " meets {";
      for (std::size_t j = 0; j < cur.size(); ++j) {
        if (j != i && detail::supports_meet(cur[i], cur[j])) pattern += " " + std::to_string(j);
      }
      pattern += " }";
    }
    throw Error(ErrorKind::ExceededFamilies, "refinement needs " + std::to_string(ncolors) + " families, allowed " +
                                                 std::to_string(allowed) + " after " + std::to_string(max_rounds) +
                                                 " rounds;" + pattern);
  };

  auto color = detail::color_cover(els, ncolors);
  if (ncolors <= allowed) return finish(els, color, ncolors, 0);
  if (max_rounds < 1) fail(els, color);

  const double pad = sample_mesh(s) * 1.001 + 1e-12;
  // owners[e] = samples owned by element e.
  std::vector<std::vector<std::size_t>> owners(els.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t best = els.size();
    double best_v = 0.0;
    for (std::size_t e = 0; e < els.size(); ++e) {
      const double v = els[e].value(s.points[i]);
      if (v > best_v) {
        best = e;
        best_v = v;
      }
    }
    if (best < els.size()) owners[best].push_back(i);
  }
  auto rebuild = [&](const std::vector<CoverElement>& parents, const std::vector<std::vector<std::size_t>>& own) {
    std::vector<CoverElement> next;
    std::vector<std::vector<std::size_t>> next_own;
    for (std::size_t e = 0; e < parents.size(); ++e) {
      if (own[e].empty()) continue;
      std::vector<Point> pts;
      for (std::size_t i : own[e]) pts.push_back(s.points[i]);
      CoverElement c = detail::fit_ball(parents[e], pts, pad);
      c.parent = parents[e].parent;
      next.push_back(std::move(c));
      next_own.push_back(own[e]);
    }
    return std::pair{next, next_own};
  };

  // Parents keep the original geometry so shrunk balls stay inside W.
  auto [cur, cur_own] = rebuild(els, owners);
  std::vector<CoverElement> cur_parents;
  for (const auto& c : cur) cur_parents.push_back(els[static_cast<std::size_t>(c.parent)]);

  for (int round = 1; round <= max_rounds; ++round) {
    color = detail::color_cover(cur, ncolors);
    if (ncolors <= allowed) return finish(cur, color, ncolors, round);
    std::vector<CoverElement> next, next_parents;
    std::vector<std::vector<std::size_t>> next_own;
    for (std::size_t e = 0; e < cur.size(); ++e) {
      if (color[e] < allowed || cur_own[e].size() < 2) {
        next.push_back(cur[e]);
        next_parents.push_back(cur_parents[e]);
        next_own.push_back(cur_own[e]);
        continue;
      }
      // Split along the principal direction at the median.
      const auto& own = cur_own[e];
      Eigen::MatrixXd pts(static_cast<Eigen::Index>(own.size()), cur[e].center.size());
      for (std::size_t k = 0; k < own.size(); ++k) pts.row(static_cast<Eigen::Index>(k)) = s.points[own[k]].transpose();
      Eigen::RowVectorXd mean = pts.colwise().mean();
      Eigen::MatrixXd centered = pts.rowwise() - mean;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered.transpose() * centered);
      Eigen::VectorXd dir = es.eigenvectors().col(es.eigenvectors().cols() - 1);
      std::vector<std::pair<double, std::size_t>> proj;
      for (std::size_t k = 0; k < own.size(); ++k) proj.emplace_back(centered.row(static_cast<Eigen::Index>(k)).dot(dir), own[k]);
      std::sort(proj.begin(), proj.end());
      const std::size_t half = proj.size() / 2;
      for (int part = 0; part < 2; ++part) {
        std::vector<std::size_t> sub;
        std::vector<Point> pts_sub;
        for (std::size_t k = part == 0 ? 0 : half; k < (part == 0 ? half : proj.size()); ++k) {
          sub.push_back(proj[k].second);
          pts_sub.push_back(s.points[proj[k].second]);
        }
        CoverElement c = detail::fit_ball(cur_parents[e], pts_sub, pad);
        c.parent = cur[e].parent;
        next.push_back(std::move(c));
        next_parents.push_back(cur_parents[e]);
        next_own.push_back(std::move(sub));
      }
    }
    cur = std::move(next);
    cur_parents = std::move(next_parents);
    cur_own = std::move(next_own);
  }
  color = detail::color_cover(cur, ncolors);
  if (ncolors <= allowed) return finish(cur, color, ncolors, max_rounds);

  fail(cur, color);
  return {};
}

/// Families valid: pairwise disjoint supports in each family, every sample
/// covered by some element.
inline bool families_valid(const DisjointFamilies& f, const SampleSet& s) {
  for (double m : f.margins) {
    if (!(m > 0.0)) return false;
  }
  for (const auto& x : s.points) {
    bool hit = false;
    for (const auto& e : f.cover.elements) hit = hit || e.contains(x);
    if (!hit) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Finite atlas

struct AtlasPiece {
  int element = 0;   // index into the refined cover
  int chart = 0;
  Point chart_center;  // phi(center)
  double radius = 0.0;  // declared image radius about the offset
  Point offset;        // translation in R^n
};

/// (V_i, upsilon_i): V_i the disjoint union of a family's balls, upsilon_i the
/// chart of each piece, recentered, padded into R^n and translated.
struct GeneralizedChart {
  int structural_dim = 0;
  std::vector<AtlasPiece> pieces;

  /// Piece holding x, or -1.
  int piece_of(const Cover& c, const Point& x) const {
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (c.elements[static_cast<std::size_t>(pieces[k].element)].contains(x)) return static_cast<int>(k);
    }
    return -1;
  }

  Point apply(const SpacePresentation& p, const AtlasPiece& piece, const Point& x) const {
    Point local = p.charts[static_cast<std::size_t>(piece.chart)].map(x) - piece.chart_center;
    Point out = Point::Zero(structural_dim);
    out.head(local.size()) = local;
    return out + piece.offset;
  }
};

struct FiniteAtlas {
  Cover cover;  // refined cover the pieces index into
  std::vector<GeneralizedChart> charts;
};

inline constexpr double kAtlasRadiusSafety = 1.25;

/// One generalized chart per family. Piece image radii are measured on the
/// samples and inflated by kAtlasRadiusSafety; offsets along the first axis
/// then keep piece images at least one unit apart.
inline FiniteAtlas finite_atlas(const SpacePresentation& p, const DisjointFamilies& fam, const SampleSet& s) {
  const int n = p.structural_dim;
  FiniteAtlas atlas;
  atlas.cover = fam.cover;
  for (const auto& family : fam.families) {
    GeneralizedChart gc;
    gc.structural_dim = n;
    double prev_off = 0.0, prev_r = 0.0;
    bool first = true;
    for (int idx : family) {
      const CoverElement& e = fam.cover.elements[static_cast<std::size_t>(idx)];
      const Chart& ch = p.charts[static_cast<std::size_t>(e.chart)];
      if (ch.target_dim() > n) {
        throw Error(ErrorKind::Invalid, "chart target dimension exceeds the structural dimension");
      }
      AtlasPiece piece;
      piece.element = idx;
      piece.chart = e.chart;
      piece.chart_center = ch.map(e.center);
      double r = 0.0;
      for (const auto& x : s.points) {
        if (e.in_closure(x)) r = std::max(r, (ch.map(x) - piece.chart_center).norm());
      }
      piece.radius = kAtlasRadiusSafety * r + 1e-9;
      piece.offset = Point::Zero(n);
      double off = first ? 0.0 : prev_off + prev_r + 1.0 + piece.radius;
      // Guard the unit gap against rounding in the offset sum.
      while (!first && off - prev_off - prev_r - piece.radius < 1.0) off = std::nextafter(off, HUGE_VAL);
      piece.offset[0] = off;
      prev_off = off;
      prev_r = piece.radius;
      first = false;
      gc.pieces.push_back(std::move(piece));
    }
    atlas.charts.push_back(std::move(gc));
  }
  return atlas;
}

struct AtlasReport {
  std::size_t charts = 0;
  std::vector<double> injectivity_margin;  // per chart, over its samples
  double min_piece_separation = std::numeric_limits<double>::infinity();  // from declared radii
  std::size_t containment_failures = 0;  // sampled images outside declared balls
  std::size_t uncovered = 0;             // samples in no V_i
};

inline AtlasReport check_atlas(const SpacePresentation& p, const FiniteAtlas& a, const SampleSet& s) {
  AtlasReport r;
  r.charts = a.charts.size();
  std::vector<bool> hit(s.size(), false);
  for (const auto& gc : a.charts) {
    std::vector<Point> xs, ys;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int k = gc.piece_of(a.cover, s.points[i]);
      if (k < 0) continue;
      hit[i] = true;
      const auto& piece = gc.pieces[static_cast<std::size_t>(k)];
      Point y = gc.apply(p, piece, s.points[i]);
      if ((y - piece.offset).norm() > piece.radius) ++r.containment_failures;
      xs.push_back(s.points[i]);
      ys.push_back(std::move(y));
    }
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ys.size(); ++i) {
      for (std::size_t j = i + 1; j < ys.size(); ++j) m = std::min(m, (ys[i] - ys[j]).norm());
    }
    r.injectivity_margin.push_back(m);
    for (std::size_t i = 0; i < gc.pieces.size(); ++i) {
      for (std::size_t j = i + 1; j < gc.pieces.size(); ++j) {
        const auto& a_ = gc.pieces[i];
        const auto& b_ = gc.pieces[j];
        r.min_piece_separation =
            std::min(r.min_piece_separation, (a_.offset - b_.offset).norm() - a_.radius - b_.radius);
      }
    }
  }
  for (bool h : hit) r.uncovered += h ? 0 : 1;
  return r;
}

}  // namespace subcart
