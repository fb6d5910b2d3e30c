#pragma once

// Subcartesian spaces presented extrinsically: constraint sets in R^N with
// expression charts, plus deterministic sample sets standing in for S.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subcart/error.hpp"
#include "subcart/expr.hpp"
#include "subcart/rng.hpp"

namespace subcart {

struct Box {
  Point min;
  Point max;

  int dim() const { return static_cast<int>(min.size()); }

  bool contains(const Point& x) const {
    for (int i = 0; i < dim(); ++i) {
      if (x[i] < min[i] || x[i] > max[i]) return false;
    }
    return true;
  }

  /// Largest distance from `p` to a corner of the box.
  double max_distance_from(const Point& p) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) {
      const double d = std::max(std::abs(min[i] - p[i]), std::abs(max[i] - p[i]));
      s += d * d;
    }
    return std::sqrt(s);
  }
};

struct Tolerances {
  double tol_eq = 1e-9;
  double tol_ineq = 1e-9;
  double rank_tol = 1e-8;
};

/// A local chart: U = {x in S : d_k(x) > 0 for all k}, map phi: R^N -> R^n_i.
struct Chart {
  std::vector<SmoothExpr> domain;
  ExprVec map;
  std::optional<ExprVec> inverse;

  int target_dim() const { return map.target_dim(); }

  bool contains(const Point& x) const {
    for (const auto& d : domain) {
      if (!(d(x) > 0.0)) return false;
    }
    return true;
  }

  /// min_k d_k(x); +inf for an unrestricted domain.
  double domain_margin(const Point& x) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& d : domain) m = std::min(m, d(x));
    return m;
  }
};

/// Strict-inequality domains shared by charts, trivializations and field supports.
inline bool in_domain(const std::vector<SmoothExpr>& domain, const Point& x) {
  for (const auto& d : domain) {
    if (!(d(x) > 0.0)) return false;
  }
  return true;
}

enum class SampleKind { Grid, Explicit, Parametric, Segments, Rejection };

struct Segment {
  Point from;
  Point to;
  std::size_t count = 2;
};

/// How the fixture wants its sample set built.
struct SampleSpec {
  SampleKind kind = SampleKind::Grid;
  // Grid: either `step` (per axis, one value broadcasts) or `count` per axis.
  std::vector<double> step;
  std::vector<std::size_t> count;
  bool cell_centered = false;
  // Explicit
  std::vector<Point> points;
  // Parametric: grid over [param_min, param_max] pushed through a chart inverse.
  int chart = 0;
  Point param_min;
  Point param_max;
  bool endpoint = true;
  // Segments
  std::vector<Segment> segments;
  // Rejection: number of uniform draws in the working region.
  std::size_t draws = 0;
};

struct SampleConfig {
  std::optional<std::size_t> count_override;
  std::size_t min_count = 1;
  double dedupe_eps = 1e-9;
};

/// Default cover geometry a fixture can suggest.
struct CoverHints {
  double radius = 0.0;  // 0: derive from the working region
  double ratio_v = 1.2;
  double ratio_w = 1.5;
  double plateau = 0.5;
};

struct SpacePresentation {
  std::string name;
  int ambient_dim = 1;
  int structural_dim = 1;
  std::vector<SmoothExpr> equalities;    // g_i = 0 on S
  std::vector<SmoothExpr> inequalities;  // h_j >= 0 on S
  std::vector<Chart> charts;
  Box working_region;
  Tolerances tolerances;
  Point base_point;
  bool manifold = false;
  SampleSpec samples;
  CoverHints cover;
};

struct SampleSet {
  std::vector<Point> points;
  std::vector<std::vector<bool>> in_chart;  // [point][chart]
  double min_distance = std::numeric_limits<double>::infinity();

  std::size_t size() const { return points.size(); }
};

/// Structural checks that need no samples.
inline void check_presentation(const SpacePresentation& p) {
  const int n = p.ambient_dim;
  if (n < 1) throw Error(ErrorKind::Invalid, "ambient_dim must be positive");
  if (p.structural_dim < 0) throw Error(ErrorKind::Invalid, "structural_dim must be nonnegative");
  if (p.working_region.min.size() != n || p.working_region.max.size() != n) {
    throw Error(ErrorKind::Invalid, "working_region bounds must have ambient_dim entries");
  }
  for (int i = 0; i < n; ++i) {
    if (!(p.working_region.min[i] < p.working_region.max[i])) {
      throw Error(ErrorKind::Invalid, "working_region must have positive volume");
    }
  }
  if (p.base_point.size() != n) throw Error(ErrorKind::Invalid, "base_point has wrong dimension");
  auto check_dim = [&](const SmoothExpr& e, const char* what) {
    if (e.ambient_dim() != n) throw Error(ErrorKind::Invalid, std::string(what) + " has wrong ambient dimension");
  };
  for (const auto& g : p.equalities) check_dim(g, "equality");
  for (const auto& h : p.inequalities) check_dim(h, "inequality");
  if (p.charts.empty()) throw Error(ErrorKind::Invalid, "presentation declares no charts");
  for (std::size_t c = 0; c < p.charts.size(); ++c) {
    const Chart& ch = p.charts[c];
    const std::string tag = "chart " + std::to_string(c);
    for (const auto& d : ch.domain) check_dim(d, "chart domain");
    if (ch.map.ambient_dim() != n) throw Error(ErrorKind::Invalid, tag + " map has wrong arity");
    if (ch.target_dim() < 1 || ch.target_dim() > n) {
      throw Error(ErrorKind::Invalid, tag + " target_dim must lie in [1, ambient_dim]");
    }
    if (ch.inverse) {
      if (ch.inverse->ambient_dim() != ch.target_dim() || ch.inverse->target_dim() != n) {
        throw Error(ErrorKind::Invalid, tag + " inverse must map R^target_dim to R^ambient_dim");
      }
    }
  }
}

/// x in S up to the presentation's tolerances.
inline bool membership(const SpacePresentation& p, const Point& x) {
  for (const auto& g : p.equalities) {
    if (!(std::abs(g(x)) <= p.tolerances.tol_eq)) return false;
  }
  for (const auto& h : p.inequalities) {
    if (!(h(x) >= -p.tolerances.tol_ineq)) return false;
  }
  return true;
}

namespace detail {

// Snap grid coordinates so decimal grids hit values such as 0 exactly.
inline double snap(double v) {
  const double q = std::round(v * 1e12) / 1e12;
  return std::abs(q - v) < 1e-11 ? q : v;
}

inline std::vector<double> axis_values(double lo, double hi, std::size_t count, bool endpoint,
                                       bool centered) {
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) {
    out.push_back(snap(centered ? 0.5 * (lo + hi) : lo));
    return out;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < count; ++i) {
    double t;
    if (centered) {
      t = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    } else if (endpoint) {
      t = static_cast<double>(i) / static_cast<double>(count - 1);
    } else {
      t = static_cast<double>(i) / static_cast<double>(count);
    }
    out.push_back(snap(lo + span * t));
  }
  return out;
}

inline std::size_t grid_count(double lo, double hi, double step) {
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

template <class F>
void for_each_grid_point(const std::vector<std::vector<double>>& axes, F&& f) {
  const std::size_t d = axes.size();
  for (const auto& a : axes) {
    if (a.empty()) return;
  }
  std::vector<std::size_t> idx(d, 0);
  Point x(static_cast<Eigen::Index>(d));
  for (;;) {
    for (std::size_t i = 0; i < d; ++i) x[static_cast<Eigen::Index>(i)] = axes[i][idx[i]];
    f(x);
    std::size_t k = 0;
    while (k < d && ++idx[k] == axes[k].size()) idx[k++] = 0;
    if (k == d) return;
  }
}

inline std::size_t per_axis(std::size_t total, std::size_t dims) {
  if (dims <= 1) return total;
  return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(total), 1.0 / static_cast<double>(dims))));
}

}  // namespace detail

inline double min_pairwise_distance(const std::vector<Point>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, (pts[i] - pts[j]).norm());
  }
  return best;
}

/// Build a SampleSet from explicit points: keeps members, drops near-duplicates.
inline SampleSet make_sample_set(const SpacePresentation& p, const std::vector<Point>& candidates,
                                 double dedupe_eps = 1e-9) {
  SampleSet s;
  for (const auto& x : candidates) {
    if (x.size() != p.ambient_dim) throw Error(ErrorKind::Invalid, "sample point has wrong dimension");
    if (!membership(p, x)) continue;
    bool dup = false;
    for (const auto& y : s.points) {
      if ((x - y).norm() <= dedupe_eps) {
        dup = true;
        break;
      }
    }
    if (!dup) s.points.push_back(x);
  }
  for (const auto& x : s.points) {
    std::vector<bool> mask;
    for (const auto& ch : p.charts) mask.push_back(ch.contains(x));
    s.in_chart.push_back(std::move(mask));
  }
  s.min_distance = min_pairwise_distance(s.points);
  return s;
}

/// Deterministic sample set for fixed (spec, config, seed).
inline SampleSet sample(const SpacePresentation& p, const SampleConfig& config, std::uint64_t seed) {
  const SampleSpec& spec = p.samples;
  const int n = p.ambient_dim;
  std::vector<Point> candidates;
  switch (spec.kind) {
    case SampleKind::Grid: {
      std::vector<std::vector<double>> axes;
      for (int i = 0; i < n; ++i) {
        const double lo = p.working_region.min[i], hi = p.working_region.max[i];
        std::size_t count;
        if (config.count_override) {
          count = detail::per_axis(*config.count_override, static_cast<std::size_t>(n));
        } else if (!spec.count.empty()) {
          count = spec.count[spec.count.size() == 1 ? 0 : static_cast<std::size_t>(i)];
        } else if (!spec.step.empty()) {
          const double step = spec.step[spec.step.size() == 1 ? 0 : static_cast<std::size_t>(i)];
          if (!(step > 0.0)) throw Error(ErrorKind::Invalid, "grid step must be positive");
          count = spec.cell_centered ? static_cast<std::size_t>(std::round((hi - lo) / step))
                                     : detail::grid_count(lo, hi, step);
          if (!spec.cell_centered) {
            // Walk by step from lo so e.g. [0, 20] with 0.1 gives 201 points.
            std::vector<double> vals;
            for (std::size_t k = 0; k < count; ++k) vals.push_back(detail::snap(lo + static_cast<double>(k) * step));
            axes.push_back(std::move(vals));
            continue;
          }
        } else {
          throw Error(ErrorKind::Invalid, "grid sampler needs a step or a count");
        }
        axes.push_back(detail::axis_values(lo, hi, count, true, spec.cell_centered));
      }
      detail::for_each_grid_point(axes, [&](const Point& x) { candidates.push_back(x); });
      break;
    }
    case SampleKind::Explicit:
      candidates = spec.points;
      break;
    case SampleKind::Parametric: {
      if (spec.chart < 0 || spec.chart >= static_cast<int>(p.charts.size()) ||
          !p.charts[static_cast<std::size_t>(spec.chart)].inverse) {
        throw Error(ErrorKind::Invalid, "parametric sampler needs a chart with an inverse");
      }
      const ExprVec& inv = *p.charts[static_cast<std::size_t>(spec.chart)].inverse;
      const int d = inv.ambient_dim();
      if (spec.param_min.size() != d || spec.param_max.size() != d) {
        throw Error(ErrorKind::Invalid, "parametric range has wrong dimension");
      }
      std::vector<std::vector<double>> axes;
      for (int i = 0; i < d; ++i) {
        std::size_t count = config.count_override ? detail::per_axis(*config.count_override, static_cast<std::size_t>(d))
                            : spec.count.empty() ? 0
                                                 : spec.count[spec.count.size() == 1 ? 0 : static_cast<std::size_t>(i)];
        axes.push_back(detail::axis_values(spec.param_min[i], spec.param_max[i], count, spec.endpoint, false));
      }
      detail::for_each_grid_point(axes, [&](const Point& t) { candidates.push_back(inv(t)); });
      break;
    }
    case SampleKind::Segments: {
      double total_len = 0.0;
      for (const auto& s : spec.segments) total_len += (s.to - s.from).norm();
      for (const auto& s : spec.segments) {
        std::size_t count = s.count;
        if (config.count_override && total_len > 0.0) {
          count = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(
                                               static_cast<double>(*config.count_override) *
                                               (s.to - s.from).norm() / total_len)) + 1);
        }
        for (double t : detail::axis_values(0.0, 1.0, count, true, false)) {
          Point x = s.from + t * (s.to - s.from);
          for (int i = 0; i < n; ++i) x[i] = detail::snap(x[i]);
          candidates.push_back(x);
        }
      }
      break;
    }
    case SampleKind::Rejection: {
      const std::size_t draws = config.count_override ? *config.count_override : spec.draws;
      Stream rng(seed, 0x5a4d);
      for (std::size_t k = 0; k < draws; ++k) {
        Point x(n);
        for (int i = 0; i < n; ++i) x[i] = rng.uniform(p.working_region.min[i], p.working_region.max[i]);
        candidates.push_back(x);
      }
      break;
    }
  }
  std::vector<Point> inside;
  for (auto& x : candidates) {
    if (p.working_region.contains(x)) inside.push_back(std::move(x));
  }
  SampleSet s = make_sample_set(p, inside, config.dedupe_eps);
  if (s.size() < config.min_count) {
    throw Error(ErrorKind::Invalid, "sampler produced " + std::to_string(s.size()) + " points, fewer than the required " +
                                        std::to_string(config.min_count) +
                                        "; supply explicit samples or a parametric sampler per chart");
  }
  return s;
}

struct ChartCheck {
  std::size_t samples_in_domain = 0;
  double injectivity_margin = std::numeric_limits<double>::infinity();  // min |phi(p) - phi(q)|
  double injectivity_ratio = std::numeric_limits<double>::infinity();   // min |phi(p)-phi(q)| / |p-q|
  double round_trip_error = 0.0;                                        // max |inv(phi(x)) - x|
  bool has_inverse = false;
  bool injective = true;
  bool round_trip_ok = true;
};

struct ChartReport {
  std::vector<ChartCheck> charts;
  double coverage = 0.0;
  std::vector<std::size_t> uncovered;
  bool passed = true;
};

inline constexpr double kRoundTripTol = 1e-8;
inline constexpr double kInjectivityFloor = 1e-12;

inline ChartReport validate_charts(const SpacePresentation& p, const SampleSet& samples) {
  ChartReport r;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    bool any = false;
    for (std::size_t c = 0; c < p.charts.size(); ++c) any = any || samples.in_chart[i][c];
    if (any) {
      ++covered;
    } else {
      r.uncovered.push_back(i);
    }
  }
  r.coverage = samples.size() == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(samples.size());
  for (std::size_t c = 0; c < p.charts.size(); ++c) {
    const Chart& ch = p.charts[c];
    ChartCheck cc;
    cc.has_inverse = ch.inverse.has_value();
    std::vector<Point> xs, images;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!samples.in_chart[i][c]) continue;
      xs.push_back(samples.points[i]);
      images.push_back(ch.map(samples.points[i]));
      if (ch.inverse) {
        cc.round_trip_error = std::max(cc.round_trip_error, ((*ch.inverse)(images.back()) - xs.back()).norm());
      }
    }
    cc.samples_in_domain = xs.size();
    for (std::size_t a = 0; a < xs.size(); ++a) {
      for (std::size_t b = a + 1; b < xs.size(); ++b) {
        const double img = (images[a] - images[b]).norm();
        cc.injectivity_margin = std::min(cc.injectivity_margin, img);
        cc.injectivity_ratio = std::min(cc.injectivity_ratio, img / (xs[a] - xs[b]).norm());
      }
    }
    cc.injective = cc.injectivity_margin > kInjectivityFloor;
    cc.round_trip_ok = cc.round_trip_error <= kRoundTripTol;
    r.passed = r.passed && cc.injective && cc.round_trip_ok;
    r.charts.push_back(cc);
  }
  r.passed = r.passed && r.coverage == 1.0;
  return r;
}

}  // namespace subcart
