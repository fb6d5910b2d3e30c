#pragma once

// Whitney-style proper embedding: Phi = (u, 0, ..., 0), immersion
// perturbations chart by chart, injectivity perturbations over the
// partition of unity, and sample certificates for the result.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "subcart/cover.hpp"
#include "subcart/error.hpp"
#include "subcart/expr.hpp"
#include "subcart/linalg.hpp"
#include "subcart/partition.hpp"
#include "subcart/rng.hpp"
#include "subcart/space.hpp"

namespace subcart {

/// Orthonormal basis (columns) of the kernel of the equality-constraint
/// Jacobian at x; the identity when there are no equalities.
inline Matrix tangent_space(const SpacePresentation& p, const Point& x, double rank_tol) {
  const int n = p.ambient_dim;
  Matrix jac(static_cast<Eigen::Index>(p.equalities.size()), n);
  for (std::size_t i = 0; i < p.equalities.size(); ++i) jac.row(static_cast<Eigen::Index>(i)) = p.equalities[i].gradient(x);
  return null_space(jac, n, rank_tol);
}

enum class PerturbationKind { Immersion, Injectivity };

inline const char* to_string(PerturbationKind k) {
  return k == PerturbationKind::Immersion ? "immersion-matrix" : "injectivity-vector";
}

struct PerturbationRecord {
  int stage = 0;  // 1-based within its kind
  PerturbationKind kind = PerturbationKind::Immersion;
  Matrix matrix;  // A_k, m x n_k
  Point vector;   // y_k
  int element = 0;
  int chart = 0;
  double magnitude = 0.0;  // entry bound eps_k, or ball radius for y_k
  double stage_bound = 0.0;  // declared sup bound of this stage's change
  int retries = 0;           // rejected draws before the accepted one
};

struct EmbedConfig {
  std::optional<int> m;
  double delta = 1.0;
  std::uint64_t seed = 0;
  int retries = 32;
  double sigma_floor = 1e-6;
  double margin_factor = 1e-3;  // y_k keeps margin_factor * radius_k from every theta
  double theta_tol = 1e-12;     // pairs with |rho(p) - rho(q)| above this enter D_k
  double rank_tol = 1e-8;
  std::optional<RadiusParams> radius;
};

/// Per-sample state carried through the stages: current values and the
/// Jacobian restricted to the tangent space.
struct EmbedState {
  std::vector<Point> values;
  std::vector<Matrix> jac;      // m x d_i
  std::vector<Matrix> tangent;  // N x d_i
  std::vector<bool> checked;    // sample already in some cl(U_i)
};

inline EmbedState initial_state(const ExprVec& phi, const SpacePresentation& p, const SampleSet& s, double rank_tol) {
  EmbedState st;
  for (const auto& x : s.points) {
    auto [v, j] = phi.value_and_jacobian(x);
    Matrix t = tangent_space(p, x, rank_tol);
    st.values.push_back(v);
    st.jac.push_back(j * t);
    st.tangent.push_back(std::move(t));
  }
  st.checked.assign(s.size(), false);
  return st;
}

namespace detail {

inline double min_sigma(const Matrix& j) { return j.cols() == 0 ? std::numeric_limits<double>::infinity() : min_singular_value(j); }

// Centered chart map phi(x) - phi(c).
inline ExprVec centered_chart(const Chart& ch, const Point& c) {
  const Point at = ch.map(c);
  std::vector<SmoothExpr> comps;
  for (int i = 0; i < ch.target_dim(); ++i) comps.push_back(ch.map[i] - at[i]);
  return {ch.map.ambient_dim(), std::move(comps)};
}

inline SmoothExpr plateau_bump(const CoverElement& e) {
  return make_bump(static_cast<int>(e.center.size()), e.center, e.r_out, e.r_v);
}

}  // namespace detail

/// One immersion stage: Phi_{k+1} = Phi_k + chi_k A_k (phi_k - phi_k(c_k))
/// with chi_k = 1 on cl(U_k), 0 outside V_k. Draws A_k with entries uniform
/// on (-eps, eps), eps chosen so the stage moves Phi by less than
/// `stage_bound`, and accepts the first draw whose restricted Jacobian has
/// min singular value >= sigma_floor on every sample of cl(U_1..U_k).
inline PerturbationRecord immersion_step(EmbedState& st, const SampleSet& s, const CoverElement& e, int element,
                                         const Chart& chart, int chart_index, double stage_bound, int stage,
                                         const EmbedConfig& cfg) {
  const int m = static_cast<int>(st.values.front().size());
  const int nk = chart.target_dim();
  const SmoothExpr chi = detail::plateau_bump(e);
  const ExprVec phi = detail::centered_chart(chart, e.center);

  std::vector<std::size_t> touched;
  std::vector<Point> shift;  // chi * phi~ at touched samples
  std::vector<Matrix> dterm;  // (phi~ grad chi^T + chi J phi) T, n_k x d
  double r_phi = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Point& x = s.points[i];
    const double d = (x - e.center).norm();
    if (d >= e.r_v) continue;
    const double c = chi(x);
    const Eigen::RowVectorXd gc = chi.gradient(x);
    auto [v, jv] = phi.value_and_jacobian(x);
    r_phi = std::max(r_phi, v.norm());
    touched.push_back(i);
    shift.push_back(c * v);
    dterm.push_back((v * gc + c * jv) * st.tangent[i]);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((s.points[i] - e.center).norm() <= e.r_out) st.checked[i] = true;
  }
  const double eps = stage_bound / (std::sqrt(static_cast<double>(m * nk)) * 1.5 * std::max(r_phi, 1e-12));

  std::vector<std::size_t> slot(s.size(), touched.size());
  for (std::size_t t = 0; t < touched.size(); ++t) slot[touched[t]] = t;

  for (int r = 0; r < cfg.retries; ++r) {
    Stream rng(cfg.seed, static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(r));
    Matrix a(m, nk);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < nk; ++j) a(i, j) = rng.uniform(-eps, eps);
    }
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!st.checked[i]) continue;
      const std::size_t t = slot[i];
      const double sigma = t < touched.size() ? detail::min_sigma(st.jac[i] + a * dterm[t]) : detail::min_sigma(st.jac[i]);
      ok = sigma >= cfg.sigma_floor;
    }
    if (!ok) continue;
    for (std::size_t t = 0; t < touched.size(); ++t) {
      st.values[touched[t]] += a * shift[t];
      st.jac[touched[t]] += a * dterm[t];
    }
    PerturbationRecord rec;
    rec.stage = stage;
    rec.kind = PerturbationKind::Immersion;
    rec.matrix = a;
    rec.element = element;
    rec.chart = chart_index;
    rec.magnitude = eps;
    rec.stage_bound = stage_bound;
    rec.retries = r;
    return rec;
  }
  throw Error(ErrorKind::MaxRetriesExceeded, "immersion stage " + std::to_string(stage) + " found no admissible A in " +
                                                 std::to_string(cfg.retries) + " draws");
}

/// theta_k(p, q) = (Psi(p) - Psi(q)) / (rho(p) - rho(q)).
inline Point theta(const Point& psi_p, const Point& psi_q, double rho_p, double rho_q) {
  return (psi_p - psi_q) / (rho_p - rho_q);
}

/// One injectivity stage: Psi_k = Psi_{k-1} + rho_k y_k with |y_k| < radius.
/// A collision Psi_k(p) = Psi_k(q) with rho_k(p) != rho_k(q) forces
/// y_k = -theta_k(p, q); draws within margin of either +theta or -theta over
/// sampled pairs, or that break the immersion floor, are rejected.
inline PerturbationRecord injectivity_step(EmbedState& st, const SampleSet& s, const SmoothExpr& rho, int element,
                                           double radius, int stage, const EmbedConfig& cfg) {
  const int m = static_cast<int>(st.values.front().size());
  const double margin = cfg.margin_factor * radius;
  std::vector<double> r(s.size());
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < s.size(); ++i) {
    r[i] = rho(s.points[i]);
    if (r[i] != 0.0) active.push_back(i);
  }
  // Only thetas within radius + margin of the origin can be hit.
  std::vector<Point> near;
  const double reach = radius + margin;
  std::vector<bool> is_active(s.size(), false);
  for (std::size_t i : active) is_active[i] = true;
  for (std::size_t i : active) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (is_active[j] && j <= i) continue;
      const double dr = r[i] - r[j];
      if (std::abs(dr) <= cfg.theta_tol) continue;
      const Point diff = st.values[i] - st.values[j];
      if (diff.norm() <= reach * std::abs(dr)) near.push_back(theta(st.values[i], st.values[j], r[i], r[j]));
    }
  }
  std::vector<std::size_t> touched;
  std::vector<Eigen::RowVectorXd> grads;  // grad rho restricted to the tangent space
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Eigen::RowVectorXd g = rho.gradient(s.points[i]);
    if (g.norm() == 0.0) continue;
    touched.push_back(i);
    grads.push_back(g * st.tangent[i]);
  }

  for (int t = 0; t < cfg.retries; ++t) {
    Stream rng(cfg.seed, 0x100000ULL + static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(t));
    Point y(m);
    do {
      for (int i = 0; i < m; ++i) y[i] = rng.uniform(-radius, radius);
    } while (!(y.norm() < radius));
    bool ok = true;
    for (const auto& th : near) {
      if ((y - th).norm() < margin || (y + th).norm() < margin) {
        ok = false;
        break;
      }
    }
    for (std::size_t k = 0; k < touched.size() && ok; ++k) {
      ok = detail::min_sigma(st.jac[touched[k]] + y * grads[k]) >= cfg.sigma_floor;
    }
    if (!ok) continue;
    for (std::size_t i : active) st.values[i] += r[i] * y;
    for (std::size_t k = 0; k < touched.size(); ++k) st.jac[touched[k]] += y * grads[k];
    PerturbationRecord rec;
    rec.stage = stage;
    rec.kind = PerturbationKind::Injectivity;
    rec.vector = y;
    rec.element = element;
    rec.magnitude = radius;
    rec.stage_bound = radius;
    rec.retries = t;
    return rec;
  }
  throw Error(ErrorKind::MaxRetriesExceeded, "injectivity stage " + std::to_string(stage) + " found no admissible y in " +
                                                 std::to_string(cfg.retries) + " draws");
}

struct EmbeddingDiagnostics {
  double max_deviation = 0.0;          // max |Psi - Phi|
  double min_separation_ratio = 0.0;   // min |Psi(p) - Psi(q)| / |p - q|
  double min_tangent_singular_value = 0.0;
  double max_first_coordinate_gap = 0.0;  // max |Psi_1 - u|
  std::vector<std::pair<double, double>> properness_profile;  // (a, radius about base of {Psi_1 <= a})
};

struct EmbeddingResult {
  int m = 0;
  double delta = 1.0;
  ExprVec psi;
  ExprVec phi;
  SmoothExpr u;
  Cover cover;
  PartitionOfUnity pou;
  std::vector<Chart> charts;
  std::vector<PerturbationRecord> records;
  EmbeddingDiagnostics diagnostics;
};

/// Psi rebuilt from the records: Phi plus the first `immersion` immersion
/// terms and the first `injectivity` injectivity terms (-1 = all).
inline ExprVec assemble(const EmbeddingResult& r, int immersion = -1, int injectivity = -1) {
  const int dim = r.phi.ambient_dim();
  std::vector<std::vector<SmoothExpr>> terms(static_cast<std::size_t>(r.m));
  for (int i = 0; i < r.m; ++i) terms[static_cast<std::size_t>(i)].push_back(r.phi[i]);
  for (const auto& rec : r.records) {
    if (rec.kind == PerturbationKind::Immersion) {
      if (immersion >= 0 && rec.stage > immersion) continue;
      const CoverElement& e = r.cover.elements[static_cast<std::size_t>(rec.element)];
      const SmoothExpr chi = detail::plateau_bump(e);
      const ExprVec phi = detail::centered_chart(r.charts[static_cast<std::size_t>(rec.chart)], e.center);
      for (int i = 0; i < r.m; ++i) {
        std::vector<SmoothExpr> lin;
        for (int j = 0; j < phi.target_dim(); ++j) lin.push_back(rec.matrix(i, j) * phi[j]);
        terms[static_cast<std::size_t>(i)].push_back(mask(chi, chi * sum(lin, dim)));
      }
    } else {
      if (injectivity >= 0 && rec.stage > injectivity) continue;
      const SmoothExpr& rho = r.pou[static_cast<std::size_t>(rec.element)];
      for (int i = 0; i < r.m; ++i) terms[static_cast<std::size_t>(i)].push_back(rec.vector[i] * rho);
    }
  }
  std::vector<SmoothExpr> comps;
  for (auto& t : terms) comps.push_back(sum(t, dim));
  return {dim, std::move(comps)};
}

/// Certificates of Psi on the sample set, computed from the assembled map.
inline EmbeddingDiagnostics embedding_diagnostics(const EmbeddingResult& r, const SpacePresentation& p,
                                                  const SampleSet& s, double rank_tol) {
  EmbeddingDiagnostics d;
  std::vector<Point> psi, phi;
  std::vector<double> u;
  d.min_tangent_singular_value = std::numeric_limits<double>::infinity();
  for (const auto& x : s.points) {
    auto [v, j] = r.psi.value_and_jacobian(x);
    const Point f = r.phi(x);
    const double ux = r.u(x);
    d.max_deviation = std::max(d.max_deviation, (v - f).norm());
    d.max_first_coordinate_gap = std::max(d.max_first_coordinate_gap, std::abs(v[0] - ux));
    d.min_tangent_singular_value =
        std::min(d.min_tangent_singular_value, detail::min_sigma(j * tangent_space(p, x, rank_tol)));
    psi.push_back(v);
    u.push_back(ux);
  }
  d.min_separation_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t k = i + 1; k < s.size(); ++k) {
      d.min_separation_ratio =
          std::min(d.min_separation_ratio, (psi[i] - psi[k]).norm() / (s.points[i] - s.points[k]).norm());
    }
  }
  double top = 0.0;
  for (const auto& v : psi) top = std::max(top, v[0]);
  for (int a = 1; a <= static_cast<int>(std::ceil(top)); ++a) {
    double radius = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (psi[i][0] <= a) radius = std::max(radius, (s.points[i] - p.base_point).norm());
    }
    d.properness_profile.emplace_back(a, radius);
  }
  return d;
}

/// Proper embedding S -> R^m (m >= 2n+1, default 2n+1). Immersion stages use
/// half of delta (stage k moves Phi by less than delta / 2^(k+1)), injectivity
/// stages the other half (|y_k| < delta / 2^(k+1)), so |Psi - Phi| < delta.
inline EmbeddingResult proper_embedding(const SpacePresentation& p, const SampleSet& s, const EmbedConfig& cfg) {
  const int n = p.structural_dim;
  const int m = cfg.m.value_or(2 * n + 1);
  if (m < 2 * n + 1) {
    throw Error(ErrorKind::Invalid, "embedding dimension m = " + std::to_string(m) + " is below 2n+1 = " +
                                        std::to_string(2 * n + 1));
  }
  if (!(cfg.delta > 0.0)) throw Error(ErrorKind::Invalid, "delta must be positive");
  if (s.size() == 0) throw Error(ErrorKind::Invalid, "embedding needs samples");
  const int dim = p.ambient_dim;

  EmbeddingResult r;
  r.m = m;
  r.delta = cfg.delta;
  r.charts = p.charts;
  r.cover = triple_cover(p, s, cfg.radius.value_or(radius_params(p)));
  r.pou = partition_of_unity(r.cover, s);
  r.u = exhaustion_function(r.pou);
  std::vector<SmoothExpr> phi{r.u};
  for (int i = 1; i < m; ++i) phi.push_back(SmoothExpr::constant(dim, 0.0));
  r.phi = ExprVec(dim, std::move(phi));

  EmbedState st = initial_state(r.phi, p, s, cfg.rank_tol);
  const int K = static_cast<int>(r.cover.size());
  for (int k = 0; k < K; ++k) {
    const CoverElement& e = r.cover.elements[static_cast<std::size_t>(k)];
    const double bound = cfg.delta / std::pow(2.0, k + 2);
    r.records.push_back(
        immersion_step(st, s, e, k, p.charts[static_cast<std::size_t>(e.chart)], e.chart, bound, k + 1, cfg));
  }
  for (int j = 0; j < K; ++j) {
    const double radius = cfg.delta / std::pow(2.0, j + 2);
    r.records.push_back(injectivity_step(st, s, r.pou[static_cast<std::size_t>(j)], j, radius, j + 1, cfg));
  }
  r.psi = assemble(r);
  r.diagnostics = embedding_diagnostics(r, p, s, cfg.rank_tol);
  return r;
}

struct WhitneyReport {
  bool passed = false;
  int m = 0;
  EmbeddingDiagnostics diagnostics;
  std::string failure;
};

/// Manifold corollary: a proper smooth embedding in R^(2n+1), certified on
/// samples. Rejects presentations not flagged as manifolds.
inline WhitneyReport whitney_check(const SpacePresentation& p, const SampleSet& s, EmbedConfig cfg) {
  if (!p.manifold) throw Error(ErrorKind::Invalid, "presentation '" + p.name + "' is not flagged as a manifold");
  for (const auto& ch : p.charts) {
    if (ch.target_dim() != p.structural_dim || !ch.inverse) {
      throw Error(ErrorKind::Invalid, "manifold charts must all map onto R^n and carry inverses");
    }
  }
  cfg.m = 2 * p.structural_dim + 1;
  const auto r = proper_embedding(p, s, cfg);
  WhitneyReport w;
  w.m = r.m;
  w.diagnostics = r.diagnostics;
  const auto& d = r.diagnostics;
  if (!(d.max_deviation < cfg.delta)) w.failure = "deviation";
  else if (!(d.min_separation_ratio > 1e-6)) w.failure = "injectivity";
  else if (!(d.min_tangent_singular_value > 1e-6)) w.failure = "immersion";
  w.passed = w.failure.empty();
  return w;
}

/// Point cloud: header x1..xN,psi1..psim, one row per sample.
inline void write_point_cloud(std::ostream& out, const SampleSet& s, const ExprVec& psi) {
  const int n = psi.ambient_dim();
  for (int i = 0; i < n; ++i) out << (i ? "," : "") << "x" << i + 1;
  for (int i = 0; i < psi.target_dim(); ++i) out << ",psi" << i + 1;
  out << "\n";
  out.precision(17);
  for (const auto& x : s.points) {
    const Point v = psi(x);
    for (int i = 0; i < n; ++i) out << (i ? "," : "") << x[i];
    for (int i = 0; i < v.size(); ++i) out << "," << v[i];
    out << "\n";
  }
}

}  // namespace subcart
