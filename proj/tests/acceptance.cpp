// Acceptance suite: one PASS/FAIL line per criterion. Quantities are
// recomputed here with independent code (eigenvalue ranks, LU kernels,
// least squares, direct distance tests) rather than read off library reports.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "subcart/subcart.hpp"

using namespace subcart;

namespace {

std::string fixture(const std::string& name) { return std::string(SUBCART_FIXTURES) + "/" + name; }

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

int failures = 0;

void report(int n, const std::string& title, const Verdict& v, const std::string& summary) {
  std::printf("%s  criterion %2d  %s: %s%s%s\n", v.ok ? "PASS" : "FAIL", n, title.c_str(), summary.c_str(),
              v.detail.empty() ? "" : " | ", v.detail.c_str());
  std::fflush(stdout);
  if (!v.ok) ++failures;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Rank from the eigenvalues of A^T A: singular values are their square roots.
int oracle_rank(const Matrix& a, double tol) {
  if (a.size() == 0) return 0;
  const Matrix g = a.cols() <= a.rows() ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  int r = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (std::sqrt(std::max(0.0, es.eigenvalues()[i])) > tol) ++r;
  }
  return r;
}

double oracle_min_sigma(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const Matrix g = a.cols() <= a.rows() ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  return std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
}

// Tangent basis as the kernel of the constraint differential, by LU.
Matrix oracle_tangent(const SpacePresentation& p, const Point& x) {
  const int n = p.ambient_dim;
  if (p.equalities.empty()) return Matrix::Identity(n, n);
  Matrix d(static_cast<Eigen::Index>(p.equalities.size()), n);
  for (std::size_t i = 0; i < p.equalities.size(); ++i) d.row(static_cast<Eigen::Index>(i)) = p.equalities[i].gradient(x);
  if (d.cwiseAbs().maxCoeff() <= p.tolerances.rank_tol) return Matrix::Identity(n, n);
  Eigen::FullPivLU<Matrix> lu(d);
  lu.setThreshold(1e-10);
  Matrix k = lu.kernel();
  Eigen::HouseholderQR<Matrix> qr(k);
  return qr.householderQ() * Matrix::Identity(n, k.cols());
}

// Least-squares distance from v to the column span of a.
double oracle_membership(const Matrix& a, const Eigen::VectorXd& v) {
  if (a.cols() == 0) return v.norm();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  cod.setThreshold(1e-10);
  return (a * cod.solve(v) - v).norm();
}

SampleSet samples_with(const SpacePresentation& p, std::optional<std::size_t> count = std::nullopt) {
  SampleConfig c;
  c.count_override = count;
  return sample(p, c, 1);
}

struct SpaceCase {
  std::string file;
  SpacePresentation p;
};

std::vector<SpaceCase> space_fixtures() {
  std::vector<SpaceCase> out;
  for (const char* f : {"interval.json", "open_interval.json", "half_line.json", "circle.json", "cross.json"}) {
    out.push_back({f, load_presentation_file(fixture(f))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// 1. gradients

struct GradCase {
  std::string name;
  SmoothExpr expr;
  Box box;
  std::vector<SmoothExpr> domain;
};

Box cube(int dim, double r) {
  return Box{Point::Constant(dim, -r), Point::Constant(dim, r)};
}

void add_space_exprs(std::vector<GradCase>& out, const std::string& tag, const SpacePresentation& p) {
  const Box& b = p.working_region;
  for (const auto& g : p.equalities) out.push_back({tag + " equality", g, b, {}});
  for (const auto& g : p.inequalities) out.push_back({tag + " inequality", g, b, {}});
  for (const auto& ch : p.charts) {
    for (const auto& d : ch.domain) out.push_back({tag + " chart domain", d, b, {}});
    for (const auto& c : ch.map.components()) out.push_back({tag + " chart map", c, b, ch.domain});
    if (ch.inverse) {
      for (const auto& c : ch.inverse->components()) out.push_back({tag + " chart inverse", c, cube(ch.target_dim(), 3.0), {}});
    }
  }
}

void criterion_gradients() {
  std::vector<GradCase> cases;
  for (const auto& sc : space_fixtures()) add_space_exprs(cases, sc.file, sc.p);
  add_space_exprs(cases, "line.json", load_presentation_file(fixture("line.json")));
  for (const char* f : {"mobius.bundle.json", "mobius_corrupt.bundle.json", "mobius_sub.bundle.json", "rank_jump.bundle.json"}) {
    const auto doc = load_bundle_file(fixture(f));
    const auto& b = doc.sub.bundle;
    const Box& box = b.base.working_region;
    for (std::size_t a = 0; a < b.sources.size(); ++a) {
      for (std::size_t c = 0; c < b.sources.size(); ++c) {
        if (a == c || !b.cocycle[a][c]) continue;
        std::vector<SmoothExpr> both = b.sources[a];
        both.insert(both.end(), b.sources[c].begin(), b.sources[c].end());
        for (const auto& row : *b.cocycle[a][c]) {
          for (const auto& e : row) cases.push_back({std::string(f) + " transition", e, box, both});
        }
      }
    }
    for (const auto& fam : doc.sub.families) {
      std::vector<SmoothExpr> dom = fam.domain;
      dom.insert(dom.end(), b.sources[static_cast<std::size_t>(fam.source)].begin(), b.sources[static_cast<std::size_t>(fam.source)].end());
      for (const auto& sec : fam.sections) {
        for (const auto& e : sec.components()) cases.push_back({std::string(f) + " section", e, box, dom});
      }
    }
  }
  for (const char* f : {"sussmann.dist.json", "circle_tangent.dist.json"}) {
    const auto d = load_distribution_file(fixture(f));
    for (const auto& fld : d.fields) {
      for (const auto& e : fld.field.components()) cases.push_back({std::string(f) + " field", e, d.base.working_region, fld.domain});
    }
  }

  const double h = 1e-5;
  std::mt19937_64 rng(20241016);
  double worst = 0.0;
  std::string worst_name;
  std::size_t points = 0;
  Verdict v;
  for (const auto& gc : cases) {
    const int dim = gc.expr.ambient_dim();
    int got = 0;
    for (int attempt = 0; got < 100 && attempt < 100000; ++attempt) {
      Point x(dim);
      for (int i = 0; i < dim; ++i) {
        std::uniform_real_distribution<double> u(gc.box.min[i], gc.box.max[i]);
        x[i] = u(rng);
      }
      Eigen::RowVectorXd fd(dim);
      Eigen::RowVectorXd exact;
      try {
        bool inside = in_domain(gc.domain, x);
        for (int i = 0; i < dim && inside; ++i) {
          Point xp = x, xm = x;
          xp[i] += h;
          xm[i] -= h;
          inside = in_domain(gc.domain, xp) && in_domain(gc.domain, xm);
          fd[i] = (gc.expr(xp) - gc.expr(xm)) / (2 * h);
        }
        if (!inside) continue;
        exact = gc.expr.gradient(x);
      } catch (const Error&) {
        continue;  // guarded singularity within h of x
      }
      ++got;
      for (int i = 0; i < dim; ++i) {
        const double err = std::abs(exact[i] - fd[i]) / std::max(1.0, std::abs(exact[i]));
        if (err > worst) {
          worst = err;
          worst_name = gc.name;
        }
      }
    }
    points += static_cast<std::size_t>(got);
    v.require(got == 100, gc.name + " yielded only " + std::to_string(got) + " points");
  }
  v.require(worst < 1e-6, "worst error in " + worst_name);
  report(1, "gradient oracle", v,
         std::to_string(cases.size()) + " expressions, " + std::to_string(points) + " points, worst rel err " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 2. partition of unity

void criterion_partition() {
  Verdict v;
  double worst_sum = 0.0, lo = kInf, hi = -kInf;
  std::size_t outside_checks = 0, nonzero_outside = 0;
  std::mt19937_64 rng(7);
  for (const auto& sc : space_fixtures()) {
    const SampleSet s = samples_with(sc.p);
    const Cover c = triple_cover(sc.p, s, radius_params(sc.p));
    const PartitionOfUnity pou = partition_of_unity(c, s);
    for (const auto& x : s.points) {
      double total = 0.0;
      for (std::size_t i = 0; i < pou.size(); ++i) {
        const double r = pou[i](x);
        total += r;
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
    const Box& box = sc.p.working_region;
    for (std::size_t i = 0; i < pou.size(); ++i) {
      const auto& e = c.elements[i];
      int got = 0;
      while (got < 50) {
        Point x(box.min.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
          std::uniform_real_distribution<double> u(box.min[k] - 1.0, box.max[k] + 1.0);
          x[k] = u(rng);
        }
        if ((x - e.center).norm() < e.r_out) continue;
        ++got;
        ++outside_checks;
        if (pou[i](x) != 0.0) ++nonzero_outside;
      }
    }
  }
  v.require(worst_sum <= 1e-9, "sum error");
  v.require(lo >= 0.0 && hi <= 1.0, "values outside [0,1]");
  v.require(nonzero_outside == 0, std::to_string(nonzero_outside) + " nonzero values outside supports");
  report(2, "partition of unity", v,
         "max |sum-1| " + fmt(worst_sum) + ", range [" + fmt(lo) + ", " + fmt(hi) + "], " +
             std::to_string(outside_checks) + " outside points all exactly 0");
}

// ---------------------------------------------------------------------------
// 3. bounded-order refinement, 4. finite atlas

struct Refined {
  SpaceCase sc;
  SampleSet s;
  DisjointFamilies f;
};

std::vector<Refined> refine_all() {
  std::vector<Refined> out;
  for (auto& sc : space_fixtures()) {
    SampleSet s = samples_with(sc.p);
    if (s.size() < 1000) s = samples_with(sc.p, 1000);
    const Cover c = triple_cover(sc.p, s, radius_params(sc.p));
    DisjointFamilies f = refine_bounded_order(c, sc.p.structural_dim, s);
    out.push_back({sc, std::move(s), std::move(f)});
  }
  return out;
}

void criterion_refinement(const std::vector<Refined>& all) {
  Verdict v;
  std::string summary;
  for (const auto& r : all) {
    const int n = r.sc.p.structural_dim;
    const auto& els = r.f.cover.elements;
    int multiplicity = 0;
    for (const auto& x : r.s.points) {
      int k = 0;
      for (const auto& e : els) k += (x - e.center).norm() < e.r_out ? 1 : 0;
      multiplicity = std::max(multiplicity, k);
    }
    bool disjoint = true;
    for (const auto& fam : r.f.families) {
      for (std::size_t i = 0; i < fam.size(); ++i) {
        for (std::size_t j = i + 1; j < fam.size(); ++j) {
          const auto& a = els[static_cast<std::size_t>(fam[i])];
          const auto& b = els[static_cast<std::size_t>(fam[j])];
          disjoint = disjoint && (a.center - b.center).norm() > a.r_out + b.r_out;
        }
      }
    }
    std::size_t uncovered = 0;
    for (const auto& x : r.s.points) {
      bool hit = false;
      for (const auto& e : els) hit = hit || (x - e.center).norm() < e.r_out;
      uncovered += hit ? 0 : 1;
    }
    const std::string tag = r.sc.file;
    v.require(r.s.size() >= 1000, tag + " has fewer than 1000 samples");
    v.require(static_cast<int>(r.f.families.size()) <= n + 1, tag + " families > n+1");
    v.require(multiplicity <= n + 1, tag + " multiplicity > n+1");
    v.require(disjoint, tag + " family members meet");
    v.require(uncovered == 0, tag + " leaves samples uncovered");
    summary += tag + " n=" + std::to_string(n) + " N=" + std::to_string(r.s.size()) + " fam=" +
               std::to_string(r.f.families.size()) + " mult=" + std::to_string(multiplicity) + "; ";
  }
  report(3, "bounded-order refinement", v, summary);
}

void criterion_atlas(const std::vector<Refined>& all) {
  Verdict v;
  std::string summary;
  for (const auto& r : all) {
    const auto& p = r.sc.p;
    const int n = p.structural_dim;
    const FiniteAtlas atlas = finite_atlas(p, r.f, r.s);
    double inj = kInf, sep = kInf;
    std::size_t outside = 0;
    for (const auto& gc : atlas.charts) {
      std::vector<Point> ys;
      for (const auto& x : r.s.points) {
        for (const auto& piece : gc.pieces) {
          const auto& e = atlas.cover.elements[static_cast<std::size_t>(piece.element)];
          if ((x - e.center).norm() >= e.r_out) continue;
          Point local = p.charts[static_cast<std::size_t>(piece.chart)].map(x) - piece.chart_center;
          Point y = Point::Zero(n);
          y.head(local.size()) = local;
          if (local.norm() > piece.radius) ++outside;
          ys.push_back(y + piece.offset);
          break;
        }
      }
      for (std::size_t i = 0; i < ys.size(); ++i) {
        for (std::size_t j = i + 1; j < ys.size(); ++j) inj = std::min(inj, (ys[i] - ys[j]).norm());
      }
      for (std::size_t i = 0; i < gc.pieces.size(); ++i) {
        for (std::size_t j = i + 1; j < gc.pieces.size(); ++j) {
          const auto& a = gc.pieces[i];
          const auto& b = gc.pieces[j];
          sep = std::min(sep, (a.offset - b.offset).norm() - a.radius - b.radius);
        }
      }
    }
    const std::string tag = r.sc.file;
    v.require(static_cast<int>(atlas.charts.size()) <= n + 1, tag + " charts > n+1");
    v.require(inj > 0.0, tag + " chart not injective on samples");
    v.require(sep >= 1.0, tag + " piece images closer than 1");
    v.require(outside == 0, tag + " images escape declared piece balls");
    summary += tag + " charts=" + std::to_string(atlas.charts.size()) + " inj=" + fmt(inj) + " sep=" + fmt(sep) + "; ";
  }
  report(4, "finite atlas", v, summary);
}

// ---------------------------------------------------------------------------
// 5. exhaustion

void criterion_exhaustion() {
  Verdict v;
  const auto p = load_presentation_file(fixture("half_line.json"));
  const SampleSet s = samples_with(p);
  const Cover c = triple_cover(p, s, radius_params(p));
  const PartitionOfUnity pou = partition_of_unity(c, s);
  const int J = static_cast<int>(pou.size());
  std::vector<double> u;
  for (const auto& x : s.points) {
    double acc = 0.0;
    for (int j = 0; j < J; ++j) acc += (j + 1) * pou[static_cast<std::size_t>(j)](x);
    u.push_back(acc);
  }
  const SmoothExpr lib_u = exhaustion_function(pou);
  double gap = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) gap = std::max(gap, std::abs(lib_u(s.points[i]) - u[i]));
  std::size_t violations = 0, checked = 0;
  for (int a = 1; a <= J; ++a) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (u[i] > a) continue;
      ++checked;
      bool inside = false;
      for (int j = 0; j < a && !inside; ++j) {
        const auto& e = c.elements[static_cast<std::size_t>(j)];
        inside = (s.points[i] - e.center).norm() <= e.r_out;
      }
      if (!inside) ++violations;
    }
  }
  v.require(violations == 0, std::to_string(violations) + " samples outside the first supports");
  v.require(gap <= 1e-12, "library u differs from the direct sum");
  report(5, "exhaustion sublevels", v,
         "half-line J=" + std::to_string(J) + ", " + std::to_string(checked) + " (a, sample) checks, violations " +
             std::to_string(violations));
}

// ---------------------------------------------------------------------------
// 6. proper embedding

void criterion_embedding() {
  Verdict v;
  std::string summary;
  for (const auto& sc : space_fixtures()) {
    const auto& p = sc.p;
    const SampleSet s = samples_with(p);
    EmbedConfig cfg;
    cfg.seed = 7;
    const auto t0 = std::chrono::steady_clock::now();
    const EmbeddingResult r = proper_embedding(p, s, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const EmbeddingResult again = proper_embedding(p, s, cfg);
    const int n = p.structural_dim;
    std::vector<Point> psi;
    double dev = 0.0;
    bool same = again.records.size() == r.records.size();
    for (const auto& x : s.points) {
      psi.push_back(r.psi(x));
      dev = std::max(dev, (psi.back() - r.phi(x)).norm());
      same = same && again.psi(x) == psi.back();
    }
    double ratio = kInf;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        ratio = std::min(ratio, (psi[i] - psi[j]).norm() / (s.points[i] - s.points[j]).norm());
      }
    }
    double sigma = kInf;
    for (const auto& x : s.points) {
      const Matrix t = oracle_tangent(p, x);
      sigma = std::min(sigma, oracle_min_sigma(r.psi.jacobian(x) * t));
    }
    int retries = 0;
    for (const auto& rec : r.records) retries = std::max(retries, rec.retries);
    const std::string tag = sc.file;
    v.require(r.m == 2 * n + 1, tag + " m != 2n+1");
    v.require(dev < 1.0, tag + " deviation >= 1");
    v.require(ratio > 1e-6, tag + " separation ratio too small");
    v.require(sigma > 1e-6, tag + " tangent singular value too small");
    v.require(same, tag + " not deterministic");
    v.require(retries <= 32, tag + " retries > 32");
    summary += tag + " m=" + std::to_string(r.m) + " dev=" + fmt(dev) + " sep=" + fmt(ratio) + " sigma=" + fmt(sigma) +
               " retries<=" + std::to_string(retries) + " (" + fmt(secs) + "s); ";
  }
  report(6, "proper embedding", v, summary);
}

// ---------------------------------------------------------------------------
// 7. bundle generators, 8. injective trivialization

struct BundleRun {
  std::string file;
  BundleDocument doc;
  SampleSet s;
  BundleConstruction bc;
};

std::vector<BundleRun> bundle_runs() {
  std::vector<BundleRun> out;
  for (const char* f : {"mobius.bundle.json", "mobius_sub.bundle.json"}) {
    BundleDocument doc = load_bundle_file(fixture(f));
    SampleSet s = samples_with(doc.sub.bundle.base);
    BundleConstruction bc = construct_bundle_generators(doc.sub.bundle, s, radius_params(doc.sub.bundle.base));
    out.push_back({f, std::move(doc), std::move(s), std::move(bc)});
  }
  return out;
}

void criterion_bundle_generators(const std::vector<BundleRun>& runs) {
  Verdict v;
  std::string summary;
  for (const auto& r : runs) {
    const auto& b = r.doc.sub.bundle;
    const int k = b.fiber_dim;
    const auto& gens = r.bc.generators;
    int lo = k, hi = 0;
    double compat = 0.0;
    std::vector<bool> zero(gens.size(), false);
    for (const auto& x : r.s.points) {
      std::vector<int> here;
      for (std::size_t a = 0; a < b.sources.size(); ++a) {
        if (in_domain(b.sources[a], x)) here.push_back(static_cast<int>(a));
      }
      Matrix m(k, static_cast<Eigen::Index>(gens.size()));
      for (std::size_t i = 0; i < gens.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = gens[i].value(here[0], x);
      const int rank = oracle_rank(m, b.base.tolerances.rank_tol);
      lo = std::min(lo, rank);
      hi = std::max(hi, rank);
      for (std::size_t i = 0; i < gens.size(); ++i) {
        if (m.col(static_cast<Eigen::Index>(i)).norm() <= b.base.tolerances.rank_tol) zero[i] = true;
      }
      for (std::size_t h = 1; h < here.size(); ++h) {
        const Matrix g = eval(*b.cocycle[static_cast<std::size_t>(here[h])][static_cast<std::size_t>(here[0])], x);
        for (std::size_t i = 0; i < gens.size(); ++i) {
          compat = std::max(compat, (gens[i].value(here[h], x) - g * m.col(static_cast<Eigen::Index>(i))).norm());
        }
      }
    }
    const std::size_t m_triv = r.bc.representation.trivializations.size();
    const std::string tag = r.file;
    v.require(lo == k && hi == k, tag + " rank not k everywhere");
    v.require(gens.size() == m_triv * static_cast<std::size_t>(k), tag + " count != m*k");
    v.require(compat <= 1e-8, tag + " representatives disagree across trivializations");
    if (tag == "mobius.bundle.json") {
      v.require(gens.size() == 2, "Mobius needs exactly 2 generators");
      v.require(std::all_of(zero.begin(), zero.end(), [](bool z) { return z; }), "a Mobius generator never vanishes");
    }
    std::size_t zeros = static_cast<std::size_t>(std::count(zero.begin(), zero.end(), true));
    summary += tag + " k=" + std::to_string(k) + " m=" + std::to_string(m_triv) + " count=" + std::to_string(gens.size()) +
               " rank=" + std::to_string(lo) + ".." + std::to_string(hi) + " with-zero=" + std::to_string(zeros) + "; ";
  }
  report(7, "bundle generators", v, summary);
}

void criterion_trivialization(const std::vector<BundleRun>& runs) {
  Verdict v;
  Matrix psi(1, 2);
  psi << 1.0, 1.0;
  const Matrix phi = right_inverse(psi, Matrix::Identity(1, 1));
  const double hand = std::max(std::abs(phi(0, 0) - 0.5), std::abs(phi(1, 0) - 0.5));
  v.require(phi.rows() == 2 && phi.cols() == 1 && hand <= 1e-12, "hand oracle mismatch");
  std::string summary = "hand oracle err " + fmt(hand) + "; ";
  for (const auto& r : runs) {
    const auto& b = r.doc.sub.bundle;
    const int k = b.fiber_dim;
    const InjectiveTrivialization t = injective_trivialization(b, r.bc.generators, r.bc.metric);
    double worst = 0.0;
    for (const auto& x : r.s.points) {
      int a = 0;
      while (!in_domain(b.sources[static_cast<std::size_t>(a)], x)) ++a;
      Matrix ps(k, static_cast<Eigen::Index>(r.bc.generators.size()));
      for (std::size_t i = 0; i < r.bc.generators.size(); ++i) ps.col(static_cast<Eigen::Index>(i)) = r.bc.generators[i].value(a, x);
      const Matrix ph = t.at(a, x);
      for (int j = 0; j < k; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(k, j);
        worst = std::max(worst, (ps * (ph * e) - e).norm());
      }
    }
    v.require(worst <= 1e-8, r.file + " left-inverse residual");
    summary += r.file + " max|psi(phi(e))-e| " + fmt(worst) + "; ";
  }
  report(8, "injective trivialization", v, summary);
}

// ---------------------------------------------------------------------------
// 9. subbundle and distribution generators

void criterion_subbundles() {
  Verdict v;
  std::string summary;
  for (const char* f : {"mobius_sub.bundle.json", "rank_jump.bundle.json"}) {
    const auto doc = load_bundle_file(fixture(f));
    const auto& b = doc.sub.bundle;
    const SampleSet s = samples_with(b.base);
    const auto g = subbundle_global_generators(doc.sub, s, radius_params(b.base));
    const int k = b.fiber_dim;
    const double tol = b.base.tolerances.rank_tol;
    std::size_t mismatches = 0;
    double member = 0.0;
    for (const auto& x : s.points) {
      int a = 0;
      while (!in_domain(b.sources[static_cast<std::size_t>(a)], x)) ++a;
      std::vector<Eigen::VectorXd> cols;
      for (const auto& fam : doc.sub.families) {
        if (!in_domain(fam.domain, x) || !in_domain(b.sources[static_cast<std::size_t>(fam.source)], x)) continue;
        const Matrix t = fam.source == a ? Matrix::Identity(k, k)
                                         : eval(*b.cocycle[static_cast<std::size_t>(a)][static_cast<std::size_t>(fam.source)], x);
        for (const auto& xi : fam.sections) cols.push_back(t * xi(x));
      }
      Matrix in(k, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) in.col(static_cast<Eigen::Index>(c)) = cols[c];
      Matrix out(k, static_cast<Eigen::Index>(g.sections.size()));
      for (std::size_t i = 0; i < g.sections.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = g.sections[i].value(a, x);
      if (oracle_rank(in, tol) != oracle_rank(out, tol)) ++mismatches;
      for (Eigen::Index c = 0; c < out.cols(); ++c) member = std::max(member, oracle_membership(in, out.col(c)));
    }
    v.require(mismatches == 0, std::string(f) + " rank mismatches");
    v.require(member <= 1e-8, std::string(f) + " membership residual");
    summary += std::string(f) + " gens=" + std::to_string(g.sections.size()) + " mismatches=" + std::to_string(mismatches) +
               " member=" + fmt(member) + "; ";
  }
  for (const char* f : {"sussmann.dist.json", "circle_tangent.dist.json"}) {
    const auto d = load_distribution_file(fixture(f));
    const SampleSet s = samples_with(d.base);
    const auto g = global_distribution_generators(d, s, radius_params(d.base));
    const double tol = d.base.tolerances.rank_tol;
    const int n = d.base.ambient_dim;
    std::size_t mismatches = 0, profile_errors = 0;
    double member = 0.0, tangency = 0.0;
    for (const auto& x : s.points) {
      std::vector<Eigen::VectorXd> cols;
      for (const auto& fld : d.fields) {
        if (in_domain(fld.domain, x)) cols.push_back(fld.field(x));
      }
      Matrix in(n, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) in.col(static_cast<Eigen::Index>(c)) = cols[c];
      Matrix out(n, static_cast<Eigen::Index>(g.fields.size()));
      for (std::size_t i = 0; i < g.fields.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = g.fields[i](x);
      const Matrix t = oracle_tangent(d.base, x);
      const int observed = oracle_rank(Matrix(t * (t.transpose() * out)), tol);
      if (oracle_rank(in, tol) != observed) ++mismatches;
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        member = std::max(member, oracle_membership(in, out.col(c)));
        tangency = std::max(tangency, (out.col(c) - t * (t.transpose() * out.col(c))).norm());
      }
      if (std::string(f) == "sussmann.dist.json" && observed != (x[0] > 0.0 ? 1 : 0)) ++profile_errors;
    }
    v.require(mismatches == 0, std::string(f) + " rank mismatches");
    v.require(member <= 1e-8, std::string(f) + " membership residual");
    v.require(tangency <= d.tangency_tol, std::string(f) + " generators leave the tangent space");
    v.require(profile_errors == 0, std::string(f) + " rank profile differs from {0 on x<=0, 1 on x>0}");
    summary += std::string(f) + " gens=" + std::to_string(g.fields.size()) + " mismatches=" + std::to_string(mismatches) +
               " member=" + fmt(member) + (std::string(f) == "sussmann.dist.json" ? " profile-errors=" + std::to_string(profile_errors) : "") +
               "; ";
  }
  report(9, "subbundle and distribution generators", v, summary);
}

// ---------------------------------------------------------------------------
// 10. cocycle validation

void criterion_cocycle() {
  Verdict v;
  std::string summary;
  for (const char* f : {"mobius.bundle.json", "mobius_sub.bundle.json", "rank_jump.bundle.json"}) {
    const auto b = load_bundle_file(fixture(f)).sub.bundle;
    const SampleSet s = samples_with(b.base);
    const CocycleReport r = validate_cocycle(b, s);
    // Direct check of g_ab g_ba = I and g_ab g_bc = g_ac from the parsed entries.
    auto g = [&](std::size_t a, std::size_t c, const Point& x) {
      return a == c ? Matrix(Matrix::Identity(b.fiber_dim, b.fiber_dim)) : eval(*b.cocycle[a][c], x);
    };
    double direct = 0.0;
    const std::size_t t = b.sources.size();
    for (const auto& x : s.points) {
      for (std::size_t a = 0; a < t; ++a) {
        for (std::size_t c = 0; c < t; ++c) {
          for (std::size_t e = 0; e < t; ++e) {
            if (!in_domain(b.sources[a], x) || !in_domain(b.sources[c], x) || !in_domain(b.sources[e], x)) continue;
            direct = std::max(direct, (g(a, c, x) * g(c, e, x) - g(a, e, x)).cwiseAbs().maxCoeff());
          }
        }
      }
    }
    const double worst = std::max({r.identity_residual, r.inverse_residual, r.triple_residual});
    v.require(r.passed && worst < 1e-8 && direct < 1e-8, std::string(f) + " residual");
    summary += std::string(f) + " max residual " + fmt(std::max(worst, direct)) + "; ";
  }
  const auto bad = load_bundle_file(fixture("mobius_corrupt.bundle.json")).sub.bundle;
  const CocycleReport r = validate_cocycle(bad, samples_with(bad.base));
  // |2 sgn(x2) * sgn(x2) - 1| = 1 on every overlap sample
  v.require(!r.passed, "corrupted cocycle accepted");
  v.require(std::abs(r.inverse_residual - 1.0) <= 1e-12, "corrupted residual differs from the hand value 1");
  summary += "corrupted fixture flagged with inverse residual " + fmt(r.inverse_residual);
  report(10, "cocycle validation", v, summary);
}

template <typename F>
void guarded(int n, const std::string& title, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    Verdict v;
    v.require(false, e.what());
    report(n, title, v, "threw");
  }
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  guarded(1, "gradient oracle", criterion_gradients);
  guarded(2, "partition of unity", criterion_partition);
  std::vector<Refined> refined;
  guarded(3, "bounded-order refinement", [&] {
    refined = refine_all();
    criterion_refinement(refined);
  });
  guarded(4, "finite atlas", [&] { criterion_atlas(refined); });
  guarded(5, "exhaustion sublevels", criterion_exhaustion);
  guarded(6, "proper embedding", criterion_embedding);
  std::vector<BundleRun> runs;
  guarded(7, "bundle generators", [&] {
    runs = bundle_runs();
    criterion_bundle_generators(runs);
  });
  guarded(8, "injective trivialization", [&] { criterion_trivialization(runs); });
  guarded(9, "subbundle and distribution generators", criterion_subbundles);
  guarded(10, "cocycle validation", criterion_cocycle);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 10 criteria failed; %.2f s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
