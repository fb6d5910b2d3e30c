#pragma once

// JSON spec documents -> presentations.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subcart/bundle.hpp"
#include "subcart/dist.hpp"
#include "subcart/error.hpp"
#include "subcart/parse.hpp"
#include "subcart/space.hpp"

namespace subcart {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void bad_doc(const std::string& msg) { throw Error(ErrorKind::Parse, "spec: " + msg); }

inline const json& need(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad_doc(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline double as_double(const json& j, const char* what) {
  if (!j.is_number()) bad_doc(std::string(what) + " must be a number");
  return j.get<double>();
}

inline int as_int(const json& j, const char* what) {
  if (!j.is_number_integer()) bad_doc(std::string(what) + " must be an integer");
  return j.get<int>();
}

inline Point as_point(const json& j, const char* what) {
  if (!j.is_array()) bad_doc(std::string(what) + " must be an array of numbers");
  Point p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) p[static_cast<Eigen::Index>(i)] = as_double(j[i], what);
  return p;
}

inline std::vector<std::string> as_strings(const json& j, const char* what) {
  if (!j.is_array()) bad_doc(std::string(what) + " must be an array of expressions");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) bad_doc(std::string(what) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline std::vector<SmoothExpr> as_exprs(const json& j, int dim, const char* what) {
  std::vector<SmoothExpr> out;
  for (const auto& s : as_strings(j, what)) out.push_back(parse_expr(s, dim));
  return out;
}

inline std::vector<std::size_t> as_counts(const json& j) {
  std::vector<std::size_t> out;
  if (j.is_number_integer()) {
    out.push_back(j.get<std::size_t>());
    return out;
  }
  if (!j.is_array()) bad_doc("count must be an integer or array of integers");
  for (const auto& c : j) out.push_back(static_cast<std::size_t>(as_int(c, "count")));
  return out;
}

inline std::vector<double> as_doubles(const json& j, const char* what) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
    return out;
  }
  if (!j.is_array()) bad_doc(std::string(what) + " must be a number or array");
  for (const auto& c : j) out.push_back(as_double(c, what));
  return out;
}

inline SampleSpec parse_samples(const json& j, int dim) {
  SampleSpec s;
  const std::string type = need(j, "type").get<std::string>();
  if (type == "grid") {
    s.kind = SampleKind::Grid;
    if (j.contains("step")) s.step = as_doubles(j["step"], "step");
    if (j.contains("count")) s.count = as_counts(j["count"]);
    s.cell_centered = j.value("cell_centered", false);
  } else if (type == "explicit") {
    s.kind = SampleKind::Explicit;
    for (const auto& p : need(j, "points")) {
      s.points.push_back(as_point(p, "sample point"));
      if (s.points.back().size() != dim) bad_doc("explicit sample point has wrong dimension");
    }
  } else if (type == "parametric") {
    s.kind = SampleKind::Parametric;
    s.chart = as_int(need(j, "chart"), "chart");
    s.param_min = as_point(need(j, "param_min"), "param_min");
    s.param_max = as_point(need(j, "param_max"), "param_max");
    s.count = as_counts(need(j, "count"));
    s.endpoint = j.value("endpoint", true);
  } else if (type == "segments") {
    s.kind = SampleKind::Segments;
    for (const auto& seg : need(j, "segments")) {
      Segment g;
      g.from = as_point(need(seg, "from"), "from");
      g.to = as_point(need(seg, "to"), "to");
      g.count = static_cast<std::size_t>(as_int(need(seg, "count"), "count"));
      if (g.from.size() != dim || g.to.size() != dim) bad_doc("segment endpoint has wrong dimension");
      s.segments.push_back(g);
    }
  } else if (type == "rejection") {
    s.kind = SampleKind::Rejection;
    s.draws = static_cast<std::size_t>(as_int(need(j, "draws"), "draws"));
  } else {
    bad_doc("unknown sample type '" + type + "'");
  }
  return s;
}

}  // namespace detail

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

/// Parse and cross-validate a space document. Parse errors are ErrorKind::Parse,
/// structural inconsistencies ErrorKind::Invalid.
inline SpacePresentation load_presentation(const json& doc) {
  using namespace detail;
  SpacePresentation p;
  try {
    p.name = doc.value("name", std::string("unnamed"));
    p.ambient_dim = as_int(need(doc, "ambient_dim"), "ambient_dim");
    p.structural_dim = as_int(need(doc, "structural_dim"), "structural_dim");
    if (p.ambient_dim < 1) throw Error(ErrorKind::Invalid, "ambient_dim must be positive");
    const int n = p.ambient_dim;
    if (doc.contains("constraints")) {
      const json& c = doc["constraints"];
      if (c.contains("equalities")) p.equalities = as_exprs(c["equalities"], n, "equalities");
      if (c.contains("inequalities")) p.inequalities = as_exprs(c["inequalities"], n, "inequalities");
    }
    if (!doc.contains("charts") || !doc["charts"].is_array() || doc["charts"].empty()) {
      throw Error(ErrorKind::Invalid, "spec declares no charts; every point of S must lie in a chart domain");
    }
    for (const auto& cj : doc["charts"]) {
      Chart ch;
      if (cj.contains("domain")) ch.domain = as_exprs(cj["domain"], n, "chart domain");
      ch.map = ExprVec(n, as_exprs(need(cj, "map"), n, "chart map"));
      if (cj.contains("target_dim") && as_int(cj["target_dim"], "target_dim") != ch.target_dim()) {
        throw Error(ErrorKind::Invalid, "chart target_dim disagrees with the number of map components");
      }
      if (cj.contains("inverse")) {
        ch.inverse = ExprVec(ch.target_dim(), as_exprs(cj["inverse"], ch.target_dim(), "chart inverse"));
      }
      p.charts.push_back(std::move(ch));
    }
    const json& wr = need(doc, "working_region");
    p.working_region.min = as_point(need(wr, "min"), "working_region.min");
    p.working_region.max = as_point(need(wr, "max"), "working_region.max");
    if (doc.contains("tolerances")) {
      const json& t = doc["tolerances"];
      p.tolerances.tol_eq = t.value("tol_eq", p.tolerances.tol_eq);
      p.tolerances.tol_ineq = t.value("tol_ineq", p.tolerances.tol_ineq);
      p.tolerances.rank_tol = t.value("rank_tol", p.tolerances.rank_tol);
    }
    p.base_point = doc.contains("base_point") ? as_point(doc["base_point"], "base_point")
                                              : Point(0.5 * (p.working_region.min + p.working_region.max));
    p.manifold = doc.value("manifold", false);
    if (doc.contains("cover")) {
      const json& c = doc["cover"];
      p.cover.radius = c.value("radius", p.cover.radius);
      p.cover.ratio_v = c.value("ratio_v", p.cover.ratio_v);
      p.cover.ratio_w = c.value("ratio_w", p.cover.ratio_w);
      p.cover.plateau = c.value("plateau", p.cover.plateau);
    }
    p.samples = parse_samples(need(doc, "samples"), n);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("spec: ") + e.what());
  }
  check_presentation(p);
  return p;
}

inline SpacePresentation load_presentation_file(const std::string& path) {
  return load_presentation(read_json_file(path));
}

namespace detail {

inline SpacePresentation load_base(const json& doc, const std::filesystem::path& dir) {
  const json& b = need(doc, "base");
  if (b.is_string()) return load_presentation_file((dir / b.get<std::string>()).string());
  return load_presentation(b);
}

inline ExprMatrix as_expr_matrix(const json& j, int k, int dim) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(k)) bad_doc("transition matrix must have fiber_dim rows");
  ExprMatrix m;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != static_cast<std::size_t>(k)) bad_doc("transition matrix must be square");
    m.push_back(as_exprs(row, dim, "transition entry"));
  }
  return m;
}

}  // namespace detail

/// A bundle document, with the subbundle block when one is declared.
struct BundleDocument {
  SubbundlePresentation sub;
  bool has_subbundle = false;
};

/// Cocycle entries {from, to, matrix} mean v_to = matrix * v_from. A missing
/// reverse direction is the symbolic inverse.
inline BundleDocument load_bundle(const json& doc, const std::filesystem::path& dir = ".") {
  using namespace detail;
  BundleDocument out;
  BundlePresentation& b = out.sub.bundle;
  try {
    b.base = load_base(doc, dir);
    const int dim = b.base.ambient_dim;
    b.fiber_dim = as_int(need(doc, "fiber_dim"), "fiber_dim");
    if (b.fiber_dim < 1) throw Error(ErrorKind::Invalid, "fiber_dim must be positive");
    const json& tj = need(doc, "trivializations");
    if (!tj.is_array() || tj.empty()) throw Error(ErrorKind::Invalid, "bundle declares no trivializations");
    for (const auto& t : tj) b.sources.push_back(t.contains("domain") ? as_exprs(t["domain"], dim, "domain") : std::vector<SmoothExpr>{});
    const std::size_t n = b.sources.size();
    b.cocycle.assign(n, std::vector<std::optional<ExprMatrix>>(n));
    if (doc.contains("cocycle")) {
      for (const auto& c : doc["cocycle"]) {
        const int from = as_int(need(c, "from"), "from");
        const int to = as_int(need(c, "to"), "to");
        if (from < 0 || to < 0 || static_cast<std::size_t>(from) >= n || static_cast<std::size_t>(to) >= n) {
          throw Error(ErrorKind::Invalid, "cocycle entry names an unknown trivialization");
        }
        b.cocycle[static_cast<std::size_t>(to)][static_cast<std::size_t>(from)] = as_expr_matrix(need(c, "matrix"), b.fiber_dim, dim);
      }
    }
    complete_bundle(b);
    if (doc.contains("subbundle")) {
      out.has_subbundle = true;
      for (const auto& f : doc["subbundle"]) {
        LocalFamily fam;
        if (f.contains("domain")) fam.domain = as_exprs(f["domain"], dim, "domain");
        fam.source = f.value("trivialization", 0);
        if (fam.source < 0 || static_cast<std::size_t>(fam.source) >= n) {
          throw Error(ErrorKind::Invalid, "subbundle family names an unknown trivialization");
        }
        for (const auto& sec : need(f, "sections")) {
          auto comps = as_exprs(sec, dim, "section");
          if (comps.size() != static_cast<std::size_t>(b.fiber_dim)) throw Error(ErrorKind::Invalid, "section must have fiber_dim components");
          fam.sections.emplace_back(dim, std::move(comps));
        }
        out.sub.families.push_back(std::move(fam));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bundle spec: ") + e.what());
  }
  return out;
}

inline BundleDocument load_bundle_file(const std::string& path) {
  return load_bundle(read_json_file(path), std::filesystem::path(path).parent_path());
}

inline DistributionPresentation load_distribution(const json& doc, const std::filesystem::path& dir = ".") {
  using namespace detail;
  DistributionPresentation d;
  try {
    d.base = load_base(doc, dir);
    const int dim = d.base.ambient_dim;
    d.tangency_tol = doc.value("tangency_tol", d.tangency_tol);
    for (const auto& f : need(doc, "fields")) {
      LocalField lf;
      if (f.contains("domain")) lf.domain = as_exprs(f["domain"], dim, "domain");
      auto comps = as_exprs(need(f, "components"), dim, "field");
      if (comps.size() != static_cast<std::size_t>(dim)) throw Error(ErrorKind::Invalid, "vector field must have ambient_dim components");
      lf.field = ExprVec(dim, std::move(comps));
      d.fields.push_back(std::move(lf));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("distribution spec: ") + e.what());
  }
  return d;
}

inline DistributionPresentation load_distribution_file(const std::string& path) {
  return load_distribution(read_json_file(path), std::filesystem::path(path).parent_path());
}

}  // namespace subcart
