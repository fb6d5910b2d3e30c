// subcart: batch driver over space, bundle and distribution spec files.
//
//   subcart <validate|cover|partition|embed|generators|bundle-generators|report> SPEC [flags]
//
// Writes <out-dir>/<subcommand>.json (and embed.csv for embeddings).
// Exit: 0 pass, 1 validation failure, 2 numerical failure, 3 I/O or parse error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "subcart/subcart.hpp"

using namespace subcart;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kPass = 0;
constexpr int kValidation = 1;
constexpr int kNumerical = 2;
constexpr int kIo = 3;

struct RunConfig {
  std::string subcommand;
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<double> tol_eq;
  std::optional<double> tol_rank;
  std::optional<int> m;
  double delta = 1.0;
  int horizon = 4;
  std::string out_dir = ".";
};

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse:
    case ErrorKind::Io: return kIo;
    case ErrorKind::Invalid: return kValidation;
    default: return kNumerical;
  }
}

// JSON has no infinities; non-finite values are written as strings.
ojson num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

ojson point(const Point& p) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(num(p[i]));
  return a;
}

ojson matrix(const Matrix& m) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(point(m.row(i).transpose()));
  return a;
}

ojson config_echo(const RunConfig& c) {
  ojson j;
  j["seed"] = c.seed ? ojson(*c.seed) : ojson(nullptr);
  j["samples"] = c.samples ? ojson(*c.samples) : ojson(nullptr);
  j["tol_eq"] = c.tol_eq ? num(*c.tol_eq) : ojson(nullptr);
  j["tol_rank"] = c.tol_rank ? num(*c.tol_rank) : ojson(nullptr);
  j["m"] = c.m ? ojson(*c.m) : ojson(nullptr);
  j["delta"] = num(c.delta);
  j["horizon"] = c.horizon;
  return j;
}

enum class DocKind { Space, Bundle, Distribution };

const char* to_string(DocKind k) {
  switch (k) {
    case DocKind::Space: return "space";
    case DocKind::Bundle: return "bundle";
    case DocKind::Distribution: return "distribution";
  }
  return "space";
}

struct Run {
  RunConfig cfg;
  ojson stages = ojson::object();
  ojson records = ojson::array();
  bool passed = true;

  void stage(const std::string& name, ojson body, bool ok) {
    body["passed"] = ok;
    stages[name] = std::move(body);
    passed = passed && ok;
  }
};

void apply_tolerances(SpacePresentation& p, const RunConfig& c) {
  if (c.tol_eq) p.tolerances.tol_eq = *c.tol_eq;
  if (c.tol_rank) p.tolerances.rank_tol = *c.tol_rank;
}

SampleSet samples_for(const SpacePresentation& p, const RunConfig& c) {
  SampleConfig sc;
  sc.count_override = c.samples;
  return sample(p, sc, c.seed.value_or(1));
}

// ---------------------------------------------------------------------------
// Stages

void charts_stage(Run& run, const SpacePresentation& p, const SampleSet& s) {
  const ChartReport r = validate_charts(p, s);
  ojson j;
  j["samples"] = s.size();
  j["coverage"] = num(r.coverage);
  j["uncovered"] = r.uncovered.size();
  ojson charts = ojson::array();
  for (const auto& c : r.charts) {
    charts.push_back({{"samples_in_domain", c.samples_in_domain},
                      {"injectivity_margin", num(c.injectivity_margin)},
                      {"injectivity_ratio", num(c.injectivity_ratio)},
                      {"round_trip_error", c.has_inverse ? num(c.round_trip_error) : ojson(nullptr)},
                      {"injective", c.injective},
                      {"round_trip_ok", c.round_trip_ok}});
  }
  j["charts"] = std::move(charts);
  run.stage("charts", std::move(j), r.passed);
}

void cover_stage(Run& run, const SpacePresentation& p, const SampleSet& s) {
  const RadiusParams rp = radius_params(p);
  const Cover c = triple_cover(p, s, rp);
  const int n = p.structural_dim;
  ojson j;
  j["radius"] = num(rp.radius);
  j["elements"] = c.size();
  const std::size_t triple_failures = triple_cover_failures(c, s, rp.cover_floor);
  j["triple_failures"] = triple_failures;
  j["order"] = cover_order(c, s);
  const DisjointFamilies f = refine_bounded_order(c, n, s);
  const bool fam_ok = families_valid(f, s);
  double margin = std::numeric_limits<double>::infinity();
  for (double m : f.margins) margin = std::min(margin, m);
  j["refined_elements"] = f.cover.size();
  j["refined_order"] = cover_order(f.cover, s);
  j["families"] = f.families.size();
  j["min_family_margin"] = num(margin);
  j["rounds"] = f.rounds;
  const FiniteAtlas atlas = finite_atlas(p, f, s);
  const AtlasReport ar = check_atlas(p, atlas, s);
  double inj = std::numeric_limits<double>::infinity();
  for (double m : ar.injectivity_margin) inj = std::min(inj, m);
  j["atlas"] = {{"charts", ar.charts},
                {"min_injectivity_margin", num(inj)},
                {"min_piece_separation", num(ar.min_piece_separation)},
                {"containment_failures", ar.containment_failures},
                {"uncovered", ar.uncovered}};
  const bool ok = triple_failures == 0 && fam_ok && f.families.size() <= static_cast<std::size_t>(n + 1) &&
                  ar.charts <= static_cast<std::size_t>(n + 1) && inj > 0.0 && ar.min_piece_separation >= 1.0 &&
                  ar.containment_failures == 0 && ar.uncovered == 0;
  run.stage("cover", std::move(j), ok);
}

void partition_stage(Run& run, const SpacePresentation& p, const SampleSet& s) {
  const Cover c = triple_cover(p, s, radius_params(p));
  const PartitionOfUnity pou = partition_of_unity(c, s);
  const PartitionReport r = check_partition(pou, s);
  const SmoothExpr u = exhaustion_function(pou);
  const auto levels = exhaustion_sublevels(pou, u, s, p.base_point);
  std::size_t violations = 0;
  ojson lv = ojson::array();
  for (const auto& l : levels) {
    violations += l.violations;
    lv.push_back({{"level", num(l.level)},
                  {"samples_below", l.samples_below},
                  {"violations", l.violations},
                  {"bound_radius", num(l.bound_radius)},
                  {"observed_radius", num(l.observed_radius)}});
  }
  const Exhaustion ex = compact_exhaustion(p, run.cfg.horizon);
  const std::size_t nesting = exhaustion_nesting_failures(ex, s);
  ojson j;
  j["functions"] = pou.size();
  j["max_sum_error"] = num(r.max_sum_error);
  j["min_value"] = num(r.min_value);
  j["max_value"] = num(r.max_value);
  j["support_violations"] = r.support_violations;
  j["sublevels"] = std::move(lv);
  ojson radii = ojson::array();
  for (double x : ex.radii) radii.push_back(num(x));
  j["compact_exhaustion"] = {{"radii", std::move(radii)}, {"covers_region", ex.covers_region}, {"nesting_failures", nesting}};
  const bool ok = r.max_sum_error <= 1e-9 && r.min_value >= 0.0 && r.max_value <= 1.0 && r.support_violations == 0 &&
                  violations == 0 && nesting == 0;
  run.stage("partition", std::move(j), ok);
}

void embed_stage(Run& run, const SpacePresentation& p, const SampleSet& s) {
  if (!run.cfg.seed) throw Error(ErrorKind::Parse, "embedding is randomized; pass --seed");
  EmbedConfig ec;
  ec.m = run.cfg.m;
  ec.delta = run.cfg.delta;
  ec.seed = *run.cfg.seed;
  ec.rank_tol = p.tolerances.rank_tol;
  const EmbeddingResult r = proper_embedding(p, s, ec);
  const auto& d = r.diagnostics;
  int max_retries = 0;
  for (const auto& rec : r.records) {
    max_retries = std::max(max_retries, rec.retries);
    ojson j{{"stage", rec.stage},
            {"kind", to_string(rec.kind)},
            {"element", rec.element},
            {"chart", rec.chart},
            {"magnitude", num(rec.magnitude)},
            {"stage_bound", num(rec.stage_bound)},
            {"retries", rec.retries}};
    if (rec.kind == PerturbationKind::Immersion) {
      j["matrix"] = matrix(rec.matrix);
    } else {
      j["vector"] = point(rec.vector);
    }
    run.records.push_back(std::move(j));
  }
  ojson prof = ojson::array();
  for (const auto& [a, rad] : d.properness_profile) prof.push_back({num(a), num(rad)});
  ojson j;
  j["m"] = r.m;
  j["delta"] = num(r.delta);
  j["cover_elements"] = r.cover.size();
  j["max_deviation"] = num(d.max_deviation);
  j["min_separation_ratio"] = num(d.min_separation_ratio);
  j["min_tangent_singular_value"] = num(d.min_tangent_singular_value);
  j["max_first_coordinate_gap"] = num(d.max_first_coordinate_gap);
  j["max_retries"] = max_retries;
  j["properness_profile"] = std::move(prof);
  const std::filesystem::path csv = std::filesystem::path(run.cfg.out_dir) / "embed.csv";
  std::ofstream out(csv);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + csv.string());
  write_point_cloud(out, s, r.psi);
  j["point_cloud"] = "embed.csv";
  const bool ok = d.max_deviation < r.delta && d.min_separation_ratio > 1e-6 && d.min_tangent_singular_value > 1e-6;
  run.stage("embed", std::move(j), ok);
}

void cocycle_stage(Run& run, const BundlePresentation& b, const SampleSet& s) {
  const CocycleReport r = validate_cocycle(b, s);
  run.stage("cocycle",
            {{"trivializations", b.trivializations.size()},
             {"identity_residual", num(r.identity_residual)},
             {"inverse_residual", num(r.inverse_residual)},
             {"triple_residual", num(r.triple_residual)},
             {"missing", r.missing},
             {"uncovered", r.uncovered}},
            r.passed);
}

void bundle_stage(Run& run, const BundleDocument& doc, const SampleSet& s) {
  const BundlePresentation& b = doc.sub.bundle;
  const RadiusParams rp = radius_params(b.base);
  const BundleConstruction bc = construct_bundle_generators(b, s, rp);
  const GeneratorReport gr = check_bundle_generators(b, bc.generators, s);
  const CocycleReport rep = validate_cocycle(bc.representation, s);
  ojson zeros = ojson::array();
  for (bool z : gr.has_zero) zeros.push_back(z);
  run.stage("bundle_generators",
            {{"fiber_dim", b.fiber_dim},
             {"representation_trivializations", bc.representation.trivializations.size()},
             {"representation_cocycle_passed", rep.passed},
             {"count", gr.count},
             {"min_rank", gr.min_rank},
             {"max_rank", gr.max_rank},
             {"rank_deficient", gr.rank_deficient},
             {"rank_disagreements", gr.rank_disagreements},
             {"compatibility_residual", num(gr.compatibility_residual)},
             {"has_zero", std::move(zeros)}},
            gr.passed && rep.passed &&
                bc.representation.trivializations.size() <= static_cast<std::size_t>(b.base.structural_dim + 1));
  const MetricReport mr = check_metric(b, bc.metric, s);
  run.stage("metric",
            {{"min_eigenvalue", num(mr.min_eigenvalue)},
             {"asymmetry", num(mr.asymmetry)},
             {"transform_residual", num(mr.transform_residual)}},
            mr.passed);
  const InjectiveTrivialization t = injective_trivialization(b, bc.generators, bc.metric);
  const TrivializationReport tr = check_trivialization(t, s);
  run.stage("injective_trivialization",
            {{"max_residual", num(tr.max_residual)}, {"min_singular_value", num(tr.min_singular_value)}}, tr.passed);
  if (doc.has_subbundle) {
    const SubbundleGenerators g = subbundle_global_generators(doc.sub, s, rp);
    const SubbundleReport sr = check_subbundle(doc.sub, g.sections, s);
    int lo = std::numeric_limits<int>::max(), hi = 0;
    for (int k : sr.output_rank) {
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
    run.stage("subbundle",
              {{"families", doc.sub.families.size()},
               {"count", g.sections.size()},
               {"min_rank", lo == std::numeric_limits<int>::max() ? 0 : lo},
               {"max_rank", hi},
               {"rank_mismatches", sr.rank_mismatches},
               {"max_membership_residual", num(sr.max_membership_residual)}},
              sr.passed);
  }
}

void tangency_stage(Run& run, const DistributionPresentation& d, const SampleSet& s) {
  ojson fields = ojson::array();
  bool ok = true;
  for (const auto& f : d.fields) {
    const TangencyReport r = verify_tangency(f.field, d.base, s, f.domain, d.tangency_tol);
    ok = ok && r.passed;
    fields.push_back({{"max_residual", num(r.max_residual)}, {"worst_sample", r.worst_sample}, {"passed", r.passed}});
  }
  run.stage("tangency", {{"tangency_tol", num(d.tangency_tol)}, {"fields", std::move(fields)}}, ok);
}

void generators_stage(Run& run, const DistributionPresentation& d, const SampleSet& s) {
  const DistributionGenerators g = global_distribution_generators(d, s, radius_params(d.base));
  const SpanReport r = span_check(g.fields, d, s);
  std::size_t rank0 = 0, rank_pos = 0;
  for (int k : r.observed_rank) (k == 0 ? rank0 : rank_pos) += 1;
  ojson fam = ojson::array();
  for (int f : g.family) fam.push_back(f);
  run.stage("generators",
            {{"count", g.fields.size()},
             {"source_fields", std::move(fam)},
             {"samples_rank_zero", rank0},
             {"samples_rank_positive", rank_pos},
             {"rank_mismatches", r.mismatches},
             {"max_membership_residual", num(r.max_membership_residual)},
             {"max_tangency_residual", num(r.max_tangency_residual)}},
            r.passed);
}

// ---------------------------------------------------------------------------

DocKind kind_of(const json& doc) {
  if (doc.contains("fiber_dim")) return DocKind::Bundle;
  if (doc.contains("fields")) return DocKind::Distribution;
  return DocKind::Space;
}

void run_space(Run& run, const SpacePresentation& p, const SampleSet& s) {
  const std::string& sub = run.cfg.subcommand;
  if (sub == "validate" || sub == "report") charts_stage(run, p, s);
  if (sub == "cover" || sub == "report") cover_stage(run, p, s);
  if (sub == "partition" || sub == "report") partition_stage(run, p, s);
  if (sub == "embed" || sub == "report") embed_stage(run, p, s);
}

void execute(Run& run, ojson& report) {
  const std::string& sub = run.cfg.subcommand;
  const json doc = read_json_file(run.cfg.spec);
  const DocKind kind = kind_of(doc);
  report["document"] = to_string(kind);
  const std::filesystem::path dir = std::filesystem::path(run.cfg.spec).parent_path();
  if (kind == DocKind::Space) {
    if (sub == "generators" || sub == "bundle-generators") {
      throw Error(ErrorKind::Invalid, sub + " needs a " + (sub == "generators" ? "distribution" : "bundle") + " spec");
    }
    SpacePresentation p = load_presentation(doc);
    apply_tolerances(p, run.cfg);
    const SampleSet s = samples_for(p, run.cfg);
    run_space(run, p, s);
  } else if (kind == DocKind::Bundle) {
    BundleDocument b = load_bundle(doc, dir);
    apply_tolerances(b.sub.bundle.base, run.cfg);
    const SampleSet s = samples_for(b.sub.bundle.base, run.cfg);
    if (sub == "generators") throw Error(ErrorKind::Invalid, "generators needs a distribution spec");
    if (sub == "validate" || sub == "report" || sub == "bundle-generators") cocycle_stage(run, b.sub.bundle, s);
    if (sub == "bundle-generators" || sub == "report") bundle_stage(run, b, s);
    if (sub == "cover" || sub == "partition" || sub == "embed") run_space(run, b.sub.bundle.base, s);
  } else {
    DistributionPresentation d = load_distribution(doc, dir);
    apply_tolerances(d.base, run.cfg);
    const SampleSet s = samples_for(d.base, run.cfg);
    if (sub == "bundle-generators") throw Error(ErrorKind::Invalid, "bundle-generators needs a bundle spec");
    if (sub == "validate" || sub == "report" || sub == "generators") tangency_stage(run, d, s);
    if (sub == "generators" || sub == "report") generators_stage(run, d, s);
    if (sub == "cover" || sub == "partition" || sub == "embed") run_space(run, d.base, s);
  }
}

int write_report(const RunConfig& cfg, const ojson& report) {
  const std::filesystem::path path = std::filesystem::path(cfg.out_dir) / (cfg.subcommand + ".json");
  std::ofstream out(path);
  if (!out) {
    std::cerr << "subcart: cannot write " << path.string() << "\n";
    return kIo;
  }
  out << report.dump(2) << "\n";
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constructive geometry on subcartesian spaces"};
  RunConfig cfg;
  const std::vector<std::string> subs{"validate", "cover", "partition", "embed", "generators", "bundle-generators", "report"};
  app.add_option("subcommand", cfg.subcommand, "What to run")->required()->check(CLI::IsMember(subs));
  app.add_option("spec", cfg.spec, "Space, bundle or distribution spec (JSON)")->required();
  app.add_option("--seed", cfg.seed, "Seed for randomized stages");
  app.add_option("--samples", cfg.samples, "Override the spec's sample count");
  app.add_option("--tol-eq", cfg.tol_eq, "Equality tolerance");
  app.add_option("--tol-rank", cfg.tol_rank, "Numerical rank tolerance");
  app.add_option("--m", cfg.m, "Embedding dimension (default 2n+1)");
  app.add_option("--delta", cfg.delta, "Sup-norm budget for embedding perturbations")->capture_default_str();
  app.add_option("--horizon", cfg.horizon, "Number of compact exhaustion levels")->capture_default_str();
  app.add_option("--out-dir", cfg.out_dir, "Directory for reports")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kIo;
  }

  Run run{cfg};
  ojson report;
  report["tool"] = "subcart";
  report["version"] = SUBCART_VERSION;
  report["subcommand"] = cfg.subcommand;
  report["spec"] = cfg.spec;
  report["config"] = config_echo(cfg);
  int code = kPass;
  try {
    execute(run, report);
    code = run.passed ? kPass : kValidation;
  } catch (const Error& e) {
    code = exit_code(e.kind());
    report["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
    std::cerr << "subcart: " << to_string(e.kind()) << ": " << e.what() << "\n";
  }
  report["stages"] = run.stages;
  report["records"] = run.records;
  report["verdict"] = code == kPass ? "pass" : "fail";
  report["exit_code"] = code;
  const int written = write_report(cfg, report);
  return code != kPass ? code : written;
}
