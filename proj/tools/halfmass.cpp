// halfmass: mass, curvature, flatten, double, oracle and verify commands.
//
// Exit codes: 0 success, 1 input or regime error, 2 nonconvergence or solver
// failure, 3 flattening rejected (u_R <= 0), 4 a verify invariant failed.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/geometry.hpp"
#include "halfmass/mass.hpp"
#include "halfmass/metric_file.hpp"
#include "halfmass/parallel.hpp"
#include "halfmass/sampling.hpp"
#include "halfmass/suites.hpp"

using json = nlohmann::ordered_json;
using namespace halfmass;

namespace {

enum Exit { kOk = 0, kInput = 1, kConvergence = 2, kPositivity = 3, kVerify = 4 };

struct Common {
  std::string format = "text";
  bool timing = false;
};

struct Report {
  json doc;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  explicit Report(const std::string& command) {
    doc["schema"] = "halfmass/1";
    doc["command"] = command;
    doc["inputs"] = json::object();
    doc["results"] = json::object();
    doc["tolerances"] = json::object();
    doc["warnings"] = json::array();
  }
  json& inputs() { return doc["inputs"]; }
  json& results() { return doc["results"]; }
  json& tolerances() { return doc["tolerances"]; }
  void warn(const std::string& w) { doc["warnings"].push_back(w); }
};

// Non-finite numbers are written as strings so that no value is silently lost.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json vec(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

void render_text(const json& j, std::ostream& out, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& v = it.value();
    const std::string key = j.is_object() ? it.key() : "-";
    if (v.is_object() || (v.is_array() && !v.empty() && (v.front().is_object() || v.front().is_array()))) {
      out << pad << key << ":\n";
      render_text(v, out, indent + 2);
    } else if (v.is_string()) {
      out << pad << key << ": " << v.get<std::string>() << "\n";
    } else {
      out << pad << key << ": " << v.dump() << "\n";
    }
  }
}

int emit(Report& rep, const Common& c, int code) {
  if (c.timing)
    rep.doc["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - rep.start).count();
  rep.doc["exit_code"] = code;
  if (c.format == "json")
    std::cout << rep.doc.dump(2) << "\n";
  else
    render_text(rep.doc, std::cout, 0);
  return code;
}

MetricField load(const std::string& path, Report& rep, MetricFile* file_out = nullptr) {
  MetricFile f;
  try {
    f = load_metric_file(path);
  } catch (const ParseError& e) {
    throw InvalidArgument(path + ": line " + std::to_string(e.position()) + ": " + e.detail());
  }
  MetricField g = build_metric(f);
  rep.inputs()["file"] = path;
  rep.inputs()["dimension"] = f.n;
  rep.inputs()["family"] = f.family;
  rep.inputs()["tau"] = num(g.tau);
  rep.inputs()["r0"] = g.r0;
  for (const auto& w : g.warnings) rep.warn(w);
  if (file_out) *file_out = f;
  return g;
}

json mass_json(const MassEstimate& e) {
  json r;
  r["extrapolated"] = num(e.extrapolated);
  r["fitted_exponent"] = num(e.fitted_exponent);
  r["error_bound"] = num(e.error_bound);
  r["converged"] = e.converged;
  if (!e.note.empty()) r["note"] = e.note;
  json rows = json::array();
  for (const auto& s : e.samples)
    rows.push_back({{"r", s.r}, {"hemisphere_term", s.hemisphere}, {"equator_term", s.equator}, {"total", s.total}});
  r["samples"] = rows;
  return r;
}

std::vector<double> schedule_for(const MetricField& g, const MetricFile& f, const std::vector<double>& cli) {
  if (!cli.empty()) return cli;
  if (!f.schedule.empty()) return f.schedule;
  return default_schedule(g);
}

// ---------------------------------------------------------------------------

int cmd_mass(const std::string& path, std::vector<double> radii, int order, bool two_term, const Common& c) {
  Report rep("mass");
  MetricFile f;
  const MetricField g = load(path, rep, &f);
  if (!(g.tau > 0.5 * (g.n - 2))) {
    std::ostringstream os;
    os << "mass requires tau > (n-2)/2 = " << 0.5 * (g.n - 2) << "; declared tau = " << g.tau;
    throw InvalidArgument(os.str());
  }
  radii = schedule_for(g, f, radii);
  rep.inputs()["radii"] = vec(radii);
  rep.inputs()["order"] = order;
  rep.inputs()["two_term"] = two_term;
  MassOptions mo;
  mo.order = order;
  mo.two_term = two_term;
  const MassEstimate e = mass(g, radii, mo);
  if (c.format == "csv") {
    std::cout << "r,hemisphere_term,equator_term,total\n";
    std::cout.precision(17);
    for (const auto& s : e.samples) std::cout << s.r << "," << s.hemisphere << "," << s.equator << "," << s.total << "\n";
    return e.converged ? kOk : kConvergence;
  }
  rep.results() = mass_json(e);
  if (g.exact_mass) rep.results()["exact_mass"] = *g.exact_mass;
  rep.tolerances()["convergence"] = "samples approach the fitted limit monotonically";
  if (!e.converged) rep.warn("mass extrapolation did not converge: " + e.note);
  return emit(rep, c, e.converged ? kOk : kConvergence);
}

json curvature_point_json(const MetricField& g, std::span<const double> x) {
  const CurvaturePoint cp = curvature_at(g, x);
  json r;
  r["x"] = vec(x);
  r["scalar"] = cp.scalar;
  json ric = json::array();
  for (int i = 0; i < g.n; ++i) {
    json row = json::array();
    for (int j = 0; j < g.n; ++j) row.push_back(cp.ricci(i, j));
    ric.push_back(row);
  }
  r["ricci"] = ric;
  const SmallVector md = mass_density(g, x);
  r["mass_density"] = vec(std::span<const double>(md.data(), static_cast<std::size_t>(md.size())));
  if (x.back() == 0.0) {
    const BoundaryPoint b = boundary_at(g, x);
    r["mean_curvature"] = b.H;
    r["mean_curvature_divergence"] = b.H_div;
    json a = json::array();
    for (int i = 0; i < g.n - 1; ++i) {
      json row = json::array();
      for (int j = 0; j < g.n - 1; ++j) row.push_back(b.A(i, j));
      a.push_back(row);
    }
    r["shape_operator"] = a;
  }
  return r;
}

int cmd_curvature(const std::string& path, const std::vector<double>& at, const std::vector<double>& spheres,
                  int points, int order, const Common& c) {
  Report rep("curvature");
  const MetricField g = load(path, rep);
  if (at.empty() == spheres.empty()) throw InvalidArgument("give exactly one of --at or --sphere");
  if (!at.empty()) {
    if (static_cast<int>(at.size()) != g.n) throw InvalidArgument("--at needs n coordinates");
    double r2 = 0.0;
    for (double v : at) r2 += v * v;
    if (at.back() < 0.0 || std::sqrt(r2) < g.r0)
      throw DomainError("point outside the region {x_n >= 0, |x| >= r0}");
    rep.inputs()["at"] = vec(at);
    rep.results() = curvature_point_json(g, at);
    return emit(rep, c, kOk);
  }
  rep.inputs()["spheres"] = vec(spheres);
  rep.inputs()["points"] = points;
  rep.inputs()["order"] = order;
  json rows = json::array();
  for (double r : spheres) {
    if (r < g.r0) throw DomainError("sphere radius below r0");
    const PointSet hemi = sample_sphere(g.n, r, static_cast<std::size_t>(points), SphereRegion::UpperHemisphere);
    const PointSet eq = sample_sphere(g.n, r, static_cast<std::size_t>(points), SphereRegion::Equator);
    double rs = 0.0, hs = 0.0;
    for (std::size_t i = 0; i < hemi.size(); ++i) rs = std::max(rs, std::abs(curvature_at(g, hemi[i]).scalar));
    for (std::size_t i = 0; i < eq.size(); ++i) hs = std::max(hs, std::abs(boundary_at(g, eq[i]).H));
    const ExpansionResiduals e = expansion_residuals(g, r, order);
    rows.push_back({{"r", r},
                    {"scalar_sup", rs},
                    {"mean_curvature_sup", hs},
                    {"theta", e.theta_sup},
                    {"theta_floor", e.theta_floor},
                    {"theta_prime", e.theta_prime_sup},
                    {"theta_prime_floor", e.theta_prime_floor}});
  }
  rep.results()["spheres"] = rows;
  if (spheres.size() >= 2) {
    const ResidualDecay d = residual_decay(g, spheres, order);
    rep.results()["theta_decay_rate"] = num(d.theta_rate);
    rep.results()["theta_prime_decay_rate"] = num(d.theta_prime_rate);
    json ratios = json::array();
    for (std::size_t k = 0; k + 1 < d.radii.size(); ++k)
      ratios.push_back({{"r", d.radii[k]},
                        {"r_next", d.radii[k + 1]},
                        {"theta_ratio", num(d.theta[k] / d.theta[k + 1])},
                        {"theta_prime_ratio", num(d.theta_prime[k] / d.theta_prime[k + 1])}});
    rep.results()["residual_ratios"] = ratios;
  }
  return emit(rep, c, kOk);
}

int cmd_flatten(const std::string& path, double rcut, double epsilon, double spacing, const std::string& output,
                const Common& c) {
  Report rep("flatten");
  const MetricField g = load(path, rep);
  rep.inputs()["rcut"] = rcut;
  rep.inputs()["epsilon"] = epsilon;
  rep.inputs()["spacing"] = spacing;
  FlattenOptions fo;
  fo.spacing = spacing;
  FlatteningResult res;
  try {
    res = conformal_flatten(g, rcut, epsilon, fo);
  } catch (const PositivityError& e) {
    rep.results()["rejected"] = true;
    rep.warn(e.what());
    return emit(rep, c, kPositivity);
  }
  auto& r = rep.results();
  r["min_u"] = res.min_u;
  r["C"] = res.C;
  r["D"] = res.D;
  r["mass_g"] = mass_json(res.mass_g);
  r["mass_g_bar"] = mass_json(res.mass_g_bar);
  r["mass_delta"] = res.mass_delta;
  r["within_epsilon"] = res.within_epsilon;
  r["scalar_curvature_residual"] = res.scalar_residual;
  r["mean_curvature_residual"] = res.mean_residual;
  r["residual_scale"] = res.residual_scale;
  r["scalar_curvature_sampled"] = res.scalar_sampled;
  r["mean_curvature_sampled"] = res.mean_sampled;
  r["solver_iterations"] = res.discrete->iterations;
  r["solver_relative_residual"] = res.discrete->relative_residual;
  r["hypotheses_hold"] = res.hypotheses_hold;
  r["flagged"] = !res.hypotheses_hold;
  rep.tolerances()["solver_relative_residual"] = fo.solve.tolerance;
  rep.tolerances()["curvature_residual"] = "<= 10 * residual_scale for r >= 2 R_cut";
  for (const auto& w : res.warnings) rep.warn(w);
  if (!res.hypotheses_hold) rep.warn("flattening hypotheses R_g >= 0, H_g >= 0 violated; result flagged");
  if (!res.within_epsilon) rep.warn("mass_delta exceeds epsilon at this R_cut");
  if (!output.empty()) {
    write_grid_csv(*res.discrete, output + ".csv");
    std::ofstream m(output + ".metric");
    m.precision(17);
    m << "# conformally flattened metric g_bar = u_R^4 g_R\n"
      << "# u_R: grid file below inside r_out, 1 + C/r + D/r^2 beyond\n"
      << "source = " << path << "\n"
      << "R_cut = " << rcut << "\n"
      << "r_out = " << res.discrete->grid->r_out() << "\n"
      << "C = " << res.C << "\n"
      << "D = " << res.D << "\n"
      << "grid = " << output << ".csv\n";
    rep.results()["artifacts"] = {output + ".csv", output + ".metric"};
  }
  return emit(rep, c, kOk);
}

int cmd_double(const std::string& path, std::vector<double> radii, double rk, const Common& c) {
  Report rep("double");
  MetricFile f;
  const MetricField g = load(path, rep, &f);
  radii = schedule_for(g, f, radii);
  if (!(rk > 0.0)) rk = 2.0 * g.r0;
  rep.inputs()["radii"] = vec(radii);
  rep.inputs()["r_k"] = rk;
  if (!g.boundary_orthogonal) rep.warn("input is not declared boundary_orthogonal; the corner may be genuine");
  const DoubledMetric d = double_of(g, rk);
  const MassEstimate adm = adm_mass_double(d, radii);
  const MassEstimate half = mass(g, radii);
  json corner = json::array();
  for (const auto& s : d.corner)
    corner.push_back({{"x", vec(std::span<const double>(s.x.data(), static_cast<std::size_t>(g.n)))},
                      {"H_minus", s.h_minus},
                      {"H_plus", s.h_plus},
                      {"induced_mismatch", s.induced_mismatch}});
  auto& r = rep.results();
  r["corner"] = corner;
  r["max_corner_jump"] = d.max_corner_jump;
  r["max_induced_mismatch"] = d.max_induced_mismatch;
  r["double_mass"] = mass_json(adm);
  r["half_mass"] = mass_json(half);
  const bool zero = std::abs(half.extrapolated) <= std::max(half.error_bound, 1e-12);
  r["ratio"] = zero ? json(nullptr) : num(adm.extrapolated / (2.0 * half.extrapolated));
  rep.tolerances()["ratio"] = "[0.995, 1.005]";
  rep.tolerances()["corner_jump"] = 1e-8;
  return emit(rep, c, adm.converged && half.converged ? kOk : kConvergence);
}

int cmd_oracle(int count, std::uint64_t seed, double ratio, const std::string& export_path, const Common& c) {
  Report rep("oracle");
  OracleStudyOptions o;
  o.count = count;
  o.first_seed = seed;
  o.coarse_ratio = ratio;
  rep.inputs()["count"] = count;
  rep.inputs()["first_seed"] = seed;
  rep.inputs()["r_in"] = o.r_in;
  rep.inputs()["r_out"] = o.r_out;
  rep.inputs()["h"] = o.r_in / ratio;
  rep.inputs()["clearance"] = o.clearance;
  const OracleStudy s = oracle_study(o);
  json rows = json::array();
  for (const auto& k : s.cases)
    rows.push_back({{"seed", k.seed},
                    {"error_h", k.error_coarse},
                    {"error_h2", k.error_fine},
                    {"order", k.order},
                    {"error_h_global_norm", k.error_coarse_global},
                    {"oracle_vs_closed_form", k.oracle_vs_closed},
                    {"iterations", {k.iterations_coarse, k.iterations_fine}}});
  auto& r = rep.results();
  r["cases"] = rows;
  r["max_error"] = s.max_error;
  r["min_order"] = s.min_order;
  r["max_order"] = s.max_order;
  r["compared_points"] = s.compared_points;
  rep.tolerances()["max_error"] = 1e-3;
  rep.tolerances()["order"] = "[1.7, 2.3]";
  if (!export_path.empty()) {
    const OracleProblem p = random_oracle_problem(seed, o.r_in, o.r_out);
    auto grid = std::make_shared<DiscreteHalfAnnulus>(o.r_in, o.r_out, o.r_in / ratio, 4);
    BvpProblem bp;
    bp.data = p.load();
    write_grid_csv(solve_bvp(grid, bp), export_path);
    r["artifact"] = export_path;
  }
  return emit(rep, c, kOk);
}

int cmd_verify(const std::string& path, const std::string& suite, std::uint64_t seed, const Common& c) {
  Report rep("verify");
  std::vector<NamedMetric> families;
  if (!path.empty()) {
    MetricFile f;
    MetricField g = load(path, rep, &f);
    families.push_back({path, g, schedule_for(g, f, {})});
  } else if (suite == "builtin") {
    rep.inputs()["suite"] = suite;
    families = builtin_families();
  } else {
    throw InvalidArgument("give a metric file or --suite builtin");
  }
  rep.inputs()["seed"] = seed;
  std::vector<SuiteCheck> checks;
  for (const auto& f : families) {
    std::vector<SuiteCheck> local{rigid_invariance(f.metric, f.schedule, 10, seed), positivity(f.metric, f.schedule)};
    // One variational check per run: the file itself, or the n = 3 half-Schwarzschild family.
    if (!path.empty() || f.name == "half_schwarzschild_3") local.push_back(variational_identity(f.metric, seed));
    for (auto& k : local) {
      k.name += " [" + f.name + "]";
      checks.push_back(k);
    }
  }
  json rows = json::array();
  bool all = true;
  for (const auto& k : checks) {
    rows.push_back({{"name", k.name}, {"pass", k.pass}, {"value", num(k.value)}, {"tolerance", num(k.tolerance)},
                    {"detail", k.detail}});
    if (!k.pass) {
      all = false;
      rep.warn("FAILED: " + k.name);
    }
  }
  rep.results()["checks"] = rows;
  rep.results()["all_pass"] = all;
  return emit(rep, c, all ? kOk : kVerify);
}

void apply_thread_cap() {
  if (const char* t = std::getenv("HALFMASS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(t, &end, 10);
    if (end != t && *end == '\0' && v > 0) {
#ifdef _OPENMP
      omp_set_num_threads(static_cast<int>(v));
#endif
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"Mass of asymptotically flat half-spaces"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* s, bool csv) {
    s->add_option("--format", common.format, "Output format")
        ->check(csv ? CLI::IsMember({"text", "json", "csv"}) : CLI::IsMember({"text", "json"}));
    s->add_flag("--timing", common.timing, "Include wall time in the report");
  };

  std::string file;
  std::vector<double> radii;
  int order = 12;
  bool two_term = false;
  auto* mass_cmd = app.add_subcommand("mass", "Extrapolated mass from hemisphere and equator integrals");
  mass_cmd->add_option("file", file, "Metric file")->required();
  mass_cmd->add_option("--radii", radii, "Radii (ratio 2)")->delimiter(',');
  mass_cmd->add_option("--order", order, "Quadrature order");
  mass_cmd->add_flag("--two-term", two_term, "Fit m + c1 r^-s + c2 r^-2s");
  add_common(mass_cmd, true);

  std::vector<double> at, spheres;
  int points = 64;
  auto* curv = app.add_subcommand("curvature", "Pointwise or sphere-sup curvature");
  curv->add_option("file", file, "Metric file")->required();
  curv->add_option("--at", at, "Point x1,..,xn")->delimiter(',');
  curv->add_option("--sphere", spheres, "Sphere radius (repeatable)")->delimiter(',');
  curv->add_option("--points", points, "Sample points per sphere");
  curv->add_option("--order", order, "Quadrature order for the expansion residuals");
  add_common(curv, false);

  double rcut = 16.0, epsilon = 1e-2, spacing = 2.0;
  std::string output;
  auto* flat = app.add_subcommand("flatten", "Conformal flattening near infinity");
  flat->add_option("file", file, "Metric file")->required();
  flat->add_option("--rcut", rcut, "Cutoff radius R_cut");
  flat->add_option("--epsilon", epsilon, "Target for |mass change|");
  flat->add_option("--spacing", spacing, "Lattice spacing");
  flat->add_option("--output", output, "Artifact prefix (writes PREFIX.csv and PREFIX.metric)");
  add_common(flat, false);

  double rk = 0.0;
  auto* dbl = app.add_subcommand("double", "Doubled manifold, corner condition and ADM mass");
  dbl->add_option("file", file, "Metric file")->required();
  dbl->add_option("--radii", radii, "Radii (ratio 2)")->delimiter(',');
  dbl->add_option("--rk", rk, "Corner sample radius (default 2 r0)");
  add_common(dbl, false);

  int count = 20;
  std::uint64_t seed = 1000;
  double ratio = 8.0;
  std::string export_path;
  auto* orc = app.add_subcommand("oracle", "Solver against the half-space representation formula");
  orc->add_option("--count", count, "Number of random problems");
  orc->add_option("--seed", seed, "First seed");
  orc->add_option("--ratio", ratio, "r_in / h on the coarse grid");
  orc->add_option("--export", export_path, "Write the first problem's grid solution as CSV");
  add_common(orc, false);

  std::string suite;
  std::uint64_t vseed = 11;
  auto* ver = app.add_subcommand("verify", "Invariant suites");
  ver->add_option("file", file, "Metric file");
  ver->add_option("--suite", suite, "Builtin suite name")->check(CLI::IsMember({"builtin"}));
  ver->add_option("--seed", vseed, "Seed for random motions and tensors");
  add_common(ver, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInput;
  }

  // Errors go to stderr; in JSON mode a minimal report keeps stdout parseable.
  auto fail = [&](int code, const std::string& message) {
    std::cerr << "halfmass: " << message << "\n";
    if (common.format == "json") {
      json d;
      d["schema"] = "halfmass/1";
      d["command"] = app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name();
      d["error"] = message;
      d["exit_code"] = code;
      std::cout << d.dump(2) << "\n";
    }
    return code;
  };
  try {
    if (*mass_cmd) return cmd_mass(file, radii, order, two_term, common);
    if (*curv) return cmd_curvature(file, at, spheres, points, order, common);
    if (*flat) return cmd_flatten(file, rcut, epsilon, spacing, output, common);
    if (*dbl) return cmd_double(file, radii, rk, common);
    if (*orc) return cmd_oracle(count, seed, ratio, export_path, common);
    if (*ver) return cmd_verify(file, suite, vseed, common);
  } catch (const SolverError& e) {
    return fail(kConvergence, std::string("solver failure: ") + e.what());
  } catch (const std::exception& e) {
    return fail(kInput, e.what());
  }
  return kInput;
}
