#include "orbitshade/cli.hpp"

#include "orbitshade/chain_recurrence.hpp"
#include "orbitshade/field.hpp"
#include "orbitshade/homoclinic.hpp"
#include "orbitshade/pseudo_orbit.hpp"
#include "orbitshade/serialize.hpp"
#include "orbitshade/shadowing.hpp"
#include "orbitshade/singularity.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace orbitshade {

namespace {

namespace fs = std::filesystem;

// Raised for bad flags or config values after CLI11 has accepted them.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct GlobalOpts {
  std::string field;
  std::string out = ".";
  std::uint64_t seed = 0;
  int budget = 120;
  double tol = kDefaultTol;
  std::vector<std::string> params;
};

struct RegionOpts {
  std::vector<double> lo, hi;
  int density = 12;
};

struct ChainOpts {
  std::string chain;  // JSONL file from `pseudo`
  std::string builder = "slice";
  std::vector<double> x0, sigma, durations;
  int N = 1;
  double t0 = -1.0;
  int tail = 1;
  double delta = 1e-3;
  int segments = 30;
  double tmin = 1.0, tmax = 2.0;
  double box_radius = -1.0;
  double gauge_k = 0.5;
};

struct LoopOpts {
  RegionOpts region;
  std::vector<double> sigma;
  double radius = -1.0;
  double horizon = 100.0;
  double loop_tol = 1e-5;
};

struct ShadowOpts {
  ChainOpts chain;
  double epsilon = -1.0;
  bool estimate = false;
  std::string rule = "plain";
  double slope_eps = 0.05;
};

struct SweepOpts {
  ChainOpts chain;
  std::string over = "N";
  std::vector<std::string> values;
  std::string rule = "plain";
  double slope_eps = 0.05;
  double close = -1.0;  // refined candidates below this score are tallied; negative: r / 2
};

struct PseudoOpts {
  ChainOpts chain;
  std::string validate;
};

struct ChainrecOpts {
  RegionOpts region;
  double box_size = 0.02;
  double T = 1.0;
};

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string read_text(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw UsageError(std::string(what) + " not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

VectorFieldDef resolve_field(const GlobalOpts& g) {
  if (g.field.empty()) throw UsageError("--field is required (builtin id or definition file)");
  ParamMap overrides;
  for (const auto& kv : g.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--param expects name=value, got '" + kv + "'");
    try {
      overrides[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--param value is not a number: '" + kv + "'");
    }
  }
  const auto ids = builtin_ids();
  if (std::find(ids.begin(), ids.end(), g.field) != ids.end()) return builtin_field(g.field, overrides);
  return parse_field_definition(read_text(g.field, "field file"), overrides);
}

Vec point_arg(const std::vector<double>& v, const VectorFieldDef& f, const char* name) {
  if (v.empty()) throw UsageError(std::string("--") + name + " is required here");
  if (v.size() != f.dimension())
    throw UsageError(std::string("--") + name + " has " + std::to_string(v.size()) + " coordinates, field has " +
                     std::to_string(f.dimension()));
  return to_vec(v);
}

Region resolve_region(const RegionOpts& r, const VectorFieldDef& f, bool required) {
  const auto n = static_cast<Eigen::Index>(f.dimension());
  if (r.lo.empty() && r.hi.empty()) {
    if (f.constraint() == Constraint::UnitSphere) return {Vec::Constant(n, -1.1), Vec::Constant(n, 1.1)};
    if (required) throw UsageError("--lo and --hi are required for this field");
    return {Vec::Constant(n, -30.0), Vec::Constant(n, 30.0)};
  }
  Region reg{point_arg(r.lo, f, "lo"), point_arg(r.hi, f, "hi")};
  if ((reg.hi - reg.lo).minCoeff() <= 0.0) throw UsageError("region needs lo < hi in every coordinate");
  return reg;
}

BoxNeighborhood box_for(const VectorFieldDef& f, const Vec& sigma, double radius) {
  const auto cert = classify_singularity(f, sigma);
  const double r = radius > 0 ? radius : default_box_radius(f, cert);
  return make_box(f, sigma, cert, r);
}

GaugeFunction gauge_for(const VectorFieldDef& f, const ChainOpts& c) {
  std::vector<Vec> sing;
  if (!c.sigma.empty()) {
    sing.push_back(point_arg(c.sigma, f, "sigma"));
  } else {
    for (const auto& s : find_singularities(f, resolve_region({}, f, false), 12)) sing.push_back(s.location);
  }
  return GaugeFunction::linear(f, sing, c.gauge_k);
}

PseudoOrbit build_chain(const VectorFieldDef& f, const ChainOpts& c, const GlobalOpts& g) {
  if (!c.chain.empty()) {
    std::ifstream in(c.chain);
    if (!in) throw UsageError("chain file not found: " + c.chain);
    PseudoOrbit po = read_pseudo_orbit_jsonl(in);
    if (po.rule == JumpRule::Gauge) po.gauge = gauge_for(f, c);
    return po;
  }
  if (c.builder == "slice") {
    if (c.durations.empty()) throw UsageError("slice builder needs --durations");
    return slice_orbit(f, point_arg(c.x0, f, "x0"), c.durations, c.delta, g.tol);
  }
  if (c.builder == "kicked") return build_kicked_chain(f, point_arg(c.x0, f, "x0"), c.segments, c.delta, g.seed, c.tmin, c.tmax);
  if (c.builder == "loop") {
    const Vec sigma = point_arg(c.sigma, f, "sigma");
    const Vec x0 = point_arg(c.x0, f, "x0");
    double t0 = c.t0;
    if (t0 <= 0) {
      const auto ret = first_return_time(f, x0, 100.0, 1.0, 1e-2, 1e-11);
      if (!ret) throw PreconditionError("no return of --x0 within time 100; pass --t0");
      t0 = *ret;
    }
    return build_loop_multiplication_chain(f, sigma, x0, t0, c.N, static_cast<std::size_t>(std::max(c.tail, 0)),
                                           c.delta);
  }
  if (c.builder == "rescaled") {
    const auto box = box_for(f, point_arg(c.sigma, f, "sigma"), c.box_radius);
    return build_rescaled_chain(f, box, gauge_for(f, c)).orbit;
  }
  throw UsageError("unknown --builder '" + c.builder + "' (slice, kicked, loop, rescaled)");
}

ShadowRule rule_for(const std::string& name, double slope_eps, const PseudoOrbit& po, const VectorFieldDef& f,
                    const ChainOpts& c) {
  if (name == "plain") return ShadowRule::plain();
  if (name == "strong") return ShadowRule::strong(slope_eps);
  if (name == "rescaled") return ShadowRule::rescaled(po.gauge ? *po.gauge : gauge_for(f, c));
  throw UsageError("unknown --rule '" + name + "' (plain, strong, rescaled)");
}

SearchOptions search_for(const VectorFieldDef& f, const ChainOpts& c, const GlobalOpts& g) {
  SearchOptions so;
  so.budget = g.budget;
  so.seed = g.seed;
  so.tol = g.tol;
  if (!c.sigma.empty()) so.box = box_for(f, point_arg(c.sigma, f, "sigma"), c.box_radius);
  return so;
}

struct Run {
  const GlobalOpts& g;
  const VectorFieldDef& field;
  std::string command;
  std::string config_hash;
  std::ostream& out;

  Json header() const {
    return {{"tool", "orbitshade"},
            {"version", kToolVersion},
            {"command", command},
            {"field", g.field},
            {"seed", g.seed},
            {"config_hash", config_hash}};
  }
  std::string csv_header() const {
    return "# orbitshade " + std::string(kToolVersion) + " command=" + command + " field=" + g.field +
           " seed=" + std::to_string(g.seed) + " config_hash=" + config_hash + "\n";
  }
  fs::path path(const std::string& name) const { return fs::path(g.out) / name; }
  void write(const std::string& name, const std::string& body) const {
    std::ofstream os(path(name), std::ios::binary);
    if (!os) throw UsageError("cannot write output file: " + path(name).string());
    os << body;
  }
  void write_json(const std::string& name, Json body) const {
    Json j = header();
    for (auto& [k, v] : body.items()) j[k] = v;
    write(name, j.dump(2) + "\n");
  }
};

void cmd_singularities(const Run& run, const RegionOpts& ro) {
  const Region region = resolve_region(ro, run.field, false);
  Json list = Json::array();
  int hyperbolic = 0;
  for (const auto& s : find_singularities(run.field, region, ro.density)) {
    Json e{{"location", vec_json(s.location)}, {"residual", s.residual}};
    try {
      const auto cert = classify_singularity(run.field, s.location);
      hyperbolic += cert.hyperbolic ? 1 : 0;
      e["certificate"] = certificate_json(cert);
    } catch (const PreconditionError& err) {
      e["certificate_error"] = err.what();
    }
    list.push_back(std::move(e));
  }
  run.write_json("singularities.json", {{"region", {{"lo", vec_json(region.lo)}, {"hi", vec_json(region.hi)}}},
                                        {"singularities", list}});
  run.out << list.size() << " singularities (" << hyperbolic << " hyperbolic) -> "
          << run.path("singularities.json").string() << "\n";
  for (const auto& e : list) {
    run.out << "  " << e["location"].dump();
    if (e.contains("certificate"))
      run.out << " " << e["certificate"]["category"].get<std::string>() << " u=" << e["certificate"]["unstable_index"];
    run.out << "\n";
  }
}

void cmd_loops(const Run& run, const LoopOpts& lo) {
  LoopDetectionOptions opt;
  opt.horizon = lo.horizon;
  opt.tol = lo.loop_tol;
  std::vector<SaddleLoops> saddles;
  if (!lo.sigma.empty()) {
    const Vec sigma = point_arg(lo.sigma, run.field, "sigma");
    const auto box = box_for(run.field, sigma, lo.radius);
    saddles.push_back({sigma, box.r(), hl_bound_report(run.field, box, opt)});
  } else {
    saddles = detect_loops_in_region(run.field, resolve_region(lo.region, run.field, false), opt, lo.region.density);
  }
  Json list = Json::array();
  int total = 0, N = 0;
  for (std::size_t k = 0; k < saddles.size(); ++k) {
    const auto& s = saddles[k];
    list.push_back({{"sigma", vec_json(s.sigma)}, {"box_radius", s.box_radius}, {"report", hl_report_json(s.report)}});
    total += s.report.loops_found;
    N = std::max(N, s.report.max_crossings);
    for (const auto& w : s.report.witnesses) {
      std::ostringstream os;
      os << run.csv_header();
      write_polyline_csv(os, w.polyline, run.field.coordinates());
      run.write("loop_s" + std::to_string(k) + "_b" + std::to_string(w.branch) + ".csv", os.str());
    }
  }
  run.write_json("loops.json", {{"horizon", opt.horizon}, {"detection_tol", opt.tol}, {"saddles", list}});
  run.out << total << " loops at " << saddles.size() << " saddles, max crossings N = " << N << " -> "
          << run.path("loops.json").string() << "\n";
}

void cmd_pseudo(const Run& run, const PseudoOpts& po_opts) {
  if (!po_opts.validate.empty()) {
    ChainOpts c = po_opts.chain;
    c.chain = po_opts.validate;
    const PseudoOrbit po = build_chain(run.field, c, run.g);
    const auto rep = validate(run.field, po);
    Json j{{"valid", rep.valid},
           {"max_jump", rep.max_jump},
           {"max_ratio", rep.max_ratio},
           {"failed_rule", rep.failed_rule},
           {"size", po.size()}};
    j["first_violation"] = rep.first_violation ? Json(*rep.first_violation) : Json();
    run.write_json("validation.json", j);
    run.out << (rep.valid ? "valid" : "invalid") << " chain of " << po.size() << " entries, max jump "
            << rep.max_jump << " -> " << run.path("validation.json").string() << "\n";
    return;
  }
  const PseudoOrbit po = build_chain(run.field, po_opts.chain, run.g);
  std::ostringstream os;
  write_pseudo_orbit_jsonl(os, run.field, po, run.header());
  run.write("chain.jsonl", os.str());
  const auto rep = validate(run.field, po);
  run.out << po.size() << " entries, " << (rep.valid ? "valid" : "invalid") << ", max jump " << rep.max_jump
          << " -> " << run.path("chain.jsonl").string() << "\n";
}

void cmd_shadow(const Run& run, const ShadowOpts& so_opts) {
  const PseudoOrbit po = build_chain(run.field, so_opts.chain, run.g);
  const ShadowRule rule = rule_for(so_opts.rule, so_opts.slope_eps, po, run.field, so_opts.chain);
  const SearchOptions so = search_for(run.field, so_opts.chain, run.g);
  ShadowingResult r;
  if (so_opts.estimate) {
    r = shadowing_distance_estimate(run.field, po, rule, so);
  } else {
    if (so_opts.epsilon <= 0 && rule.kind != ShadowRuleKind::Rescaled)
      throw UsageError("--epsilon > 0 is required (or pass --estimate)");
    r = shadow_search(run.field, po, so_opts.epsilon, rule, so);
  }
  run.write_json("shadow.json", {{"chain_size", po.size()}, {"result", shadow_result_json(r)}});
  run.out << r.status_name() << ": achieved " << r.achieved << " with " << r.budget_spent << " candidates";
  if (r.crossing_count_of_witness) run.out << ", witness crossings " << *r.crossing_count_of_witness;
  run.out << " -> " << run.path("shadow.json").string() << "\n";
}

void cmd_sweep(const Run& run, const SweepOpts& sw) {
  std::vector<double> values;
  for (const auto& tok : sw.values) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    try {
      values.push_back(std::stod(tok, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || tok.find_first_not_of(" \t", used) != std::string::npos)
      throw UsageError("sweep value is not a number: '" + tok + "'");
  }
  if (values.empty()) throw UsageError("sweep needs a non-empty --values list");
  if (sw.over != "N" && sw.over != "delta") throw UsageError("--over must be N or delta");
  const SearchOptions so = search_for(run.field, sw.chain, run.g);
  const double close = sw.close > 0 ? sw.close : (so.box ? 0.5 * so.box->r() : -1.0);
  std::ostringstream os;
  os << run.csv_header();
  os << "over,value,estimate,score,budget_spent,witness_crossings,twice_N,refined_close,min_crossings_close\n";
  for (double v : values) {
    ChainOpts c = sw.chain;
    if (sw.over == "N") {
      if (v < 0 || v != std::floor(v)) throw UsageError("N values must be non-negative integers");
      c.N = static_cast<int>(v);
    } else {
      c.delta = v;
    }
    const PseudoOrbit po = build_chain(run.field, c, run.g);
    const ShadowRule rule = rule_for(sw.rule, sw.slope_eps, po, run.field, c);
    const auto r = shadowing_distance_estimate(run.field, po, rule, so);
    int n_close = 0, min_cross = -1;
    for (const auto& cand : r.refined) {
      if (close > 0 && cand.score < close) {
        ++n_close;
        if (cand.crossing_count) min_cross = min_cross < 0 ? *cand.crossing_count : std::min(min_cross, *cand.crossing_count);
      }
    }
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%d,%d,%d,%d,%d\n", sw.over.c_str(), v, r.achieved, r.score,
                  r.budget_spent, r.crossing_count_of_witness ? *r.crossing_count_of_witness : -1,
                  sw.over == "N" ? 2 * c.N : -1, n_close, min_cross);
    os << buf;
    run.out << sw.over << " = " << v << ": estimate " << r.achieved << "\n";
  }
  run.write("sweep.csv", os.str());
  run.out << "-> " << run.path("sweep.csv").string() << "\n";
}

void cmd_chainrec(const Run& run, const ChainrecOpts& co) {
  const Region region = resolve_region(co.region, run.field, true);
  ChainRecurrenceOptions opt;
  opt.T = co.T;
  const auto r = chain_recurrence_classes(run.field, region, co.box_size, opt);
  std::ostringstream os;
  os << run.csv_header();
  write_classes_csv(os, r);
  run.write("chainrec.csv", os.str());
  Json sizes = Json::array();
  for (const auto& c : r.classes) sizes.push_back(c.size());
  run.write_json("chainrec.json", {{"box_size", co.box_size},
                                   {"active_boxes", r.box_ids.size()},
                                   {"classes", r.classes.size()},
                                   {"class_sizes", sizes},
                                   {"singular_boxes", r.singular_boxes},
                                   {"failed_boxes", r.failed_boxes}});
  run.out << r.classes.size() << " classes over " << r.box_ids.size() << " active boxes -> "
          << run.path("chainrec.csv").string() << "\n";
}

void add_region(CLI::App* app, RegionOpts& r) {
  app->add_option("--lo", r.lo, "region lower corner, comma separated")->delimiter(',');
  app->add_option("--hi", r.hi, "region upper corner, comma separated")->delimiter(',');
  app->add_option("--density", r.density, "seed grid points per axis")->check(CLI::PositiveNumber);
}

void add_chain(CLI::App* app, ChainOpts& c) {
  app->add_option("--chain", c.chain, "pseudo-orbit JSONL file written by `pseudo`");
  app->add_option("--builder", c.builder, "slice | kicked | loop | rescaled");
  app->add_option("--x0", c.x0, "start point")->delimiter(',');
  app->add_option("--sigma", c.sigma, "saddle point (loop and rescaled chains, crossing counts)")->delimiter(',');
  app->add_option("--durations", c.durations, "segment durations (slice)")->delimiter(',');
  app->add_option("--N", c.N, "loop multiplicity (loop)")->check(CLI::NonNegativeNumber);
  app->add_option("--t0", c.t0, "loop period; default: first return of x0");
  app->add_option("--tail", c.tail, "tail copies of sigma (loop)");
  app->add_option("--delta", c.delta, "jump bound")->check(CLI::PositiveNumber);
  app->add_option("--segments", c.segments, "segments (kicked)")->check(CLI::PositiveNumber);
  app->add_option("--tmin", c.tmin, "shortest segment (kicked)");
  app->add_option("--tmax", c.tmax, "longest segment (kicked)");
  app->add_option("--box-radius", c.box_radius, "box radius at sigma; default: automatic");
  app->add_option("--gauge-k", c.gauge_k, "gauge slope, g(s) = k s");
}

// CLI11 renders the parsed state as config text; drop the lines that only
// locate files so moving the output keeps the hash.
std::string canonical_config(const CLI::App& app) {
  std::istringstream in(app.config_to_str(true, false));
  std::string line, keep;
  while (std::getline(in, line)) {
    if (line.rfind("out=", 0) == 0 || line.rfind("config=", 0) == 0) continue;
    keep += line + "\n";
  }
  return keep;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"orbitshade: shadowing experiments for flows near hyperbolic saddles", "orbitshade"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value file, one [section] per subcommand");
  app.set_version_flag("--version", kToolVersion);
  GlobalOpts g;
  app.add_option("--field", g.field, "builtin id or field definition file")->configurable();
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--budget", g.budget, "candidate evaluations per search")->check(CLI::PositiveNumber);
  app.add_option("--tol", g.tol, "integration tolerance")->check(CLI::PositiveNumber);
  app.add_option("--param", g.params, "parameter override name=value (repeatable)");

  RegionOpts sing_region;
  auto* sing = app.add_subcommand("singularities", "locate and classify singularities");
  add_region(sing, sing_region);

  LoopOpts loops;
  auto* lp = app.add_subcommand("loops", "detect homoclinic loops and crossing counts");
  add_region(lp, loops.region);
  lp->add_option("--sigma", loops.sigma, "saddle; default: every saddle in the region")->delimiter(',');
  lp->add_option("--radius", loops.radius, "box radius; default: automatic");
  lp->add_option("--horizon", loops.horizon, "branch integration time")->check(CLI::PositiveNumber);
  lp->add_option("--loop-tol", loops.loop_tol, "detection tolerance, chart units")->check(CLI::PositiveNumber);

  PseudoOpts pseudo;
  auto* ps = app.add_subcommand("pseudo", "build or validate a pseudo-orbit");
  add_chain(ps, pseudo.chain);
  ps->add_option("--validate", pseudo.validate, "validate this chain file instead of building one");

  ShadowOpts shadow;
  auto* sh = app.add_subcommand("shadow", "search for a shadowing true orbit");
  add_chain(sh, shadow.chain);
  sh->add_option("--epsilon", shadow.epsilon, "shadowing tolerance");
  sh->add_flag("--estimate", shadow.estimate, "report the best distance found instead of a yes/no");
  sh->add_option("--rule", shadow.rule, "plain | strong | rescaled");
  sh->add_option("--slope-eps", shadow.slope_eps, "slope bound of the strong rule");

  SweepOpts sweep;
  auto* sw = app.add_subcommand("sweep", "shadowing distance estimates over N or delta");
  add_chain(sw, sweep.chain);
  sw->add_option("--over", sweep.over, "N | delta");
  sw->add_option("--values", sweep.values, "sweep values, comma separated")->delimiter(',');
  sw->add_option("--rule", sweep.rule, "plain | strong | rescaled");
  sw->add_option("--slope-eps", sweep.slope_eps, "slope bound of the strong rule");
  sw->add_option("--close", sweep.close, "score below which refined candidates are tallied; default r/2");

  ChainrecOpts chainrec;
  auto* cr = app.add_subcommand("chainrec", "chain-recurrence classes on a box grid");
  add_region(cr, chainrec.region);
  cr->add_option("--box-size", chainrec.box_size, "grid cell size")->check(CLI::PositiveNumber);
  cr->add_option("--T", chainrec.T, "minimum flow time per edge")->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const VectorFieldDef field = resolve_field(g);
    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec) throw UsageError("cannot create output directory " + g.out + ": " + ec.message());
    const CLI::App* sub = app.get_subcommands().front();
    Run run{g, field, sub->get_name(), hex64(fnv1a64(canonical_config(app))), out};
    out << std::setprecision(10);
    if (sub == sing) cmd_singularities(run, sing_region);
    else if (sub == lp) cmd_loops(run, loops);
    else if (sub == ps) cmd_pseudo(run, pseudo);
    else if (sub == sh) cmd_shadow(run, shadow);
    else if (sub == sw) cmd_sweep(run, sweep);
    else cmd_chainrec(run, chainrec);
    return kExitOk;
  } catch (const IntegrationError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const FieldError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace orbitshade
