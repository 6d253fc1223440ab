#include "orbitshade/serialize.hpp"

#include <cmath>
#include <cstdio>

namespace orbitshade {

namespace {

// nlohmann writes non-finite numbers as null; keep them readable instead
Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json frame_json(const Mat& m) {
  Json cols = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) cols.push_back(vec_json(m.col(c)));
  return cols;
}

const char* rule_name(JumpRule r) { return r == JumpRule::Uniform ? "uniform" : "gauge"; }

}  // namespace

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(number(v[k]));
  return a;
}

Vec json_vec(const Json& j) {
  if (!j.is_array()) throw Error("expected a coordinate list");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  return v;
}

Json certificate_json(const HyperbolicityCertificate& cert) {
  Json ev = Json::array();
  for (const auto& z : cert.eigenvalues) ev.push_back({z.real(), z.imag()});
  const char* cat = "non-hyperbolic";
  bool index_one = false;
  if (cert.hyperbolic) {
    const IndexInfo info = index_category(cert);
    cat = info.category == IndexCategory::Sink ? "sink" : info.category == IndexCategory::Source ? "source" : "saddle";
    index_one = info.is_index_one;
  }
  return {{"sigma", vec_json(cert.sigma)},
          {"eigenvalues", ev},
          {"stable_index", cert.stable_index},
          {"unstable_index", cert.unstable_index},
          {"spectral_gap", cert.spectral_gap},
          {"growth_constant", number(cert.growth_constant)},
          {"hyperbolic", cert.hyperbolic},
          {"category", cat},
          {"index_one", index_one},
          {"stable_frame", frame_json(cert.stable_frame)},
          {"unstable_frame", frame_json(cert.unstable_frame)}};
}

Json witness_json(const HomoclinicWitness& w, bool with_polyline) {
  Json j{{"sigma", vec_json(w.sigma)},
         {"p", vec_json(w.p)},
         {"branch", w.branch},
         {"transit_time", w.transit_time},
         {"closeness", w.closeness},
         {"crossings", w.crossings},
         {"seed_eta", w.seed_eta}};
  if (with_polyline) {
    Json poly = Json::array();
    for (const Vec& v : w.polyline) poly.push_back(vec_json(v));
    j["polyline"] = std::move(poly);
  }
  return j;
}

Json hl_report_json(const HLBoundReport& rep, bool with_polylines) {
  Json ws = Json::array();
  for (const auto& w : rep.witnesses) ws.push_back(witness_json(w, with_polylines));
  return {{"branch_count", rep.branch_count},
          {"loops_found", rep.loops_found},
          {"max_crossings", rep.max_crossings},
          {"bound_applies", rep.bound_applies},
          {"witnesses", ws}};
}

Json shadow_result_json(const ShadowingResult& r) {
  Json knots = Json::array();
  for (const auto& [t, h] : r.warp.knots) knots.push_back({t, h});
  Json refined = Json::array();
  for (const auto& c : r.refined) {
    Json e{{"y", vec_json(c.y)}, {"score", number(c.score)}, {"h_end", number(c.h_end)}};
    if (c.crossing_count) e["crossing_count"] = *c.crossing_count;
    refined.push_back(std::move(e));
  }
  const auto& s = r.settings;
  Json j{{"status", r.status_name()},
         {"rule", r.rule},
         {"epsilon", number(r.epsilon)},
         {"witness", vec_json(r.witness_y)},
         {"warp_knots", knots},
         {"warp_max_deviation", r.warp.knots.empty() ? Json(0.0) : number(r.warp.max_deviation())},
         {"achieved", number(r.achieved)},
         {"score", number(r.score)},
         {"budget_spent", r.budget_spent},
         {"refined", refined},
         {"settings",
          {{"dt", s.dt},
           {"samples", s.samples},
           {"span", s.span},
           {"tol", s.tol},
           {"tail_horizon", s.tail_horizon},
           {"band_time", s.band_time},
           {"tail_before", s.tail_before},
           {"tail_after", s.tail_after}}}};
  j["crossing_count"] = r.crossing_count_of_witness ? Json(*r.crossing_count_of_witness) : Json();
  return j;
}

void write_crossings_csv(std::ostream& os, const CrossingReport& rep) {
  os << "time,side,grazing,vs_norm,vu_norm\n";
  char buf[160];
  for (const auto& c : rep.crossings) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%d,%.17g,%.17g\n", c.t, c.entering ? "enter" : "exit", c.grazing ? 1 : 0,
                  c.chart.ns(), c.chart.nu());
    os << buf;
  }
}

void write_pseudo_orbit_jsonl(std::ostream& os, const VectorFieldDef& field, const PseudoOrbit& po,
                              const Json& provenance) {
  Json head{{"kind", "pseudo-orbit"},
            {"rule", rule_name(po.rule)},
            {"delta", po.delta},
            {"T", po.T},
            {"finite", po.finite},
            {"size", po.size()},
            {"tail_before", po.tail_before},
            {"tail_after", po.tail_after}};
  if (po.tail_point_before) head["tail_point_before"] = vec_json(*po.tail_point_before);
  if (po.tail_point_after) head["tail_point_after"] = vec_json(*po.tail_point_after);
  if (po.gauge) head["gauge"] = po.gauge->description();
  for (const auto& [k, v] : provenance.items()) head[k] = v;
  os << head.dump() << '\n';
  const ValidationReport rep = validate(field, po);
  for (std::size_t i = 0; i < po.size(); ++i) {
    Json line{{"index", i}, {"point", vec_json(po.entries[i].x)}, {"duration", po.entries[i].t}};
    line["jump"] = i < rep.jumps.size() ? number(rep.jumps[i]) : Json();
    os << line.dump() << '\n';
  }
}

PseudoOrbit read_pseudo_orbit_jsonl(std::istream& is) {
  std::string line;
  PseudoOrbit po;
  bool have_head = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("malformed chain JSON: ") + e.what(), static_cast<int>(lineno), 1);
    }
    if (!have_head) {
      if (j.value("kind", "") != "pseudo-orbit") throw ParseError("chain file lacks the pseudo-orbit header", static_cast<int>(lineno), 1);
      po.rule = j.value("rule", "uniform") == "gauge" ? JumpRule::Gauge : JumpRule::Uniform;
      po.delta = j.value("delta", 0.0);
      po.T = j.value("T", 1.0);
      po.finite = j.value("finite", true);
      po.tail_before = j.value("tail_before", std::size_t{0});
      po.tail_after = j.value("tail_after", std::size_t{0});
      if (j.contains("tail_point_before")) po.tail_point_before = json_vec(j["tail_point_before"]);
      if (j.contains("tail_point_after")) po.tail_point_after = json_vec(j["tail_point_after"]);
      have_head = true;
      continue;
    }
    po.entries.push_back({json_vec(j.at("point")), j.at("duration").get<double>()});
  }
  if (!have_head) throw Error("empty chain file");
  return po;
}

void write_classes_csv(std::ostream& os, const ChainRecurrenceResult& r) {
  os << "box_id,class_id";
  for (Eigen::Index k = 0; k < r.lo.size(); ++k) os << ",c" << k;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < r.box_ids.size(); ++i) {
    os << r.box_ids[i] << ',' << r.class_of[i];
    const Vec c = r.center(r.box_ids[i]);
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g", c[k]);
      os << buf;
    }
    os << '\n';
  }
}

void write_polyline_csv(std::ostream& os, const std::vector<Vec>& poly, const std::vector<std::string>& names) {
  for (std::size_t k = 0; k < names.size(); ++k) os << (k ? "," : "") << names[k];
  os << '\n';
  char buf[64];
  for (const Vec& v : poly) {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%s%.17g", k ? "," : "", v[k]);
      os << buf;
    }
    os << '\n';
  }
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace orbitshade
