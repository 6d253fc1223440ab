#pragma once

#include "orbitshade/chain_recurrence.hpp"
#include "orbitshade/homoclinic.hpp"
#include "orbitshade/local_model.hpp"
#include "orbitshade/pseudo_orbit.hpp"
#include "orbitshade/shadowing.hpp"
#include "orbitshade/singularity.hpp"

#include <json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace orbitshade {

using Json = nlohmann::json;

Json vec_json(const Vec& v);
Vec json_vec(const Json& j);

// Eigenvalues as [re, im] pairs, frames as lists of columns.
Json certificate_json(const HyperbolicityCertificate& cert);
Json witness_json(const HomoclinicWitness& w, bool with_polyline = true);
Json hl_report_json(const HLBoundReport& rep, bool with_polylines = true);
// status, witness, warp knots, achieved, budget and the settings used
Json shadow_result_json(const ShadowingResult& r);

// Crossing records: time, side (enter/exit), chart coordinates.
void write_crossings_csv(std::ostream& os, const CrossingReport& rep);

// One JSON object per line: index, point, duration, measured jump (jump from
// entry i to i+1, null on the last entry). A header line carries the chain
// metadata (rule, delta, T, tails).
void write_pseudo_orbit_jsonl(std::ostream& os, const VectorFieldDef& field, const PseudoOrbit& po,
                              const Json& provenance = Json::object());
// Reads the format above. Gauge chains need the gauge supplied separately.
PseudoOrbit read_pseudo_orbit_jsonl(std::istream& is);

// box_id, class_id, center coordinates; transient boxes get class -1.
void write_classes_csv(std::ostream& os, const ChainRecurrenceResult& r);

// Polyline as CSV with one coordinate column per dimension.
void write_polyline_csv(std::ostream& os, const std::vector<Vec>& poly, const std::vector<std::string>& names);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t h);

}  // namespace orbitshade
