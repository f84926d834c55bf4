#include "gridwatch/sim/scenario.hpp"

#include <charconv>
#include <cmath>

#include "gridwatch/common/error.hpp"
#include "gridwatch/common/keytree.hpp"
#include "gridwatch/grid/case_file.hpp"

namespace gridwatch::sim {

namespace {

std::map<grid::ProsumerId, double> parse_values(const KeyTree& node) {
  if (!node.is_object()) throw ValidationError(node.path(), "expected an object keyed by prosumer id");
  std::map<grid::ProsumerId, double> out;
  for (const auto& [key, value] : node.members()) {
    int id = 0;
    auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || end != key.data() + key.size()) {
      throw ValidationError(value.path(), "key is not a prosumer id");
    }
    out[grid::ProsumerId{id}] = value.number();
  }
  return out;
}

}  // namespace

void Scenario::validate() const {
  if (horizon < 1) throw ValidationError("sim.K", "must be at least 1");
  if (!(tau_min > 0.0)) throw ValidationError("sim.tau_min", "must be positive");
  if (samples < 1) throw ValidationError("sim.L", "must be at least 1");
  detector.validate();
  penalty.validate();
  if (reference.mode == ReferenceConfig::Mode::kFixed && reference.values.empty()) {
    throw ValidationError("reference.values", "fixed mode needs values");
  }
  for (std::size_t n = 0; n < injections.size(); ++n) {
    const auto& inj = injections[n];
    const std::string where = "injections[" + std::to_string(n) + "]";
    if (inj.end_k && inj.start_k >= *inj.end_k) {
      throw ValidationError(where + ".end_k", "must exceed start_k");
    }
    if (!std::isfinite(inj.magnitude)) throw ValidationError(where + ".magnitude", "must be finite");
  }
}

Scenario parse_scenario(std::string_view text) {
  const auto doc = KeyTree::parse(text);
  doc.reject_unknown({"sim", "detector", "penalty", "reference", "injections"});
  Scenario s;

  const auto sim = doc.at("sim");
  sim.reject_unknown({"K", "tau_min", "L", "seed", "stop_on_isolation"});
  s.horizon = sim.at("K").integer();
  s.tau_min = sim.at("tau_min").number();
  s.samples = sim.integer_or("L", 30);
  if (auto seed = sim.find("seed")) {
    const int v = seed->integer();
    if (v < 0) throw ValidationError(seed->path(), "must be nonnegative");
    s.seed = static_cast<std::uint64_t>(v);
  }
  if (auto stop = sim.find("stop_on_isolation")) s.stop_on_isolation = stop->boolean();

  const auto det = doc.at("detector");
  det.reject_unknown({"n0", "a", "eps_dz_mw"});
  s.detector.n0 = det.at("n0").number();
  s.detector.a = det.at("a").number();
  s.detector.eps_dz = det.at("eps_dz_mw").number();

  const auto pen = doc.at("penalty");
  pen.reject_unknown({"c", "c_th", "vote_ratio"});
  s.penalty.c = pen.at("c").number();
  s.penalty.c_th = pen.at("c_th").number();
  s.penalty.vote_ratio = pen.number_or("vote_ratio", 0.5);

  const auto ref = doc.at("reference");
  ref.reject_unknown({"mode", "values", "post_isolation_values"});
  const auto mode = ref.at("mode").string();
  if (mode == "fixed") {
    s.reference.mode = ReferenceConfig::Mode::kFixed;
  } else if (mode == "solve") {
    s.reference.mode = ReferenceConfig::Mode::kSolve;
  } else {
    throw ValidationError(ref.at("mode").path(), "expected \"fixed\" or \"solve\"");
  }
  if (auto v = ref.find("values")) s.reference.values = parse_values(*v);
  if (auto v = ref.find("post_isolation_values")) s.reference.post_isolation_values = parse_values(*v);

  if (auto inj = doc.find("injections")) {
    for (const auto& node : inj->items()) {
      node.reject_unknown({"target", "start_k", "end_k", "mode", "magnitude"});
      AnomalyInjection a;
      a.target = grid::ProsumerId{node.at("target").integer()};
      a.start_k = node.at("start_k").integer();
      if (auto e = node.find("end_k"); e && !e->is_null()) a.end_k = e->integer();
      const auto m = node.at("mode").string();
      if (m == "scale") {
        a.mode = AnomalyInjection::Mode::kScale;
      } else if (m == "offset") {
        a.mode = AnomalyInjection::Mode::kOffset;
      } else {
        throw ValidationError(node.at("mode").path(), "expected \"scale\" or \"offset\"");
      }
      a.magnitude = node.at("magnitude").number();
      s.injections.push_back(a);
    }
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return parse_scenario(grid::read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.filename().string() + ":" + e.where(), e.message());
  }
}

void validate_against(const Scenario& scn, const grid::Network& net) {
  for (std::size_t n = 0; n < scn.injections.size(); ++n) {
    const auto id = scn.injections[n].target;
    if (!net.contains(id)) {
      throw ValidationError("injections[" + std::to_string(n) + "].target",
                            "unknown prosumer " + grid::to_string(id));
    }
  }
  if (scn.reference.mode != ReferenceConfig::Mode::kFixed) return;
  const auto check = [&](const std::map<grid::ProsumerId, double>& values, const std::string& where) {
    for (const auto& [id, v] : values) {
      if (!net.contains(id)) {
        throw ValidationError(where + "." + grid::to_string(id), "unknown prosumer");
      }
    }
  };
  check(scn.reference.values, "reference.values");
  check(scn.reference.post_isolation_values, "reference.post_isolation_values");
  for (const auto& p : net.prosumers()) {
    if (!scn.reference.values.count(p.id)) {
      throw ValidationError("reference.values." + grid::to_string(p.id), "missing prosumer");
    }
  }
}

}  // namespace gridwatch::sim
