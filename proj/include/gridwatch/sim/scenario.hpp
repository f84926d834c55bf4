#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "gridwatch/detection/detector.hpp"
#include "gridwatch/grid/network.hpp"
#include "gridwatch/mitigation/penalty.hpp"

namespace gridwatch::sim {

struct AnomalyInjection {
  enum class Mode { kScale, kOffset };

  grid::ProsumerId target;
  int start_k = 1;
  std::optional<int> end_k;  // exclusive; open-ended when absent
  Mode mode = Mode::kScale;
  double magnitude = 1.0;  // factor on p_ref, or MW added to it

  bool active(int k) const noexcept { return k >= start_k && (!end_k || k < *end_k); }
  double apply(double p_ref_mw) const noexcept {
    return mode == Mode::kScale ? magnitude * p_ref_mw : p_ref_mw + magnitude;
  }
};

struct ReferenceConfig {
  enum class Mode { kFixed, kSolve };

  Mode mode = Mode::kFixed;
  std::map<grid::ProsumerId, double> values;
  std::map<grid::ProsumerId, double> post_isolation_values;
};

struct Scenario {
  int horizon = 24;       // K, intervals k = 1..K
  double tau_min = 5.0;   // interval length
  int samples = 30;       // L per interval
  std::uint64_t seed = 0;
  bool stop_on_isolation = false;
  detection::DetectorParams detector;
  mitigation::PenaltyParams penalty;
  ReferenceConfig reference;
  std::vector<AnomalyInjection> injections;

  /// Checks the value invariants; throws ValidationError with the field path.
  void validate() const;
};

// Scenario documents:
//
//   sim:        { K, tau_min, L?, seed?, stop_on_isolation? }
//   detector:   { n0, a, eps_dz_mw }
//   penalty:    { c, c_th, vote_ratio? }
//   reference:  { mode: "fixed" | "solve", values?, post_isolation_values? }
//   injections: [ { target, start_k, end_k?, mode: "scale" | "offset", magnitude } ]
//
// Reference values are objects keyed by prosumer id. L defaults to 30 and
// vote_ratio to 0.5.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Cross-checks a scenario against a network: injection targets and fixed
/// reference values must name known prosumers and cover all of them.
void validate_against(const Scenario& scn, const grid::Network& net);

}  // namespace gridwatch::sim
