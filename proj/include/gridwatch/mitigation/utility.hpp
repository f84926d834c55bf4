#pragma once

#include <memory>
#include <vector>

#include "gridwatch/detection/detector.hpp"
#include "gridwatch/dopf/schedule.hpp"
#include "gridwatch/dopf/solver.hpp"
#include "gridwatch/grid/network.hpp"
#include "gridwatch/mitigation/penalty.hpp"

namespace gridwatch::mitigation {

struct UtilityDecision {
  grid::ProsumerId target;
  int interval = 0;
  bool isolated = false;
  std::size_t votes_received = 0;  // distinct voters
  std::size_t neighbor_count = 0;
  double vote_ratio_required = 0.5;
  bool slack_protected = false;  // the ratio was met but the target is the slack
};

/// Isolates iff distinct voters / |N_i| > ratio. The slack is never isolated.
/// Throws ValidationError for votes on another target or interval, votes from
/// non-neighbors, or a ratio outside (0, 1).
UtilityDecision utility_decide(const std::vector<IsolationVote>& votes, const grid::Network& net,
                               grid::ProsumerId target, int interval, double ratio);

/// Source of reference schedules for a (possibly reduced) network.
class ReferenceProvider {
 public:
  virtual ~ReferenceProvider() = default;
  /// Schedule for `net` after `isolations` isolation events, valid from `valid_from`.
  virtual dopf::ReferenceSchedule schedule(const grid::Network& net, int isolations,
                                           int valid_from) const = 0;
};

/// Fixed values before any isolation and fixed values afterwards.
class FixedReferenceProvider : public ReferenceProvider {
 public:
  FixedReferenceProvider(std::map<grid::ProsumerId, double> initial,
                         std::map<grid::ProsumerId, double> post_isolation);

  dopf::ReferenceSchedule schedule(const grid::Network& net, int isolations,
                                   int valid_from) const override;

 private:
  std::map<grid::ProsumerId, double> initial_;
  std::map<grid::ProsumerId, double> post_;
};

/// Runs the distributed OPF on the component holding the slack. Prosumers cut
/// off from the slack keep their own balance: net reference = generation that
/// covers their load, clipped to bounds, minus the load.
class SolverReferenceProvider : public ReferenceProvider {
 public:
  explicit SolverReferenceProvider(dopf::DopfOptions options = {}) : options_(options) {}

  dopf::ReferenceSchedule schedule(const grid::Network& net, int isolations,
                                   int valid_from) const override;

  /// Outer iterations of every solve so far.
  const std::vector<int>& iterations() const noexcept { return iterations_; }

 private:
  dopf::DopfOptions options_;
  mutable std::vector<int> iterations_;
};

struct MitigationResult {
  grid::Network network;
  dopf::ReferenceSchedule schedule;
  bool partitioned = false;
  std::size_t removed_states = 0;
};

/// Removes the target, fetches the reduced network's schedule (valid from
/// `valid_from`), deletes the target's detector states and resets the rest.
/// A decision that did not isolate returns the inputs unchanged.
MitigationResult apply_mitigation(const UtilityDecision& decision, const grid::Network& net,
                                  const dopf::ReferenceSchedule& current,
                                  const ReferenceProvider& provider, int isolations,
                                  int valid_from, detection::DetectorBank& detectors);

}  // namespace gridwatch::mitigation
