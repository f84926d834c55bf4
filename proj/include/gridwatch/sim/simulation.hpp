#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "gridwatch/common/error.hpp"
#include "gridwatch/detection/detector.hpp"
#include "gridwatch/dopf/schedule.hpp"
#include "gridwatch/mitigation/utility.hpp"
#include "gridwatch/probing/message_bus.hpp"
#include "gridwatch/sim/scenario.hpp"

namespace gridwatch::sim {

/// How a prosumer's net power is spread over its tie lines.
enum class LineSplit {
  kAdmittance,  // weights |y|
  kDc,          // weights |b|, as a DC power flow would
};

/// Net power prosumer `id` actually delivers at interval k: p_ref, or the
/// injected value when an injection is active (the first listed wins).
double actual_power(const Scenario& scn, const dopf::ReferenceSchedule& refs, grid::ProsumerId id,
                    int k);

/// L identical readings per line end and interval. Each prosumer's per-sample
/// neighbor sum equals its actual power. Whatever the injections do not cancel
/// is booked as line losses, split over lines by weight and shared equally
/// between the two ends; the rest flows along a weighted-Laplacian solution.
/// Isolated prosumers produce no samples.
std::vector<probing::ProbeSample> synthesize_probes(const Scenario& scn, const grid::Network& net,
                                                    const dopf::ReferenceSchedule& refs, int k,
                                                    LineSplit split);

/// One (interval, target, observer) row.
struct PairRow {
  int interval = 0;
  int epoch = 0;
  grid::ProsumerId target;
  grid::ProsumerId observer;
  bool skipped = false;  // incomplete window, state carried over
  double d_raw_mw = 0.0;
  double d_mw = 0.0;  // after the dead zone
  double rate = 0.0;
  double decay = 0.0;
  double factor = 0.0;
  double penalty_raw = 0.0;
  double penalty = 0.0;
  bool saturated = false;
  bool vote = false;
};

/// One (interval, target) summary row; targets without neighbors are listed
/// with zero counts.
struct TargetRow {
  int interval = 0;
  int epoch = 0;
  grid::ProsumerId target;
  double actual_mw = 0.0;
  double p_ref_mw = 0.0;
  std::optional<double> aggregated_penalty;  // absent when every window was skipped
  std::size_t votes = 0;
  std::size_t neighbor_count = 0;
  double vote_ratio = 0.0;
  bool isolated = false;
  bool slack_protected = false;
};

struct IsolationEvent {
  int interval = 0;  // decision interval
  grid::ProsumerId target;
  int effective_from = 0;
  int epoch_after = 0;
  bool partitioned = false;
  dopf::ReferenceSchedule schedule;  // references from effective_from on
};

struct SimTrace {
  std::vector<PairRow> pairs;      // ordered by (interval, target, observer)
  std::vector<TargetRow> targets;  // ordered by (interval, target)
  std::vector<IsolationEvent> events;
  std::vector<probing::ProbeSample> probes;
  int intervals_run = 0;
};

/// Probe readings replayed instead of synthesized, keyed by interval.
using ProbeReplay = std::map<int, std::vector<probing::ProbeSample>>;

struct World {
  grid::Network network;
  dopf::ReferenceSchedule schedule;
  detection::DetectorBank detectors;
  probing::MessageBus bus;
  int k = 0;  // last completed interval
  int epoch = 0;
  int isolations = 0;
};

/// A module error raised while running interval `interval`.
class SimulationError : public Error {
 public:
  SimulationError(int interval, const std::string& what)
      : Error("interval " + std::to_string(interval) + ": " + what), interval_(interval) {}

  int interval() const noexcept { return interval_; }

 private:
  int interval_;
};

class Simulation {
 public:
  /// Fetches the initial schedule from `provider` and validates the scenario
  /// against the network.
  Simulation(Scenario scn, grid::Network net, std::shared_ptr<const mitigation::ReferenceProvider> provider,
             std::optional<ProbeReplay> replay = std::nullopt);

  const World& world() const noexcept { return world_; }
  const Scenario& scenario() const noexcept { return scn_; }
  bool finished() const noexcept;

  /// Runs interval world().k + 1 through its eight phases and appends its rows
  /// to `trace`. Module errors are rethrown as Error naming the interval.
  void step(SimTrace& trace);
  SimTrace run();

  /// Drops every envelope matching the rule; used to model lost messages.
  void set_drop_rule(probing::MessageBus::DropRule rule);

 private:
  Scenario scn_;
  std::shared_ptr<const mitigation::ReferenceProvider> provider_;
  std::optional<ProbeReplay> replay_;
  World world_;
  bool stopped_ = false;
};

/// Provider matching the scenario's reference mode.
std::shared_ptr<const mitigation::ReferenceProvider> make_provider(const Scenario& scn,
                                                                   dopf::DopfOptions options = {});

/// Runs scn on net with a provider made from the scenario.
SimTrace run_scenario(const Scenario& scn, const grid::Network& net,
                      std::optional<ProbeReplay> replay = std::nullopt,
                      dopf::DopfOptions options = {});

/// [lo, hi) of thresholds C_th for which `target` is first isolated at
/// interval `k`; hi is infinite when any larger threshold still isolates at k.
struct ThresholdWindow {
  double lo = 0.0;
  double hi = 0.0;
  double midpoint() const noexcept;
};

/// Bisects C_th to relative width `rel_tol`. Returns nullopt when no threshold
/// isolates `target` exactly at `k`.
std::optional<ThresholdWindow> calibrate_threshold(const Scenario& scn, const grid::Network& net,
                                                   grid::ProsumerId target, int k,
                                                   double rel_tol = 1e-12);

/// First interval at which `target` is isolated, if any.
std::optional<int> isolation_interval(const SimTrace& trace, grid::ProsumerId target);

}  // namespace gridwatch::sim
