#pragma once

#include <map>
#include <vector>

#include "gridwatch/common/error.hpp"
#include "gridwatch/dopf/schedule.hpp"
#include "gridwatch/probing/message_bus.hpp"

namespace gridwatch::probing {

/// Readings of every tie line of `target` at the target's end during one
/// interval, as seen by one observer.
struct MeasurementWindow {
  int interval = 0;
  grid::ProsumerId observer;
  grid::ProsumerId target;
  int samples_per_interval = 0;  // L
  /// Per neighbor k of the target: power at sample l stored at index l - 1.
  std::map<grid::ProsumerId, std::vector<double>> lines;

  bool complete() const;
};

/// Raised when a window lacks samples at the interval's delivery deadline.
class IncompleteWindow : public Error {
 public:
  IncompleteWindow(MeasurementWindow partial, grid::ProsumerId missing_line);

  const MeasurementWindow& partial() const noexcept { return partial_; }
  grid::ProsumerId missing_line() const noexcept { return missing_; }

 private:
  MeasurementWindow partial_;
  grid::ProsumerId missing_;
};

struct MismatchReport {
  grid::ProsumerId observer;
  grid::ProsumerId target;
  int interval = 0;
  double d_mw = 0.0;        // average-power mismatch
  double raw_energy = 0.0;  // MW·min
};

/// Assembles observer's window on target from its interval inbox. Throws
/// ValidationError when target is not adjacent to observer or a neighbor of
/// target lies beyond two hops, IncompleteWindow when samples are missing.
MeasurementWindow collect_window(const MessageBus& bus, grid::ProsumerId observer,
                                 grid::ProsumerId target, int interval, int samples_per_interval);

/// raw_energy = (tau/L) sum_l (sum_k p_ik(l) - p_ref), d = raw_energy / tau.
/// Positive d means the target delivered more than agreed.
MismatchReport energy_mismatch(const MeasurementWindow& window, const dopf::ReferenceSchedule& ref,
                               double tau_min);

/// Zero when |d| <= eps_dz, otherwise d.
double dead_zone(double d, double eps_dz);

}  // namespace gridwatch::probing
