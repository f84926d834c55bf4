#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "gridwatch/grid/network.hpp"

namespace gridwatch::mitigation {

struct PenaltyParams {
  double c = 1.06;          // penalty base, > 1
  double c_th = 1300.0;     // per-neighbor vote threshold, > 0
  double vote_ratio = 0.5;  // fraction of neighbors needed, in (0, 1)

  void validate() const;
};

/// Sentinel for penalties whose c^F overflows.
inline constexpr double kPenaltyCap = std::numeric_limits<double>::max();

struct PenaltyValue {
  double raw = 0.0;      // c^F - 1, may be negative or infinite
  double value = 0.0;    // floored at 0, capped at kPenaltyCap
  bool saturated = false;
};

/// max(0, c^F - 1). Throws ValidationError when c <= 1 or F is NaN.
PenaltyValue neighbor_penalty(double factor, double c);

struct PenaltyRecord {
  grid::ProsumerId observer;
  grid::ProsumerId target;
  int interval = 0;
  double factor = 0.0;
  PenaltyValue penalty;
};

struct AggregatedPenalty {
  grid::ProsumerId target;
  int interval = 0;
  double value = 0.0;
  std::size_t contributors = 0;
};

/// Mean of the records for `target` at `interval`; records for other targets
/// or intervals are ignored. Throws ValidationError when none match.
AggregatedPenalty aggregate_penalty(const std::vector<PenaltyRecord>& records,
                                    grid::ProsumerId target, int interval);

struct IsolationVote {
  grid::ProsumerId observer;
  grid::ProsumerId target;
  int interval = 0;

  friend bool operator==(const IsolationVote&, const IsolationVote&) = default;
};

/// A vote iff penalty > c_th.
std::optional<IsolationVote> check_threshold(const PenaltyRecord& record, double c_th);

}  // namespace gridwatch::mitigation
