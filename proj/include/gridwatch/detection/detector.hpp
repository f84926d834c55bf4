#pragma once

#include <map>
#include <utility>
#include <vector>

#include "gridwatch/grid/network.hpp"

namespace gridwatch::detection {

struct DetectorParams {
  double n0 = 3.0;      // decay divisor in normal operation, > 1
  double a = 1.0;       // rate gain, > 0
  double eps_dz = 0.1;  // dead zone, MW

  /// Throws ValidationError naming the first invalid field.
  void validate() const;
};

/// Largest magnitude F may take; larger results are clamped and flagged.
inline constexpr double kFactorCap = 1e300;

/// Observer j's anomaly factor for target i.
struct DetectorState {
  grid::ProsumerId observer;
  grid::ProsumerId target;
  double factor = 0.0;  // F
  double d_prev = 0.0;  // filtered mismatch of the previous update, MW
  int k = 0;
  bool saturated = false;

  friend bool operator==(const DetectorState&, const DetectorState&) = default;
};

/// D: a (d - d_prev) when the mismatch moved, +1 / -1 when a nonzero mismatch
/// held still, 0 when it stayed at zero.
double rate_term(double d, double d_prev, double a);

/// N: 1 outside the dead zone, n0 inside it (boundary inclusive).
double decay_factor(double d, const DetectorParams& params);

struct UpdateRecord {
  DetectorState state;
  double d = 0.0;
  double rate = 0.0;   // D
  double decay = 0.0;  // N
};

/// F(k) = (F(k-1) + d D) / N. `d` must already be dead-zone filtered; `k` must
/// be state.k + 1.
UpdateRecord update_factor(const DetectorState& state, double d, const DetectorParams& params,
                           int k);

/// F = 0 and d_prev = 0; the interval index is kept.
DetectorState reset(DetectorState state);

/// All detector states of the network, keyed by (observer, target).
class DetectorBank {
 public:
  using Key = std::pair<grid::ProsumerId, grid::ProsumerId>;

  DetectorBank() = default;
  /// One fresh state per ordered neighbor pair.
  explicit DetectorBank(const grid::Network& net);

  const std::map<Key, DetectorState>& states() const noexcept { return states_; }
  const DetectorState& at(grid::ProsumerId observer, grid::ProsumerId target) const;
  DetectorState& at(grid::ProsumerId observer, grid::ProsumerId target);
  bool contains(grid::ProsumerId observer, grid::ProsumerId target) const;
  std::size_t size() const noexcept { return states_.size(); }

  /// Deletes every state referencing `id` and resets the rest. Returns the
  /// number of deleted states.
  std::size_t remove_and_reset(grid::ProsumerId id);
  void reset_all();

 private:
  std::map<Key, DetectorState> states_;
};

}  // namespace gridwatch::detection
