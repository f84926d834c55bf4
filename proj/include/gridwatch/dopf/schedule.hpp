#pragma once

#include <map>
#include <optional>

#include "gridwatch/grid/network.hpp"

namespace gridwatch::dopf {

struct ScheduleEntry {
  double p_mw = 0.0;    // agreed net active power (generation positive)
  double q_mvar = 0.0;  // computed by the solver, informational only
};

/// Agreed net power per prosumer, valid from an interval index onward.
class ReferenceSchedule {
 public:
  ReferenceSchedule() = default;
  ReferenceSchedule(std::map<grid::ProsumerId, ScheduleEntry> entries, int valid_from = 0)
      : entries_(std::move(entries)), valid_from_(valid_from) {}

  const std::map<grid::ProsumerId, ScheduleEntry>& entries() const noexcept { return entries_; }
  int valid_from() const noexcept { return valid_from_; }
  bool empty() const noexcept { return entries_.empty(); }
  bool covers(grid::ProsumerId id) const { return entries_.count(id) > 0; }
  /// Throws ValidationError when `id` has no entry.
  double p_ref(grid::ProsumerId id) const;
  std::optional<grid::ProsumerId> first_missing(const grid::Network& net) const;
  double total_p_mw() const;

  ReferenceSchedule with_valid_from(int k) const { return {entries_, k}; }

  friend bool operator==(const ReferenceSchedule&, const ReferenceSchedule&) = default;

 private:
  std::map<grid::ProsumerId, ScheduleEntry> entries_;
  int valid_from_ = 0;
};

bool operator==(const ScheduleEntry& a, const ScheduleEntry& b);

/// Schedule holding exactly `values_mw`. Throws ValidationError naming the first
/// prosumer of `net` without a value. Entries for prosumers absent from `net`
/// are kept.
ReferenceSchedule fixed_reference(const grid::Network& net,
                                  const std::map<grid::ProsumerId, double>& values_mw,
                                  int valid_from = 0);

}  // namespace gridwatch::dopf
