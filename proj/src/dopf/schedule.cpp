#include "gridwatch/dopf/schedule.hpp"

#include "gridwatch/common/error.hpp"

namespace gridwatch::dopf {

bool operator==(const ScheduleEntry& a, const ScheduleEntry& b) {
  return a.p_mw == b.p_mw && a.q_mvar == b.q_mvar;
}

double ReferenceSchedule::p_ref(grid::ProsumerId id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw ValidationError("reference." + grid::to_string(id), "no reference value for prosumer");
  }
  return it->second.p_mw;
}

std::optional<grid::ProsumerId> ReferenceSchedule::first_missing(const grid::Network& net) const {
  for (const auto& p : net.prosumers()) {
    if (!covers(p.id)) return p.id;
  }
  return std::nullopt;
}

double ReferenceSchedule::total_p_mw() const {
  double s = 0.0;
  for (const auto& [id, e] : entries_) s += e.p_mw;
  return s;
}

ReferenceSchedule fixed_reference(const grid::Network& net,
                                  const std::map<grid::ProsumerId, double>& values_mw,
                                  int valid_from) {
  std::map<grid::ProsumerId, ScheduleEntry> entries;
  for (const auto& [id, v] : values_mw) entries[id] = ScheduleEntry{v, 0.0};
  ReferenceSchedule s(std::move(entries), valid_from);
  if (auto missing = s.first_missing(net)) {
    throw ValidationError("reference." + grid::to_string(*missing), "missing prosumer");
  }
  return s;
}

}  // namespace gridwatch::dopf
