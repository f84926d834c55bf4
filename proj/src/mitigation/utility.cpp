#include "gridwatch/mitigation/utility.hpp"

#include <algorithm>
#include <set>

#include "gridwatch/common/error.hpp"

namespace gridwatch::mitigation {

UtilityDecision utility_decide(const std::vector<IsolationVote>& votes, const grid::Network& net,
                               grid::ProsumerId target, int interval, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("penalty.vote_ratio", "must lie in (0, 1)");
  }
  if (!net.contains(target)) {
    throw ValidationError("utility", "unknown prosumer " + grid::to_string(target));
  }
  const auto nbrs = net.neighbors(target);
  std::set<grid::ProsumerId> voters;
  for (const auto& v : votes) {
    if (v.target != target || v.interval != interval) {
      throw ValidationError("utility", "vote by " + grid::to_string(v.observer) +
                                           " is for another target or interval");
    }
    if (!std::binary_search(nbrs.begin(), nbrs.end(), v.observer)) {
      throw ValidationError("utility", "vote from non-neighbor " + grid::to_string(v.observer));
    }
    voters.insert(v.observer);
  }
  UtilityDecision d;
  d.target = target;
  d.interval = interval;
  d.votes_received = voters.size();
  d.neighbor_count = nbrs.size();
  d.vote_ratio_required = ratio;
  const bool met = !nbrs.empty() && static_cast<double>(voters.size()) /
                                            static_cast<double>(nbrs.size()) > ratio;
  const bool slack = net.prosumer(target).is_slack;
  d.isolated = met && !slack;
  d.slack_protected = met && slack;
  return d;
}

FixedReferenceProvider::FixedReferenceProvider(std::map<grid::ProsumerId, double> initial,
                                               std::map<grid::ProsumerId, double> post_isolation)
    : initial_(std::move(initial)), post_(std::move(post_isolation)) {}

dopf::ReferenceSchedule FixedReferenceProvider::schedule(const grid::Network& net, int isolations,
                                                         int valid_from) const {
  const auto& values = isolations == 0 || post_.empty() ? initial_ : post_;
  return dopf::fixed_reference(net, values, valid_from);
}

namespace {

grid::Network subnetwork(const grid::Network& net, const std::vector<grid::ProsumerId>& ids) {
  std::vector<grid::Prosumer> ps;
  for (auto id : ids) ps.push_back(net.prosumer(id));
  std::vector<grid::TieLine> ls;
  for (const auto& l : net.lines()) {
    if (std::binary_search(ids.begin(), ids.end(), l.a) &&
        std::binary_search(ids.begin(), ids.end(), l.b)) {
      ls.push_back(l);
    }
  }
  return grid::Network::create(net.base_mva(), std::move(ps), std::move(ls));
}

}  // namespace

dopf::ReferenceSchedule SolverReferenceProvider::schedule(const grid::Network& net, int,
                                                          int valid_from) const {
  std::map<grid::ProsumerId, dopf::ScheduleEntry> entries;
  const auto slack = net.slack();
  for (const auto& comp : net.components()) {
    if (slack && std::binary_search(comp.begin(), comp.end(), *slack)) {
      const auto result = dopf::solve_dopf(grid::decouple(subnetwork(net, comp)), options_);
      iterations_.push_back(result.iterations);
      for (const auto& [id, e] : result.schedule.entries()) entries[id] = e;
      continue;
    }
    for (auto id : comp) {
      const auto& p = net.prosumer(id);
      const double gen = std::clamp(p.load_p_mw, p.p_mw.min, p.p_mw.max);
      const double qgen = std::clamp(p.load_q_mvar, p.q_mvar.min, p.q_mvar.max);
      entries[id] = dopf::ScheduleEntry{gen - p.load_p_mw, qgen - p.load_q_mvar};
    }
  }
  return dopf::ReferenceSchedule(std::move(entries), valid_from);
}

MitigationResult apply_mitigation(const UtilityDecision& decision, const grid::Network& net,
                                  const dopf::ReferenceSchedule& current,
                                  const ReferenceProvider& provider, int isolations,
                                  int valid_from, detection::DetectorBank& detectors) {
  if (!decision.isolated) return MitigationResult{net, current, false, 0};
  auto cut = grid::isolate(net, decision.target);
  MitigationResult r{cut.network, {}, cut.partitioned, 0};
  r.schedule = provider.schedule(r.network, isolations + 1, valid_from);
  r.removed_states = detectors.remove_and_reset(decision.target);
  return r;
}

}  // namespace gridwatch::mitigation
