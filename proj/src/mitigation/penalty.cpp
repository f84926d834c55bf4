#include "gridwatch/mitigation/penalty.hpp"

#include <cmath>

#include "gridwatch/common/error.hpp"

namespace gridwatch::mitigation {

void PenaltyParams::validate() const {
  if (!(c > 1.0) || !std::isfinite(c)) throw ValidationError("penalty.c", "must exceed 1");
  if (!(c_th > 0.0) || !std::isfinite(c_th)) throw ValidationError("penalty.c_th", "must be positive");
  if (!(vote_ratio > 0.0 && vote_ratio < 1.0)) {
    throw ValidationError("penalty.vote_ratio", "must lie in (0, 1)");
  }
}

PenaltyValue neighbor_penalty(double factor, double c) {
  if (!(c > 1.0) || !std::isfinite(c)) throw ValidationError("penalty.c", "must exceed 1");
  if (std::isnan(factor)) throw ValidationError("penalty", "anomaly factor is NaN");
  PenaltyValue p;
  p.raw = std::expm1(factor * std::log(c));
  if (!std::isfinite(p.raw) || p.raw > kPenaltyCap) {
    p.value = kPenaltyCap;
    p.saturated = true;
  } else {
    p.value = p.raw > 0.0 ? p.raw : 0.0;
  }
  return p;
}

AggregatedPenalty aggregate_penalty(const std::vector<PenaltyRecord>& records,
                                    grid::ProsumerId target, int interval) {
  AggregatedPenalty a;
  a.target = target;
  a.interval = interval;
  double sum = 0.0;
  for (const auto& r : records) {
    if (r.target != target || r.interval != interval) continue;
    sum += r.penalty.value;
    ++a.contributors;
  }
  if (a.contributors == 0) {
    throw ValidationError("penalty", "no neighbor penalty for prosumer " +
                                         grid::to_string(target) + " at interval " +
                                         std::to_string(interval));
  }
  a.value = sum / static_cast<double>(a.contributors);
  return a;
}

std::optional<IsolationVote> check_threshold(const PenaltyRecord& record, double c_th) {
  if (!(c_th > 0.0)) throw ValidationError("penalty.c_th", "must be positive");
  if (record.penalty.value > c_th) return IsolationVote{record.observer, record.target, record.interval};
  return std::nullopt;
}

}  // namespace gridwatch::mitigation
