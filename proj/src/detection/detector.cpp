#include "gridwatch/detection/detector.hpp"

#include <cmath>

#include "gridwatch/common/error.hpp"

namespace gridwatch::detection {

void DetectorParams::validate() const {
  if (!(n0 > 1.0) || !std::isfinite(n0)) throw ValidationError("detector.n0", "must exceed 1");
  if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("detector.a", "must be positive");
  if (!(eps_dz > 0.0) || !std::isfinite(eps_dz)) {
    throw ValidationError("detector.eps_dz_mw", "must be positive");
  }
}

double rate_term(double d, double d_prev, double a) {
  if (!std::isfinite(d) || !std::isfinite(d_prev) || !std::isfinite(a)) {
    throw ValidationError("rate_term", "inputs must be finite");
  }
  if (d != d_prev) return a * (d - d_prev);
  if (d > 0.0) return 1.0;
  if (d < 0.0) return -1.0;
  return 0.0;
}

double decay_factor(double d, const DetectorParams& params) {
  if (!std::isfinite(d)) throw ValidationError("decay_factor", "mismatch must be finite");
  return std::abs(d) > params.eps_dz ? 1.0 : params.n0;
}

UpdateRecord update_factor(const DetectorState& state, double d, const DetectorParams& params,
                           int k) {
  if (k != state.k + 1) {
    throw ValidationError("detector", "interval " + std::to_string(k) + " does not follow " +
                                          std::to_string(state.k));
  }
  UpdateRecord r;
  r.d = d;
  r.rate = rate_term(d, state.d_prev, params.a);
  r.decay = decay_factor(d, params);
  r.state = state;
  double f = (state.factor + d * r.rate) / r.decay;
  if (!std::isfinite(f) || std::abs(f) > kFactorCap) {
    f = std::signbit(f) ? -kFactorCap : kFactorCap;
    r.state.saturated = true;
  }
  r.state.factor = f;
  r.state.d_prev = d;
  r.state.k = k;
  return r;
}

DetectorState reset(DetectorState state) {
  state.factor = 0.0;
  state.d_prev = 0.0;
  state.saturated = false;
  return state;
}

DetectorBank::DetectorBank(const grid::Network& net) {
  for (const auto& p : net.prosumers()) {
    for (auto j : net.neighbors(p.id)) {
      DetectorState s;
      s.observer = j;
      s.target = p.id;
      states_.emplace(Key{j, p.id}, s);
    }
  }
}

const DetectorState& DetectorBank::at(grid::ProsumerId observer, grid::ProsumerId target) const {
  auto it = states_.find({observer, target});
  if (it == states_.end()) {
    throw ValidationError("detector", "no state for observer " + grid::to_string(observer) +
                                          ", target " + grid::to_string(target));
  }
  return it->second;
}

DetectorState& DetectorBank::at(grid::ProsumerId observer, grid::ProsumerId target) {
  return const_cast<DetectorState&>(std::as_const(*this).at(observer, target));
}

bool DetectorBank::contains(grid::ProsumerId observer, grid::ProsumerId target) const {
  return states_.count({observer, target}) > 0;
}

std::size_t DetectorBank::remove_and_reset(grid::ProsumerId id) {
  std::size_t removed = 0;
  for (auto it = states_.begin(); it != states_.end();) {
    if (it->first.first == id || it->first.second == id) {
      it = states_.erase(it);
      ++removed;
    } else {
      it->second = reset(it->second);
      ++it;
    }
  }
  return removed;
}

void DetectorBank::reset_all() {
  for (auto& [k, s] : states_) s = reset(s);
}

}  // namespace gridwatch::detection
