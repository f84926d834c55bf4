#include "gridwatch/probing/window.hpp"

#include <algorithm>
#include <cmath>

namespace gridwatch::probing {

bool MeasurementWindow::complete() const {
  for (const auto& [k, v] : lines) {
    if (static_cast<int>(v.size()) != samples_per_interval) return false;
    for (double p : v) {
      if (std::isnan(p)) return false;
    }
  }
  return true;
}

IncompleteWindow::IncompleteWindow(MeasurementWindow partial, grid::ProsumerId missing_line)
    : Error("observer " + grid::to_string(partial.observer) + ", target " +
            grid::to_string(partial.target) + ", interval " + std::to_string(partial.interval) +
            ": missing samples of line " + grid::to_string(partial.target) + "-" +
            grid::to_string(missing_line)),
      partial_(std::move(partial)),
      missing_(missing_line) {}

MeasurementWindow collect_window(const MessageBus& bus, grid::ProsumerId observer,
                                 grid::ProsumerId target, int interval, int samples_per_interval) {
  const auto& net = bus.network();
  if (samples_per_interval < 1) throw ValidationError("sim.L", "must be at least 1");
  if (!net.contains(observer) || !net.contains(target) || !net.line_between(observer, target)) {
    throw ValidationError("window", "prosumer " + grid::to_string(target) +
                                        " is not a neighbor of observer " +
                                        grid::to_string(observer));
  }
  const auto reach = net.two_hop(observer);
  MeasurementWindow w;
  w.interval = interval;
  w.observer = observer;
  w.target = target;
  w.samples_per_interval = samples_per_interval;
  for (auto k : net.neighbors(target)) {
    if (k != observer && !std::binary_search(reach.begin(), reach.end(), k)) {
      throw ValidationError("window", "neighbor " + grid::to_string(k) + " of " +
                                          grid::to_string(target) + " is beyond two hops of " +
                                          grid::to_string(observer));
    }
    w.lines[k].assign(static_cast<std::size_t>(samples_per_interval), std::nan(""));
  }
  for (const auto& e : bus.inbox(observer, interval)) {
    for (const auto& s : e.samples) {
      if (s.from != target || s.interval != interval) continue;
      auto it = w.lines.find(s.to);
      if (it == w.lines.end()) continue;
      if (s.sample_index < 1 || s.sample_index > samples_per_interval) continue;
      it->second[static_cast<std::size_t>(s.sample_index - 1)] = s.power_mw;
    }
  }
  for (const auto& [k, v] : w.lines) {
    for (double p : v) {
      if (std::isnan(p)) throw IncompleteWindow(w, k);
    }
  }
  return w;
}

MismatchReport energy_mismatch(const MeasurementWindow& window, const dopf::ReferenceSchedule& ref,
                               double tau_min) {
  if (!(tau_min > 0.0)) throw ValidationError("sim.tau_min", "must be positive");
  if (!window.complete()) throw ValidationError("window", "incomplete window");
  const double p_ref = ref.p_ref(window.target);
  const int L = window.samples_per_interval;
  double deviation = 0.0;
  for (int l = 0; l < L; ++l) {
    double sum = 0.0;
    for (const auto& [k, v] : window.lines) sum += v[static_cast<std::size_t>(l)];
    deviation += sum - p_ref;
  }
  MismatchReport r;
  r.observer = window.observer;
  r.target = window.target;
  r.interval = window.interval;
  r.raw_energy = tau_min / L * deviation;
  r.d_mw = r.raw_energy / tau_min;
  return r;
}

double dead_zone(double d, double eps_dz) {
  if (!(eps_dz > 0.0)) throw ValidationError("detector.eps_dz_mw", "must be positive");
  return std::abs(d) <= eps_dz ? 0.0 : d;
}

}  // namespace gridwatch::probing
