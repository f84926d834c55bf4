#include "gridwatch/grid/network.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "gridwatch/common/error.hpp"

namespace gridwatch::grid {

std::string to_string(ProsumerId id) { return std::to_string(id.value); }

std::ostream& operator<<(std::ostream& os, ProsumerId id) { return os << id.value; }

namespace {

void check_bounds(const Bounds& b, const std::string& where) {
  if (!std::isfinite(b.min) || !std::isfinite(b.max)) {
    throw ValidationError(where, "bounds must be finite");
  }
  if (!b.valid()) throw ValidationError(where, "min exceeds max");
}

}  // namespace

Network Network::create(double base_mva, std::vector<Prosumer> prosumers,
                        std::vector<TieLine> lines, bool require_connected) {
  if (!(base_mva > 0.0) || !std::isfinite(base_mva)) {
    throw ValidationError("system.base_mva", "must be positive");
  }
  std::sort(prosumers.begin(), prosumers.end(),
            [](const Prosumer& x, const Prosumer& y) { return x.id < y.id; });

  int slack_count = 0;
  for (std::size_t k = 0; k < prosumers.size(); ++k) {
    const auto& p = prosumers[k];
    const std::string where = "prosumer " + to_string(p.id);
    if (k > 0 && prosumers[k - 1].id == p.id) throw ValidationError(where, "duplicate id");
    check_bounds(p.p_mw, where + ".p");
    check_bounds(p.q_mvar, where + ".q");
    check_bounds(p.v_pu, where + ".v");
    if (p.v_pu.min <= 0.0) throw ValidationError(where + ".v", "v_min must be positive");
    if (!std::isfinite(p.load_p_mw) || !std::isfinite(p.load_q_mvar)) {
      throw ValidationError(where, "load must be finite");
    }
    if (p.cost.c2 < 0.0) throw ValidationError(where + ".c2", "cost must be convex (c2 >= 0)");
    if (p.is_slack) ++slack_count;
  }
  if (!prosumers.empty()) {
    if (slack_count == 0) throw ValidationError("system.slack", "no slack bus");
    if (slack_count > 1) throw ValidationError("system.slack", "multiple slack buses");
  }

  Network net;
  net.base_mva_ = base_mva;
  net.prosumers_ = std::move(prosumers);
  net.incidence_.assign(net.prosumers_.size(), {});

  std::set<std::pair<ProsumerId, ProsumerId>> seen;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& line = lines[li];
    const std::string where = "line " + to_string(line.a) + "-" + to_string(line.b);
    if (!net.contains(line.a)) throw ValidationError(where, "unknown prosumer " + to_string(line.a));
    if (!net.contains(line.b)) throw ValidationError(where, "unknown prosumer " + to_string(line.b));
    if (line.a == line.b) throw ValidationError(where, "self loop");
    if (line.admittance == std::complex<double>(0.0, 0.0)) {
      throw ValidationError(where, "zero admittance");
    }
    if (!std::isfinite(line.admittance.real()) || !std::isfinite(line.admittance.imag())) {
      throw ValidationError(where, "admittance must be finite");
    }
    const auto key = std::minmax(line.a, line.b);
    if (!seen.insert(key).second) throw ValidationError(where, "duplicate tie line");
    net.incidence_[net.index_of(line.a)].push_back(li);
    net.incidence_[net.index_of(line.b)].push_back(li);
  }
  net.lines_ = std::move(lines);

  for (std::size_t k = 0; k < net.prosumers_.size(); ++k) {
    const ProsumerId self = net.prosumers_[k].id;
    std::sort(net.incidence_[k].begin(), net.incidence_[k].end(),
              [&](std::size_t x, std::size_t y) {
                return net.lines_[x].other(self) < net.lines_[y].other(self);
              });
  }

  if (require_connected) {
    const auto comps = net.components();
    if (comps.size() > 1) {
      throw ValidationError("prosumer " + to_string(comps[1].front()),
                            "disconnected from prosumer " + to_string(comps[0].front()));
    }
  }
  return net;
}

bool Network::contains(ProsumerId id) const noexcept {
  auto it = std::lower_bound(prosumers_.begin(), prosumers_.end(), id,
                             [](const Prosumer& p, ProsumerId v) { return p.id < v; });
  return it != prosumers_.end() && it->id == id;
}

std::size_t Network::index_of(ProsumerId id) const {
  auto it = std::lower_bound(prosumers_.begin(), prosumers_.end(), id,
                             [](const Prosumer& p, ProsumerId v) { return p.id < v; });
  if (it == prosumers_.end() || it->id != id) {
    throw ValidationError("prosumer " + to_string(id), "unknown id");
  }
  return static_cast<std::size_t>(it - prosumers_.begin());
}

const Prosumer& Network::prosumer(ProsumerId id) const { return prosumers_[index_of(id)]; }

std::optional<ProsumerId> Network::slack() const noexcept {
  for (const auto& p : prosumers_) {
    if (p.is_slack) return p.id;
  }
  return std::nullopt;
}

std::vector<ProsumerId> Network::neighbors(ProsumerId id) const {
  std::vector<ProsumerId> out;
  for (auto li : incidence_[index_of(id)]) out.push_back(lines_[li].other(id));
  return out;
}

std::vector<ProsumerId> Network::two_hop(ProsumerId id) const {
  std::set<ProsumerId> out;
  for (auto n : neighbors(id)) {
    out.insert(n);
    for (auto nn : neighbors(n)) out.insert(nn);
  }
  out.erase(id);
  return {out.begin(), out.end()};
}

std::vector<std::size_t> Network::incident_lines(ProsumerId id) const {
  return incidence_[index_of(id)];
}

std::optional<std::size_t> Network::line_between(ProsumerId a, ProsumerId b) const {
  for (auto li : incidence_[index_of(a)]) {
    if (lines_[li].other(a) == b) return li;
  }
  return std::nullopt;
}

std::vector<std::vector<ProsumerId>> Network::components() const {
  std::vector<std::vector<ProsumerId>> out;
  std::vector<bool> seen(prosumers_.size(), false);
  for (std::size_t start = 0; start < prosumers_.size(); ++start) {
    if (seen[start]) continue;
    std::vector<ProsumerId> comp;
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
      const auto k = stack.back();
      stack.pop_back();
      const auto id = prosumers_[k].id;
      comp.push_back(id);
      for (auto li : incidence_[k]) {
        const auto other = index_of(lines_[li].other(id));
        if (!seen[other]) {
          seen[other] = true;
          stack.push_back(other);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

IsolationResult isolate(const Network& net, ProsumerId id) {
  const auto& target = net.prosumer(id);
  if (target.is_slack) {
    throw ValidationError("prosumer " + to_string(id), "cannot isolate the slack bus");
  }
  std::vector<Prosumer> keep;
  for (const auto& p : net.prosumers()) {
    if (p.id != id) keep.push_back(p);
  }
  std::vector<TieLine> lines;
  for (const auto& l : net.lines()) {
    if (!l.touches(id)) lines.push_back(l);
  }
  IsolationResult result{Network::create(net.base_mva(), std::move(keep), std::move(lines), false),
                         false,
                         {}};
  result.components = result.network.components();
  result.partitioned = result.components.size() > 1;
  return result;
}

std::complex<double> series(std::complex<double> a, std::complex<double> b) {
  return a * b / (a + b);
}

DecoupledNetwork decouple(const Network& net) {
  DecoupledNetwork dec(net);
  dec.pairs_.reserve(net.lines().size());
  for (std::size_t li = 0; li < net.lines().size(); ++li) {
    const auto& l = net.lines()[li];
    dec.pairs_.push_back(AuxPair{li, l.a, l.b, 2.0 * l.admittance});
  }
  return dec;
}

std::vector<std::size_t> DecoupledNetwork::pairs_of(ProsumerId id) const {
  // pair index equals line index
  return base_.incident_lines(id);
}

}  // namespace gridwatch::grid
