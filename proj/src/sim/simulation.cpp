#include "gridwatch/sim/simulation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gridwatch/probing/window.hpp"

namespace gridwatch::sim {

double actual_power(const Scenario& scn, const dopf::ReferenceSchedule& refs, grid::ProsumerId id,
                    int k) {
  const double p_ref = refs.p_ref(id);
  for (const auto& inj : scn.injections) {
    if (inj.target == id && inj.active(k)) return inj.apply(p_ref);
  }
  return p_ref;
}

std::vector<probing::ProbeSample> synthesize_probes(const Scenario& scn, const grid::Network& net,
                                                    const dopf::ReferenceSchedule& refs, int k,
                                                    LineSplit split) {
  std::vector<double> flow_ab(net.lines().size(), 0.0);
  std::vector<double> loss(net.lines().size(), 0.0);
  const auto weight = [&](const grid::TieLine& l) {
    const double w = split == LineSplit::kDc ? std::abs(l.admittance.imag()) : std::abs(l.admittance);
    return w > 0.0 ? w : std::abs(l.admittance);
  };

  for (const auto& comp : net.components()) {
    if (comp.size() < 2) continue;
    const auto index = [&](grid::ProsumerId id) {
      return static_cast<Eigen::Index>(std::lower_bound(comp.begin(), comp.end(), id) - comp.begin());
    };
    std::vector<std::size_t> lines;
    for (std::size_t e = 0; e < net.lines().size(); ++e) {
      if (std::binary_search(comp.begin(), comp.end(), net.lines()[e].a)) lines.push_back(e);
    }
    const auto n = static_cast<Eigen::Index>(comp.size());
    Eigen::VectorXd r(n);
    double imbalance = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      r(i) = actual_power(scn, refs, comp[static_cast<std::size_t>(i)], k);
      imbalance += r(i);
    }
    double total_w = 0.0;
    for (auto e : lines) total_w += weight(net.lines()[e]);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (auto e : lines) {
      const auto& l = net.lines()[e];
      const double w = weight(l);
      loss[e] = imbalance * w / total_w;
      const auto a = index(l.a), b = index(l.b);
      r(a) -= 0.5 * loss[e];
      r(b) -= 0.5 * loss[e];
      lap(a, a) += w;
      lap(b, b) += w;
      lap(a, b) -= w;
      lap(b, a) -= w;
    }
    const auto slack = net.slack();
    const Eigen::Index ground =
        slack && std::binary_search(comp.begin(), comp.end(), *slack) ? index(*slack) : 0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != ground) keep.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd reduced(m, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index x = 0; x < m; ++x) {
      rhs(x) = r(keep[static_cast<std::size_t>(x)]);
      for (Eigen::Index y = 0; y < m; ++y) {
        reduced(x, y) = lap(keep[static_cast<std::size_t>(x)], keep[static_cast<std::size_t>(y)]);
      }
    }
    const Eigen::VectorXd sol = reduced.ldlt().solve(rhs);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    for (Eigen::Index x = 0; x < m; ++x) theta(keep[static_cast<std::size_t>(x)]) = sol(x);
    for (auto e : lines) {
      const auto& l = net.lines()[e];
      flow_ab[e] = weight(l) * (theta(index(l.a)) - theta(index(l.b)));
    }
  }

  std::vector<probing::ProbeSample> out;
  out.reserve(net.lines().size() * 2 * static_cast<std::size_t>(scn.samples));
  for (std::size_t e = 0; e < net.lines().size(); ++e) {
    const auto& l = net.lines()[e];
    const double at_a = flow_ab[e] + 0.5 * loss[e];
    const double at_b = -flow_ab[e] + 0.5 * loss[e];
    for (int s = 1; s <= scn.samples; ++s) out.push_back({k, l.a, l.b, s, at_a});
    for (int s = 1; s <= scn.samples; ++s) out.push_back({k, l.b, l.a, s, at_b});
  }
  return out;
}

Simulation::Simulation(Scenario scn, grid::Network net,
                       std::shared_ptr<const mitigation::ReferenceProvider> provider,
                       std::optional<ProbeReplay> replay)
    : scn_(std::move(scn)),
      provider_(std::move(provider)),
      replay_(std::move(replay)),
      world_{net, {}, detection::DetectorBank(net), probing::MessageBus(net), 0, 0, 0} {
  scn_.validate();
  validate_against(scn_, net);
  if (!provider_) throw ValidationError("reference", "no reference provider");
  world_.schedule = provider_->schedule(net, 0, 1);
  if (auto missing = world_.schedule.first_missing(net)) {
    throw ValidationError("reference." + grid::to_string(*missing), "missing prosumer");
  }
}

bool Simulation::finished() const noexcept { return stopped_ || world_.k >= scn_.horizon; }

void Simulation::set_drop_rule(probing::MessageBus::DropRule rule) {
  world_.bus.set_drop_rule(std::move(rule));
}

namespace {

struct PairResult {
  PairRow row;
  std::optional<mitigation::IsolationVote> vote;
  mitigation::PenaltyRecord record;
};

}  // namespace

void Simulation::step(SimTrace& trace) {
  if (finished()) return;
  const int k = world_.k + 1;
  auto& w = world_;
  const auto& net = w.network;
  try {
    // 1. probes
    std::vector<probing::ProbeSample> samples;
    if (replay_) {
      if (auto it = replay_->find(k); it != replay_->end()) {
        for (const auto& s : it->second) {
          if (net.contains(s.from) && net.contains(s.to) && net.line_between(s.from, s.to)) {
            samples.push_back(s);
          }
        }
      }
    } else {
      const auto split = scn_.reference.mode == ReferenceConfig::Mode::kSolve ? LineSplit::kDc
                                                                              : LineSplit::kAdmittance;
      samples = synthesize_probes(scn_, net, w.schedule, k, split);
    }
    probing::publish_probes(w.bus, k, samples);
    w.bus.deliver(k);
    trace.probes.insert(trace.probes.end(), samples.begin(), samples.end());

    // 2-6. per observer: mismatch, dead zone, detector, penalty, vote
    std::vector<grid::ProsumerId> order;
    for (const auto& p : net.prosumers()) order.push_back(p.id);
    std::mt19937_64 rng(scn_.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k)));
    std::shuffle(order.begin(), order.end(), rng);

    std::map<std::pair<grid::ProsumerId, grid::ProsumerId>, PairResult> results;
    for (auto observer : order) {
      for (auto target : net.neighbors(observer)) {
        auto& state = w.detectors.at(observer, target);
        PairResult pr;
        pr.row.interval = k;
        pr.row.epoch = w.epoch;
        pr.row.target = target;
        pr.row.observer = observer;
        std::optional<probing::MismatchReport> report;
        try {
          const auto window = probing::collect_window(w.bus, observer, target, k, scn_.samples);
          report = probing::energy_mismatch(window, w.schedule, scn_.tau_min);
        } catch (const probing::IncompleteWindow&) {
          report.reset();
        }
        if (report) {
          const double d = probing::dead_zone(report->d_mw, scn_.detector.eps_dz);
          const auto upd = detection::update_factor(state, d, scn_.detector, k);
          state = upd.state;
          pr.row.d_raw_mw = report->d_mw;
          pr.row.d_mw = d;
          pr.row.rate = upd.rate;
          pr.row.decay = upd.decay;
        } else {
          state.k = k;
          pr.row.skipped = true;
        }
        pr.row.factor = state.factor;
        pr.row.saturated = state.saturated;
        pr.record = {observer, target, k, state.factor,
                     mitigation::neighbor_penalty(state.factor, scn_.penalty.c)};
        pr.row.penalty_raw = pr.record.penalty.raw;
        pr.row.penalty = pr.record.penalty.value;
        pr.row.saturated = pr.row.saturated || pr.record.penalty.saturated;
        if (!pr.row.skipped) pr.vote = mitigation::check_threshold(pr.record, scn_.penalty.c_th);
        pr.row.vote = pr.vote.has_value();
        results.emplace(std::make_pair(target, observer), std::move(pr));
      }
    }

    // 7. utility decisions, in id order
    std::vector<mitigation::UtilityDecision> decisions;
    for (const auto& p : net.prosumers()) {
      TargetRow tr;
      tr.interval = k;
      tr.epoch = w.epoch;
      tr.target = p.id;
      tr.actual_mw = actual_power(scn_, w.schedule, p.id, k);
      tr.p_ref_mw = w.schedule.p_ref(p.id);
      std::vector<mitigation::PenaltyRecord> records;
      std::vector<mitigation::IsolationVote> votes;
      for (auto it = results.lower_bound({p.id, grid::ProsumerId{std::numeric_limits<int>::min()}});
           it != results.end() && it->first.first == p.id; ++it) {
        trace.pairs.push_back(it->second.row);
        if (!it->second.row.skipped) records.push_back(it->second.record);
        if (it->second.vote) votes.push_back(*it->second.vote);
      }
      if (!records.empty()) tr.aggregated_penalty = mitigation::aggregate_penalty(records, p.id, k).value;
      const auto d = mitigation::utility_decide(votes, net, p.id, k, scn_.penalty.vote_ratio);
      tr.votes = d.votes_received;
      tr.neighbor_count = d.neighbor_count;
      tr.vote_ratio = d.neighbor_count ? static_cast<double>(d.votes_received) /
                                             static_cast<double>(d.neighbor_count)
                                       : 0.0;
      tr.isolated = d.isolated;
      tr.slack_protected = d.slack_protected;
      trace.targets.push_back(tr);
      if (d.isolated) decisions.push_back(d);
    }

    // 8. mitigation, effective from the next interval
    for (const auto& d : decisions) {
      auto m = mitigation::apply_mitigation(d, w.network, w.schedule, *provider_, w.isolations, k + 1,
                                            w.detectors);
      w.network = std::move(m.network);
      w.schedule = std::move(m.schedule);
      ++w.isolations;
      ++w.epoch;
      w.bus.set_network(w.network);
      trace.events.push_back({k, d.target, k + 1, w.epoch, m.partitioned, w.schedule});
      if (scn_.stop_on_isolation) stopped_ = true;
    }
    w.bus.discard_before(k);
  } catch (const SimulationError&) {
    throw;
  } catch (const Error& e) {
    throw SimulationError(k, e.what());
  }
  w.k = k;
  trace.intervals_run = k;
}

SimTrace Simulation::run() {
  SimTrace trace;
  while (!finished()) step(trace);
  return trace;
}

std::shared_ptr<const mitigation::ReferenceProvider> make_provider(const Scenario& scn,
                                                                   dopf::DopfOptions options) {
  if (scn.reference.mode == ReferenceConfig::Mode::kSolve) {
    return std::make_shared<mitigation::SolverReferenceProvider>(options);
  }
  return std::make_shared<mitigation::FixedReferenceProvider>(scn.reference.values,
                                                              scn.reference.post_isolation_values);
}

SimTrace run_scenario(const Scenario& scn, const grid::Network& net, std::optional<ProbeReplay> replay,
                      dopf::DopfOptions options) {
  Simulation sim(scn, net, make_provider(scn, options), std::move(replay));
  return sim.run();
}

std::optional<int> isolation_interval(const SimTrace& trace, grid::ProsumerId target) {
  for (const auto& e : trace.events) {
    if (e.target == target) return e.interval;
  }
  return std::nullopt;
}

double ThresholdWindow::midpoint() const noexcept {
  return std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
}

std::optional<ThresholdWindow> calibrate_threshold(const Scenario& scn, const grid::Network& net,
                                                   grid::ProsumerId target, int k, double rel_tol) {
  Scenario probe = scn;
  probe.horizon = k;
  probe.stop_on_isolation = true;
  const auto provider = make_provider(probe);
  // Interval of the first isolation of target, or k + 1 when it does not
  // happen by k; nondecreasing in the threshold.
  const auto when = [&](double c_th) {
    probe.penalty.c_th = c_th;
    Simulation sim(probe, net, provider);
    const auto trace = sim.run();
    const auto at = isolation_interval(trace, target);
    return at ? *at : k + 1;
  };
  // Smallest threshold t with when(t) >= level, or +inf.
  const auto boundary = [&](int level) {
    double lo = std::numeric_limits<double>::min();
    if (when(lo) >= level) return lo;
    double hi = std::max(1.0, scn.penalty.c_th);
    while (when(hi) < level) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi) || hi > mitigation::kPenaltyCap / 4) {
        return std::numeric_limits<double>::infinity();
      }
    }
    while (hi - lo > rel_tol * hi) {
      const double mid = 0.5 * (lo + hi);
      if (when(mid) >= level) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  };
  ThresholdWindow win;
  win.lo = boundary(k);
  win.hi = boundary(k + 1);
  if (!std::isfinite(win.lo) || !(win.lo < win.hi)) return std::nullopt;
  return win;
}

}  // namespace gridwatch::sim
