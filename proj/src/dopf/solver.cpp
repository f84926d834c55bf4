#include "gridwatch/dopf/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <json.hpp>

#include "gridwatch/common/error.hpp"

namespace gridwatch::dopf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Subproblems::Subproblems(const grid::DecoupledNetwork& dec, FlowModel model)
    : dec_(&dec), model_(model) {
  for (const auto& p : dec.base().prosumers()) {
    models_.emplace_back(dec, p.id, model);
    offsets_.push_back(size_);
    size_ += models_.back().size();
  }
}

std::size_t Subproblems::block_of(grid::ProsumerId id) const { return dec_->base().index_of(id); }

const LocalModel& Subproblems::at(grid::ProsumerId id) const { return models_[block_of(id)]; }

std::vector<VectorXd> Subproblems::split(const VectorXd& stacked) const {
  std::vector<VectorXd> out;
  out.reserve(models_.size());
  for (std::size_t b = 0; b < models_.size(); ++b) {
    out.push_back(stacked.segment(offsets_[b], models_[b].size()));
  }
  return out;
}

VectorXd Subproblems::stack(const std::vector<VectorXd>& blocks) const {
  VectorXd out(size_);
  for (std::size_t b = 0; b < models_.size(); ++b) out.segment(offsets_[b], models_[b].size()) = blocks[b];
  return out;
}

namespace {

double pair_residual(const Subproblems& sub, std::size_t pair, const VectorXd& xi,
                     const VectorXd& xj) {
  const auto& pr = sub.decoupled().pairs()[pair];
  const auto& mi = sub.at(pr.i);
  const auto& mj = sub.at(pr.j);
  return consensus_mismatch(mi.aux(xi, mi.slot_of(pr.j)), mj.aux(xj, mj.slot_of(pr.i)), sub.model());
}

// +1 where the two sides must agree, -1 where they must cancel.
double coupling_sign(Coupled q) {
  return q == Coupled::kActive || q == Coupled::kReactive ? -1.0 : 1.0;
}

}  // namespace

ConsensusResidual consensus_residual(const Subproblems& sub, const LocalState& a,
                                     const LocalState& b, std::size_t pair) {
  const auto& pairs = sub.decoupled().pairs();
  if (pair >= pairs.size()) {
    throw ValidationError("pair " + std::to_string(pair), "no such auxiliary pair");
  }
  const auto& pr = pairs[pair];
  const LocalState* si = nullptr;
  const LocalState* sj = nullptr;
  if (a.owner == pr.i && b.owner == pr.j) {
    si = &a;
    sj = &b;
  } else if (a.owner == pr.j && b.owner == pr.i) {
    si = &b;
    sj = &a;
  } else {
    throw ValidationError("pair " + std::to_string(pair),
                          "not shared by prosumers " + grid::to_string(a.owner) + " and " +
                              grid::to_string(b.owner));
  }
  return {pair, pr.i, pr.j, pair_residual(sub, pair, si->x, sj->x)};
}

std::vector<ConsensusResidual> consensus_residuals(const Subproblems& sub,
                                                   const std::vector<VectorXd>& xs) {
  std::vector<ConsensusResidual> out;
  const auto& pairs = sub.decoupled().pairs();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs[p];
    out.push_back({p, pr.i, pr.j,
                   pair_residual(sub, p, xs[sub.block_of(pr.i)], xs[sub.block_of(pr.j)])});
  }
  return out;
}

SolverWorkspace build_derivatives(const Subproblems& sub, const std::vector<LocalState>& states) {
  if (states.size() != sub.size_of_blocks()) {
    throw ValidationError("states", "one local state per prosumer required");
  }
  SolverWorkspace ws;
  for (std::size_t b = 0; b < states.size(); ++b) {
    const auto& m = sub.models()[b];
    const auto& st = states[b];
    if (st.owner != m.owner()) throw ValidationError("states", "states out of network order");
    BlockDerivatives d;
    d.owner = st.owner;
    d.gradient = m.cost_gradient(st.x);
    d.hessian = m.cost_hessian(st.x) + m.constraint_hessian(st.x, st.kappa);
    d.hessian = 0.5 * (d.hessian + d.hessian.transpose());
    d.jacobian = m.jacobian(st.x);
    d.residual = m.residuals(st.x);
    d.active = st.at_bound;
    d.lower = m.lower();
    d.upper = m.upper();
    if (!d.gradient.allFinite() || !d.hessian.allFinite() || !d.jacobian.allFinite() ||
        !d.residual.allFinite()) {
      throw SolverError("prosumer " + grid::to_string(st.owner) + ": non-finite derivative");
    }
    ws.blocks.push_back(std::move(d));
  }
  return ws;
}

void regularize(SolverWorkspace& ws, double min_eigenvalue) {
  for (auto& b : ws.blocks) {
    if (b.hessian.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(b.hessian);
    const double lo = es.eigenvalues().minCoeff();
    b.shift = lo < min_eigenvalue ? min_eigenvalue - lo : 0.0;
    b.hessian.diagonal().array() += b.shift;
  }
  ws.regularized = true;
}

double ConsensusStep::max_abs() const {
  double m = 0.0;
  for (const auto& d : delta) {
    if (d.size() > 0) m = std::max(m, d.cwiseAbs().maxCoeff());
  }
  return m;
}

double ConsensusStep::max_multiplier() const {
  double m = coupling_dual.size() > 0 ? coupling_dual.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& k : flow_dual) {
    if (k.size() > 0) m = std::max(m, k.cwiseAbs().maxCoeff());
  }
  return m;
}

struct KktFactor {
  Eigen::FullPivLU<MatrixXd> lu;
  Index n = 0;
  std::vector<Index> flow_rows;  // first row of each block's power-flow rows
};

namespace {

// A bound held in the working set as the row  delta_var = rhs.
struct HeldBound {
  Index var = 0;
  double rhs = 0.0;
  bool upper = false;
  bool fixed = false;
};

}  // namespace

ConsensusStep consensus_step(const Subproblems& sub, const SolverWorkspace& ws,
                             const std::vector<LocalState>& states) {
  const Index n = sub.size();
  const auto& pairs = sub.decoupled().pairs();
  const auto kinds = sub.models().empty() ? std::vector<Coupled>{} : sub.models()[0].coupled_kinds();
  const Index per = static_cast<Index>(kinds.size());

  // Rows shared by every pass: linearized power flow, then coupling.
  Index m_flow = 0;
  for (const auto& b : ws.blocks) m_flow += b.jacobian.rows();
  const Index m_couple = static_cast<Index>(pairs.size()) * per;
  const Index m_fixed = m_flow + m_couple;
  MatrixXd C = MatrixXd::Zero(m_fixed, n);
  VectorXd c_rhs = VectorXd::Zero(m_fixed);
  MatrixXd H = MatrixXd::Zero(n, n);
  VectorXd g(n), y(n), lo(n), hi(n);
  Index row = 0;
  for (std::size_t b = 0; b < ws.blocks.size(); ++b) {
    const auto& d = ws.blocks[b];
    const Index off = sub.offset(b);
    const Index nb = d.gradient.size();
    H.block(off, off, nb, nb) = d.hessian;
    g.segment(off, nb) = d.gradient;
    y.segment(off, nb) = states[b].x;
    lo.segment(off, nb) = d.lower;
    hi.segment(off, nb) = d.upper;
    C.block(row, off, d.jacobian.rows(), nb) = d.jacobian;
    c_rhs.segment(row, d.jacobian.rows()) = -d.residual;
    row += d.jacobian.rows();
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs[p];
    const std::size_t bi = sub.block_of(pr.i), bj = sub.block_of(pr.j);
    const auto& mi = sub.models()[bi];
    const auto& mj = sub.models()[bj];
    const std::size_t ki = mi.slot_of(pr.j), kj = mj.slot_of(pr.i);
    for (const auto q : kinds) {
      const double s = coupling_sign(q);
      C(row, sub.offset(bi) + mi.aux_index(ki, q)) = 1.0;
      C(row, sub.offset(bj) + mj.aux_index(kj, q)) = -s;
      c_rhs(row) = -(states[bi].x(mi.aux_index(ki, q)) - s * states[bj].x(mj.aux_index(kj, q)));
      ++row;
    }
  }

  std::vector<HeldBound> held;
  std::vector<bool> is_held(static_cast<std::size_t>(n), false);
  auto hold = [&](Index v, bool upper) {
    const bool fixed = lo(v) == hi(v);
    held.push_back({v, (upper ? hi(v) : lo(v)) - y(v), upper, fixed});
    is_held[static_cast<std::size_t>(v)] = true;
  };
  auto release = [&](std::size_t k) {
    is_held[static_cast<std::size_t>(held[k].var)] = false;
    held.erase(held.begin() + static_cast<std::ptrdiff_t>(k));
  };

  ConsensusStep step;
  auto factor = std::make_shared<KktFactor>();
  // Factorizes the KKT matrix of the current working set; false when singular.
  auto factorize = [&]() {
    const Index mb = static_cast<Index>(held.size());
    const Index m = m_fixed + mb;
    MatrixXd K = MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = H;
    K.block(n, 0, m_fixed, n) = C;
    for (Index k = 0; k < mb; ++k) K(n + m_fixed + k, held[static_cast<std::size_t>(k)].var) = 1.0;
    K.topRightCorner(n, m) = K.bottomLeftCorner(m, n).transpose();
    factor->lu.compute(K);
    factor->lu.setThreshold(1e-13);
    step.rcond = factor->lu.rcond();
    return factor->lu.isInvertible() && step.rcond > 1e-16;
  };
  auto solve_full = [&]() {
    const Index mb = static_cast<Index>(held.size());
    VectorXd rhs(n + m_fixed + mb);
    rhs.head(n) = -g;
    rhs.segment(n, m_fixed) = c_rhs;
    for (Index k = 0; k < mb; ++k) rhs(n + m_fixed + k) = held[static_cast<std::size_t>(k)].rhs;
    VectorXd sol = factor->lu.solve(rhs);
    if (!sol.allFinite()) throw SingularSystemError(step.rcond);
    return sol;
  };
  // Multiplier of held bound k in the form  H d + g = sum n_j u_j, u_j >= 0.
  auto dual_of = [&](const VectorXd& sol, std::size_t k) {
    const double pi = sol(n + m_fixed + static_cast<Index>(k));
    return held[k].upper ? pi : -pi;
  };

  // Warm start from the locally active bounds when they give a dual-feasible
  // point; otherwise start from the fixed variables alone.
  for (std::size_t b = 0; b < ws.blocks.size(); ++b) {
    const auto& d = ws.blocks[b];
    for (std::size_t k = 0; k < d.active.size(); ++k) {
      if (!d.active[k]) continue;
      const Index v = sub.offset(b) + static_cast<Index>(k);
      hold(v, std::abs(hi(v) - y(v)) < std::abs(y(v) - lo(v)));
    }
  }
  VectorXd sol;
  bool warm = factorize();
  if (warm) {
    sol = solve_full();
    for (std::size_t k = 0; k < held.size() && warm; ++k) {
      warm = held[k].fixed || dual_of(sol, k) >= 0.0;
    }
  }
  if (!warm) {
    for (std::size_t k = held.size(); k-- > 0;) {
      if (!held[k].fixed) release(k);
    }
    if (!factorize()) throw SingularSystemError(step.rcond);
    sol = solve_full();
  }
  VectorXd x = sol.head(n);
  std::vector<double> u(held.size(), 0.0);
  for (std::size_t k = 0; k < held.size(); ++k) u[k] = held[k].fixed ? 0.0 : dual_of(sol, k);

  // Dual active-set iterations (Goldfarb-Idnani): add the most violated bound,
  // dropping held bounds whose multipliers reach zero on the way.
  const int max_passes = 4 * static_cast<int>(n) + 20;
  int pass = 0;
  for (;; ++pass) {
    if (pass >= max_passes) throw SolverError("consensus step: working set did not settle");
    Index p = -1;
    bool p_upper = false;
    double viol = 1e-10;
    for (Index v = 0; v < n; ++v) {
      if (is_held[static_cast<std::size_t>(v)]) continue;
      const double t = y(v) + x(v);
      if (std::isfinite(lo(v)) && lo(v) - t > viol) {
        viol = lo(v) - t;
        p = v;
        p_upper = false;
      }
      if (std::isfinite(hi(v)) && t - hi(v) > viol) {
        viol = t - hi(v);
        p = v;
        p_upper = true;
      }
    }
    if (p < 0) break;

    const double sign = p_upper ? -1.0 : 1.0;  // constraint normal is sign * e_p
    double u_p = 0.0;
    for (;; ++pass) {
      if (pass >= max_passes) throw SolverError("consensus step: working set did not settle");
      const Index mb = static_cast<Index>(held.size());
      VectorXd rhs = VectorXd::Zero(n + m_fixed + mb);
      rhs(p) = sign;
      const VectorXd zw = factor->lu.solve(rhs);
      const VectorXd z = zw.head(n);
      // Rate at which each held multiplier falls per unit of u_p.
      std::vector<double> r(held.size(), 0.0);
      double t2 = std::numeric_limits<double>::infinity();
      std::size_t drop = held.size();
      for (std::size_t k = 0; k < held.size(); ++k) {
        if (held[k].fixed) continue;
        const double w = zw(n + m_fixed + static_cast<Index>(k));
        r[k] = held[k].upper ? -w : w;
        if (r[k] > 1e-14 && u[k] / r[k] < t2) {
          t2 = u[k] / r[k];
          drop = k;
        }
      }
      const double nz = sign * z(p);
      const double remaining = p_upper ? (y(p) + x(p)) - hi(p) : lo(p) - (y(p) + x(p));
      const bool dependent = !(nz > 1e-14 * std::max(1.0, z.cwiseAbs().maxCoeff()));
      if (dependent && drop == held.size()) {
        throw SolverError("consensus step: linearized power flow cannot meet the bounds; the case may be infeasible");
      }
      const double t1 = dependent ? std::numeric_limits<double>::infinity() : remaining / nz;
      const double t = std::min(t1, t2);
      if (!dependent) x += t * z;
      for (std::size_t k = 0; k < held.size(); ++k) u[k] -= t * r[k];
      u_p += t;
      if (t1 <= t2) {
        hold(p, p_upper);
        u.push_back(u_p);
        if (!factorize()) throw SingularSystemError(step.rcond);
        break;
      }
      release(drop);
      u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
      if (!factorize()) throw SingularSystemError(step.rcond);
    }
  }
  step.passes = pass + 1;
  sol = solve_full();
  factor->n = n;
  Index fr = n;
  for (const auto& d : ws.blocks) {
    factor->flow_rows.push_back(fr);
    fr += d.jacobian.rows();
  }
  step.kkt = factor;
  const VectorXd dx = sol.head(n);
  step.delta = sub.split(dx);
  Index r = n;
  for (const auto& d : ws.blocks) {
    step.flow_dual.push_back(sol.segment(r, d.jacobian.rows()));
    r += d.jacobian.rows();
  }
  step.coupling_dual = sol.segment(n + m_flow, m_couple);
  step.model_decrease = -(g.dot(dx) + 0.5 * dx.dot(H * dx));
  return step;
}

double merit(const Subproblems& sub, const std::vector<VectorXd>& xs, double mu) {
  double cost = 0.0, violation = 0.0;
  for (std::size_t b = 0; b < xs.size(); ++b) {
    const auto& m = sub.models()[b];
    cost += m.cost(xs[b]);
    violation += m.residuals(xs[b]).lpNorm<1>();
  }
  for (const auto& r : consensus_residuals(sub, xs)) violation += r.value;
  return cost + mu * violation;
}

std::vector<VectorXd> second_order_correction(const Subproblems& sub, const ConsensusStep& step,
                                              const std::vector<VectorXd>& trial) {
  if (!step.kkt) throw SolverError("second-order correction needs a factorized step");
  const auto& f = *step.kkt;
  VectorXd rhs = VectorXd::Zero(f.lu.rows());
  for (std::size_t b = 0; b < trial.size(); ++b) {
    const VectorXd h = sub.models()[b].residuals(trial[b]);
    rhs.segment(f.flow_rows[b], h.size()) = -h;
  }
  const VectorXd sol = f.lu.solve(rhs);
  return sub.split(sol.head(f.n));
}

LineSearchResult line_search(const Subproblems& sub, const std::vector<LocalState>& states,
                             const ConsensusStep& step, double mu, double alpha_floor) {
  std::vector<VectorXd> y;
  for (const auto& s : states) y.push_back(s.x);
  LineSearchResult res;
  res.merit_start = merit(sub, y, mu);
  const double slack = 1e-14 * std::max(1.0, std::abs(res.merit_start));
  const auto accept = [&](double m) { return m <= res.merit_start + slack; };
  const auto along = [&](double alpha) {
    std::vector<VectorXd> trial = y;
    for (std::size_t b = 0; b < trial.size(); ++b) trial[b] += alpha * step.delta[b];
    return trial;
  };

  double alpha = 1.0;
  double last = res.merit_start;
  while (alpha >= alpha_floor) {
    auto trial = along(alpha);
    last = merit(sub, trial, mu);
    ++res.trials;
    if (accept(last)) {
      res.alpha = alpha;
      res.merit_accepted = last;
      res.point = std::move(trial);
      return res;
    }
    if (alpha == 1.0 && step.kkt) {
      const auto d = second_order_correction(sub, step, trial);
      auto corrected = trial;
      for (std::size_t b = 0; b < corrected.size(); ++b) corrected[b] += d[b];
      const double mc = merit(sub, corrected, mu);
      ++res.trials;
      if (std::isfinite(mc) && accept(mc)) {
        res.alpha = 1.0;
        res.corrected = true;
        res.merit_accepted = mc;
        res.point = std::move(corrected);
        return res;
      }
    }
    alpha *= 0.5;
  }
  throw LineSearchStall(alpha * 2.0, res.merit_start, last);
}

namespace {

ReferenceSchedule extract_schedule(const Subproblems& sub, const std::vector<LocalState>& states) {
  std::map<grid::ProsumerId, ScheduleEntry> entries;
  for (std::size_t b = 0; b < states.size(); ++b) {
    const auto& m = sub.models()[b];
    entries[m.owner()] = ScheduleEntry{m.net_p_mw(states[b].x), m.net_q_mvar(states[b].x)};
  }
  return ReferenceSchedule(std::move(entries));
}

}  // namespace

DopfResult solve_dopf(const grid::DecoupledNetwork& dec, const DopfOptions& opt) {
  if (!(opt.eps_consensus > 0.0)) throw ValidationError("eps_consensus", "must be positive");
  if (opt.max_iterations < 1) throw ValidationError("max_iterations", "must be at least 1");
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  Subproblems sub(dec, opt.model);
  const auto& pairs = dec.pairs();
  const std::size_t nb = sub.size_of_blocks();
  std::vector<VectorXd> xs;
  for (const auto& m : sub.models()) xs.push_back(m.flat_start());
  std::vector<double> lambda(pairs.size(), opt.lambda_init);
  double mu = 0.0;
  std::vector<VectorXd> flow_mult;  // power-flow multipliers of the last consensus step

  DopfResult result;
  for (int it = 0;; ++it) {
    std::vector<LocalState> states;
    states.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& m = sub.models()[b];
      std::vector<AuxValues> targets;
      std::vector<double> weights;
      const auto pids = m.pairs();
      for (std::size_t k = 0; k < m.degree(); ++k) {
        const auto nbr = m.neighbors()[k];
        const auto& mn = sub.at(nbr);
        targets.push_back(mirror(mn.aux(xs[sub.block_of(nbr)], mn.slot_of(m.owner()))));
        weights.push_back(lambda[pids[k]]);
      }
      states.push_back(local_solve(m, xs[b], targets, weights, opt.local));
    }

    std::vector<VectorXd> ys;
    double cost = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      ys.push_back(states[b].x);
      cost += sub.models()[b].cost(states[b].x);
    }
    auto residuals = consensus_residuals(sub, ys);
    double max_a = 0.0;
    for (const auto& r : residuals) max_a = std::max(max_a, r.value);

    IterationRecord rec;
    rec.iteration = it;
    rec.max_residual = max_a;
    rec.cost = cost;

    const auto finish = [&] {
      result.schedule = extract_schedule(sub, states);
      result.residuals = std::move(residuals);
      result.iterations = it;
      result.total_cost = cost;
      double losses = 0.0;
      for (std::size_t b = 0; b < nb; ++b) losses += sub.models()[b].half_line_losses(states[b].x);
      result.losses_mw = losses * dec.base().base_mva();
      result.states = std::move(states);
      result.wall_seconds = elapsed();
      return result;
    };

    if (pairs.empty()) {
      result.history.push_back(rec);
      return finish();
    }

    SolverWorkspace ws;
    ConsensusStep step;
    try {
      if (flow_mult.empty()) {
        ws = build_derivatives(sub, states);
      } else {
        // The local multipliers are not unique where the consensus penalty sits
        // at its kink; the previous coupled step gives a consistent estimate.
        auto curv = states;
        for (std::size_t b = 0; b < nb; ++b) curv[b].kappa = flow_mult[b];
        ws = build_derivatives(sub, curv);
      }
      ws.iteration = it;
      regularize(ws, opt.min_eigenvalue);
      step = consensus_step(sub, ws, states);
    } catch (const SolverError& e) {
      result.history.push_back(rec);
      throw DopfNonConvergence(std::string("iteration ") + std::to_string(it) + ": " + e.what(),
                               result.history, elapsed());
    }
    rec.step_norm = step.max_abs();
    if (max_a < opt.eps_consensus && rec.step_norm < opt.eps_step) {
      rec.alpha = 0.0;
      rec.merit = merit(sub, ys, mu);
      result.history.push_back(rec);
      return finish();
    }
    if (it >= opt.max_iterations) {
      result.history.push_back(rec);
      throw DopfNonConvergence("iteration cap " + std::to_string(opt.max_iterations) +
                                   " reached (max A_ij " + std::to_string(max_a) + ")",
                               result.history, elapsed());
    }

    mu = std::max(mu, 2.0 * step.max_multiplier() + 1.0);
    LineSearchResult ls;
    try {
      ls = line_search(sub, states, step, mu, opt.alpha_floor);
    } catch (const LineSearchStall& e) {
      result.history.push_back(rec);
      throw DopfNonConvergence(std::string("iteration ") + std::to_string(it) + ": " + e.what(),
                               result.history, elapsed());
    }
    rec.alpha = ls.alpha;
    rec.merit = ls.merit_accepted;
    result.history.push_back(rec);

    xs = ls.point;
    flow_mult = step.flow_dual;
    const Index per = static_cast<Index>(sub.models()[0].coupled_per_aux());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const double nu = step.coupling_dual.segment(static_cast<Index>(p) * per, per).cwiseAbs().maxCoeff();
      lambda[p] = std::max(opt.lambda_init, 2.0 * nu);
    }
  }
}

namespace {

nlohmann::ordered_json history_json(const std::vector<IterationRecord>& history) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : history) {
    arr.push_back({{"iteration", r.iteration},
                   {"max_residual", r.max_residual},
                   {"step_norm", r.step_norm},
                   {"alpha", r.alpha},
                   {"merit", r.merit},
                   {"cost", r.cost}});
  }
  return arr;
}

}  // namespace

std::string solver_report(const DopfResult& result) {
  nlohmann::ordered_json j;
  j["status"] = "converged";
  j["iterations"] = result.iterations;
  j["wall_seconds"] = result.wall_seconds;
  j["total_cost"] = result.total_cost;
  j["losses_mw"] = result.losses_mw;
  j["history"] = history_json(result.history);
  auto sched = nlohmann::ordered_json::array();
  for (const auto& [id, e] : result.schedule.entries()) {
    sched.push_back({{"id", id.value}, {"p_mw", e.p_mw}, {"q_mvar", e.q_mvar}});
  }
  j["schedule"] = sched;
  auto res = nlohmann::ordered_json::array();
  for (const auto& r : result.residuals) {
    res.push_back({{"i", r.i.value}, {"j", r.j.value}, {"value", r.value}});
  }
  j["residuals"] = res;
  return j.dump(2) + "\n";
}

std::string solver_report(const DopfNonConvergence& failure) {
  nlohmann::ordered_json j;
  j["status"] = "not converged";
  j["error"] = failure.what();
  j["iterations"] = static_cast<int>(failure.history().size());
  j["wall_seconds"] = failure.wall_seconds();
  j["history"] = history_json(failure.history());
  return j.dump(2) + "\n";
}

}  // namespace gridwatch::dopf
