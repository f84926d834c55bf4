#include "gridwatch/dopf/local_problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridwatch/dopf/errors.hpp"

namespace gridwatch::dopf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LocalModel::LocalModel(const grid::DecoupledNetwork& dec, grid::ProsumerId owner, FlowModel model)
    : owner_(owner), model_(model) {
  const auto& net = dec.base();
  prosumer_ = net.prosumer(owner);
  slack_ = prosumer_.is_slack;
  base_mva_ = net.base_mva();
  neighbors_ = net.neighbors(owner);
  pairs_ = dec.pairs_of(owner);
  for (auto p : pairs_) {
    const auto y = dec.pairs()[p].attachment;
    attach_.push_back({y.real(), y.imag()});
  }
  const Index per_aux = coupled_per_aux();
  const Index own = model_ == FlowModel::kAc ? 4 : 2;
  size_ = own + per_aux * static_cast<Index>(degree());
  const Index balance = model_ == FlowModel::kAc ? 2 : 1;
  constraints_ = balance + (model_ == FlowModel::kAc ? 2 : 1) * static_cast<Index>(degree()) +
                 (slack_ ? (model_ == FlowModel::kAc ? 2 : 1) : 0);
}

std::vector<Coupled> LocalModel::coupled_kinds() const {
  if (model_ == FlowModel::kAc) {
    return {Coupled::kAngle, Coupled::kVoltage, Coupled::kActive, Coupled::kReactive};
  }
  return {Coupled::kAngle, Coupled::kActive};
}

Index LocalModel::aux_v(std::size_t k) const noexcept {
  return model_ == FlowModel::kAc ? 4 + 4 * static_cast<Index>(k) : -1;
}
Index LocalModel::aux_angle(std::size_t k) const noexcept {
  return model_ == FlowModel::kAc ? 5 + 4 * static_cast<Index>(k) : 2 + 2 * static_cast<Index>(k);
}
Index LocalModel::aux_p(std::size_t k) const noexcept {
  return model_ == FlowModel::kAc ? 6 + 4 * static_cast<Index>(k) : 3 + 2 * static_cast<Index>(k);
}
Index LocalModel::aux_q(std::size_t k) const noexcept {
  return model_ == FlowModel::kAc ? 7 + 4 * static_cast<Index>(k) : -1;
}

Index LocalModel::aux_index(std::size_t k, Coupled q) const noexcept {
  switch (q) {
    case Coupled::kAngle: return aux_angle(k);
    case Coupled::kVoltage: return aux_v(k);
    case Coupled::kActive: return aux_p(k);
    case Coupled::kReactive: return aux_q(k);
  }
  return -1;
}

std::size_t LocalModel::slot_of(grid::ProsumerId id) const {
  auto it = std::find(neighbors_.begin(), neighbors_.end(), id);
  if (it == neighbors_.end()) {
    throw ValidationError("prosumer " + grid::to_string(owner_),
                          "no tie line to prosumer " + grid::to_string(id));
  }
  return static_cast<std::size_t>(it - neighbors_.begin());
}

AuxValues LocalModel::aux(const VectorXd& x, std::size_t k) const {
  AuxValues a;
  a.angle = x(aux_angle(k));
  a.p = x(aux_p(k));
  if (model_ == FlowModel::kAc) {
    a.v = x(aux_v(k));
    a.q = x(aux_q(k));
  }
  return a;
}

VectorXd LocalModel::lower() const {
  VectorXd lo = VectorXd::Constant(size_, -kInf);
  lo(p_gen()) = prosumer_.p_mw.min / base_mva_;
  if (model_ == FlowModel::kAc) {
    lo(v()) = prosumer_.v_pu.min;
    lo(q_gen()) = prosumer_.q_mvar.min / base_mva_;
  }
  return lo;
}

VectorXd LocalModel::upper() const {
  VectorXd hi = VectorXd::Constant(size_, kInf);
  hi(p_gen()) = prosumer_.p_mw.max / base_mva_;
  if (model_ == FlowModel::kAc) {
    hi(v()) = prosumer_.v_pu.max;
    hi(q_gen()) = prosumer_.q_mvar.max / base_mva_;
  }
  return hi;
}

VectorXd LocalModel::flat_start() const {
  VectorXd x = VectorXd::Zero(size_);
  x(p_gen()) = std::clamp(prosumer_.load_p_mw, prosumer_.p_mw.min, prosumer_.p_mw.max) / base_mva_;
  if (model_ == FlowModel::kAc) {
    x(v()) = 1.0;
    x(q_gen()) =
        std::clamp(prosumer_.load_q_mvar, prosumer_.q_mvar.min, prosumer_.q_mvar.max) / base_mva_;
    for (std::size_t k = 0; k < degree(); ++k) x(aux_v(k)) = 1.0;
  }
  return x;
}

double LocalModel::cost(const VectorXd& x) const { return prosumer_.cost(base_mva_ * x(p_gen())); }

VectorXd LocalModel::cost_gradient(const VectorXd& x) const {
  VectorXd g = VectorXd::Zero(size_);
  g(p_gen()) = base_mva_ * prosumer_.cost.derivative(base_mva_ * x(p_gen()));
  return g;
}

MatrixXd LocalModel::cost_hessian(const VectorXd&) const {
  MatrixXd h = MatrixXd::Zero(size_, size_);
  h(p_gen(), p_gen()) = base_mva_ * base_mva_ * prosumer_.cost.second_derivative();
  return h;
}

namespace {

// Visits every flow term of the local residuals as (row, coefficient, term, indices).
template <typename Visit>
void for_each_flow_term(const LocalModel& m, const VectorXd& x, Visit&& visit) {
  const bool ac = m.model() == FlowModel::kAc;
  const Index rows_per_aux = ac ? 2 : 1;
  const Index first_aux_row = ac ? 2 : 1;
  const double v = ac ? x(m.v()) : 1.0;
  const double a = x(m.angle());
  for (std::size_t k = 0; k < m.degree(); ++k) {
    const auto [g, b] = m.attachment(k);
    const double vb = ac ? x(m.aux_v(k)) : 1.0;
    const double ab = x(m.aux_angle(k));
    const std::array<Index, 4> fwd{m.v(), m.angle(), m.aux_v(k), m.aux_angle(k)};
    const std::array<Index, 4> rev{m.aux_v(k), m.aux_angle(k), m.v(), m.angle()};
    const Index prow = first_aux_row + rows_per_aux * static_cast<Index>(k);
    if (ac) {
      visit(0, -1.0, active_flow(g, b, v, a, vb, ab), fwd);
      visit(1, -1.0, reactive_flow(g, b, v, a, vb, ab), fwd);
      visit(prow, 1.0, active_flow(g, b, vb, ab, v, a), rev);
      visit(prow + 1, 1.0, reactive_flow(g, b, vb, ab, v, a), rev);
    } else {
      const auto t = active_flow_dc(b, a, ab);
      visit(0, -1.0, t, fwd);
      visit(prow, -1.0, t, fwd);
    }
  }
}

}  // namespace

VectorXd LocalModel::residuals(const VectorXd& x) const {
  const bool ac = model_ == FlowModel::kAc;
  VectorXd r = VectorXd::Zero(constraints_);
  r(0) = x(p_gen()) - prosumer_.load_p_mw / base_mva_;
  if (ac) r(1) = x(q_gen()) - prosumer_.load_q_mvar / base_mva_;
  const Index first_aux_row = ac ? 2 : 1;
  const Index rows_per_aux = ac ? 2 : 1;
  for (std::size_t k = 0; k < degree(); ++k) {
    const Index prow = first_aux_row + rows_per_aux * static_cast<Index>(k);
    r(prow) = x(aux_p(k));
    if (ac) r(prow + 1) = x(aux_q(k));
  }
  for_each_flow_term(*this, x, [&](Index row, double coef, const FlowTerm& t, const auto&) {
    r(row) += coef * t.value;
  });
  if (slack_) {
    const Index srow = first_aux_row + rows_per_aux * static_cast<Index>(degree());
    if (ac) {
      r(srow) = x(v()) - 1.0;
      r(srow + 1) = x(angle());
    } else {
      r(srow) = x(angle());
    }
  }
  return r;
}

MatrixXd LocalModel::jacobian(const VectorXd& x) const {
  const bool ac = model_ == FlowModel::kAc;
  MatrixXd J = MatrixXd::Zero(constraints_, size_);
  J(0, p_gen()) = 1.0;
  if (ac) J(1, q_gen()) = 1.0;
  const Index first_aux_row = ac ? 2 : 1;
  const Index rows_per_aux = ac ? 2 : 1;
  for (std::size_t k = 0; k < degree(); ++k) {
    const Index prow = first_aux_row + rows_per_aux * static_cast<Index>(k);
    J(prow, aux_p(k)) = 1.0;
    if (ac) J(prow + 1, aux_q(k)) = 1.0;
  }
  for_each_flow_term(*this, x,
                     [&](Index row, double coef, const FlowTerm& t, const std::array<Index, 4>& idx) {
                       for (int a = 0; a < 4; ++a) {
                         if (idx[a] >= 0) J(row, idx[a]) += coef * t.grad[a];
                       }
                     });
  if (slack_) {
    const Index srow = first_aux_row + rows_per_aux * static_cast<Index>(degree());
    if (ac) {
      J(srow, v()) = 1.0;
      J(srow + 1, angle()) = 1.0;
    } else {
      J(srow, angle()) = 1.0;
    }
  }
  return J;
}

MatrixXd LocalModel::constraint_hessian(const VectorXd& x, const VectorXd& kappa) const {
  MatrixXd H = MatrixXd::Zero(size_, size_);
  for_each_flow_term(*this, x,
                     [&](Index row, double coef, const FlowTerm& t, const std::array<Index, 4>& idx) {
                       const double w = coef * kappa(row);
                       if (w == 0.0) return;
                       for (int a = 0; a < 4; ++a) {
                         if (idx[a] < 0) continue;
                         for (int b = 0; b < 4; ++b) {
                           if (idx[b] >= 0) H(idx[a], idx[b]) += w * t.hess[a][b];
                         }
                       }
                     });
  return H;
}

double LocalModel::net_p_mw(const VectorXd& x) const {
  return base_mva_ * x(p_gen()) - prosumer_.load_p_mw;
}

double LocalModel::net_q_mvar(const VectorXd& x) const {
  if (model_ != FlowModel::kAc) return 0.0;
  return base_mva_ * x(q_gen()) - prosumer_.load_q_mvar;
}

double LocalModel::half_line_losses(const VectorXd& x) const {
  if (model_ != FlowModel::kAc) return 0.0;
  double loss = 0.0;
  for (std::size_t k = 0; k < degree(); ++k) {
    const auto& t = attach_[k];
    const double sent = active_flow(t.g, t.b, x(v()), x(angle()), x(aux_v(k)), x(aux_angle(k))).value;
    const double back = active_flow(t.g, t.b, x(aux_v(k)), x(aux_angle(k)), x(v()), x(angle())).value;
    loss += sent + back;
  }
  return loss;
}

AuxValues mirror(const AuxValues& s) { return {s.angle, s.v, -s.p, -s.q}; }

double consensus_mismatch(const AuxValues& mine, const AuxValues& theirs, FlowModel model) {
  double a = std::abs(mine.angle - theirs.angle) + std::abs(mine.p + theirs.p);
  if (model == FlowModel::kAc) a += std::abs(mine.v - theirs.v) + std::abs(mine.q + theirs.q);
  return a;
}

// ---------------------------------------------------------------------------
// LocalNlp: z = [x, s_plus, s_minus]

LocalNlp::LocalNlp(const LocalModel& model, std::vector<AuxValues> targets,
                   std::vector<double> lambda)
    : model_(model), targets_(std::move(targets)), lambda_(std::move(lambda)) {
  if (targets_.size() != model_.degree() || lambda_.size() != model_.degree()) {
    throw ValidationError("prosumer " + grid::to_string(model_.owner()),
                          "one target and one weight required per neighbor");
  }
  for (double l : lambda_) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ValidationError("prosumer " + grid::to_string(model_.owner()),
                            "consensus weights must be finite and nonnegative");
    }
  }
}

Index LocalNlp::coupled_count() const {
  return static_cast<Index>(model_.degree()) * model_.coupled_per_aux();
}

Index LocalNlp::num_variables() const { return model_.size() + 2 * coupled_count(); }
Index LocalNlp::num_constraints() const { return model_.num_constraints() + coupled_count(); }

VectorXd LocalNlp::lower() const {
  VectorXd lo(num_variables());
  lo.head(model_.size()) = model_.lower();
  lo.tail(2 * coupled_count()).setZero();
  return lo;
}

VectorXd LocalNlp::upper() const {
  VectorXd hi(num_variables());
  hi.head(model_.size()) = model_.upper();
  hi.tail(2 * coupled_count()).setConstant(kInf);
  return hi;
}

double LocalNlp::target_value(std::size_t k, Coupled q) const {
  const auto& t = targets_[k];
  switch (q) {
    case Coupled::kAngle: return t.angle;
    case Coupled::kVoltage: return t.v;
    case Coupled::kActive: return t.p;
    case Coupled::kReactive: return t.q;
  }
  return 0.0;
}

double LocalNlp::objective(const VectorXd& z) const {
  const Index n = model_.size();
  const Index nc = coupled_count();
  const int per = model_.coupled_per_aux();
  double f = model_.cost(z.head(n));
  for (std::size_t k = 0; k < model_.degree(); ++k) {
    for (int q = 0; q < per; ++q) {
      const Index c = static_cast<Index>(k) * per + q;
      f += lambda_[k] * (z(n + c) + z(n + nc + c));
    }
  }
  return f;
}

VectorXd LocalNlp::gradient(const VectorXd& z) const {
  const Index n = model_.size();
  const Index nc = coupled_count();
  const int per = model_.coupled_per_aux();
  VectorXd g = VectorXd::Zero(num_variables());
  g.head(n) = model_.cost_gradient(z.head(n));
  for (std::size_t k = 0; k < model_.degree(); ++k) {
    for (int q = 0; q < per; ++q) {
      const Index c = static_cast<Index>(k) * per + q;
      g(n + c) = lambda_[k];
      g(n + nc + c) = lambda_[k];
    }
  }
  return g;
}

VectorXd LocalNlp::constraints(const VectorXd& z) const {
  const Index n = model_.size();
  const Index nc = coupled_count();
  const Index mh = model_.num_constraints();
  const auto kinds = model_.coupled_kinds();
  VectorXd c(num_constraints());
  c.head(mh) = model_.residuals(z.head(n));
  for (std::size_t k = 0; k < model_.degree(); ++k) {
    for (std::size_t q = 0; q < kinds.size(); ++q) {
      const Index r = static_cast<Index>(k * kinds.size() + q);
      c(mh + r) = z(model_.aux_index(k, kinds[q])) - target_value(k, kinds[q]) - z(n + r) + z(n + nc + r);
    }
  }
  return c;
}

MatrixXd LocalNlp::jacobian(const VectorXd& z) const {
  const Index n = model_.size();
  const Index nc = coupled_count();
  const Index mh = model_.num_constraints();
  const auto kinds = model_.coupled_kinds();
  MatrixXd J = MatrixXd::Zero(num_constraints(), num_variables());
  J.topLeftCorner(mh, n) = model_.jacobian(z.head(n));
  for (std::size_t k = 0; k < model_.degree(); ++k) {
    for (std::size_t q = 0; q < kinds.size(); ++q) {
      const Index r = static_cast<Index>(k * kinds.size() + q);
      J(mh + r, model_.aux_index(k, kinds[q])) = 1.0;
      J(mh + r, n + r) = -1.0;
      J(mh + r, n + nc + r) = 1.0;
    }
  }
  return J;
}

MatrixXd LocalNlp::hessian(const VectorXd& z, double sigma, const VectorXd& y) const {
  const Index n = model_.size();
  MatrixXd H = MatrixXd::Zero(num_variables(), num_variables());
  H.topLeftCorner(n, n) = sigma * model_.cost_hessian(z.head(n)) +
                          model_.constraint_hessian(z.head(n), y.head(model_.num_constraints()));
  return H;
}

VectorXd LocalNlp::initial_point(const VectorXd& x) const {
  const Index n = model_.size();
  const Index nc = coupled_count();
  const auto kinds = model_.coupled_kinds();
  VectorXd z = VectorXd::Zero(num_variables());
  z.head(n) = x;
  for (std::size_t k = 0; k < model_.degree(); ++k) {
    for (std::size_t q = 0; q < kinds.size(); ++q) {
      const Index r = static_cast<Index>(k * kinds.size() + q);
      const double d = x(model_.aux_index(k, kinds[q])) - target_value(k, kinds[q]);
      z(n + r) = std::max(d, 0.0);
      z(n + nc + r) = std::max(-d, 0.0);
    }
  }
  return z;
}

LocalState local_solve(const LocalModel& model, const VectorXd& start,
                       const std::vector<AuxValues>& targets, const std::vector<double>& lambda,
                       const LocalSolveOptions& options) {
  const auto& p = model.prosumer();
  if (model.degree() == 0 && !p.p_mw.contains(p.load_p_mw)) {
    throw InfeasibleError(model.owner(), std::abs(std::clamp(p.load_p_mw, p.p_mw.min, p.p_mw.max) -
                                                  p.load_p_mw) / model.base_mva());
  }
  if (model.degree() == 0 && model.model() == FlowModel::kAc && !p.q_mvar.contains(p.load_q_mvar)) {
    throw InfeasibleError(model.owner(), std::abs(std::clamp(p.load_q_mvar, p.q_mvar.min, p.q_mvar.max) -
                                                  p.load_q_mvar) / model.base_mva());
  }

  LocalNlp nlp(model, targets, lambda);
  IpmOptions ipm_opt;
  ipm_opt.max_iterations = options.max_iterations;
  ipm_opt.tol = options.tol;
  ipm_opt.constr_tol = options.constr_tol;
  const auto res = solve_ipm(nlp, nlp.initial_point(start), ipm_opt);
  if (res.status != IpmStatus::kConverged) {
    if (res.constraint_violation > 1e-6) throw InfeasibleError(model.owner(), res.constraint_violation);
    throw LocalNonConvergence(model.owner(), res.iterations,
                              std::max(res.constraint_violation, res.dual_infeasibility));
  }

  const Index n = model.size();
  LocalState st;
  st.owner = model.owner();
  st.x = res.x.head(n);
  st.kappa = res.y.head(model.num_constraints());
  st.iterations = res.iterations;
  st.residual = res.constraint_violation;
  const VectorXd lo = model.lower(), hi = model.upper();
  st.at_bound.assign(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    const bool fixed = std::isfinite(lo(i)) && lo(i) == hi(i);
    const bool near_lo = std::isfinite(lo(i)) &&
                         st.x(i) - lo(i) <= options.active_tol * std::max(1.0, std::abs(lo(i)));
    const bool near_hi = std::isfinite(hi(i)) &&
                         hi(i) - st.x(i) <= options.active_tol * std::max(1.0, std::abs(hi(i)));
    st.at_bound[static_cast<std::size_t>(i)] = fixed || near_lo || near_hi;
  }
  st.objective = model.cost(st.x);
  for (std::size_t k = 0; k < model.degree(); ++k) {
    // targets are already mirrored; un-mirror to compare against the neighbor's own values
    st.objective += lambda[k] * consensus_mismatch(model.aux(st.x, k), mirror(targets[k]), model.model());
  }
  return st;
}

}  // namespace gridwatch::dopf
