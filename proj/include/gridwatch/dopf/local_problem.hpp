#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gridwatch/dopf/branch_flow.hpp"
#include "gridwatch/dopf/nlp.hpp"
#include "gridwatch/grid/network.hpp"

namespace gridwatch::dopf {

/// Coupled quantities of an auxiliary bus, in the order used by the consensus
/// residual: angle, voltage magnitude, active power, reactive power.
enum class Coupled { kAngle = 0, kVoltage = 1, kActive = 2, kReactive = 3 };

/// Values of one auxiliary bus b_ij as seen from prosumer i. P and Q are the
/// power delivered through i's half line toward the line midpoint.
struct AuxValues {
  double angle = 0.0;
  double v = 1.0;
  double p = 0.0;
  double q = 0.0;
};

/// The subsystem of one prosumer after decoupling: its own bus plus one
/// auxiliary bus per tie line. All quantities per unit on the network base.
///
/// Variable layout (AC): [V, angle, Pg, Qg, (V_b, angle_b, P_b, Q_b) per neighbor]
/// Variable layout (DC): [angle, Pg, (angle_b, P_b) per neighbor]
class LocalModel {
 public:
  LocalModel(const grid::DecoupledNetwork& dec, grid::ProsumerId owner, FlowModel model);

  grid::ProsumerId owner() const noexcept { return owner_; }
  FlowModel model() const noexcept { return model_; }
  const std::vector<grid::ProsumerId>& neighbors() const noexcept { return neighbors_; }
  const std::vector<std::size_t>& pairs() const noexcept { return pairs_; }
  std::size_t degree() const noexcept { return neighbors_.size(); }
  double base_mva() const noexcept { return base_mva_; }
  bool is_slack() const noexcept { return slack_; }
  const grid::Prosumer& prosumer() const noexcept { return prosumer_; }
  /// (g, b) of the attachment admittance toward neighbor slot k.
  std::pair<double, double> attachment(std::size_t k) const { return {attach_[k].g, attach_[k].b}; }

  Eigen::Index size() const noexcept { return size_; }
  Eigen::Index num_constraints() const noexcept { return constraints_; }
  /// Coupled quantities per auxiliary bus: 4 (AC) or 2 (DC: angle, active).
  int coupled_per_aux() const noexcept { return model_ == FlowModel::kAc ? 4 : 2; }
  std::vector<Coupled> coupled_kinds() const;

  // Variable indices; voltage and reactive indices are -1 under the DC model.
  Eigen::Index v() const noexcept { return model_ == FlowModel::kAc ? 0 : -1; }
  Eigen::Index angle() const noexcept { return model_ == FlowModel::kAc ? 1 : 0; }
  Eigen::Index p_gen() const noexcept { return model_ == FlowModel::kAc ? 2 : 1; }
  Eigen::Index q_gen() const noexcept { return model_ == FlowModel::kAc ? 3 : -1; }
  Eigen::Index aux_v(std::size_t k) const noexcept;
  Eigen::Index aux_angle(std::size_t k) const noexcept;
  Eigen::Index aux_p(std::size_t k) const noexcept;
  Eigen::Index aux_q(std::size_t k) const noexcept;
  Eigen::Index aux_index(std::size_t k, Coupled q) const noexcept;
  /// Position of neighbor `id` in neighbors(); throws if not adjacent.
  std::size_t slot_of(grid::ProsumerId id) const;

  AuxValues aux(const Eigen::VectorXd& x, std::size_t k) const;

  Eigen::VectorXd lower() const;
  Eigen::VectorXd upper() const;
  /// V = 1, angle = 0, aux power zero, generation at the load clipped to bounds.
  Eigen::VectorXd flat_start() const;

  double cost(const Eigen::VectorXd& x) const;
  Eigen::VectorXd cost_gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd cost_hessian(const Eigen::VectorXd& x) const;

  /// Local power-flow equalities: bus balance, aux-bus power definitions and
  /// (for the slack) V = 1, angle = 0.
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  /// sum_k kappa_k hess h_k(x)
  Eigen::MatrixXd constraint_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& kappa) const;

  /// Net injection (generation minus load) in MW and MVAr.
  double net_p_mw(const Eigen::VectorXd& x) const;
  double net_q_mvar(const Eigen::VectorXd& x) const;
  /// Active power lost on this prosumer's half lines, per unit.
  double half_line_losses(const Eigen::VectorXd& x) const;

 private:
  struct Attachment {
    double g = 0.0;
    double b = 0.0;
  };

  grid::ProsumerId owner_;
  FlowModel model_;
  grid::Prosumer prosumer_;
  bool slack_ = false;
  double base_mva_ = 100.0;
  std::vector<grid::ProsumerId> neighbors_;
  std::vector<std::size_t> pairs_;
  std::vector<Attachment> attach_;
  Eigen::Index size_ = 0;
  Eigen::Index constraints_ = 0;
};

/// Result of one local solve.
struct LocalState {
  grid::ProsumerId owner;
  Eigen::VectorXd x;
  /// Multipliers of LocalModel::residuals at x.
  Eigen::VectorXd kappa;
  /// Variables resting on a bound (including fixed variables).
  std::vector<bool> at_bound;
  /// C(P) + sum_k lambda_k A_k at the solution.
  double objective = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

/// Target of each coupled quantity of aux bus k, taken from the neighbor's
/// mirrored auxiliary values (angle and V equal, P and Q negated).
AuxValues mirror(const AuxValues& other_side);

/// Sum of absolute coupled mismatches between i's aux bus and the mirrored
/// values of j's aux bus.
double consensus_mismatch(const AuxValues& mine, const AuxValues& theirs, FlowModel model);

/// Smooth reformulation of  min C(P) + sum_k lambda_k A_k(x)  s.t. local power
/// flow and bounds, with every |.| in A split into two nonnegative slacks.
class LocalNlp final : public NlpProblem {
 public:
  LocalNlp(const LocalModel& model, std::vector<AuxValues> targets, std::vector<double> lambda);

  Eigen::Index num_variables() const override;
  Eigen::Index num_constraints() const override;
  Eigen::VectorXd lower() const override;
  Eigen::VectorXd upper() const override;
  double objective(const Eigen::VectorXd& z) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const override;
  Eigen::VectorXd constraints(const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& z, double sigma,
                          const Eigen::VectorXd& y) const override;

  /// Initial point: the given primal values with slacks matching the residuals.
  Eigen::VectorXd initial_point(const Eigen::VectorXd& x) const;
  double target_value(std::size_t k, Coupled q) const;

 private:
  Eigen::Index coupled_count() const;

  const LocalModel& model_;
  std::vector<AuxValues> targets_;
  std::vector<double> lambda_;
};

struct LocalSolveOptions {
  int max_iterations = 200;
  double tol = 1e-8;
  double constr_tol = 1e-10;
  double active_tol = 1e-7;
};

/// Solves the penalized local problem of one prosumer starting from `start`.
/// `targets[k]` is the mirrored aux values of neighbor k, `lambda[k]` its
/// nonnegative weight. Throws InfeasibleError or LocalNonConvergence.
LocalState local_solve(const LocalModel& model, const Eigen::VectorXd& start,
                       const std::vector<AuxValues>& targets, const std::vector<double>& lambda,
                       const LocalSolveOptions& options = {});

}  // namespace gridwatch::dopf
