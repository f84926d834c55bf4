#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "gridwatch/dopf/branch_flow.hpp"
#include "gridwatch/dopf/errors.hpp"
#include "gridwatch/dopf/local_problem.hpp"
#include "gridwatch/dopf/schedule.hpp"
#include "gridwatch/grid/network.hpp"

namespace gridwatch::dopf {

/// The per-prosumer local models of a decoupled network, in network order,
/// plus the offsets of each block in the stacked primal vector.
class Subproblems {
 public:
  Subproblems(const grid::DecoupledNetwork& dec, FlowModel model);

  const grid::DecoupledNetwork& decoupled() const noexcept { return *dec_; }
  FlowModel model() const noexcept { return model_; }
  const std::vector<LocalModel>& models() const noexcept { return models_; }
  const LocalModel& at(grid::ProsumerId id) const;
  std::size_t block_of(grid::ProsumerId id) const;
  Eigen::Index offset(std::size_t block) const { return offsets_[block]; }
  Eigen::Index size() const noexcept { return size_; }
  std::size_t size_of_blocks() const noexcept { return models_.size(); }

  std::vector<Eigen::VectorXd> split(const Eigen::VectorXd& stacked) const;
  Eigen::VectorXd stack(const std::vector<Eigen::VectorXd>& blocks) const;

 private:
  const grid::DecoupledNetwork* dec_;
  FlowModel model_;
  std::vector<LocalModel> models_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index size_ = 0;
};

struct ConsensusResidual {
  std::size_t pair = 0;
  grid::ProsumerId i;
  grid::ProsumerId j;
  double value = 0.0;
};

/// A_ij of aux pair `pair` between the states of its two endpoints (either
/// order). Throws ValidationError when the states do not own the pair.
ConsensusResidual consensus_residual(const Subproblems& sub, const LocalState& a,
                                     const LocalState& b, std::size_t pair);
/// A_ij for every pair, indexed by pair; `xs` holds one primal block per prosumer.
std::vector<ConsensusResidual> consensus_residuals(const Subproblems& sub,
                                                   const std::vector<Eigen::VectorXd>& xs);

struct BlockDerivatives {
  grid::ProsumerId owner;
  Eigen::VectorXd gradient;  // of the cost
  Eigen::MatrixXd hessian;   // of the local Lagrangian
  Eigen::MatrixXd jacobian;  // of the local power-flow residuals
  Eigen::VectorXd residual;
  std::vector<bool> active;  // variables resting on a bound after the local solve
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double shift = 0.0;  // regularization added to the diagonal
};

struct SolverWorkspace {
  std::vector<BlockDerivatives> blocks;
  int iteration = 0;
  double step_length = 1.0;
  bool regularized = false;
};

/// Derivatives of every local problem at the states of a completed round.
/// Throws SolverError on non-finite entries.
SolverWorkspace build_derivatives(const Subproblems& sub, const std::vector<LocalState>& states);

/// Shifts each Hessian block by the smallest multiple of the identity that
/// makes its smallest eigenvalue at least `min_eigenvalue`.
void regularize(SolverWorkspace& ws, double min_eigenvalue = 1e-8);

/// Factorized KKT matrix of the final working set, kept for corrections.
struct KktFactor;

struct ConsensusStep {
  std::vector<Eigen::VectorXd> delta;  // per block
  /// Multipliers of the coupling rows: pair-major, coupled kinds minor.
  Eigen::VectorXd coupling_dual;
  /// Multipliers of the linearized power-flow rows, per block.
  std::vector<Eigen::VectorXd> flow_dual;
  /// -(g'd + d'Hd/2), the decrease of the quadratic model.
  double model_decrease = 0.0;
  double rcond = 0.0;
  int passes = 0;
  std::shared_ptr<const KktFactor> kkt;

  double max_abs() const;
  double max_multiplier() const;
};

/// QP coupling all blocks: minimize the quadratic model subject to linearized
/// power flow and the linear consensus constraints. Bounds are handled by a
/// dual active-set method (Goldfarb-Idnani) warm-started from the locally
/// active bounds when their multipliers are dual feasible. Throws
/// SingularSystemError when the equality system is singular and SolverError
/// when no step of the linearization meets the bounds.
ConsensusStep consensus_step(const Subproblems& sub, const SolverWorkspace& ws,
                             const std::vector<LocalState>& states);

/// sum cost + mu (sum A_ij + sum |h|_1)
double merit(const Subproblems& sub, const std::vector<Eigen::VectorXd>& xs, double mu);

/// Minimum-curvature correction d with the same KKT matrix as `step`, solving
/// the linearized power flow for the residual -h(y + delta) while keeping the
/// coupling rows and held bounds unchanged.
std::vector<Eigen::VectorXd> second_order_correction(const Subproblems& sub,
                                                     const ConsensusStep& step,
                                                     const std::vector<Eigen::VectorXd>& trial);

struct LineSearchResult {
  double alpha = 1.0;
  double merit_start = 0.0;
  double merit_accepted = 0.0;
  int trials = 0;
  bool corrected = false;  // accepted the full step plus a second-order correction
  std::vector<Eigen::VectorXd> point;
};

/// Backtracking by halves from alpha = 1 until the merit does not increase.
/// When the full step is rejected, the full step plus a second-order
/// correction is tried first. Throws LineSearchStall below `alpha_floor`.
LineSearchResult line_search(const Subproblems& sub, const std::vector<LocalState>& states,
                             const ConsensusStep& step, double mu, double alpha_floor = 1e-6);

struct DopfOptions {
  FlowModel model = FlowModel::kAc;
  double eps_consensus = 1e-4;
  double eps_step = 1e-6;  // inf-norm of the consensus step, per unit
  int max_iterations = 100;
  double lambda_init = 10.0;
  double alpha_floor = 1e-6;
  double min_eigenvalue = 1e-8;
  LocalSolveOptions local;
};

struct IterationRecord {
  int iteration = 0;
  double max_residual = 0.0;  // max A_ij after the local solves
  double step_norm = 0.0;
  double alpha = 0.0;
  double merit = 0.0;
  double cost = 0.0;
};

struct DopfResult {
  ReferenceSchedule schedule;
  std::vector<LocalState> states;
  std::vector<IterationRecord> history;
  std::vector<ConsensusResidual> residuals;
  int iterations = 0;
  double total_cost = 0.0;
  double losses_mw = 0.0;
  double wall_seconds = 0.0;
};

class DopfNonConvergence : public SolverError {
 public:
  DopfNonConvergence(std::string what, std::vector<IterationRecord> history, double wall_seconds)
      : SolverError(std::move(what)), history_(std::move(history)), wall_seconds_(wall_seconds) {}

  const std::vector<IterationRecord>& history() const noexcept { return history_; }
  double wall_seconds() const noexcept { return wall_seconds_; }

 private:
  std::vector<IterationRecord> history_;
  double wall_seconds_;
};

/// Distributed OPF: local solves, consensus check, derivatives, consensus QP,
/// line search, repeated until every A_ij < eps_consensus and the step vanishes.
/// Throws DopfNonConvergence at the iteration cap or when a step fails;
/// InfeasibleError propagates from the local solves.
DopfResult solve_dopf(const grid::DecoupledNetwork& dec, const DopfOptions& options = {});

/// JSON report with iterations, per-iteration max A_ij, schedule and wall time.
std::string solver_report(const DopfResult& result);
std::string solver_report(const DopfNonConvergence& failure);

}  // namespace gridwatch::dopf
