#pragma once

#include <Eigen/Dense>
#include <string>

namespace gridwatch::dopf {

/// Smooth problem  min f(x)  s.t.  c(x) = 0,  lower <= x <= upper.
/// Infinite bounds mark free directions; lower == upper fixes a variable.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual Eigen::Index num_variables() const = 0;
  virtual Eigen::Index num_constraints() const = 0;
  virtual Eigen::VectorXd lower() const = 0;
  virtual Eigen::VectorXd upper() const = 0;

  virtual double objective(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd constraints(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const = 0;
  /// sigma * hess f(x) + sum_k y_k hess c_k(x)
  virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& x, double sigma,
                                  const Eigen::VectorXd& y) const = 0;
};

struct IpmOptions {
  double tol = 1e-8;         // scaled dual infeasibility and complementarity
  double constr_tol = 1e-9;  // absolute constraint violation
  int max_iterations = 200;
  double mu_init = 0.1;
  // Looser level accepted after that many consecutive iterations meet it.
  double acceptable_tol = 1e-6;
  double acceptable_constr_tol = 1e-8;
  int acceptable_iterations = 10;
};

enum class IpmStatus { kConverged, kIterationLimit, kStalled, kNumericalFailure };

std::string to_string(IpmStatus s);

struct IpmResult {
  IpmStatus status = IpmStatus::kNumericalFailure;
  Eigen::VectorXd x;
  /// Multipliers of c(x) = 0, for the Lagrangian f + y'c.
  Eigen::VectorXd y;
  /// Bound multipliers (>= 0); zero where the bound is infinite.
  Eigen::VectorXd z_lower;
  Eigen::VectorXd z_upper;
  int iterations = 0;
  double objective = 0.0;
  double constraint_violation = 0.0;
  double dual_infeasibility = 0.0;  // unscaled inf-norm of grad L
  double complementarity = 0.0;
};

/// Primal-dual interior point method with inertia-corrected Newton steps and an
/// l1-merit backtracking line search. Dense; intended for problems with a few
/// hundred variables at most.
IpmResult solve_ipm(const NlpProblem& problem, const Eigen::VectorXd& x0,
                    const IpmOptions& options = {});

}  // namespace gridwatch::dopf
