#pragma once

#include <string>
#include <vector>

#include "gridwatch/common/error.hpp"
#include "gridwatch/grid/network.hpp"

namespace gridwatch::dopf {

/// A local subproblem has no feasible point (e.g. bounds cannot cover the load).
class InfeasibleError : public SolverError {
 public:
  InfeasibleError(grid::ProsumerId who, double residual)
      : SolverError("prosumer " + grid::to_string(who) + ": infeasible subproblem (residual " +
                    std::to_string(residual) + ")"),
        who_(who),
        residual_(residual) {}

  grid::ProsumerId who() const noexcept { return who_; }
  double residual() const noexcept { return residual_; }

 private:
  grid::ProsumerId who_;
  double residual_;
};

/// The inner NLP of a local solve hit its iteration cap.
class LocalNonConvergence : public SolverError {
 public:
  LocalNonConvergence(grid::ProsumerId who, int iterations, double residual)
      : SolverError("prosumer " + grid::to_string(who) + ": local solve did not converge in " +
                    std::to_string(iterations) + " iterations (residual " +
                    std::to_string(residual) + ")"),
        who_(who),
        residual_(residual) {}

  grid::ProsumerId who() const noexcept { return who_; }
  double residual() const noexcept { return residual_; }

 private:
  grid::ProsumerId who_;
  double residual_;
};

/// The coupled consensus system stayed singular after regularization.
class SingularSystemError : public SolverError {
 public:
  explicit SingularSystemError(double rcond)
      : SolverError("consensus step: singular coupled system (rcond " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}

  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

/// No step length above the floor kept the merit function from increasing.
class LineSearchStall : public SolverError {
 public:
  LineSearchStall(double alpha, double merit0, double merit)
      : SolverError("line search stalled at alpha " + std::to_string(alpha) + " (merit " +
                    std::to_string(merit0) + " -> " + std::to_string(merit) + ")"),
        alpha_(alpha) {}

  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
};

}  // namespace gridwatch::dopf
