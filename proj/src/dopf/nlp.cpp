#include "gridwatch/dopf/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

namespace gridwatch::dopf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(IpmStatus s) {
  switch (s) {
    case IpmStatus::kConverged: return "converged";
    case IpmStatus::kIterationLimit: return "iteration limit";
    case IpmStatus::kStalled: return "line search stalled";
    case IpmStatus::kNumericalFailure: return "numerical failure";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPush = 1e-2;        // initial push away from bounds
constexpr double kKappaEps = 10.0;    // barrier subproblem tolerance factor
constexpr double kKappaSigma = 1e10;  // bound multiplier safeguard
constexpr double kArmijo = 1e-4;

// Fixed variables (lower == upper) become equality rows appended after the
// problem's own constraints.
struct Augmented {
  const NlpProblem& base;
  Index n = 0;
  Index m_base = 0;
  std::vector<Index> fixed;
  std::vector<double> fixed_value;

  Index m() const { return m_base + static_cast<Index>(fixed.size()); }

  VectorXd c(const VectorXd& x) const {
    VectorXd out(m());
    out.head(m_base) = base.constraints(x);
    for (std::size_t k = 0; k < fixed.size(); ++k) {
      out(m_base + static_cast<Index>(k)) = x(fixed[k]) - fixed_value[k];
    }
    return out;
  }

  MatrixXd jac(const VectorXd& x) const {
    MatrixXd out = MatrixXd::Zero(m(), n);
    if (m_base > 0) out.topRows(m_base) = base.jacobian(x);
    for (std::size_t k = 0; k < fixed.size(); ++k) out(m_base + static_cast<Index>(k), fixed[k]) = 1.0;
    return out;
  }
};

}  // namespace

IpmResult solve_ipm(const NlpProblem& problem, const VectorXd& x0, const IpmOptions& opt) {
  const Index n = problem.num_variables();
  VectorXd lo = problem.lower();
  VectorXd hi = problem.upper();

  Augmented aug{problem, n, problem.num_constraints(), {}, {}};
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(lo(i)) && lo(i) == hi(i)) {
      aug.fixed.push_back(i);
      aug.fixed_value.push_back(lo(i));
      lo(i) = -kInf;
      hi(i) = kInf;
    }
  }
  const Index m = aug.m();

  std::vector<bool> has_lo(static_cast<std::size_t>(n)), has_hi(static_cast<std::size_t>(n));
  Index bounded = 0;
  for (Index i = 0; i < n; ++i) {
    has_lo[i] = std::isfinite(lo(i));
    has_hi[i] = std::isfinite(hi(i));
    bounded += has_lo[i] + has_hi[i];
  }

  VectorXd x = x0;
  for (Index i = 0; i < n; ++i) {
    if (has_lo[i] && has_hi[i]) {
      const double width = hi(i) - lo(i);
      const double pl = std::min(kPush * std::max(1.0, std::abs(lo(i))), kPush * width);
      const double pu = std::min(kPush * std::max(1.0, std::abs(hi(i))), kPush * width);
      x(i) = std::clamp(x(i), lo(i) + pl, hi(i) - pu);
    } else if (has_lo[i]) {
      x(i) = std::max(x(i), lo(i) + kPush * std::max(1.0, std::abs(lo(i))));
    } else if (has_hi[i]) {
      x(i) = std::min(x(i), hi(i) - kPush * std::max(1.0, std::abs(hi(i))));
    }
  }

  const double grad0 = problem.gradient(x).lpNorm<Eigen::Infinity>();
  const double sf = grad0 > 100.0 ? 100.0 / grad0 : 1.0;

  VectorXd zl = VectorXd::Zero(n), zu = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (has_lo[i]) zl(i) = 1.0;
    if (has_hi[i]) zu(i) = 1.0;
  }

  auto slack_lo = [&](const VectorXd& v) {
    VectorXd s = VectorXd::Ones(n);
    for (Index i = 0; i < n; ++i) if (has_lo[i]) s(i) = v(i) - lo(i);
    return s;
  };
  auto slack_hi = [&](const VectorXd& v) {
    VectorXd s = VectorXd::Ones(n);
    for (Index i = 0; i < n; ++i) if (has_hi[i]) s(i) = hi(i) - v(i);
    return s;
  };

  VectorXd y = VectorXd::Zero(m);
  if (m > 0) {
    const VectorXd g = sf * problem.gradient(x);
    const MatrixXd J = aug.jac(x);
    VectorXd ls = J.transpose().completeOrthogonalDecomposition().solve(-(g - zl + zu));
    if (ls.allFinite() && ls.lpNorm<Eigen::Infinity>() < 1e3) y = ls;
  }

  double mu = opt.mu_init;
  double nu = 1.0;
  double dw_last = 0.0;
  int acceptable_count = 0;

  IpmResult result;
  auto finish = [&](IpmStatus status, int iter) {
    result.status = status;
    result.iterations = iter;
    result.x = x;
    result.objective = problem.objective(x);
    const VectorXd c = aug.c(x);
    result.constraint_violation = m > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0;
    VectorXd zl_out = zl / sf;
    VectorXd zu_out = zu / sf;
    for (std::size_t k = 0; k < aug.fixed.size(); ++k) {
      const double yk = y(aug.m_base + static_cast<Index>(k)) / sf;
      const Index i = aug.fixed[k];
      // grad f + yk e_i = grad f - zl e_i + zu e_i
      if (yk < 0) zl_out(i) = -yk; else zu_out(i) = yk;
    }
    result.y = y.head(aug.m_base) / sf;
    result.z_lower = zl_out;
    result.z_upper = zu_out;
    const VectorXd rd = problem.gradient(x) +
                        (aug.m_base > 0 ? VectorXd(problem.jacobian(x).transpose() * result.y)
                                        : VectorXd::Zero(n)) -
                        zl_out + zu_out;
    result.dual_infeasibility = rd.lpNorm<Eigen::Infinity>();
    double compl_max = 0.0;
    const VectorXd sl = slack_lo(x), su = slack_hi(x);
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) compl_max = std::max(compl_max, zl_out(i) * sl(i));
      if (has_hi[i]) compl_max = std::max(compl_max, zu_out(i) * su(i));
    }
    result.complementarity = compl_max;
    return result;
  };

  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    const VectorXd g = sf * problem.gradient(x);
    const VectorXd c = aug.c(x);
    const MatrixXd J = aug.jac(x);
    const VectorXd sl = slack_lo(x);
    const VectorXd su = slack_hi(x);
    if (!g.allFinite() || !c.allFinite() || !J.allFinite()) {
      return finish(IpmStatus::kNumericalFailure, iter);
    }

    const VectorXd rd = g + J.transpose() * y - zl + zu;
    const double zsum = zl.lpNorm<1>() + zu.lpNorm<1>();
    const double sd = std::max(100.0, (y.lpNorm<1>() + zsum) / static_cast<double>(std::max<Index>(1, m + bounded))) / 100.0;
    const double sc = std::max(100.0, zsum / static_cast<double>(std::max<Index>(1, bounded))) / 100.0;
    const double dual_err = rd.lpNorm<Eigen::Infinity>() / sd;
    const double primal_err = m > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0;
    auto compl_err = [&](double target) {
      double e = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (has_lo[i]) e = std::max(e, std::abs(zl(i) * sl(i) - target));
        if (has_hi[i]) e = std::max(e, std::abs(zu(i) * su(i) - target));
      }
      return e / sc;
    };

    if (dual_err <= opt.tol && primal_err <= opt.constr_tol && compl_err(0.0) <= opt.tol) {
      return finish(IpmStatus::kConverged, iter);
    }
    if (dual_err <= opt.acceptable_tol && primal_err <= opt.acceptable_constr_tol &&
        compl_err(0.0) <= opt.acceptable_tol) {
      if (++acceptable_count >= opt.acceptable_iterations) return finish(IpmStatus::kConverged, iter);
    } else {
      acceptable_count = 0;
    }
    if (iter == opt.max_iterations) break;

    while (mu > opt.tol / 10.0 &&
           std::max({dual_err, primal_err, compl_err(mu)}) <= kKappaEps * mu) {
      mu = std::max(opt.tol / 10.0, std::min(0.2 * mu, std::pow(mu, 1.5)));
    }

    const MatrixXd W = problem.hessian(x, sf, y.head(aug.m_base));
    VectorXd sigma = VectorXd::Zero(n);
    VectorXd grad_barrier = g;
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) {
        sigma(i) += zl(i) / sl(i);
        grad_barrier(i) -= mu / sl(i);
      }
      if (has_hi[i]) {
        sigma(i) += zu(i) / su(i);
        grad_barrier(i) += mu / su(i);
      }
    }

    MatrixXd K = MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = W;
    K.topLeftCorner(n, n).diagonal() += sigma;
    if (m > 0) {
      K.bottomLeftCorner(m, n) = J;
      K.topRightCorner(n, m) = J.transpose();
    }
    VectorXd rhs(n + m);
    rhs.head(n) = -(grad_barrier + J.transpose() * y);
    if (m > 0) rhs.tail(m) = -c;

    double dw = 0.0, dc = 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig;
    VectorXd scale;
    MatrixXd Km;
    auto kkt_solve = [&](const VectorXd& r) -> VectorXd {
      auto once = [&](const VectorXd& v) -> VectorXd {
        return scale.asDiagonal() *
               (eig.eigenvectors() *
                (eig.eigenvectors().transpose() * (scale.asDiagonal() * v)).cwiseQuotient(eig.eigenvalues()));
      };
      VectorXd out = once(r);
      for (int refine = 0; refine < 2; ++refine) out += once(r - Km * out);
      return out;
    };
    while (true) {
      Km = K;
      Km.topLeftCorner(n, n).diagonal().array() += dw;
      if (m > 0) Km.bottomRightCorner(m, m).diagonal().array() -= dc;
      // symmetric diagonal scaling keeps the inertia and tames barrier terms
      scale = Km.diagonal().cwiseAbs().cwiseMax(1.0).cwiseSqrt().cwiseInverse();
      eig.compute(scale.asDiagonal() * Km * scale.asDiagonal());
      if (eig.info() != Eigen::Success) return finish(IpmStatus::kNumericalFailure, iter);
      const auto& ev = eig.eigenvalues();
      const double ztol = 1e-13 * std::max(1.0, ev.cwiseAbs().maxCoeff());
      Index pos = 0, neg = 0, zero = 0;
      for (Index k = 0; k < ev.size(); ++k) {
        if (ev(k) > ztol) ++pos; else if (ev(k) < -ztol) ++neg; else ++zero;
      }
      if (zero > 0 && dc == 0.0 && m > 0) {
        dc = 1e-8 * std::pow(mu, 0.25);
        continue;
      }
      if (pos == n && neg == m) break;
      if (dw == 0.0) {
        dw = dw_last == 0.0 ? 1e-4 : std::max(1e-20, dw_last / 3.0);
      } else {
        dw *= dw_last == 0.0 ? 100.0 : 8.0;
      }
      if (dw > 1e40) return finish(IpmStatus::kNumericalFailure, iter);
    }
    if (dw > 0.0) dw_last = dw;

    const VectorXd sol = kkt_solve(rhs);
    const VectorXd dx = sol.head(n);
    const VectorXd dy = sol.tail(m);
    VectorXd dzl = VectorXd::Zero(n), dzu = VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) dzl(i) = mu / sl(i) - zl(i) - zl(i) / sl(i) * dx(i);
      if (has_hi[i]) dzu(i) = mu / su(i) - zu(i) + zu(i) / su(i) * dx(i);
    }

    const double tau = std::max(0.99, 1.0 - mu);
    double alpha_max = 1.0, alpha_z = 1.0;
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i] && dx(i) < 0) alpha_max = std::min(alpha_max, -tau * sl(i) / dx(i));
      if (has_hi[i] && dx(i) > 0) alpha_max = std::min(alpha_max, tau * su(i) / dx(i));
      if (has_lo[i] && dzl(i) < 0) alpha_z = std::min(alpha_z, -tau * zl(i) / dzl(i));
      if (has_hi[i] && dzu(i) < 0) alpha_z = std::min(alpha_z, -tau * zu(i) / dzu(i));
    }

    auto barrier_value = [&](const VectorXd& v) {
      double val = sf * problem.objective(v);
      for (Index i = 0; i < n; ++i) {
        if (has_lo[i]) {
          const double s = v(i) - lo(i);
          if (s <= 0) return kInf;
          val -= mu * std::log(s);
        }
        if (has_hi[i]) {
          const double s = hi(i) - v(i);
          if (s <= 0) return kInf;
          val -= mu * std::log(s);
        }
      }
      return val;
    };
    const double c1 = m > 0 ? c.lpNorm<1>() : 0.0;
    const double slope_obj = grad_barrier.dot(dx);
    if (c1 > 0.0) {
      MatrixXd Wsig = W;
      Wsig.diagonal() += sigma;
      Wsig.diagonal().array() += dw;
      const double quad = dx.dot(Wsig * dx);
      const double nu_trial = (slope_obj + 0.5 * std::max(0.0, quad)) / (0.9 * c1);
      if (nu < nu_trial) nu = nu_trial + 1.0;
    }
    const double slope = slope_obj - nu * c1;
    auto merit = [&](const VectorXd& v) {
      const double b = barrier_value(v);
      if (!std::isfinite(b)) return kInf;
      return b + (m > 0 ? nu * aug.c(v).lpNorm<1>() : 0.0);
    };

    const double phi0 = merit(x);
    double alpha = alpha_max;
    bool accepted = false;
    VectorXd xt;
    for (int ls = 0; ls < 60; ++ls) {
      xt = x + alpha * dx;
      const double phi = merit(xt);
      if (std::isfinite(phi) && phi <= phi0 + kArmijo * alpha * std::min(slope, 0.0)) {
        accepted = true;
        break;
      }
      // Second-order correction on the first trial to fight the Maratos effect.
      if (ls == 0 && m > 0) {
        const VectorXd ct = aug.c(xt);
        if (ct.lpNorm<1>() >= c1) {
          VectorXd rhs_soc = rhs;
          rhs_soc.tail(m) = -(alpha * c + ct);
          const VectorXd soc = kkt_solve(rhs_soc);
          VectorXd dx_soc = soc.head(n);
          double a_soc = 1.0;
          for (Index i = 0; i < n; ++i) {
            if (has_lo[i] && dx_soc(i) < 0) a_soc = std::min(a_soc, -tau * sl(i) / dx_soc(i));
            if (has_hi[i] && dx_soc(i) > 0) a_soc = std::min(a_soc, tau * su(i) / dx_soc(i));
          }
          const VectorXd xs = x + a_soc * dx_soc;
          const double phis = merit(xs);
          if (std::isfinite(phis) && phis <= phi0 + kArmijo * alpha * std::min(slope, 0.0)) {
            xt = xs;
            accepted = true;
            break;
          }
        }
      }
      alpha *= 0.5;
      if (alpha < 1e-16) break;
    }
    if (!accepted) {
      if (dx.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
        return finish(IpmStatus::kStalled, iter);
      }
      // Take a short step anyway; the next Newton system usually recovers.
      alpha = std::min(alpha_max, 1e-3);
      xt = x + alpha * dx;
      if (!std::isfinite(merit(xt))) return finish(IpmStatus::kStalled, iter);
    }

    x = xt;
    y += alpha * dy;
    zl += alpha_z * dzl;
    zu += alpha_z * dzu;
    const VectorXd sl2 = slack_lo(x), su2 = slack_hi(x);
    for (Index i = 0; i < n; ++i) {
      if (has_lo[i]) zl(i) = std::clamp(zl(i), mu / (kKappaSigma * sl2(i)), kKappaSigma * mu / sl2(i));
      if (has_hi[i]) zu(i) = std::clamp(zu(i), mu / (kKappaSigma * su2(i)), kKappaSigma * mu / su2(i));
    }
    // Keep the least-squares equality multipliers when they fit better.
    if (m > 0) {
      const VectorXd g2 = sf * problem.gradient(x);
      const MatrixXd J2 = aug.jac(x);
      const VectorXd base = g2 - zl + zu;
      const VectorXd y_ls = J2.transpose().completeOrthogonalDecomposition().solve(-base);
      if (y_ls.allFinite() &&
          (base + J2.transpose() * y_ls).lpNorm<Eigen::Infinity>() <
              (base + J2.transpose() * y).lpNorm<Eigen::Infinity>()) {
        y = y_ls;
      }
    }
  }
  return finish(IpmStatus::kIterationLimit, opt.max_iterations);
}

}  // namespace gridwatch::dopf
