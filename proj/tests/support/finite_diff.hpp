#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "gridwatch/dopf/local_problem.hpp"

namespace fd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kStep = 1e-6;

/// Flat start perturbed by up to 0.2 per entry; AC voltages near 1 pu.
inline VectorXd random_point(const gridwatch::dopf::LocalModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd x = m.flat_start();
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.2 * u(rng);
  if (m.model() == gridwatch::dopf::FlowModel::kAc) {
    x(m.v()) = 1.0 + 0.05 * u(rng);
    for (std::size_t k = 0; k < m.degree(); ++k) x(m.aux_v(k)) = 1.0 + 0.05 * u(rng);
  }
  return x;
}

inline VectorXd gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x) {
  VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a(i) += kStep;
    b(i) -= kStep;
    g(i) = (f(a) - f(b)) / (2.0 * kStep);
  }
  return g;
}

inline MatrixXd jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x) {
  const VectorXd f0 = f(x);
  MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a(i) += kStep;
    b(i) -= kStep;
    J.col(i) = (f(a) - f(b)) / (2.0 * kStep);
  }
  return J;
}

/// Entrywise relative error with a unit floor on the scale.
inline double worst_relative(const MatrixXd& analytic, const MatrixXd& numeric) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double scale = std::max(1.0, std::abs(analytic(r, c)));
      worst = std::max(worst, std::abs(analytic(r, c) - numeric(r, c)) / scale);
    }
  }
  return worst;
}

}  // namespace fd
