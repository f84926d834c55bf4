#pragma once

#include <array>

namespace gridwatch::dopf {

enum class FlowModel {
  kAc,  // full polar power flow
  kDc,  // V = 1 pu, lossless, linear in angle; reactive power dropped
};

/// Value, gradient and Hessian of a flow expression in the ordered arguments
/// (V_from, angle_from, V_to, angle_to).
struct FlowTerm {
  double value = 0.0;
  std::array<double, 4> grad{};
  std::array<std::array<double, 4>, 4> hess{};
};

/// Active power leaving `from` into a series branch of admittance g + jb:
///   P = g V_f^2 - V_f V_t (g cos t + b sin t),  t = angle_f - angle_t
FlowTerm active_flow(double g, double b, double v_from, double a_from, double v_to, double a_to);

/// Reactive power leaving `from`:
///   Q = -b V_f^2 - V_f V_t (g sin t - b cos t)
FlowTerm reactive_flow(double g, double b, double v_from, double a_from, double v_to, double a_to);

/// Linearized lossless flow -b (angle_f - angle_t); V arguments are ignored.
FlowTerm active_flow_dc(double b, double a_from, double a_to);

}  // namespace gridwatch::dopf
