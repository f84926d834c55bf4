#include "gridwatch/dopf/branch_flow.hpp"

#include <cmath>

namespace gridwatch::dopf {

namespace {
enum Arg { kVf = 0, kAf = 1, kVt = 2, kAt = 3 };

void symmetrize(FlowTerm& t) {
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < r; ++c) t.hess[c][r] = t.hess[r][c];
}
}  // namespace

FlowTerm active_flow(double g, double b, double vf, double af, double vt, double at) {
  const double th = af - at;
  const double cs = std::cos(th), sn = std::sin(th);
  const double k = g * cs + b * sn;   // d/dth: -g sn + b cs = -m
  const double m = g * sn - b * cs;
  FlowTerm t;
  t.value = g * vf * vf - vf * vt * k;
  t.grad[kVf] = 2.0 * g * vf - vt * k;
  t.grad[kVt] = -vf * k;
  t.grad[kAf] = vf * vt * m;
  t.grad[kAt] = -vf * vt * m;

  t.hess[kVf][kVf] = 2.0 * g;
  t.hess[kVt][kVf] = -k;
  t.hess[kAf][kVf] = vt * m;
  t.hess[kAt][kVf] = -vt * m;
  t.hess[kVt][kVt] = 0.0;
  t.hess[kVt][kAf] = vf * m;
  t.hess[kAt][kVt] = -vf * m;
  t.hess[kAf][kAf] = vf * vt * k;
  t.hess[kAt][kAf] = -vf * vt * k;
  t.hess[kAt][kAt] = vf * vt * k;
  symmetrize(t);
  return t;
}

FlowTerm reactive_flow(double g, double b, double vf, double af, double vt, double at) {
  const double th = af - at;
  const double cs = std::cos(th), sn = std::sin(th);
  const double k = g * cs + b * sn;
  const double m = g * sn - b * cs;  // d/dth: k
  FlowTerm t;
  t.value = -b * vf * vf - vf * vt * m;
  t.grad[kVf] = -2.0 * b * vf - vt * m;
  t.grad[kVt] = -vf * m;
  t.grad[kAf] = -vf * vt * k;
  t.grad[kAt] = vf * vt * k;

  t.hess[kVf][kVf] = -2.0 * b;
  t.hess[kVt][kVf] = -m;
  t.hess[kAf][kVf] = -vt * k;
  t.hess[kAt][kVf] = vt * k;
  t.hess[kVt][kVt] = 0.0;
  t.hess[kVt][kAf] = -vf * k;
  t.hess[kAt][kVt] = vf * k;
  t.hess[kAf][kAf] = vf * vt * m;
  t.hess[kAt][kAf] = -vf * vt * m;
  t.hess[kAt][kAt] = vf * vt * m;
  symmetrize(t);
  return t;
}

FlowTerm active_flow_dc(double b, double af, double at) {
  FlowTerm t;
  t.value = -b * (af - at);
  t.grad[kAf] = -b;
  t.grad[kAt] = b;
  return t;
}

}  // namespace gridwatch::dopf
