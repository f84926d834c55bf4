#pragma once

// Standalone scalar replay of the detector and penalty equations, written
// without the library so pipeline output can be compared against it.

#include <cmath>
#include <vector>

namespace oracle {

struct RecursionParams {
  double n0 = 3.0;
  double a = 1.0;
  double eps = 0.1;
  double c = 1.06;
};

struct RecursionStep {
  double d = 0.0;  // filtered
  double rate = 0.0;
  double decay = 0.0;
  double factor = 0.0;
  double penalty = 0.0;
};

/// c^F - 1. Near F = 0 the subtraction cancels, so small exponents use the
/// power series of e^x - 1 instead.
inline double penalty_raw(double f, double c) {
  const double x = f * std::log(c);
  if (std::fabs(x) >= 1e-2) return std::pow(c, f) - 1.0;
  double term = x, sum = 0.0;
  for (int n = 1; n < 30 && term != 0.0; ++n) {
    sum += term;
    term *= x / (n + 1);
  }
  return sum;
}

inline std::vector<RecursionStep> replay(const std::vector<double>& raw_d, const RecursionParams& p) {
  std::vector<RecursionStep> out;
  double f = 0.0;
  double prev = 0.0;
  for (double raw : raw_d) {
    RecursionStep s;
    s.d = std::fabs(raw) > p.eps ? raw : 0.0;
    if (s.d == prev) {
      s.rate = s.d > 0.0 ? 1.0 : (s.d < 0.0 ? -1.0 : 0.0);
    } else {
      s.rate = p.a * (s.d - prev);
    }
    s.decay = std::fabs(s.d) > p.eps ? 1.0 : p.n0;
    f = (f + s.d * s.rate) / s.decay;
    s.factor = f;
    const double pen = penalty_raw(f, p.c);
    s.penalty = pen < 0.0 ? 0.0 : pen;
    prev = s.d;
    out.push_back(s);
  }
  return out;
}

/// |a - b| <= tol * max(|a|, |b|), with exact equality accepted for zeros.
inline bool close_rel(double a, double b, double tol) {
  if (a == b) return true;
  return std::fabs(a - b) <= tol * std::fmax(std::fabs(a), std::fabs(b));
}

}  // namespace oracle
