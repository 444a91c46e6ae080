#pragma once

// Shared helpers for the test suites: finite differences, quadrature, and
// small closed-form oracles kept independent of the library code under test.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace testsupport {

using Fn = std::function<double(double)>;

// 4th-order central first derivative.
inline double derivative(const Fn& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

// 4th-order central second derivative.
inline double second_derivative(const Fn& f, double x, double h) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) /
         (12 * h * h);
}

// Adaptive Simpson quadrature with interval halving until convergence.
inline double simpson_segment(const Fn& f, double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

inline double adaptive_simpson(const Fn& f, double a, double b, double whole, double tol,
                               int depth) {
  const double c = 0.5 * (a + b);
  const double left = simpson_segment(f, a, c);
  const double right = simpson_segment(f, c, b);
  if (depth <= 0) return left + right;
  if (std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, c, left, tol / 2, depth - 1) +
         adaptive_simpson(f, c, b, right, tol / 2, depth - 1);
}

inline double integrate(const Fn& f, double a, double b, double tol = 1e-13) {
  return adaptive_simpson(f, a, b, simpson_segment(f, a, b), tol, 40);
}

// Independent oracle for the complete elliptic integral of the first kind:
// a plain arithmetic-geometric mean loop, written separately from the
// library implementation.
inline double agm_oracle_k(double m) {
  double a = 1.0, b = std::sqrt(1.0 - m);
  for (int i = 0; i < 64 && std::abs(a - b) > 1e-16 * a; ++i) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return M_PI / (2.0 * a);
}

// Independent oracle for sn(x|m) on 0 <= x <= K(m): numerically inverts the
// incomplete elliptic integral u(phi) = int_0^phi dtheta / sqrt(1 - m sin^2).
inline double sn_oracle(double x, double m) {
  auto u_of_phi = [m](double phi) {
    return integrate([m](double t) { return 1.0 / std::sqrt(1.0 - m * std::sin(t) * std::sin(t)); },
                     0.0, phi, 1e-14);
  };
  double lo = 0.0, hi = M_PI / 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (u_of_phi(mid) < x) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  return std::sin(0.5 * (lo + hi));
}

}  // namespace testsupport
