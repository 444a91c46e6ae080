#pragma once

#include <functional>
#include <vector>

#include "gapforge/errors.hpp"

namespace gapforge {

/// Parameter m of the Jacobi convention sn(x|m), 0 <= m < 1.
/// The solitonic limit m = 1 is rejected: the potential built from it is
/// no longer periodic.
struct EllipticParameter {
  double m;
  explicit EllipticParameter(double m_value);
};

/// Jacobi elliptic function values at one point, together with the real
/// quarter period K(m).
struct EllipticValues {
  double sn;
  double cn;
  double dn;
  double quarter_period;
};

/// Complete elliptic integral of the first kind K(m), computed by the
/// arithmetic-geometric mean iteration.  Monotone increasing in m.
double complete_elliptic_k(EllipticParameter m);

/// Evaluates sn, cn, dn for a fixed parameter m.  The AGM scale sequence is
/// computed once in the constructor; evaluation runs the descending phase
/// recursion, so repeated calls (e.g. inside an ODE integrator) stay cheap.
class JacobiEvaluator {
 public:
  explicit JacobiEvaluator(EllipticParameter m);

  EllipticValues operator()(double x) const;

  double quarter_period() const { return quarter_period_; }
  double parameter() const { return m_; }

 private:
  double m_;
  double quarter_period_;
  std::vector<double> agm_a_;  // a_0 .. a_N
  std::vector<double> agm_c_;  // c_0 .. c_N, c_n = (a_{n-1} - b_{n-1})/2
};

/// One-shot convenience wrapper around JacobiEvaluator.
EllipticValues jacobi_elliptic(double x, EllipticParameter m);

/// A real periodic potential: evaluator, period, and the defining parameter.
struct PotentialSpec {
  std::function<double(double)> value;
  double period;
  double parameter;  // m for the Lame family

  double operator()(double x) const { return value(x); }
};

/// The one-gap Lame potential 2 m sn^2(x|m) with period 2 K(m).
/// Range of the potential is [0, 2m]; band edges sit at m, 1, 1 + m.
PotentialSpec lame_potential(EllipticParameter m);

}  // namespace gapforge
