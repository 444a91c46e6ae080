#include "gapforge/elliptic.hpp"

#include <algorithm>
#include <cmath>

namespace gapforge {

namespace {

constexpr int kMaxAgmLevels = 32;
constexpr double kAgmTolerance = 1e-15;

}  // namespace

EllipticParameter::EllipticParameter(double m_value) : m(m_value) {
  if (!std::isfinite(m) || m < 0.0 || m >= 1.0) {
    throw ValidationError("elliptic parameter m must lie in [0, 1); got m = " +
                          std::to_string(m_value) +
                          (m_value == 1.0 ? " (degenerate solitonic modulus unsupported)" : ""));
  }
}

double complete_elliptic_k(EllipticParameter m) {
  double a = 1.0;
  double b = std::sqrt(1.0 - m.m);
  for (int n = 0; n < kMaxAgmLevels; ++n) {
    if (std::abs(a - b) < kAgmTolerance * a) break;
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return M_PI / (2.0 * a);
}

JacobiEvaluator::JacobiEvaluator(EllipticParameter m) : m_(m.m) {
  double a = 1.0;
  double b = std::sqrt(1.0 - m_);
  agm_a_.push_back(a);
  agm_c_.push_back(0.0);  // c_0 unused
  for (int n = 1; n <= kMaxAgmLevels; ++n) {
    const double c = 0.5 * (a - b);
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
    agm_a_.push_back(a);
    agm_c_.push_back(c);
    if (c < kAgmTolerance * a) break;
  }
  quarter_period_ = M_PI / (2.0 * agm_a_.back());
}

EllipticValues JacobiEvaluator::operator()(double x) const {
  if (!std::isfinite(x)) {
    throw ValidationError("jacobi_elliptic: argument must be finite");
  }
  // sn and cn have period 4K, dn has period 2K; reduce once so the phase
  // recursion never sees a large angle.
  const double x_red = std::remainder(x, 4.0 * quarter_period_);

  const int levels = static_cast<int>(agm_a_.size()) - 1;
  double phi = std::ldexp(agm_a_[levels] * x_red, levels);
  for (int n = levels; n >= 1; --n) {
    const double ratio = agm_c_[n] / agm_a_[n];
    const double arg = std::clamp(ratio * std::sin(phi), -1.0, 1.0);
    phi = 0.5 * (phi + std::asin(arg));
  }

  EllipticValues out;
  out.sn = std::sin(phi);
  out.cn = std::cos(phi);
  // dn never vanishes for m < 1, so the defining identity is the
  // well-conditioned route: dn = sqrt(1 - m sn^2) >= sqrt(1 - m).
  out.dn = std::sqrt(1.0 - m_ * out.sn * out.sn);
  out.quarter_period = quarter_period_;
  return out;
}

EllipticValues jacobi_elliptic(double x, EllipticParameter m) {
  return JacobiEvaluator(m)(x);
}

PotentialSpec lame_potential(EllipticParameter m) {
  JacobiEvaluator eval(m);
  PotentialSpec spec;
  spec.period = 2.0 * eval.quarter_period();
  spec.parameter = m.m;
  spec.value = [eval, two_m = 2.0 * m.m](double x) {
    const double sn = eval(x).sn;
    return two_m * sn * sn;
  };
  return spec;
}

}  // namespace gapforge
