#include "gapforge/darboux.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gapforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double log_magnitude(const SolutionTrace& t, std::size_t i) {
  const double m = std::abs(t.psi[i]);
  return (m == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(m)) + t.scale_at(i);
}

// Shift the log scale so that max |u| = 1 over the window.  Keeps the
// transform outputs identical for u and c*u.
void normalize_max(SolutionTrace& t) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i) peak = std::max(peak, log_magnitude(t, i));
  if (!std::isfinite(peak)) return;  // identically zero trace; leave it alone
  if (t.log_scale.empty()) t.log_scale.assign(t.size(), 0.0);
  for (auto& s : t.log_scale) s -= peak;
}

void require_same_grid(const SolutionTrace& a, const SolutionTrace& b) {
  if (a.size() != b.size() || std::abs(a.step - b.step) > 1e-12 ||
      std::abs(a.x.front() - b.x.front()) > 1e-9 || std::abs(a.x.back() - b.x.back()) > 1e-9) {
    throw ValidationError("traces are sampled on different grids");
  }
}

void set_divergence_tags(TransformationFunction& u) {
  const std::size_t n = u.trace.size();
  const double mid = log_magnitude(u.trace, n / 2);
  u.grows_right = log_magnitude(u.trace, n - 1) > mid;
  u.grows_left = log_magnitude(u.trace, 0) > mid;
}

// Pole cells: samples adjacent to a sign change of `mantissa`, and exact
// zeros themselves.
std::vector<std::uint8_t> pole_mask(const std::vector<double>& mantissa) {
  const std::size_t n = mantissa.size();
  std::vector<std::uint8_t> valid(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (mantissa[i] == 0.0) valid[i] = 0;
    if (i + 1 < n && mantissa[i] * mantissa[i + 1] < 0.0) {
      valid[i] = 0;
      valid[i + 1] = 0;
    }
  }
  return valid;
}

int census(const std::vector<double>& values) {
  int count = 0;
  int last = 0;
  for (double v : values) {
    const int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    if (s == 0) {
      ++count;
      continue;
    }
    if (last != 0 && s != last) ++count;
    last = s;
  }
  return count;
}

bool stencil_ok(const std::vector<std::uint8_t>& valid, std::size_t lo, std::size_t hi) {
  for (std::size_t i = lo; i <= hi; ++i) {
    if (!valid[i]) return false;
  }
  return true;
}

// 4th-order first derivative of a sampled curve; one-sided stencils at the
// window boundary, NaN wherever the stencil touches a pole cell.
std::vector<double> derivative_curve(const std::vector<double>& f,
                                     const std::vector<std::uint8_t>& valid, double h) {
  const std::size_t n = f.size();
  std::vector<double> df(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= 2 && i + 2 < n && stencil_ok(valid, i - 2, i + 2)) {
      df[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    } else if (i == 0 && n >= 5 && stencil_ok(valid, 0, 4)) {
      df[i] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    } else if (i == 1 && n >= 5 && stencil_ok(valid, 0, 4)) {
      df[i] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    } else if (i + 2 == n && n >= 5 && stencil_ok(valid, n - 5, n - 1)) {
      df[i] = (-f[n - 5] + 6.0 * f[n - 4] - 18.0 * f[n - 3] + 10.0 * f[n - 2] +
               3.0 * f[n - 1]) /
              (12.0 * h);
    } else if (i + 1 == n && n >= 5 && stencil_ok(valid, n - 5, n - 1)) {
      df[i] = (3.0 * f[n - 5] - 16.0 * f[n - 4] + 36.0 * f[n - 3] - 48.0 * f[n - 2] +
               25.0 * f[n - 1]) /
              (12.0 * h);
    }
  }
  return df;
}

// 4th-order second derivative, interior only.
std::vector<double> second_derivative_curve(const std::vector<double>& f,
                                            const std::vector<std::uint8_t>& valid, double h) {
  const std::size_t n = f.size();
  std::vector<double> d2f(n, kNaN);
  for (std::size_t i = 2; i + 2 < n; ++i) {
    if (!stencil_ok(valid, i - 2, i + 2)) continue;
    d2f[i] = (-f[i + 2] + 16.0 * f[i + 1] - 30.0 * f[i] + 16.0 * f[i - 1] - f[i - 2]) /
             (12.0 * h * h);
  }
  return d2f;
}

}  // namespace

TransformationFunction make_transformation_function(const BlochPair& pair, double c_plus,
                                                    double c_minus) {
  if (c_plus == 0.0 && c_minus == 0.0) {
    throw ValidationError("transformation function needs a non-zero Bloch combination");
  }
  const SolutionTrace& vp = pair.plus.trace;
  const SolutionTrace& vm = pair.minus.trace;
  const std::size_t n = vp.size();

  TransformationFunction u;
  u.energy = vp.energy;
  u.c_plus = c_plus;
  u.c_minus = c_minus;
  SolutionTrace& tr = u.trace;
  tr.energy = vp.energy;
  tr.step = vp.step;
  tr.x = vp.x;
  tr.psi.resize(n);
  tr.dpsi.resize(n);
  tr.log_scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sp = vp.scale_at(i);
    const double sm = vm.scale_at(i);
    double s;
    if (c_plus == 0.0) {
      s = sm;
    } else if (c_minus == 0.0) {
      s = sp;
    } else {
      s = std::max(sp, sm);
    }
    tr.log_scale[i] = s;
    const double wp = c_plus == 0.0 ? 0.0 : c_plus * std::exp(sp - s);
    const double wm = c_minus == 0.0 ? 0.0 : c_minus * std::exp(sm - s);
    tr.psi[i] = wp * vp.psi[i] + wm * vm.psi[i];
    tr.dpsi[i] = wp * vp.dpsi[i] + wm * vm.dpsi[i];
  }
  normalize_max(tr);
  u.node_count = tr.node_count();
  set_divergence_tags(u);
  return u;
}

TransformationFunction transformation_from_trace(SolutionTrace trace) {
  if (trace.size() < 5) {
    throw ValidationError("transformation function trace too short");
  }
  TransformationFunction u;
  u.energy = trace.energy;
  u.trace = std::move(trace);
  normalize_max(u.trace);
  u.node_count = u.trace.node_count();
  set_divergence_tags(u);
  return u;
}

SampledCurve beta_from_u(const TransformationFunction& u) {
  const SolutionTrace& tr = u.trace;
  SampledCurve beta;
  beta.x = tr.x;
  beta.valid = pole_mask(tr.psi);
  beta.y.resize(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    beta.y[i] = beta.valid[i] ? -tr.dpsi[i] / tr.psi[i] : kNaN;
  }
  return beta;
}

double riccati_residual(const SampledCurve& beta, const PotentialSpec& potential,
                        double energy) {
  const std::size_t n = beta.y.size();
  if (n < 5) {
    throw ValidationError("riccati_residual: fewer than 5 samples");
  }
  const double h = beta.x[1] - beta.x[0];
  double worst = -1.0;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    if (!stencil_ok(beta.valid, i - 2, i + 2)) continue;
    const double dbeta =
        (beta.y[i - 2] - 8.0 * beta.y[i - 1] + 8.0 * beta.y[i + 1] - beta.y[i + 2]) / (12.0 * h);
    const double r = std::abs(-dbeta + beta.y[i] * beta.y[i] - potential(beta.x[i]) + energy);
    worst = std::max(worst, r);
  }
  if (worst < 0.0) {
    throw ValidationError("riccati_residual: fewer than 5 contiguous non-pole samples");
  }
  return worst;
}

DarbouxResult transform_potential_1(const PotentialSpec& potential,
                                    const TransformationFunction& u) {
  const SolutionTrace& tr = u.trace;
  const std::size_t n = tr.size();

  DarbouxResult out;
  out.order = 1;
  out.energy = u.energy;
  out.grid = tr.x;
  out.v0.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.v0[i] = potential(tr.x[i]);

  out.beta = beta_from_u(u);
  out.valid = out.beta.valid;
  out.regular = u.node_count == 0;

  // Primary route: V1 = V0 + 2 beta' with beta' = beta^2 - V0 + eps, so no
  // numerical differentiation enters the result.
  out.v_out.assign(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.valid[i]) continue;
    const double b = out.beta.y[i];
    out.v_out[i] = 2.0 * b * b - out.v0[i] + 2.0 * u.energy;
  }

  // Cross-check route: V1 = V0 - 2 (ln|u|)'' by finite differences.
  std::vector<double> log_u(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    log_u[i] = out.valid[i] ? std::log(std::abs(tr.psi[i])) + tr.scale_at(i) : kNaN;
  }
  const auto d2 = second_derivative_curve(log_u, out.valid, tr.step);
  double mismatch = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(d2[i]) || std::isnan(out.v_out[i])) continue;
    mismatch = std::max(mismatch, std::abs(out.v0[i] - 2.0 * d2[i] - out.v_out[i]));
  }
  out.route_mismatch = mismatch;
  return out;
}

SolutionTrace map_eigenfunction_1(const TransformationFunction& u, const SolutionTrace& psi) {
  require_same_grid(u.trace, psi);
  const SolutionTrace& tr = u.trace;
  const std::size_t n = tr.size();
  const auto valid = pole_mask(tr.psi);

  SolutionTrace phi;
  phi.energy = psi.energy;
  phi.step = psi.step;
  phi.x = psi.x;
  phi.psi.resize(n);
  phi.dpsi.resize(n);
  if (psi.scaled()) phi.log_scale = psi.log_scale;
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) {
      phi.psi[i] = kNaN;
      phi.dpsi[i] = kNaN;
      continue;
    }
    const double beta = -tr.dpsi[i] / tr.psi[i];
    phi.psi[i] = psi.dpsi[i] + beta * psi.psi[i];
    phi.dpsi[i] = (u.energy - psi.energy) * psi.psi[i] + beta * phi.psi[i];
  }
  return phi;
}

SolutionTrace missing_state_1(const TransformationFunction& u) {
  if (u.node_count != 0) {
    throw ValidationError("missing_state_1: u has nodes, 1/u is not square integrable");
  }
  const SolutionTrace& tr = u.trace;
  const std::size_t n = tr.size();

  SolutionTrace phi;
  phi.energy = u.energy;
  phi.step = tr.step;
  phi.x = tr.x;
  phi.psi.resize(n);
  phi.dpsi.resize(n);
  if (tr.scaled()) phi.log_scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    phi.psi[i] = 1.0 / tr.psi[i];
    phi.dpsi[i] = -tr.dpsi[i] / (tr.psi[i] * tr.psi[i]);
    if (tr.scaled()) phi.log_scale[i] = -tr.log_scale[i];
  }
  return phi;
}

WronskianTrace wronskian_of(const TransformationFunction& u_a,
                            const TransformationFunction& u) {
  require_same_grid(u_a.trace, u.trace);
  const SolutionTrace& a = u_a.trace;
  const SolutionTrace& b = u.trace;
  const std::size_t n = a.size();

  WronskianTrace w;
  w.mantissa.resize(n);
  w.log_scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.mantissa[i] = a.psi[i] * b.dpsi[i] - a.dpsi[i] * b.psi[i];
    w.log_scale[i] = a.scale_at(i) + b.scale_at(i);
  }
  w.node_count = census(w.mantissa);
  return w;
}

DarbouxResult transform_potential_2(const PotentialSpec& potential,
                                    const TransformationFunction& u_a,
                                    const TransformationFunction& u) {
  if (u_a.energy == u.energy) {
    throw ValidationError("transform_potential_2: degenerate Wronskian, equal energies");
  }
  const auto w = wronskian_of(u_a, u);
  const SolutionTrace& a = u_a.trace;
  const SolutionTrace& b = u.trace;
  const std::size_t n = a.size();
  const double de = u_a.energy - u.energy;

  DarbouxResult out;
  out.order = 2;
  out.energy_a = u_a.energy;
  out.energy = u.energy;
  out.grid = a.x;
  out.v0.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.v0[i] = potential(a.x[i]);
  out.valid = pole_mask(w.mantissa);
  out.regular = w.node_count == 0;

  // (ln W)' = W'/W = (eps_a - eps) u_a u / W, exact pointwise by the
  // Wronskian derivative identity; the log scales cancel.
  out.beta.x = a.x;
  out.beta.valid = out.valid;
  out.beta.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.beta.y[i] = out.valid[i] ? de * a.psi[i] * b.psi[i] / w.mantissa[i] : kNaN;
  }

  const auto dg = derivative_curve(out.beta.y, out.valid, a.step);
  out.v_out.assign(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isnan(dg[i])) out.v_out[i] = out.v0[i] - 2.0 * dg[i];
  }

  // Cross-check route: direct -2 (ln|W|)'' by finite differences.
  std::vector<double> log_w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    log_w[i] = out.valid[i] ? std::log(std::abs(w.mantissa[i])) + w.log_scale[i] : kNaN;
  }
  const auto d2 = second_derivative_curve(log_w, out.valid, a.step);
  double mismatch = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(d2[i]) || std::isnan(out.v_out[i])) continue;
    mismatch = std::max(mismatch, std::abs(out.v0[i] - 2.0 * d2[i] - out.v_out[i]));
  }
  out.route_mismatch = mismatch;
  return out;
}

SolutionTrace map_eigenfunction_2(const TransformationFunction& u_a,
                                  const TransformationFunction& u, const SolutionTrace& psi) {
  require_same_grid(u_a.trace, u.trace);
  require_same_grid(u_a.trace, psi);
  if (u_a.energy == u.energy) {
    throw ValidationError("map_eigenfunction_2: degenerate Wronskian, equal energies");
  }
  const SolutionTrace& a = u_a.trace;
  const SolutionTrace& b = u.trace;
  const std::size_t n = a.size();
  const double ea = u_a.energy, eb = u.energy, ep = psi.energy;

  const auto w = wronskian_of(u_a, u);
  const auto valid = pole_mask(w.mantissa);

  SolutionTrace phi;
  phi.energy = ep;
  phi.step = psi.step;
  phi.x = psi.x;
  phi.psi.resize(n);
  phi.dpsi.resize(n);
  if (psi.scaled()) phi.log_scale = psi.log_scale;
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) {
      phi.psi[i] = kNaN;
      phi.dpsi[i] = kNaN;
      continue;
    }
    // 3x3 Wronskian with second derivatives eliminated by the eigenvalue
    // equation: W(u_a, u, psi) = -[ea u_a W(u,psi) - eb u W(u_a,psi)
    //                              + ep psi W(u_a,u)]
    const double w_b_psi = b.psi[i] * psi.dpsi[i] - b.dpsi[i] * psi.psi[i];
    const double w_a_psi = a.psi[i] * psi.dpsi[i] - a.dpsi[i] * psi.psi[i];
    const double g_m = -(ea * a.psi[i] * w_b_psi - eb * b.psi[i] * w_a_psi +
                         ep * psi.psi[i] * w.mantissa[i]);
    const double dg_m = -(ea * a.dpsi[i] * w_b_psi - eb * b.dpsi[i] * w_a_psi +
                          ep * psi.dpsi[i] * w.mantissa[i]);
    phi.psi[i] = g_m / w.mantissa[i];
    phi.dpsi[i] =
        dg_m / w.mantissa[i] - phi.psi[i] * (ea - eb) * a.psi[i] * b.psi[i] / w.mantissa[i];
  }
  return phi;
}

MissingPair missing_state_2(const TransformationFunction& u_a,
                            const TransformationFunction& u) {
  if (u_a.energy == u.energy) {
    throw ValidationError("missing_state_2: degenerate Wronskian, equal energies");
  }
  const auto w = wronskian_of(u_a, u);
  if (w.node_count != 0) {
    throw ValidationError("missing_state_2: W(u_a, u) has nodes");
  }
  const SolutionTrace& a = u_a.trace;
  const SolutionTrace& b = u.trace;
  const std::size_t n = a.size();
  const double de = u_a.energy - u.energy;

  MissingPair pair;
  SolutionTrace& st = pair.state;      // u_a / W at u's energy
  SolutionTrace& st_a = pair.state_a;  // u / W at u_a's energy
  for (SolutionTrace* t : {&st, &st_a}) {
    t->step = a.step;
    t->x = a.x;
    t->psi.resize(n);
    t->dpsi.resize(n);
    t->log_scale.resize(n);
  }
  st.energy = u.energy;
  st_a.energy = u_a.energy;
  for (std::size_t i = 0; i < n; ++i) {
    const double mw = w.mantissa[i];
    st.psi[i] = a.psi[i] / mw;
    st.dpsi[i] = (a.dpsi[i] * mw - de * a.psi[i] * a.psi[i] * b.psi[i]) / (mw * mw);
    st.log_scale[i] = -b.scale_at(i);

    st_a.psi[i] = b.psi[i] / mw;
    st_a.dpsi[i] = (b.dpsi[i] * mw - de * b.psi[i] * b.psi[i] * a.psi[i]) / (mw * mw);
    st_a.log_scale[i] = -a.scale_at(i);
  }
  return pair;
}

}  // namespace gapforge
