#include "gapforge/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gapforge {

namespace {

// Potential samples on the half-step lattice of one integration span; the
// discriminant scan evaluates hundreds of energies on the same x grid, so
// the (comparatively expensive) potential is sampled once.
struct PotentialTable {
  double x0 = 0;
  double h = 0;            // full step of the psi grid
  std::vector<double> v;   // samples at x0 + j h/2, j = 0 .. 2n
  long n_steps() const { return static_cast<long>((v.size() - 1) / 2); }
};

PotentialTable sample_potential(const PotentialSpec& potential, double x0, long n_steps,
                                double h) {
  PotentialTable table;
  table.x0 = x0;
  table.h = h;
  table.v.resize(2 * n_steps + 1);
  for (long j = 0; j <= 2 * n_steps; ++j) {
    const double vx = potential(x0 + 0.5 * h * static_cast<double>(j));
    if (!std::isfinite(vx)) {
      throw NumericalError("non-finite potential sample at x = " +
                           std::to_string(x0 + 0.5 * h * static_cast<double>(j)));
    }
    table.v[j] = vx;
  }
  return table;
}

// One classical RK4 step for psi' = q, q' = (V - eps) psi.
inline void rk4_step(double v0, double vh, double v1, double eps, double h, double& p,
                     double& q) {
  const double k1p = q;
  const double k1q = (v0 - eps) * p;
  const double y2p = p + 0.5 * h * k1p;
  const double y2q = q + 0.5 * h * k1q;
  const double k2p = y2q;
  const double k2q = (vh - eps) * y2p;
  const double y3p = p + 0.5 * h * k2p;
  const double y3q = q + 0.5 * h * k2q;
  const double k3p = y3q;
  const double k3q = (vh - eps) * y3p;
  const double y4p = p + h * k3p;
  const double y4q = q + h * k3q;
  const double k4p = y4q;
  const double k4q = (v1 - eps) * y4p;
  p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
}

// Integrates two states through the whole table (shared stages), returning
// the period map columns.
void propagate_pair(const PotentialTable& t, double eps, double& p1, double& q1, double& p2,
                    double& q2) {
  const long n = t.n_steps();
  for (long i = 0; i < n; ++i) {
    rk4_step(t.v[2 * i], t.v[2 * i + 1], t.v[2 * i + 2], eps, t.h, p1, q1);
    rk4_step(t.v[2 * i], t.v[2 * i + 1], t.v[2 * i + 2], eps, t.h, p2, q2);
  }
}

Monodromy monodromy_from_table(const PotentialTable& table, double energy, double x0) {
  Monodromy m;
  m.energy = energy;
  double p1 = 1.0, q1 = 0.0, p2 = 0.0, q2 = 1.0;
  propagate_pair(table, energy, p1, q1, p2, q2);
  m.a = p1;
  m.b = p2;
  m.c = q1;
  m.d = q2;
  m.discriminant = m.a + m.d;

  const double det = m.determinant();
  const double disc = m.discriminant * m.discriminant - 4.0 * det;
  if (disc > 0.0) {
    const double sign_d = m.discriminant >= 0.0 ? 1.0 : -1.0;
    const double big = 0.5 * (m.discriminant + sign_d * std::sqrt(disc));
    m.t_plus = big;
    m.t_minus = det / big;  // stable pairing of quadratic roots
  } else {
    const double im = 0.5 * std::sqrt(-disc);
    m.t_plus = {0.5 * m.discriminant, im};
    m.t_minus = {0.5 * m.discriminant, -im};
  }
  (void)x0;
  return m;
}

long steps_for_span(double span, double h) {
  const long n = std::max<long>(1, std::llround(std::abs(span) / h));
  return n;
}

void check_step(const PotentialSpec& potential, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ValidationError("integration step h must be positive and finite");
  }
  if (h > potential.period / 1000.0 * (1.0 + 1e-12)) {
    throw ValidationError("integration step too coarse: h must be <= period/1000");
  }
}

int sign_change_census(const std::vector<double>& values) {
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

}  // namespace

double SolutionTrace::value(std::size_t i) const {
  return log_scale.empty() ? psi[i] : psi[i] * std::exp(log_scale[i]);
}

double SolutionTrace::derivative(std::size_t i) const {
  return log_scale.empty() ? dpsi[i] : dpsi[i] * std::exp(log_scale[i]);
}

int SolutionTrace::node_count() const { return sign_change_census(psi); }

SolutionTrace integrate(const PotentialSpec& potential, double energy, double x0, double x1,
                        double psi0, double dpsi0, double h) {
  check_step(potential, h);
  if (x0 == x1) {
    throw ValidationError("integration span is empty: x0 == x1");
  }
  const long n = steps_for_span(x1 - x0, h);
  const double h_eff = (x1 - x0) / static_cast<double>(n);
  const PotentialTable table = sample_potential(potential, x0, n, h_eff);

  SolutionTrace trace;
  trace.energy = energy;
  trace.step = h_eff;
  trace.x.resize(n + 1);
  trace.psi.resize(n + 1);
  trace.dpsi.resize(n + 1);
  double p = psi0, q = dpsi0;
  trace.x[0] = x0;
  trace.psi[0] = p;
  trace.dpsi[0] = q;
  for (long i = 0; i < n; ++i) {
    rk4_step(table.v[2 * i], table.v[2 * i + 1], table.v[2 * i + 2], energy, h_eff, p, q);
    trace.x[i + 1] = x0 + h_eff * static_cast<double>(i + 1);
    trace.psi[i + 1] = p;
    trace.dpsi[i + 1] = q;
    if (!std::isfinite(p) || !std::isfinite(q)) {
      throw NumericalError("integration overflowed at x = " + std::to_string(trace.x[i + 1]) +
                           "; use bloch_pair for multi-period gap solutions");
    }
  }
  return trace;
}

Monodromy monodromy(const PotentialSpec& potential, double energy, double x0, double step) {
  check_step(potential, step);
  const long n = steps_for_span(potential.period, step);
  const double h_eff = potential.period / static_cast<double>(n);
  const PotentialTable table = sample_potential(potential, x0, n, h_eff);
  return monodromy_from_table(table, energy, x0);
}

Monodromy monodromy(const PotentialSpec& potential, double energy, double x0) {
  return monodromy(potential, energy, x0, potential.period / kDefaultStepsPerPeriod);
}

SpectralClassification classify(const Monodromy& m, double edge_tol) {
  const double abs_d = std::abs(m.discriminant);
  SpectralClassification c;
  if (abs_d < 2.0 - edge_tol) {
    c.kind = SpectralKind::Band;
  } else if (abs_d > 2.0 + edge_tol) {
    c.kind = SpectralKind::Gap;
  } else {
    c.kind = SpectralKind::Edge;
    c.periodic_edge = m.discriminant > 0.0;
  }
  return c;
}

// ---------------------------------------------------------------------------
// band-edge location
// ---------------------------------------------------------------------------

namespace {

constexpr double kRootTol = 1e-9;      // on |D -+ 2|
constexpr double kClosureTol = 1e-7;   // |D -+ 2| at a tangency counts as a closed gap

struct EdgeCandidate {
  double energy;
  int sign;      // +1 for D = +2, -1 for D = -2
  bool flagged;  // unresolved double root / gap closure
};

// Bisection/secant hybrid on a bracketing interval.
template <typename F>
double refine_root(const F& f, double a, double b, double fa, double fb) {
  for (int iter = 0; iter < 200; ++iter) {
    if (std::abs(fa) < kRootTol) return a;
    if (std::abs(fb) < kRootTol) return b;
    double mid = 0.5 * (a + b);
    if (fb != fa) {
      const double secant = a - fa * (b - a) / (fb - fa);
      if (secant > a && secant < b) mid = secant;
    }
    // keep strictly inside the bracket so progress never stalls
    const double lo = a + 0.01 * (b - a);
    const double hi = b - 0.01 * (b - a);
    mid = std::clamp(mid, lo, hi);
    const double fm = f(mid);
    if ((fa < 0.0) != (fm < 0.0)) {
      b = mid;
      fb = fm;
    } else {
      a = mid;
      fa = fm;
    }
    if (b - a < 1e-14 * std::max(1.0, std::abs(a))) break;
  }
  return 0.5 * (a + b);
}

// Golden-section minimisation of |f| on [a, b]; returns (x, f(x)).
template <typename F>
std::pair<double, double> refine_minimum(const F& f, double a, double b) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = std::abs(f(x1)), f2 = std::abs(f(x2));
  for (int iter = 0; iter < 120 && (b - a) > 1e-13; ++iter) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = std::abs(f(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = std::abs(f(x2));
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace

BandStructure find_band_edges(const PotentialSpec& potential, double eps_lo, double eps_hi,
                              int n_scan, double step) {
  check_step(potential, step);
  if (!(eps_lo < eps_hi)) {
    throw ValidationError("energy window is empty: require eps_lo < eps_hi");
  }
  if (n_scan < 100) {
    throw ValidationError("n_scan must be at least 100");
  }

  const long n_steps = steps_for_span(potential.period, step);
  const double h_eff = potential.period / static_cast<double>(n_steps);
  const PotentialTable table = sample_potential(potential, 0.0, n_steps, h_eff);
  auto discriminant = [&](double eps) {
    return monodromy_from_table(table, eps, 0.0).discriminant;
  };

  BandStructure bs;
  std::vector<double> eps_grid(n_scan), d_grid(n_scan);
  for (int i = 0; i < n_scan; ++i) {
    eps_grid[i] = eps_lo + (eps_hi - eps_lo) * i / (n_scan - 1.0);
    d_grid[i] = discriminant(eps_grid[i]);
    bs.discriminant_samples.emplace_back(eps_grid[i], d_grid[i]);
  }

  std::vector<EdgeCandidate> candidates;
  for (int target_sign : {+1, -1}) {
    auto f = [&](double eps) { return discriminant(eps) - 2.0 * target_sign; };
    std::vector<double> fg(n_scan);
    for (int i = 0; i < n_scan; ++i) fg[i] = d_grid[i] - 2.0 * target_sign;

    for (int i = 0; i + 1 < n_scan; ++i) {
      if (fg[i] == 0.0) {
        candidates.push_back({eps_grid[i], target_sign, false});
      } else if ((fg[i] < 0.0) != (fg[i + 1] < 0.0)) {
        const double root = refine_root(f, eps_grid[i], eps_grid[i + 1], fg[i], fg[i + 1]);
        candidates.push_back({root, target_sign, false});
      }
    }
    // tangential double roots: a same-sign local minimum of |f| that dips to 0
    for (int i = 1; i + 1 < n_scan; ++i) {
      const bool same_sign = (fg[i - 1] < 0.0) == (fg[i] < 0.0) &&
                             (fg[i] < 0.0) == (fg[i + 1] < 0.0);
      if (!same_sign || fg[i] == 0.0) continue;
      if (std::abs(fg[i]) < std::abs(fg[i - 1]) && std::abs(fg[i]) <= std::abs(fg[i + 1])) {
        auto [x_min, f_min] = refine_minimum(f, eps_grid[i - 1], eps_grid[i + 1]);
        if (std::abs(f_min) < kClosureTol) {
          candidates.push_back({x_min, target_sign, true});
        } else if ((f_min < 0.0) != (fg[i] < 0.0)) {
          // the dip genuinely crosses: two nearby simple roots
          const double r1 = refine_root(f, eps_grid[i - 1], x_min, fg[i - 1], f_min);
          const double r2 = refine_root(f, x_min, eps_grid[i + 1], f_min, fg[i + 1]);
          candidates.push_back({r1, target_sign, false});
          candidates.push_back({r2, target_sign, false});
        }
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const EdgeCandidate& a, const EdgeCandidate& b) { return a.energy < b.energy; });
  // Two same-sign roots closer than the scan can resolve are an unresolved
  // double root: a closed gap reported as one flagged edge.
  const double dedup_tol = 1e-5 * (eps_hi - eps_lo);
  std::vector<EdgeCandidate> edges;
  for (const auto& c : candidates) {
    if (!edges.empty() && std::abs(c.energy - edges.back().energy) < dedup_tol &&
        c.sign == edges.back().sign) {
      EdgeCandidate& prev = edges.back();
      if (!prev.flagged && !c.flagged) {
        prev.energy = 0.5 * (prev.energy + c.energy);
        prev.flagged = true;
      }
      continue;
    }
    edges.push_back(c);
  }
  if (edges.empty()) {
    throw NumericalError("no band edges found in window [" + std::to_string(eps_lo) + ", " +
                         std::to_string(eps_hi) + "]");
  }

  for (const auto& e : edges) {
    bs.edges.push_back(e.energy);
    bs.edge_sign.push_back(e.sign);
    bs.edge_flagged.push_back(e.flagged);
  }

  // Assemble alternating intervals from midpoint classification, merging
  // same-kind neighbours (a flagged closure edge separates two touching
  // bands and opens no gap).
  std::vector<double> bounds;
  bounds.push_back(eps_lo);
  for (const auto& e : edges) bounds.push_back(e.energy);
  bounds.push_back(eps_hi);

  int prev_kind = 0;  // 0 none, 1 band, 2 gap
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    if (bounds[i + 1] - bounds[i] < dedup_tol) continue;
    const double mid = 0.5 * (bounds[i] + bounds[i + 1]);
    const int kind = std::abs(discriminant(mid)) < 2.0 ? 1 : 2;
    if (kind == prev_kind) {
      if (kind == 1) {
        bs.bands.back().second = bounds[i + 1];
      } else {
        bs.gaps.back().upper = bounds[i + 1];
      }
    } else if (kind == 1) {
      bs.bands.emplace_back(bounds[i], bounds[i + 1]);
    } else {
      bs.gaps.push_back({bounds[i], bounds[i + 1], false});
    }
    prev_kind = kind;
  }

  // The region below the first edge extends to -infinity exactly when it is
  // the lowest gap, i.e. when its Bloch solutions are nodeless.
  if (!bs.gaps.empty() && std::abs(bs.gaps.front().lower - eps_lo) < 1e-30 + dedup_tol &&
      (bs.bands.empty() || bs.gaps.front().lower < bs.bands.front().first)) {
    const double probe = 0.5 * (bs.gaps.front().lower + bs.gaps.front().upper);
    const Monodromy pm = monodromy_from_table(table, probe, 0.0);
    if (classify(pm).kind == SpectralKind::Gap) {
      // integrate the dominant Bloch eigenvector over one period, count nodes
      const double t = pm.t_plus.real();
      double p = pm.b, q = t - pm.a;
      if (std::abs(p) + std::abs(q) < 1e-12) {
        p = t - pm.d;
        q = pm.c;
      }
      std::vector<double> vals;
      vals.reserve(n_steps + 1);
      vals.push_back(p);
      for (long i = 0; i < n_steps; ++i) {
        rk4_step(table.v[2 * i], table.v[2 * i + 1], table.v[2 * i + 2], probe, h_eff, p, q);
        vals.push_back(p);
      }
      if (sign_change_census(vals) == 0) bs.gaps.front().lower_infinite = true;
    }
  }

  // Edge sign pattern: +2, -2, -2, +2, +2, ... equivalently gap endpoints
  // share a sign and band endpoints alternate.
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (edges[i].flagged || edges[i + 1].flagged) continue;
    const double mid = 0.5 * (edges[i].energy + edges[i + 1].energy);
    const bool is_band = std::abs(discriminant(mid)) < 2.0;
    const bool signs_equal = edges[i].sign == edges[i + 1].sign;
    if (is_band == signs_equal) {
      std::ostringstream msg;
      msg << "edge sign pattern violated between eps = " << edges[i].energy << " and "
          << edges[i + 1].energy << " (possible missed edge in coarse scan)";
      bs.pattern_warning = msg.str();
    }
  }

  return bs;
}

BandStructure find_band_edges(const PotentialSpec& potential, double eps_lo, double eps_hi,
                              int n_scan) {
  return find_band_edges(potential, eps_lo, eps_hi, n_scan,
                         potential.period / kDefaultStepsPerPeriod);
}

// ---------------------------------------------------------------------------
// Bloch solutions
// ---------------------------------------------------------------------------

namespace {

// Eigenvector of the period map for a real multiplier t, scaled so the
// largest component is +1 (a deterministic sign convention).
void monodromy_eigenvector(const Monodromy& m, double t, double& p, double& q) {
  const double n1 = std::abs(m.b) + std::abs(t - m.a);
  const double n2 = std::abs(t - m.d) + std::abs(m.c);
  if (n1 >= n2 && n1 > 1e-14) {
    p = m.b;
    q = t - m.a;
  } else if (n2 > 1e-14) {
    p = t - m.d;
    q = m.c;
  } else {
    // diagonal period map
    p = std::abs(t - m.a) <= std::abs(t - m.d) ? 1.0 : 0.0;
    q = 1.0 - p;
  }
  const double lead = std::abs(p) >= std::abs(q) ? p : q;
  p /= lead;
  q /= lead;
}

// One backward RK4 step across table cell i (from x_{i+1} down to x_i).
inline void rk4_step_back(const PotentialTable& t, long i, double eps, double& p, double& q) {
  rk4_step(t.v[2 * i + 2], t.v[2 * i + 1], t.v[2 * i], eps, -t.h, p, q);
}

// Builds one Bloch solution over [-N tau, N tau].  The growing direction is
// integrated continuously with a per-period renormalisation (mantissas stay
// O(1), the growth lives in the log scale); the decaying direction is tiled
// from the first period through the multiplier, where the tiny seam defect
// is buried under the dominant branch.
BlochSolution build_bloch(const PotentialTable& table, const Monodromy& m, double t,
                          int n_periods) {
  const long sd = table.n_steps();
  const double h = table.h;
  const double energy = m.energy;
  const double log_t = std::log(std::abs(t));
  const double sgn = t < 0.0 ? -1.0 : 1.0;
  const long total = 2L * n_periods * sd;
  const long origin = static_cast<long>(n_periods) * sd;  // index of x = 0

  BlochSolution sol;
  sol.multiplier = t;
  sol.grows_right = std::abs(t) > 1.0;

  SolutionTrace& tr = sol.trace;
  tr.energy = energy;
  tr.step = h;
  tr.x.resize(total + 1);
  tr.psi.resize(total + 1);
  tr.dpsi.resize(total + 1);
  tr.log_scale.resize(total + 1);
  for (long i = 0; i <= total; ++i) tr.x[i] = static_cast<double>(i - origin) * h;

  // reference period [0, tau] from the eigenvector initial conditions
  double p0, q0;
  monodromy_eigenvector(m, t, p0, q0);
  std::vector<double> ref_p(sd + 1), ref_q(sd + 1);
  {
    double p = p0, q = q0;
    ref_p[0] = p;
    ref_q[0] = q;
    for (long i = 0; i < sd; ++i) {
      rk4_step(table.v[2 * i], table.v[2 * i + 1], table.v[2 * i + 2], energy, h, p, q);
      ref_p[i + 1] = p;
      ref_q[i + 1] = q;
    }
  }
  for (long j = 0; j <= sd; ++j) {
    tr.psi[origin + j] = ref_p[j];
    tr.dpsi[origin + j] = ref_q[j];
    tr.log_scale[origin + j] = 0.0;
  }

  auto tile_sample = [&](long i) {
    const long seg = i / sd - n_periods;
    const long j = i % sd;
    const double sign_pow = (seg % 2 != 0 && sgn < 0.0) ? -1.0 : 1.0;
    tr.psi[i] = ref_p[j] * sign_pow;
    tr.dpsi[i] = ref_q[j] * sign_pow;
    tr.log_scale[i] = static_cast<double>(seg) * log_t;
  };

  if (sol.grows_right) {
    // continuous to the right, renormalised at each period boundary
    double p = ref_p[sd], q = ref_q[sd];
    double scale = 0.0;
    for (long period = 1; period < n_periods; ++period) {
      p /= std::abs(t);
      q /= std::abs(t);
      scale += log_t;
      const long base = origin + period * sd;
      for (long i = 0; i < sd; ++i) {
        rk4_step(table.v[2 * i], table.v[2 * i + 1], table.v[2 * i + 2], energy, h, p, q);
        tr.psi[base + i + 1] = p;
        tr.dpsi[base + i + 1] = q;
        tr.log_scale[base + i + 1] = scale;
      }
    }
    // tiled decaying tail to the left
    for (long i = 0; i < origin; ++i) tile_sample(i);
  } else {
    // continuous to the left
    double p = p0, q = q0;
    double scale = 0.0;
    for (long period = -1; period >= -n_periods; --period) {
      p *= std::abs(t);
      q *= std::abs(t);
      scale -= log_t;
      const long base = origin + period * sd;
      for (long i = sd - 1; i >= 0; --i) {
        rk4_step_back(table, i, energy, p, q);
        tr.psi[base + i] = p;
        tr.dpsi[base + i] = q;
        tr.log_scale[base + i] = scale;
      }
    }
    // tiled decaying tail to the right
    for (long i = origin + sd + 1; i < total; ++i) tile_sample(i);
    // final sample: exactly N periods, j = 0
    {
      const double sign_pow = (n_periods % 2 != 0 && sgn < 0.0) ? -1.0 : 1.0;
      tr.psi[total] = ref_p[0] * sign_pow;
      tr.dpsi[total] = ref_q[0] * sign_pow;
      tr.log_scale[total] = static_cast<double>(n_periods) * log_t;
    }
  }

  // nodes per period: census over the reference period plus the seam pair
  {
    std::vector<double> period_vals(ref_p.begin(), ref_p.begin() + sd);
    period_vals.push_back(sgn * ref_p[0]);
    sol.nodes_per_period = sign_change_census(period_vals);
  }
  return sol;
}

}  // namespace

BlochPair bloch_pair(const PotentialSpec& potential, double energy, int n_periods,
                     double step) {
  check_step(potential, step);
  if (n_periods < 1) {
    throw ValidationError("n_periods must be at least 1");
  }
  const long n_steps = steps_for_span(potential.period, step);
  const double h_eff = potential.period / static_cast<double>(n_steps);
  const PotentialTable table = sample_potential(potential, 0.0, n_steps, h_eff);

  const Monodromy m = monodromy_from_table(table, energy, 0.0);
  const SpectralClassification cls = classify(m);
  if (cls.kind == SpectralKind::Band) {
    throw ValidationError("energy " + std::to_string(energy) +
                          " classifies as Band: Bloch multipliers are complex");
  }
  if (cls.kind == SpectralKind::Edge) {
    throw ValidationError("energy " + std::to_string(energy) +
                          " sits at a band edge: monodromy eigenvectors degenerate");
  }

  BlochPair pair;
  pair.period_map = m;
  pair.plus = build_bloch(table, m, m.t_plus.real(), n_periods);
  pair.minus = build_bloch(table, m, m.t_minus.real(), n_periods);
  return pair;
}

BlochPair bloch_pair(const PotentialSpec& potential, double energy, int n_periods) {
  return bloch_pair(potential, energy, n_periods,
                    potential.period / kDefaultStepsPerPeriod);
}

SolutionTrace lame_edge_state(EllipticParameter m, LameEdge which, double x0, double x1,
                              double h) {
  if (!(x1 > x0) || !(h > 0)) {
    throw ValidationError("lame_edge_state: require x1 > x0 and h > 0");
  }
  const JacobiEvaluator eval(m);
  const long n = steps_for_span(x1 - x0, h);
  const double h_eff = (x1 - x0) / static_cast<double>(n);

  SolutionTrace tr;
  tr.step = h_eff;
  tr.x.resize(n + 1);
  tr.psi.resize(n + 1);
  tr.dpsi.resize(n + 1);
  switch (which) {
    case LameEdge::Dn: tr.energy = m.m; break;
    case LameEdge::Cn: tr.energy = 1.0; break;
    case LameEdge::Sn: tr.energy = 1.0 + m.m; break;
  }
  for (long i = 0; i <= n; ++i) {
    const double x = x0 + h_eff * static_cast<double>(i);
    const auto v = eval(x);
    tr.x[i] = x;
    switch (which) {
      case LameEdge::Dn:
        tr.psi[i] = v.dn;
        tr.dpsi[i] = -m.m * v.sn * v.cn;
        break;
      case LameEdge::Cn:
        tr.psi[i] = v.cn;
        tr.dpsi[i] = -v.sn * v.dn;
        break;
      case LameEdge::Sn:
        tr.psi[i] = v.sn;
        tr.dpsi[i] = v.cn * v.dn;
        break;
    }
  }
  return tr;
}

namespace {

double residual_impl(const SolutionTrace& trace, const std::function<double(std::size_t)>& v_at,
                     double energy, const std::vector<std::uint8_t>* valid) {
  const std::size_t n = trace.size();
  if (n < 5) {
    throw ValidationError("schrodinger_residual: trace too short");
  }
  const double h = trace.step;
  std::vector<double> v(n);
  double vmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = trace.value(i);
    if (!valid || (*valid)[i]) vmax = std::max(vmax, std::abs(v[i]));
  }
  if (vmax == 0.0) return 0.0;

  auto usable = [&](std::size_t i) { return !valid || (*valid)[i]; };
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    if (!(usable(i - 2) && usable(i - 1) && usable(i) && usable(i + 1) && usable(i + 2))) {
      continue;
    }
    const double d2 =
        (-v[i + 2] + 16.0 * v[i + 1] - 30.0 * v[i] + 16.0 * v[i - 1] - v[i - 2]) /
        (12.0 * h * h);
    const double r = std::abs(-d2 + (v_at(i) - energy) * v[i]);
    worst = std::max(worst, r);
  }
  return worst / vmax;
}

}  // namespace

double schrodinger_residual(const SolutionTrace& trace,
                            const std::function<double(double)>& potential, double energy,
                            const std::vector<std::uint8_t>* valid) {
  return residual_impl(trace, [&](std::size_t i) { return potential(trace.x[i]); }, energy,
                       valid);
}

double schrodinger_residual(const SolutionTrace& trace,
                            const std::vector<double>& potential_samples, double energy,
                            const std::vector<std::uint8_t>* valid) {
  if (potential_samples.size() != trace.size()) {
    throw ValidationError("schrodinger_residual: potential sample count mismatch");
  }
  return residual_impl(trace, [&](std::size_t i) { return potential_samples[i]; }, energy,
                       valid);
}

}  // namespace gapforge
