#include "gapforge/gapstates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gapforge {

namespace {

double log_magnitude(const SolutionTrace& t, std::size_t i) {
  const double m = std::abs(t.psi[i]);
  return (m == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(m)) + t.scale_at(i);
}

// Flattens a possibly scaled trace into plain values after shifting the
// peak magnitude to one; returns the peak log magnitude that was removed.
double flatten_peak_normalized(SolutionTrace& t) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i) peak = std::max(peak, log_magnitude(t, i));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double f = std::exp(t.scale_at(i) - peak);
    t.psi[i] *= f;
    t.dpsi[i] *= f;
  }
  t.log_scale.clear();
  return peak;
}

double simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  if (n < 3) return 0.0;
  const std::size_t intervals = n - 1;
  const std::size_t even_intervals = intervals % 2 == 0 ? intervals : intervals - 1;
  double sum = f[0] + f[even_intervals];
  for (std::size_t i = 1; i < even_intervals; ++i) {
    sum += f[i] * (i % 2 == 1 ? 4.0 : 2.0);
  }
  double result = sum * h / 3.0;
  if (even_intervals != intervals) {
    result += 0.5 * h * (f[n - 2] + f[n - 1]);  // trapezoid on the odd leftover
  }
  return result;
}

// Trapezoid integral of |phi|^2 over one period slice.
double slice_norm_sq(const std::vector<double>& v2, double h, std::size_t begin,
                     std::size_t end) {
  double sum = 0.5 * (v2[begin] + v2[end]);
  for (std::size_t i = begin + 1; i < end; ++i) sum += v2[i];
  return sum * h;
}

PotentialSpec make_lame(double m) { return lame_potential(EllipticParameter(m)); }

void check_grid_config(int periods, int step_div) {
  if (periods < 1) throw ValidationError("periods must be at least 1");
  if (step_div < 1000) throw ValidationError("step_div must be at least 1000 (h <= period/1000)");
}

void sign_normalize(BlochSolution& sol) {
  const std::size_t mid = sol.trace.size() / 2;
  double v = sol.trace.psi[mid];
  if (v == 0.0) v = sol.trace.dpsi[mid];
  if (v < 0.0) {
    for (auto& p : sol.trace.psi) p = -p;
    for (auto& q : sol.trace.dpsi) q = -q;
  }
}

TransformationFunction combine(const BlochPair& pair, double lambda) {
  if (std::isinf(lambda)) {
    return make_transformation_function(pair, 0.0, 1.0);
  }
  return make_transformation_function(pair, 1.0, lambda);
}

TransformationFunction nodeless_below_from_pair(BlochPair pair, double energy, double lambda) {
  if (!(lambda >= 0.0)) {
    throw ValidationError("lambda must be non-negative for a nodeless combination");
  }
  if (pair.plus.nodes_per_period != 0) {
    throw ValidationError("energy " + std::to_string(energy) +
                          " lies in a finite gap: every combination has nodes there");
  }
  sign_normalize(pair.plus);
  sign_normalize(pair.minus);
  TransformationFunction u = combine(pair, lambda);
  if (u.node_count != 0) {
    throw NumericalError("node census found " + std::to_string(u.node_count) +
                         " nodes; sign normalisation failed or energy not below E0");
  }
  return u;
}

// (delta, mismatch) minimising max |f(x) - g(x + delta)| over the fit range.
template <typename Mismatch>
std::pair<double, double> fit_shift(const Mismatch& mismatch, double period) {
  const int coarse = 256;
  double best_delta = 0.0, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < coarse; ++i) {
    const double d = period * i / coarse;
    const double mm = mismatch(d);
    if (mm < best) {
      best = mm;
      best_delta = d;
    }
  }
  double a = best_delta - period / coarse;
  double b = best_delta + period / coarse;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = mismatch(x1), f2 = mismatch(x2);
  for (int it = 0; it < 90 && (b - a) > 1e-12; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = mismatch(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = mismatch(x2);
    }
  }
  const double d = 0.5 * (a + b);
  double delta = std::fmod(d, period);
  if (delta < 0) delta += period;
  return {delta, mismatch(d)};
}

GapInterval locate_gap(const PotentialSpec& potential, double e_lo, double e_hi) {
  const double w_lo = e_lo - 1.2;
  const double w_hi = std::max(e_hi + 1.2, 2.5);
  const auto bs = find_band_edges(potential, w_lo, w_hi, 300);
  for (const auto& gap : bs.gaps) {
    const bool lo_in = gap.lower_infinite || gap.lower < e_lo;
    if (lo_in && e_hi < gap.upper) return gap;
  }
  throw NumericalError("could not locate a gap containing the requested energies");
}

}  // namespace

std::pair<SolutionTrace, NormReport> normalize_state(const SolutionTrace& phi, double t_decay,
                                                     double period) {
  if (!(std::abs(t_decay) < 1.0) || t_decay == 0.0) {
    throw ValidationError("t_decay must satisfy 0 < |t| < 1 for a decaying tail");
  }
  SolutionTrace out = phi;
  const double peak = flatten_peak_normalized(out);
  const std::size_t n = out.size();
  const double h = out.step;

  std::vector<double> v2(n);
  for (std::size_t i = 0; i < n; ++i) v2[i] = out.psi[i] * out.psi[i];

  const long sd = std::lround(period / h);
  const long slices = sd > 0 ? static_cast<long>(n - 1) / sd : 0;
  if (sd < 8 || slices < 6) {
    throw ValidationError("normalize_state: window must span at least 3 periods per side");
  }
  std::vector<double> slice(slices);
  for (long k = 0; k < slices; ++k) {
    slice[k] = slice_norm_sq(v2, h, k * sd, std::min<std::size_t>((k + 1) * sd, n - 1));
  }
  if (!(slice.front() < slice[1]) || !(slice.back() < slice[slices - 2])) {
    throw ValidationError("state does not decay at the window ends");
  }

  const double r = t_decay * t_decay;
  const double tail = (slice.front() + slice.back()) * r / (1.0 - r);
  const double norm_sq = simpson(v2, h) + tail;
  const double norm = std::sqrt(norm_sq);

  NormReport report;
  report.norm_before = norm * std::exp(peak);
  report.tail_fraction = tail / norm_sq;
  report.decay_rate_predicted = -std::log(std::abs(t_decay)) / period;

  // log-linear fit of the outer three period slices, averaged over the sides
  auto fit_rate = [&](bool left) {
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    for (int k = 0; k < 3; ++k) {
      const double y = std::log(left ? slice[k] : slice[slices - 1 - k]);
      sx += k;
      sy += y;
      sxy += k * y;
      sxx += k * k;
    }
    const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    return slope / (2.0 * period);  // slice norms shrink outward: rate > 0
  };
  report.decay_rate_measured = 0.5 * (fit_rate(true) + fit_rate(false));

  for (std::size_t i = 0; i < n; ++i) {
    out.psi[i] /= norm;
    out.dpsi[i] /= norm;
  }
  return {std::move(out), report};
}

TransformationFunction select_nodeless_below(const PotentialSpec& potential, double energy,
                                             double lambda, int periods, int step_div) {
  check_grid_config(periods, step_div);
  auto pair = bloch_pair(potential, energy, periods, potential.period / step_div);
  return nodeless_below_from_pair(std::move(pair), energy, lambda);
}

std::pair<TransformationFunction, TransformationFunction> build_gap_pair(
    const PotentialSpec& potential, double energy_a, double energy,
    std::optional<double> lambda_a, std::optional<double> lambda, int periods, int step_div) {
  check_grid_config(periods, step_div);
  if (energy_a == energy) {
    throw ValidationError("gap pair needs two distinct energies");
  }
  const double h = potential.period / step_div;

  // both energies must sit inside one gap: the discriminant keeps |D| > 2
  // with a fixed sign on the segment between them
  const double d_a = monodromy(potential, energy_a, 0.0, h).discriminant;
  for (int i = 0; i <= 64; ++i) {
    const double e = energy_a + (energy - energy_a) * i / 64.0;
    const auto m = monodromy(potential, e, 0.0, h);
    if (classify(m).kind != SpectralKind::Gap || m.discriminant * d_a < 0.0) {
      throw ValidationError("energies " + std::to_string(energy_a) + " and " +
                            std::to_string(energy) + " do not lie in the same gap");
    }
  }

  auto pair_a = bloch_pair(potential, energy_a, periods, h);
  auto pair_b = bloch_pair(potential, energy, periods, h);
  sign_normalize(pair_a.plus);
  sign_normalize(pair_a.minus);
  sign_normalize(pair_b.plus);
  sign_normalize(pair_b.minus);

  auto finish = [&](TransformationFunction u_a, TransformationFunction u)
      -> std::pair<TransformationFunction, TransformationFunction> {
    auto w = wronskian_of(u_a, u);
    if (w.mantissa[w.mantissa.size() / 2] < 0.0) {
      for (auto& p : u.trace.psi) p = -p;
      for (auto& q : u.trace.dpsi) q = -q;
      u.c_plus = -u.c_plus;
      u.c_minus = -u.c_minus;
    }
    return {std::move(u_a), std::move(u)};
  };

  if (lambda_a.has_value() || lambda.has_value()) {
    if (!lambda_a.has_value() || !lambda.has_value()) {
      throw ValidationError("supply both mixing ratios or neither");
    }
    auto u_a = combine(pair_a, *lambda_a);
    auto u = combine(pair_b, *lambda);
    const auto w = wronskian_of(u_a, u);
    if (w.node_count != 0) {
      std::ostringstream msg;
      msg << "Wronskian has " << w.node_count << " nodes for the supplied mixings; near x =";
      int listed = 0;
      for (std::size_t i = 0; i + 1 < w.mantissa.size() && listed < 4; ++i) {
        if (w.mantissa[i] * w.mantissa[i + 1] < 0.0 || w.mantissa[i] == 0.0) {
          msg << " " << u_a.trace.x[i];
          ++listed;
        }
      }
      throw NumericalError(msg.str());
    }
    return finish(std::move(u_a), std::move(u));
  }

  // Default search: parity-paired mixings generalising the cosh/sinh choice
  // of the free-particle pair; the lower energy carries the odd combination
  // first.  A candidate is accepted when the Wronskian is nodeless and both
  // missing states decay toward both window ends.
  const bool a_is_low = energy_a < energy;
  const std::pair<double, double> patterns[] = {
      a_is_low ? std::make_pair(-1.0, 1.0) : std::make_pair(1.0, -1.0),
      a_is_low ? std::make_pair(1.0, -1.0) : std::make_pair(-1.0, 1.0),
      {1.0, 1.0},
      {-1.0, -1.0},
  };
  std::string failure = "no admissible mixing found";
  for (const auto& [la, lb] : patterns) {
    auto u_a = combine(pair_a, la);
    auto u = combine(pair_b, lb);
    const auto w = wronskian_of(u_a, u);
    if (w.node_count != 0) continue;
    // decay screen: the envelopes of u_a/W and u/W must shrink outward over
    // the outermost periods of both sides (peaks taken over whole periods,
    // since single samples can sit on a node of an oscillating state)
    const std::size_t n = u_a.trace.size();
    const std::size_t sd = static_cast<std::size_t>(step_div);
    auto envelope_peak = [&](const TransformationFunction& num, std::size_t lo,
                             std::size_t hi) {
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t i = lo; i <= hi; ++i) {
        const double mw = std::abs(w.mantissa[i]);
        if (mw == 0.0) continue;
        peak = std::max(peak, log_magnitude(num.trace, i) - std::log(mw) - w.log_scale[i]);
      }
      return peak;
    };
    bool decays = true;
    for (const auto* num : {&u_a, &u}) {
      const bool left_ok = envelope_peak(*num, 0, sd) < envelope_peak(*num, sd, 2 * sd);
      const bool right_ok =
          envelope_peak(*num, n - 1 - sd, n - 1) < envelope_peak(*num, n - 1 - 2 * sd, n - 1 - sd);
      if (!left_ok || !right_ok) {
        decays = false;
        break;
      }
    }
    if (!decays) {
      failure = "nodeless Wronskian found but a missing state fails to decay";
      continue;
    }
    return finish(std::move(u_a), std::move(u));
  }
  throw NumericalError("gap pair default search: " + failure);
}

EmbeddingResult embed_first_order(const EmbeddingSpec& spec) {
  if (spec.order != 1) throw ValidationError("order: expected 1");
  check_grid_config(spec.periods, spec.step_div);
  const auto potential = make_lame(spec.m);
  const double h = potential.period / spec.step_div;
  const double lambda = spec.lambda.value_or(1.0);

  const auto m = monodromy(potential, spec.energy, 0.0, h);
  const auto cls = classify(m);
  if (cls.kind != SpectralKind::Gap) {
    throw ValidationError(
        "eps: energy " + std::to_string(spec.energy) + " classifies as " +
        (cls.kind == SpectralKind::Band ? "Band" : "Edge") + "; expected a gap energy");
  }

  EmbeddingResult result;
  result.gap = locate_gap(potential, spec.energy, spec.energy);
  result.lambda = lambda;
  result.strategy = "user";

  auto pair = bloch_pair(potential, spec.energy, spec.periods, h);
  const double t_minus = std::abs(pair.period_map.t_minus.real());
  auto u = nodeless_below_from_pair(std::move(pair), spec.energy, lambda);
  result.nodes_u = u.node_count;

  result.transform = transform_potential_1(potential, u);

  auto [state, norm] = normalize_state(missing_state_1(u), t_minus, potential.period);
  BoundState bound;
  bound.energy = spec.energy;
  bound.residual = schrodinger_residual(state, result.transform.v_out, spec.energy,
                                        &result.transform.valid);
  bound.state = std::move(state);
  bound.norm = norm;
  result.states.push_back(std::move(bound));

  // band-edge eigenfunctions must still solve the deformed equation
  const auto& tr = u.trace;
  for (auto which : {LameEdge::Dn, LameEdge::Cn, LameEdge::Sn}) {
    const auto psi = lame_edge_state(EllipticParameter(spec.m), which, tr.x.front(),
                                     tr.x.back(), tr.step);
    const auto phi = map_eigenfunction_1(u, psi);
    result.mapped_edge_residuals.push_back(
        schrodinger_residual(phi, result.transform.v_out, psi.energy, &result.transform.valid));
  }
  return result;
}

EmbeddingResult embed_second_order(const EmbeddingSpec& spec) {
  if (spec.order != 2) throw ValidationError("order: expected 2");
  check_grid_config(spec.periods, spec.step_div);
  const auto potential = make_lame(spec.m);
  const double h = potential.period / spec.step_div;

  for (double e : {spec.energy_a, spec.energy}) {
    const auto cls = classify(monodromy(potential, e, 0.0, h));
    if (cls.kind != SpectralKind::Gap) {
      throw ValidationError("energy " + std::to_string(e) + " does not classify as a gap energy");
    }
  }

  EmbeddingResult result;
  result.strategy = (spec.lambda_a.has_value() || spec.lambda.has_value()) ? "user"
                                                                           : "default-search";

  auto [u_a, u] = build_gap_pair(potential, spec.energy_a, spec.energy, spec.lambda_a,
                                 spec.lambda, spec.periods, spec.step_div);
  result.gap = locate_gap(potential, std::min(spec.energy_a, spec.energy),
                          std::max(spec.energy_a, spec.energy));
  result.lambda_a = u_a.c_plus != 0.0 ? u_a.c_minus / u_a.c_plus
                                      : std::numeric_limits<double>::infinity();
  result.lambda = u.c_plus != 0.0 ? u.c_minus / u.c_plus
                                  : std::numeric_limits<double>::infinity();
  result.nodes_u_a = u_a.node_count;
  result.nodes_u = u.node_count;
  result.nodes_w = wronskian_of(u_a, u).node_count;
  result.reducible = result.gap.lower_infinite;

  result.transform = transform_potential_2(potential, u_a, u);

  const double tm_a = std::abs(monodromy(potential, spec.energy_a, 0.0, h).t_minus.real());
  const double tm_b = std::abs(monodromy(potential, spec.energy, 0.0, h).t_minus.real());

  auto pair_states = missing_state_2(u_a, u);
  auto add_state = [&](const SolutionTrace& raw, double t_decay, double energy) {
    auto [state, norm] = normalize_state(raw, t_decay, potential.period);
    BoundState bound;
    bound.energy = energy;
    bound.residual =
        schrodinger_residual(state, result.transform.v_out, energy, &result.transform.valid);
    bound.state = std::move(state);
    bound.norm = norm;
    result.states.push_back(std::move(bound));
  };
  add_state(pair_states.state_a, tm_a, spec.energy_a);
  add_state(pair_states.state, tm_b, spec.energy);

  // mutual orthogonality of the unit-normalised states
  {
    const auto& sa = result.states[0].state;
    const auto& sb = result.states[1].state;
    std::vector<double> prod(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) prod[i] = sa.psi[i] * sb.psi[i];
    result.orthogonality = std::abs(simpson(prod, sa.step));
  }

  // band-edge eigenfunctions through the second-order map
  const auto& tr = u_a.trace;
  for (auto which : {LameEdge::Dn, LameEdge::Cn, LameEdge::Sn}) {
    const auto psi = lame_edge_state(EllipticParameter(spec.m), which, tr.x.front(),
                                     tr.x.back(), tr.step);
    const auto phi = map_eigenfunction_2(u_a, u, psi);
    result.mapped_edge_residuals.push_back(
        schrodinger_residual(phi, result.transform.v_out, psi.energy, &result.transform.valid));
  }

  // asymptotic displaced-copy fits over the outer two periods of each side
  {
    const auto& res = result.transform;
    const long sd = spec.step_div;
    const std::size_t n = res.grid.size();
    auto side_mismatch = [&](bool left) {
      const std::size_t lo = left ? 0 : n - 1 - 2 * sd;
      const std::size_t hi = left ? 2 * sd : n - 1;
      return [&, lo, hi](double delta) {
        double worst = 0.0;
        for (std::size_t i = lo; i <= hi; i += 3) {
          if (std::isnan(res.v_out[i])) continue;
          worst = std::max(worst, std::abs(res.v_out[i] - potential(res.grid[i] + delta)));
        }
        return worst;
      };
    };
    result.asymptotic_shift_left = fit_shift(side_mismatch(true), potential.period);
    result.asymptotic_shift_right = fit_shift(side_mismatch(false), potential.period);
  }

  // reducible pairs (both below E0) also pass the chain-equivalence check
  if (result.reducible) {
    const auto step1 = transform_potential_1(potential, u_a);
    const auto u1 = transformation_from_trace(map_eigenfunction_1(u_a, u.trace));
    const auto beta1 = beta_from_u(u1);
    double worst = 0.0;
    for (std::size_t i = 0; i < result.transform.v_out.size(); ++i) {
      if (std::isnan(result.transform.v_out[i]) || !beta1.valid[i] ||
          std::isnan(step1.v_out[i])) {
        continue;
      }
      const double b = beta1.y[i];
      const double v_chain = 2.0 * b * b - step1.v_out[i] + 2.0 * u.energy;
      worst = std::max(worst, std::abs(v_chain - result.transform.v_out[i]));
    }
    result.chain_mismatch = worst;
  }
  return result;
}

InvarianceReport check_darboux_invariance(const PotentialSpec& potential, double energy,
                                          BlochBranch branch, std::optional<double> lambda,
                                          int periods, int step_div) {
  check_grid_config(periods, step_div);
  const double h = potential.period / step_div;
  const auto cls = classify(monodromy(potential, energy, 0.0, h));
  if (cls.kind == SpectralKind::Edge) {
    throw ValidationError("energy sits at a band edge; pick one inside a gap");
  }
  if (cls.kind == SpectralKind::Band) {
    throw ValidationError("energy classifies as Band; the Bloch branches are complex");
  }

  auto pair = bloch_pair(potential, energy, periods, h);
  sign_normalize(pair.plus);
  sign_normalize(pair.minus);

  InvarianceReport report;
  TransformationFunction u;
  if (lambda.has_value()) {
    report.branch = "mixed";
    report.pure_bloch = false;
    u = combine(pair, *lambda);
  } else {
    report.branch = branch == BlochBranch::Plus ? "plus" : "minus";
    u = branch == BlochBranch::Plus ? make_transformation_function(pair, 1.0, 0.0)
                                    : make_transformation_function(pair, 0.0, 1.0);
  }

  const auto res = transform_potential_1(potential, u);

  // fit over the central two periods
  const std::size_t n = res.grid.size();
  const long sd = step_div;
  const std::size_t lo = n / 2 - sd;
  const std::size_t hi = n / 2 + sd;
  auto mismatch = [&](double delta) {
    double worst = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (std::isnan(res.v_out[i])) continue;
      worst = std::max(worst, std::abs(res.v_out[i] - potential(res.grid[i] + delta)));
    }
    return worst;
  };
  const auto [delta, best] = fit_shift(mismatch, potential.period);
  report.delta = delta;
  report.mismatch = best;
  report.invariant = best < 1e-5;
  return report;
}

}  // namespace gapforge
