#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gapforge/spectral.hpp"

namespace gapforge {

/// A concrete transformation function u(x, eps) = c_plus v_plus + c_minus
/// v_minus on a window of whole periods.  The trace is normalised to
/// max |u| = 1 so transforms are invariant under rescaling of u.
struct TransformationFunction {
  double energy = 0;
  double c_plus = 1;
  double c_minus = 0;
  SolutionTrace trace;
  int node_count = 0;
  bool grows_right = false;
  bool grows_left = false;
};

/// Combines the two Bloch branches with the given weights.
TransformationFunction make_transformation_function(const BlochPair& pair, double c_plus,
                                                    double c_minus);

/// Wraps an explicitly constructed solution trace (closed forms, chained
/// transforms) as a transformation function.
TransformationFunction transformation_from_trace(SolutionTrace trace);

/// A function sampled on the trace grid; `valid` is zero at pole cells
/// (the samples adjacent to a sign change of the denominator).
struct SampledCurve {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::uint8_t> valid;
};

/// beta = -u'/u taken pointwise from the trace values; nodes of u mark poles.
SampledCurve beta_from_u(const TransformationFunction& u);

/// Max over usable samples of |-beta' + beta^2 - V0 + eps| with beta' from a
/// 4th-order central difference.  Contract: < 1e-5 for beta from beta_from_u.
double riccati_residual(const SampledCurve& beta, const PotentialSpec& potential,
                        double energy);

/// A transformed potential of order 1 or 2 with its verification data.
struct DarbouxResult {
  int order = 1;
  std::optional<double> energy_a;  // first factorization energy (order 2)
  double energy = 0;
  std::vector<double> grid;
  std::vector<double> v0;          // initial potential on the grid
  std::vector<double> v_out;       // NaN at pole cells
  SampledCurve beta;               // beta for order 1, (ln W)' for order 2
  std::vector<std::uint8_t> valid; // zero at pole cells
  bool regular = true;
  double route_mismatch = 0;       // pointwise gap between the two algebraic routes
};

/// V1 = V0 + 2 beta' with beta' resolved through the Riccati identity
/// beta' = beta^2 - V0 + eps; the log-derivative route -2 (ln|u|)'' is
/// evaluated independently by finite differences as a cross-check.
DarbouxResult transform_potential_1(const PotentialSpec& potential,
                                    const TransformationFunction& u);

/// phi = W(u, psi)/u mapped pointwise; the derivative trace comes from the
/// exact identity phi' = (eps - eps') psi + beta phi.
SolutionTrace map_eigenfunction_1(const TransformationFunction& u, const SolutionTrace& psi);

/// The missing state phi = 1/u at the factorization energy; requires u
/// nodeless.
SolutionTrace missing_state_1(const TransformationFunction& u);

/// V2 = V0 - 2 (ln W(u_a, u))'' with (ln W)' = (eps_a - eps) u_a u / W taken
/// pointwise (the Wronskian derivative identity) and one numerical
/// derivative on top; the direct -2 (ln|W|)'' route is the cross-check.
DarbouxResult transform_potential_2(const PotentialSpec& potential,
                                    const TransformationFunction& u_a,
                                    const TransformationFunction& u);

/// phi = W(u_a, u, psi)/W(u_a, u) with all second derivatives eliminated
/// through the eigenvalue equation, so only values and first derivatives of
/// the traces enter.
SolutionTrace map_eigenfunction_2(const TransformationFunction& u_a,
                                  const TransformationFunction& u, const SolutionTrace& psi);

/// The two missing states of a second-order transform: u/W at eps_a and
/// u_a/W at eps.  Requires W nodeless.
struct MissingPair {
  SolutionTrace state_a;  // at u_a's energy
  SolutionTrace state;    // at u's energy
};
MissingPair missing_state_2(const TransformationFunction& u_a,
                            const TransformationFunction& u);

/// Pointwise Wronskian mantissa of two transformation functions on a shared
/// grid: W = u_a u' - u_a' u with the combined log scale reported separately.
struct WronskianTrace {
  std::vector<double> mantissa;
  std::vector<double> log_scale;
  int node_count = 0;
};
WronskianTrace wronskian_of(const TransformationFunction& u_a,
                            const TransformationFunction& u);

}  // namespace gapforge
