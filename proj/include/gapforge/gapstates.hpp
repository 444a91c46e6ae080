#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gapforge/darboux.hpp"

namespace gapforge {

/// Parameters of an embedding run: which potential, which gap energies,
/// which Bloch mixings, and the window/grid resolution.
struct EmbeddingSpec {
  double m = 0.5;
  int order = 1;
  double energy = -0.1;                  // eps; below E0 for order 1
  double energy_a = 1.1;                 // eps_a, order 2 only
  std::optional<double> lambda;          // c_minus/c_plus; inf = pure v_minus
  std::optional<double> lambda_a;        // order 2 only
  int periods = 10;                      // window half-width in periods
  int step_div = kDefaultStepsPerPeriod; // h = period / step_div
};

struct NormReport {
  double norm_before = 0;         // L2 norm prior to rescaling (tail-corrected)
  double tail_fraction = 0;       // tail contribution to the squared norm
  double decay_rate_measured = 0;
  double decay_rate_predicted = 0;
};

struct BoundState {
  SolutionTrace state;  // unit L2 norm
  double energy = 0;
  NormReport norm;
  double residual = 0;  // Schroedinger residual against the deformed potential
};

struct EmbeddingResult {
  DarbouxResult transform;
  std::vector<BoundState> states;
  GapInterval gap;                    // the gap hosting the embedded energies
  double lambda_a = 0, lambda = 0;    // mixings actually used
  std::string strategy;               // "user" or "default-search"
  std::vector<double> mapped_edge_residuals;  // dn, cn, sn against the new potential
  int nodes_u_a = 0, nodes_u = 0, nodes_w = 0;
  double orthogonality = 0;           // order 2: |<phi_a, phi>| normalised
  bool reducible = false;             // both energies below E0
  double chain_mismatch = 0;          // reducible case: direct vs two-step
  std::pair<double, double> asymptotic_shift_left{0, 0};   // (delta, mismatch)
  std::pair<double, double> asymptotic_shift_right{0, 0};
};

/// u = v_plus + lambda v_minus for an energy below E0, sign-normalised
/// positive and verified nodeless over the window.
TransformationFunction select_nodeless_below(const PotentialSpec& potential, double energy,
                                             double lambda, int periods = 10,
                                             int step_div = kDefaultStepsPerPeriod);

/// Transformation pair for two energies in the same finite gap.  With user
/// mixings the Wronskian node census decides admissibility; by default a
/// small search over parity-paired mixings finds a combination whose
/// Wronskian is nodeless and whose missing states decay both ways.
std::pair<TransformationFunction, TransformationFunction> build_gap_pair(
    const PotentialSpec& potential, double energy_a, double energy,
    std::optional<double> lambda_a = std::nullopt, std::optional<double> lambda = std::nullopt,
    int periods = 10, int step_div = kDefaultStepsPerPeriod);

/// First-order embedding below E0: nodeless u, deformed potential, missing
/// state 1/u normalised, band-edge eigenfunctions re-verified.
EmbeddingResult embed_first_order(const EmbeddingSpec& spec);

/// Second-order embedding in a finite gap: singular intermediates, regular
/// Wronskian transform, both missing states normalised and checked for
/// orthogonality.  Two energies below E0 route through the reducible-chain
/// equivalence check instead.
EmbeddingResult embed_second_order(const EmbeddingSpec& spec);

enum class BlochBranch { Plus, Minus };

struct InvarianceReport {
  double delta = 0;      // fitted displacement in [0, period)
  double mismatch = 0;   // min over delta of max |V1(x) - V0(x + delta)|
  std::string branch;    // "plus", "minus" or "mixed"
  bool pure_bloch = true;
  bool invariant = false;  // mismatch < 1e-5
  DarbouxResult transform;
};

/// Fits the displacement that maps the first-order transform of a pure Bloch
/// branch back onto the original potential.  A mixed combination (lambda
/// supplied) is a diagnostic run: the report comes back non-invariant.
InvarianceReport check_darboux_invariance(const PotentialSpec& potential, double energy,
                                          BlochBranch branch,
                                          std::optional<double> lambda = std::nullopt,
                                          int periods = 10,
                                          int step_div = kDefaultStepsPerPeriod);

/// Simpson quadrature of |phi|^2 over the window plus a geometric tail
/// correction with ratio |t_decay|^2 per period; rescales to unit norm.
/// Rejects traces that do not decay at both window ends.
std::pair<SolutionTrace, NormReport> normalize_state(const SolutionTrace& phi, double t_decay,
                                                     double period);

}  // namespace gapforge
