#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gapforge/elliptic.hpp"

namespace gapforge {

/// A numerically integrated solution of -psi'' + V0 psi = eps psi on a
/// uniform grid.  Solutions that sweep many periods of a gap energy grow
/// exponentially, so values are stored as mantissa * exp(log_scale); for
/// ordinary traces log_scale is empty and the mantissas are the values.
struct SolutionTrace {
  std::vector<double> x;
  std::vector<double> psi;        // mantissas
  std::vector<double> dpsi;       // derivative mantissas, same scale as psi
  std::vector<double> log_scale;  // empty means all zero
  double energy = 0.0;
  double step = 0.0;

  std::size_t size() const { return x.size(); }
  bool scaled() const { return !log_scale.empty(); }
  double scale_at(std::size_t i) const { return log_scale.empty() ? 0.0 : log_scale[i]; }
  double value(std::size_t i) const;
  double derivative(std::size_t i) const;

  /// Count of sign changes of the solution along the grid (an exact zero
  /// sample counts once).  Scale factors are positive, so the census runs
  /// on the mantissas.
  int node_count() const;
};

/// Fixed-step RK4 integration of the eigenvalue equation from (psi0, dpsi0)
/// at x0 to x1.  The actual step divides x1 - x0 exactly and never exceeds h.
/// Requires h <= period/1000.
SolutionTrace integrate(const PotentialSpec& potential, double energy, double x0, double x1,
                        double psi0, double dpsi0, double h);

/// The 2x2 period-translation matrix at a base point, acting on (psi, psi').
struct Monodromy {
  double a = 0, b = 0, c = 0, d = 0;  // columns: images of (1,0) and (0,1)
  double discriminant = 0;            // a + d
  std::complex<double> t_plus;        // |t_plus| >= |t_minus|
  std::complex<double> t_minus;
  double energy = 0;

  double determinant() const { return a * d - b * c; }
};

/// Builds the monodromy matrix by integrating the canonical initial
/// conditions over one period starting at x0.
Monodromy monodromy(const PotentialSpec& potential, double energy, double x0, double step);
Monodromy monodromy(const PotentialSpec& potential, double energy, double x0 = 0.0);

constexpr double kDefaultEdgeTol = 1e-7;
constexpr int kDefaultStepsPerPeriod = 4000;

enum class SpectralKind { Band, Gap, Edge };

struct SpectralClassification {
  SpectralKind kind;
  bool periodic_edge = false;  // meaningful for kind == Edge: t = +1
};

/// Band if |D| < 2 - edge_tol, Gap if |D| > 2 + edge_tol, Edge otherwise.
SpectralClassification classify(const Monodromy& m, double edge_tol = kDefaultEdgeTol);

struct GapInterval {
  double lower = 0;  // ignored when lower_infinite
  double upper = 0;
  bool lower_infinite = false;
};

struct BandStructure {
  std::vector<double> edges;         // ordered band-edge energies
  std::vector<int> edge_sign;        // discriminant sign at the edge: +1 / -1
  std::vector<bool> edge_flagged;    // true for unresolved double roots (gap closures)
  std::vector<std::pair<double, double>> bands;
  std::vector<GapInterval> gaps;
  std::vector<std::pair<double, double>> discriminant_samples;  // (eps, D)
  std::string pattern_warning;       // empty when the edge sign pattern is consistent
};

/// Scans the discriminant over [eps_lo, eps_hi] on n_scan points, brackets
/// the roots of D -+ 2, refines them by a bisection/secant hybrid, and
/// assembles alternating band and gap intervals.  Tangential double roots
/// (closed gaps) are reported as flagged edges and open no gap.
BandStructure find_band_edges(const PotentialSpec& potential, double eps_lo, double eps_hi,
                              int n_scan, double step);
BandStructure find_band_edges(const PotentialSpec& potential, double eps_lo, double eps_hi,
                              int n_scan = 400);

/// One real Bloch solution of a gap energy over [-N tau, N tau], built from
/// the monodromy eigenvector and extended period by period with multiplier
/// bookkeeping kept in the trace's log scale.
struct BlochSolution {
  SolutionTrace trace;
  double multiplier = 0;   // real in a gap
  bool grows_right = false;
  int nodes_per_period = 0;
};

struct BlochPair {
  BlochSolution plus;   // |t| > 1, diverges toward +infinity
  BlochSolution minus;  // |t| < 1, diverges toward -infinity
  Monodromy period_map;
};

/// Constructs both Bloch solutions for an energy inside a gap.  Rejects band
/// energies (complex multipliers) and exact edges (degenerate eigenvectors).
BlochPair bloch_pair(const PotentialSpec& potential, double energy, int n_periods,
                     double step);
BlochPair bloch_pair(const PotentialSpec& potential, double energy, int n_periods = 10);

/// Analytic band-edge eigenfunctions of the Lame potential sampled on a
/// uniform grid: dn, cn, sn at energies m, 1, 1+m.
enum class LameEdge { Dn, Cn, Sn };
SolutionTrace lame_edge_state(EllipticParameter m, LameEdge which, double x0, double x1,
                              double h);

/// Max |(-psi'' + (V - eps) psi)| / max |psi| over the grid interior using a
/// 4th-order second-difference stencil; samples where `valid` is zero (or
/// their two neighbours to each side) are skipped.  Used by the tests and the
/// verification reports, never inside the transforms themselves.
double schrodinger_residual(const SolutionTrace& trace,
                            const std::function<double(double)>& potential, double energy,
                            const std::vector<std::uint8_t>* valid = nullptr);

/// Same check against a potential already sampled on the trace grid
/// (e.g. a transformed potential).
double schrodinger_residual(const SolutionTrace& trace,
                            const std::vector<double>& potential_samples, double energy,
                            const std::vector<std::uint8_t>* valid = nullptr);

}  // namespace gapforge
