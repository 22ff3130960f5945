#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "fmm/model.hpp"

namespace fmm {

/// Closed integer interval [a, b]. For the continuum it is the operator's
/// domain and the unit blocks are [x, x+1] with a <= x < b; for the lattice
/// it is the site set a..b.
struct Volume {
  int a = 0;
  int b = 0;
};

enum class Direction { Right, Left };

/// Distance-indexed means with their estimator covariance.
struct CurveStats {
  std::vector<int> distances;
  std::vector<double> means;
  std::vector<double> std_errors;
  Eigen::MatrixXd covariance;
};

struct MomentOptions {
  std::optional<double> epsilon;  // lattice only: G(E + i epsilon)
  Direction direction = Direction::Right;
  unsigned workers = 1;
  /// continuum only: compare log R_b increments against transfer products
  bool check_phase_splitting = false;
};

struct MomentCurve : CurveStats {
  double s = 0.0;
  double energy = 0.0;
  std::optional<double> epsilon;
  Volume volume;
  int anchor = 0;
  Direction direction = Direction::Right;
  int flagged_count = 0;
  int n_realizations = 0;
  int n_used = 0;
  bool reliable = true;  // flagged_count <= 0.1% of n_realizations
  bool median_of_means = false;
  SeedLineage lineage;
  double max_phase_split_error = 0.0;
  double max_wronskian_spread = 0.0;
};

/// Monte Carlo means of |G(x, x +- d; E)|^s (lattice) or of the s-th power
/// of the Hilbert-Schmidt block norm (continuum). Realizations with a
/// degenerate Green function are dropped and counted. Requires
/// 0 < s <= 0.5 and at least 20 realizations.
MomentCurve fractional_moment_curve(const ModelSpec& spec, Volume volume, double energy, double s, int anchor,
                                    const std::vector<int>& distances, int n_realizations,
                                    std::uint64_t master_seed, const MomentOptions& options = {});

struct DecayFit {
  double eta_hat = 0.0;
  double eta_std_error = 0.0;
  double C_hat = 0.0;
  double r_squared = 0.0;
  int window_lo = 0;
  int window_hi = 0;
  int n_points = 0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // of (log C, eta)
};

/// Weighted fit of log(mean) = log C - eta d over distances in [lo, hi].
/// Throws DegenerateFit.
DecayFit fit_decay(const CurveStats& curve, int window_lo, int window_hi);
DecayFit fit_decay(const CurveStats& curve);

struct AprioriRow {
  double energy = 0.0;
  double diagonal_mean = 0.0;
  double diagonal_std_error = 0.0;
  double neighbor_mean = 0.0;
  double neighbor_std_error = 0.0;
  int flagged = 0;
};

struct AprioriScan {
  Volume volume;
  double s = 0.0;
  int site = 0;
  int n_realizations = 0;
  std::vector<AprioriRow> rows;
  double max_mean = 0.0;
  double max_std_error = 0.0;
  double max_energy = 0.0;
};

/// 25 energies spanning [-3 + eta_min, 3 + eta_max].
std::vector<double> default_apriori_grid(const ModelSpec& spec, int points = 25);

/// Means of |G(x,x)|^s and |G(x,x+1)|^s at the volume's center site over
/// the energy grid (default_apriori_grid when empty). Lattice only.
AprioriScan apriori_bound_scan(const ModelSpec& spec, Volume volume, double s, std::vector<double> energies,
                               int n_realizations, std::uint64_t master_seed, unsigned workers = 1);

struct CorrelatorCurve : CurveStats {
  double cutoff = 0.0;
  Volume volume;
  int anchor = 0;
  int n_realizations = 0;
  bool median_of_means = false;
  SeedLineage lineage;
};

/// Q(x, y) = sum over eigenpairs with E_n <= cutoff of |psi_n(x)||psi_n(y)|
/// (lattice) or ||chi_x psi_n|| ||chi_y psi_n|| (continuum), disorder
/// averaged. Volume length at most 512.
CorrelatorCurve correlator_curve(const ModelSpec& spec, Volume volume, double cutoff, int anchor,
                                 const std::vector<int>& distances, int n_realizations, std::uint64_t master_seed,
                                 unsigned workers = 1);

/// Per-realization Q(anchor, anchor + d) for one lattice realization on
/// sites a..b.
std::vector<double> lattice_correlator(const Realization& realization, Volume volume, double cutoff, int anchor,
                                       const std::vector<int>& distances);

}  // namespace fmm
