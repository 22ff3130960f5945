#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "fmm/model.hpp"
#include "fmm/propagate.hpp"

namespace fmm {

enum class SpectralClass { Band, Gap, Edge, Special };

const char* to_string(SpectralClass c);

/// Floquet data of the unit-cell transfer matrix T(eta, E).
struct FloquetData {
  double energy = 0.0;
  double discriminant = 0.0;
  SpectralClass classification = SpectralClass::Band;
  std::complex<double> rho;      // |rho| >= 1
  std::complex<double> rho_inv;
};

/// Special: D within 1e-9 of -2, 0 or 2. Edge: ||D| - 2| < 1e-6 otherwise.
/// Band: |D| < 2. Gap: |D| > 2. Throws FlavorMismatch for discrete specs.
FloquetData floquet(const ModelSpec& spec, double energy, double eta);

struct LyapunovOptions {
  int batch_size = 100;
  ScaleWindow window{};
  std::uint64_t realization_index = 0;
  State2 start{1.0, 0.0};
};

struct LyapunovEstimate {
  double energy = 0.0;
  double gamma = 0.0;       // per unit length (continuum) or per site (discrete)
  double std_error = 0.0;   // batch means
  long steps = 0;
  double log_growth = 0.0;  // accumulated log |T_n ... T_1 start|
  SeedLineage lineage;
};

/// gamma = (1/n) log |T(n, 0) start| along one long i.i.d. product; the
/// standard error comes from batch means. Requires n_steps >= 1000.
LyapunovEstimate lyapunov_estimate(const ModelSpec& spec, double energy, long n_steps, std::uint64_t master_seed,
                                   const LyapunovOptions& options = {});

struct InverseMomentTable {
  double energy = 0.0;
  double delta = 0.0;
  std::vector<int> n;
  std::vector<double> mean;       // Monte Carlo mean of |T(n,0) x|^{-delta}
  std::vector<double> std_error;
  double alpha_hat = 0.0;         // -slope of log(mean) against n
  double alpha_std_error = 0.0;
  int n_realizations = 0;
  SeedLineage lineage;
};

/// Requires 0 < delta <= 0.2 and a unit vector x.
InverseMomentTable furstenberg_inverse_moment(const ModelSpec& spec, double energy, double delta,
                                              const std::vector<int>& n_grid, int n_realizations, const State2& x,
                                              std::uint64_t master_seed, unsigned workers = 1);

/// One step of the random product at site n: the unit-cell transfer for
/// the continuum, discrete_step for the lattice.
ScaledMatrix2<double> site_transfer(const ModelSpec& spec, double eta, double energy);

}  // namespace fmm
