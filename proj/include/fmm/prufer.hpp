#pragma once

#include <vector>

#include "fmm/model.hpp"
#include "fmm/propagate.hpp"

namespace fmm {

/// Prüfer variables of the solution u_c with u(c) = sin(theta),
/// u'(c) = cos(theta): u = R sin(phi), u' = R cos(phi), phi unwrapped
/// continuously from phi(c) = theta.
struct PruferState {
  double log_R = 0.0;
  double phi = 0.0;
  double anchor = 0.0;    // c
  double theta = 0.0;
  double position = 0.0;  // x
  State2 direction{0.0, 1.0};  // (sin phi, cos phi) as propagated

  double R() const { return std::exp(log_R); }
  State2 state() const { return std::exp(log_R) * direction; }
};

struct PruferPolar {
  double log_R;
  double phi;  // principal value in (-pi, pi]
};

/// Throws ZeroState.
PruferPolar to_prufer(const State2& state);

/// Evolves from `from` to `to` (either direction) with phase theta at
/// `from`. Substeps satisfy (1 + |1+q|) h < pi/2, so the branch nearest
/// the Euler prediction of the phase ODE is the continuous one.
PruferState evolve_prufer(const PotentialProfile& profile, double from, double to, double theta);

/// States at every edge of `profile`, for the solution started with phase
/// theta at the left end (from_left) or at the right end.
std::vector<PruferState> prufer_edge_states(const PotentialProfile& profile, bool from_left, double theta);

/// Integrals over [0, L] of C^2, C S, S^2 where C, S are the solutions of
/// -u'' + q u = 0 with (C, C')(0) = (1, 0), (S, S')(0) = (0, 1).
struct MassKernel {
  double cc;
  double cs;
  double ss;
};
MassKernel mass_kernel(double q, double length);

/// Integral over [0, L] of (c C + d S)^2, i.e. of u^2 for (u, u')(0) = (c, d).
double unit_mass(double q, double length, double c, double d);

/// d/dlambda phi_c(x, lambda) for -u'' + (W + lambda V) u = 0, via
/// -R^{-2}(x) * integral_c^x V u^2 with exact piecewise integrals.
double phase_coupling_derivative(const PotentialProfile& background, const PotentialProfile& perturbation,
                                 double lambda, double from, double to, double theta);

/// d/dE phi_c(x, E) for -u'' + (profile - E) u = 0; equals
/// R^{-2}(x) * integral_c^x u^2 >= 0.
double phase_energy_derivative(const PotentialProfile& profile, double from, double to, double theta,
                               double energy);

/// Number of Dirichlet eigenvalues <= E on [a, b] = realization range:
/// floor(phi_a(b, E, 0) / pi). Throws FlavorMismatch.
int eigenvalue_count_below(const ModelSpec& spec, const Realization& realization, double energy);

struct ContinuumEigenpair {
  double energy = 0.0;
  /// |u(b)| / R(b) of the shooting solution at the returned energy.
  double residual = 0.0;
  /// integral of psi^2 over each unit cell [n, n+1].
  std::vector<double> cell_mass;
  /// psi at a + j * sample_step, j = 0..(b-a)/sample_step.
  double sample_step = 0.0;
  std::vector<double> samples;
};

/// All Dirichlet eigenpairs with E_n <= E0, located by bisection on the
/// phase (monotone in E) and polished with Newton steps on phi(b, E) = k pi.
/// Eigenfunctions are L^2-normalized. Throws FlavorMismatch.
std::vector<ContinuumEigenpair> continuum_eigensystem_below(const ModelSpec& spec, const Realization& realization,
                                                            double e0, int samples_per_unit = 64);

/// integral_c^{c+ell} u^2 for the solution with (u, u')(c) = (sin theta, cos theta).
double solution_mass_ratio(const PotentialProfile& profile, double c, double ell, double theta);

/// Constructive lower bound C(ell, M) with integral_c^{c+ell} u^2 >= C (u(c)^2 + u'(c)^2)
/// whenever integral |q| <= M on [c, c+ell].
double apriori_mass_lower_bound(double ell, double m);

}  // namespace fmm
