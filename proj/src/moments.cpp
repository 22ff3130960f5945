#include "fmm/moments.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "fmm/error.hpp"
#include "fmm/green.hpp"
#include "fmm/parallel.hpp"
#include "fmm/propagate.hpp"
#include "fmm/prufer.hpp"
#include "fmm/stats.hpp"

namespace fmm {

namespace {

struct RealizationResult {
  bool flagged = false;
  std::vector<double> values;
  double phase_error = 0.0;
  double spread = 0.0;
};

void check_volume(Volume v) {
  if (v.a >= v.b) throw Error(ErrorKind::InvalidSpec, "volume needs a < b");
}

// Site range [lo, hi] over which the Green quantity is indexed.
std::pair<int, int> index_range(const ModelSpec& spec, Volume v) {
  return spec.flavor == Flavor::Discrete ? std::pair{v.a, v.b} : std::pair{v.a, v.b - 1};
}

Realization realization_for(const ModelSpec& spec, Volume v, std::uint64_t seed, std::uint64_t index) {
  return sample_realization(spec, v.a, spec.flavor == Flavor::Discrete ? v.b + 1 : v.b, seed, index);
}

const PruferState& state_at(const std::vector<PruferState>& states, double x) {
  for (const auto& st : states) {
    if (std::abs(st.position - x) < 1e-12) return st;
  }
  throw Error(ErrorKind::OutOfInterval, "no Prüfer state at requested position");
}

// |[log R_b(lo) - log R_b(hi)] - log |T(lo, hi) (sin phi_b(hi), cos phi_b(hi))||
double phase_split_error(const ContinuumGreen& g, int lo, int hi) {
  const PruferState& at_lo = state_at(g.right_states(), lo);
  const PruferState& at_hi = state_at(g.right_states(), hi);
  const auto t = transfer(g.profile(), hi, lo);
  const auto applied = apply(t, State2(std::sin(at_hi.phi), std::cos(at_hi.phi)));
  return std::abs((at_lo.log_R - at_hi.log_R) - applied.log_gain);
}

template <class Stats>
void fill_stats(Stats& out, const std::vector<int>& distances, const Eigen::MatrixXd& samples) {
  const ColumnSummary summary = summarize_columns(samples);
  out.distances = distances;
  out.means.assign(summary.mean.data(), summary.mean.data() + summary.mean.size());
  out.std_errors.clear();
  for (Eigen::Index c = 0; c < summary.covariance.rows(); ++c) {
    out.std_errors.push_back(std::sqrt(std::max(summary.covariance(c, c), 0.0)));
  }
  out.covariance = summary.covariance;
  out.median_of_means = summary.median_of_means;
}

}  // namespace

MomentCurve fractional_moment_curve(const ModelSpec& spec, Volume volume, double energy, double s, int anchor,
                                    const std::vector<int>& distances, int n_realizations,
                                    std::uint64_t master_seed, const MomentOptions& options) {
  spec.validate();
  check_volume(volume);
  if (!(s > 0.0 && s <= 0.5)) throw Error(ErrorKind::InvalidSpec, "s must lie in (0, 0.5]");
  if (n_realizations < 20) throw Error(ErrorKind::InsufficientSamples, "need at least 20 realizations");
  if (distances.empty()) throw Error(ErrorKind::InvalidSpec, "empty distance grid");
  const bool lattice = spec.flavor == Flavor::Discrete;
  if (options.epsilon && (!lattice || !(*options.epsilon > 0.0))) {
    throw Error(ErrorKind::InvalidSpec, "complex energy needs the lattice flavor and epsilon > 0");
  }
  const auto [lo, hi] = index_range(spec, volume);
  const int sign = options.direction == Direction::Right ? 1 : -1;
  std::vector<int> targets;
  for (int d : distances) {
    const int y = anchor + sign * d;
    if (d < 0 || anchor < lo || anchor > hi || y < lo || y > hi) {
      throw Error(ErrorKind::OutOfInterval, "distance leaves the volume");
    }
    targets.push_back(y);
  }

  std::vector<RealizationResult> results(static_cast<std::size_t>(n_realizations));
  parallel_for(results.size(), options.workers, [&](std::size_t r) {
    RealizationResult& res = results[r];
    const Realization real = realization_for(spec, volume, master_seed, r);
    if (lattice) {
      try {
        if (options.epsilon) {
          const auto row = discrete_green_solve(real, lo, hi, energy, *options.epsilon).row(anchor);
          for (int y : targets) res.values.push_back(std::pow(std::abs(row[static_cast<std::size_t>(y - lo)]), s));
        } else {
          const auto row = discrete_green_solve(real, lo, hi, energy).row(anchor);
          for (int y : targets) res.values.push_back(std::pow(std::abs(row[static_cast<std::size_t>(y - lo)]), s));
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EigenvalueHit) throw;
        res.flagged = true;
      }
      return;
    }
    const ContinuumGreen g(spec, real, energy);
    res.spread = g.wronskian_spread();
    if (g.status() != GreenStatus::Ok) {
      res.flagged = true;
      return;
    }
    for (int y : targets) {
      res.values.push_back(std::pow(g.hs_block_norm(anchor, y), s));
      if (options.check_phase_splitting && y != anchor) {
        res.phase_error = std::max(res.phase_error, phase_split_error(g, std::min(anchor, y), std::max(anchor, y)));
      }
    }
  });

  MomentCurve out;
  out.s = s;
  out.energy = energy;
  out.epsilon = options.epsilon;
  out.volume = volume;
  out.anchor = anchor;
  out.direction = options.direction;
  out.n_realizations = n_realizations;
  out.lineage = {master_seed, 0};
  for (const auto& res : results) {
    out.flagged_count += res.flagged ? 1 : 0;
    out.max_phase_split_error = std::max(out.max_phase_split_error, res.phase_error);
    out.max_wronskian_spread = std::max(out.max_wronskian_spread, res.spread);
  }
  out.n_used = n_realizations - out.flagged_count;
  out.reliable = out.flagged_count * 1000 <= n_realizations;
  if (out.n_used < 20) throw Error(ErrorKind::InsufficientSamples, "fewer than 20 usable realizations");

  Eigen::MatrixXd samples(out.n_used, static_cast<Eigen::Index>(targets.size()));
  Eigen::Index row = 0;
  for (const auto& res : results) {
    if (res.flagged) continue;
    for (std::size_t c = 0; c < res.values.size(); ++c) samples(row, static_cast<Eigen::Index>(c)) = res.values[c];
    ++row;
  }
  fill_stats(out, distances, samples);
  return out;
}

DecayFit fit_decay(const CurveStats& curve, int window_lo, int window_hi) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < curve.distances.size(); ++i) {
    if (curve.distances[i] >= window_lo && curve.distances[i] <= window_hi) idx.push_back(static_cast<Eigen::Index>(i));
  }
  const auto n = static_cast<Eigen::Index>(idx.size());
  if (n < 5) throw Error(ErrorKind::DegenerateFit, "fewer than 5 distances in the fit window");
  bool deterministic = true;
  for (auto i : idx) {
    const double m = curve.means[static_cast<std::size_t>(i)];
    const double se = curve.std_errors[static_cast<std::size_t>(i)];
    if (!(m > 0.0) || m <= 2.0 * se) throw Error(ErrorKind::DegenerateFit, "mean not resolved above its error");
    deterministic = deterministic && se == 0.0;
  }
  Eigen::VectorXd x(n), y(n), w(n);
  Eigen::MatrixXd log_cov(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
    x(k) = curve.distances[i];
    y(k) = std::log(curve.means[i]);
    const double rel = std::max(curve.std_errors[i] / curve.means[i], 1e-8);
    w(k) = deterministic ? 1.0 : 1.0 / (rel * rel);
    for (Eigen::Index l = 0; l < n; ++l) {
      const auto j = static_cast<std::size_t>(idx[static_cast<std::size_t>(l)]);
      const bool have = curve.covariance.rows() == static_cast<Eigen::Index>(curve.means.size());
      const double c = have ? curve.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                            : (i == j ? curve.std_errors[i] * curve.std_errors[i] : 0.0);
      log_cov(k, l) = c / (curve.means[i] * curve.means[j]);
    }
  }
  const LineFit fit = weighted_line_fit(x, y, w, deterministic ? nullptr : &log_cov);
  DecayFit out;
  out.eta_hat = -fit.slope;
  out.C_hat = std::exp(fit.intercept);
  out.r_squared = fit.r_squared;
  out.window_lo = window_lo;
  out.window_hi = window_hi;
  out.n_points = static_cast<int>(n);
  if (!deterministic) {
    out.covariance << fit.covariance(0, 0), -fit.covariance(0, 1), -fit.covariance(1, 0), fit.covariance(1, 1);
    out.eta_std_error = std::sqrt(fit.covariance(1, 1));
  }
  return out;
}

DecayFit fit_decay(const CurveStats& curve) {
  if (curve.distances.empty()) throw Error(ErrorKind::DegenerateFit, "empty curve");
  const auto [lo, hi] = std::minmax_element(curve.distances.begin(), curve.distances.end());
  return fit_decay(curve, *lo, *hi);
}

std::vector<double> default_apriori_grid(const ModelSpec& spec, int points) {
  const double lo = -3.0 + spec.coupling.min(), hi = 3.0 + spec.coupling.max();
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) grid.push_back(points == 1 ? lo : lo + (hi - lo) * i / (points - 1));
  return grid;
}

AprioriScan apriori_bound_scan(const ModelSpec& spec, Volume volume, double s, std::vector<double> energies,
                               int n_realizations, std::uint64_t master_seed, unsigned workers) {
  spec.validate();
  check_volume(volume);
  if (spec.flavor != Flavor::Discrete) throw Error(ErrorKind::FlavorMismatch, "a-priori scan is lattice only");
  if (!(s > 0.0 && s <= 0.5)) throw Error(ErrorKind::InvalidSpec, "s must lie in (0, 0.5]");
  if (n_realizations < 20) throw Error(ErrorKind::InsufficientSamples, "need at least 20 realizations");
  if (energies.empty()) energies = default_apriori_grid(spec);
  const int x = volume.a + (volume.b - volume.a) / 2;
  const std::size_t ne = energies.size();

  // per realization: (|G(x,x)|^s, |G(x,x+1)|^s) per energy, NaN when flagged
  std::vector<std::vector<double>> values(static_cast<std::size_t>(n_realizations));
  parallel_for(values.size(), workers, [&](std::size_t r) {
    const Realization real = realization_for(spec, volume, master_seed, r);
    auto& v = values[r];
    v.assign(2 * ne, std::nan(""));
    for (std::size_t e = 0; e < ne; ++e) {
      try {
        const auto g = discrete_green_solve(real, volume.a, volume.b, energies[e]);
        v[2 * e] = std::pow(std::abs(g(x, x)), s);
        v[2 * e + 1] = std::pow(std::abs(g(x, x + 1)), s);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::EigenvalueHit) throw;
      }
    }
  });

  AprioriScan out;
  out.volume = volume;
  out.s = s;
  out.site = x;
  out.n_realizations = n_realizations;
  for (std::size_t e = 0; e < ne; ++e) {
    AprioriRow row;
    row.energy = energies[e];
    std::vector<Eigen::Index> used;
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (std::isnan(values[r][2 * e])) {
        ++row.flagged;
      } else {
        used.push_back(static_cast<Eigen::Index>(r));
      }
    }
    if (used.size() < 2) throw Error(ErrorKind::InsufficientSamples, "too many flagged realizations");
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(used.size()), 2);
    for (std::size_t k = 0; k < used.size(); ++k) {
      const auto& v = values[static_cast<std::size_t>(used[k])];
      samples(static_cast<Eigen::Index>(k), 0) = v[2 * e];
      samples(static_cast<Eigen::Index>(k), 1) = v[2 * e + 1];
    }
    const ColumnSummary summary = summarize_columns(samples);
    row.diagonal_mean = summary.mean(0);
    row.neighbor_mean = summary.mean(1);
    row.diagonal_std_error = std::sqrt(summary.covariance(0, 0));
    row.neighbor_std_error = std::sqrt(summary.covariance(1, 1));
    for (auto [m, se] : {std::pair{row.diagonal_mean, row.diagonal_std_error},
                         std::pair{row.neighbor_mean, row.neighbor_std_error}}) {
      if (m > out.max_mean) {
        out.max_mean = m;
        out.max_std_error = se;
        out.max_energy = row.energy;
      }
    }
    out.rows.push_back(row);
  }
  return out;
}

std::vector<double> lattice_correlator(const Realization& realization, Volume volume, double cutoff, int anchor,
                                       const std::vector<int>& distances) {
  const auto n = static_cast<Eigen::Index>(volume.b - volume.a + 1);
  Eigen::VectorXd diag(n);
  for (Eigen::Index i = 0; i < n; ++i) diag(i) = realization.coupling(volume.a + static_cast<int>(i));
  const Eigen::VectorXd sub = Eigen::VectorXd::Constant(std::max<Eigen::Index>(n - 1, 0), -1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  const Eigen::Index x = anchor - volume.a;
  std::vector<double> q(distances.size(), 0.0);
  for (Eigen::Index k = 0; k < n && es.eigenvalues()(k) <= cutoff; ++k) {
    const auto psi = es.eigenvectors().col(k);
    for (std::size_t d = 0; d < distances.size(); ++d) {
      q[d] += std::abs(psi(x)) * std::abs(psi(x + distances[d]));
    }
  }
  return q;
}

CorrelatorCurve correlator_curve(const ModelSpec& spec, Volume volume, double cutoff, int anchor,
                                 const std::vector<int>& distances, int n_realizations, std::uint64_t master_seed,
                                 unsigned workers) {
  spec.validate();
  check_volume(volume);
  if (volume.b - volume.a > 512) throw Error(ErrorKind::InvalidSpec, "correlator volume longer than 512");
  if (n_realizations < 2) throw Error(ErrorKind::InsufficientSamples, "need at least 2 realizations");
  const auto [lo, hi] = index_range(spec, volume);
  for (int d : distances) {
    if (d < 0 || anchor < lo || anchor + d > hi) throw Error(ErrorKind::OutOfInterval, "distance leaves the volume");
  }
  const bool lattice = spec.flavor == Flavor::Discrete;
  Eigen::MatrixXd samples(n_realizations, static_cast<Eigen::Index>(distances.size()));
  parallel_for(static_cast<std::size_t>(n_realizations), workers, [&](std::size_t r) {
    const Realization real = realization_for(spec, volume, master_seed, r);
    std::vector<double> q;
    if (lattice) {
      q = lattice_correlator(real, volume, cutoff, anchor, distances);
    } else {
      q.assign(distances.size(), 0.0);
      for (const auto& pair : continuum_eigensystem_below(spec, real, cutoff)) {
        const double mx = pair.cell_mass[static_cast<std::size_t>(anchor - volume.a)];
        for (std::size_t d = 0; d < distances.size(); ++d) {
          q[d] += std::sqrt(mx * pair.cell_mass[static_cast<std::size_t>(anchor + distances[d] - volume.a)]);
        }
      }
    }
    for (std::size_t d = 0; d < q.size(); ++d) samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = q[d];
  });
  CorrelatorCurve out;
  out.cutoff = cutoff;
  out.volume = volume;
  out.anchor = anchor;
  out.n_realizations = n_realizations;
  out.lineage = {master_seed, 0};
  fill_stats(out, distances, samples);
  return out;
}

}  // namespace fmm
