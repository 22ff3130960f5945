#include "fmm/lyapunov.hpp"

#include <Eigen/Core>
#include <cmath>

#include "fmm/parallel.hpp"
#include "fmm/stats.hpp"

namespace fmm {

const char* to_string(SpectralClass c) {
  switch (c) {
    case SpectralClass::Band: return "Band";
    case SpectralClass::Gap: return "Gap";
    case SpectralClass::Edge: return "Edge";
    case SpectralClass::Special: return "Special";
  }
  return "Unknown";
}

FloquetData floquet(const ModelSpec& spec, double energy, double eta) {
  if (spec.flavor != Flavor::Continuum) throw Error(ErrorKind::FlavorMismatch, "Floquet analysis is continuum only");
  const auto t = unit_cell_transfer(spec, eta, energy);
  FloquetData out;
  out.energy = energy;
  out.discriminant = t.trace();
  const double d = out.discriminant;
  if (std::abs(d - 2.0) < 1e-9 || std::abs(d) < 1e-9 || std::abs(d + 2.0) < 1e-9) {
    out.classification = SpectralClass::Special;
  } else if (std::abs(std::abs(d) - 2.0) < 1e-6) {
    out.classification = SpectralClass::Edge;
  } else {
    out.classification = std::abs(d) < 2.0 ? SpectralClass::Band : SpectralClass::Gap;
  }
  // roots of rho^2 - D rho + 1 = 0
  const std::complex<double> disc = std::sqrt(std::complex<double>(d * d - 4.0, 0.0));
  const std::complex<double> r1 = 0.5 * (d + disc), r2 = 0.5 * (d - disc);
  out.rho = std::abs(r1) >= std::abs(r2) ? r1 : r2;
  out.rho_inv = 1.0 / out.rho;
  return out;
}

ScaledMatrix2<double> site_transfer(const ModelSpec& spec, double eta, double energy) {
  if (spec.flavor == Flavor::Discrete) return discrete_step(eta, energy);
  if (spec.subcells_per_unit == 1) {
    return cell_propagator(spec.background[0] + eta * spec.single_site[0] - energy, 1.0);
  }
  return unit_cell_transfer(spec, eta, energy);
}

LyapunovEstimate lyapunov_estimate(const ModelSpec& spec, double energy, long n_steps, std::uint64_t master_seed,
                                   const LyapunovOptions& options) {
  if (n_steps < 1000) throw Error(ErrorKind::InvalidSpec, "Lyapunov estimate needs at least 1000 steps");
  if (options.batch_size < 1) throw Error(ErrorKind::InvalidSpec, "batch size must be positive");
  State2 v = options.start.normalized();
  double log_acc = 0.0;
  double batch_start = 0.0;
  std::vector<double> batches;
  batches.reserve(static_cast<std::size_t>(n_steps / options.batch_size));
  for (long n = 0; n < n_steps; ++n) {
    const double u = site_uniform(master_seed, options.realization_index, n);
    const auto t = site_transfer(spec, spec.coupling.quantile(u), energy);
    v = t.entries() * v;
    log_acc += t.log_scale();
    const double norm = v.norm();
    if (norm < options.window.lo || norm > options.window.hi) {
      log_acc += std::log(norm);
      v /= norm;
    }
    if ((n + 1) % options.batch_size == 0) {
      const double total = log_acc + std::log(v.norm());
      batches.push_back((total - batch_start) / options.batch_size);
      batch_start = total;
    }
  }
  LyapunovEstimate out;
  out.energy = energy;
  out.steps = n_steps;
  out.log_growth = log_acc + std::log(v.norm());
  out.gamma = out.log_growth / static_cast<double>(n_steps);
  out.lineage = {master_seed, options.realization_index};
  const Eigen::Map<const Eigen::VectorXd> b(batches.data(), static_cast<Eigen::Index>(batches.size()));
  if (b.size() > 1) {
    const double mean = b.mean();
    const double var = (b.array() - mean).square().sum() / double(b.size() - 1);
    out.std_error = std::sqrt(var / double(b.size()));
  }
  return out;
}

InverseMomentTable furstenberg_inverse_moment(const ModelSpec& spec, double energy, double delta,
                                              const std::vector<int>& n_grid, int n_realizations, const State2& x,
                                              std::uint64_t master_seed, unsigned workers) {
  if (!(delta > 0.0 && delta <= 0.2)) throw Error(ErrorKind::InvalidSpec, "delta must lie in (0, 0.2]");
  if (std::abs(x.norm() - 1.0) > 1e-12) throw Error(ErrorKind::InvalidSpec, "direction must be a unit vector");
  if (n_grid.empty() || n_realizations < 2) throw Error(ErrorKind::InsufficientSamples, "empty inverse-moment run");
  int n_max = 0;
  for (int n : n_grid) {
    if (n < 1) throw Error(ErrorKind::InvalidSpec, "grid lengths must be positive");
    n_max = std::max(n_max, n);
  }
  const auto cols = static_cast<Eigen::Index>(n_grid.size());
  Eigen::MatrixXd samples(n_realizations, cols);
  parallel_for(static_cast<std::size_t>(n_realizations), workers, [&](std::size_t r) {
    std::vector<double> log_norm(static_cast<std::size_t>(n_max) + 1, 0.0);
    State2 v = x;
    double acc = 0.0;
    for (int n = 0; n < n_max; ++n) {
      const double eta = spec.coupling.quantile(site_uniform(master_seed, r, n));
      const auto applied = apply(site_transfer(spec, eta, energy), v);
      v = applied.direction;
      acc += applied.log_gain;
      log_norm[static_cast<std::size_t>(n) + 1] = acc;
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      samples(static_cast<Eigen::Index>(r), c) = std::exp(-delta * log_norm[static_cast<std::size_t>(n_grid[c])]);
    }
  });

  const ColumnSummary summary = summarize_columns(samples, /*mom_threshold=*/1 << 30);
  InverseMomentTable out;
  out.energy = energy;
  out.delta = delta;
  out.n = n_grid;
  out.n_realizations = n_realizations;
  out.lineage = {master_seed, 0};
  Eigen::VectorXd xs(cols), ys(cols), ws(cols);
  bool deterministic = true;
  for (Eigen::Index c = 0; c < cols; ++c) {
    out.mean.push_back(summary.mean(c));
    out.std_error.push_back(std::sqrt(summary.covariance(c, c)));
    deterministic = deterministic && summary.covariance(c, c) == 0.0;
  }
  if (cols >= 2) {
    Eigen::MatrixXd log_cov(cols, cols);
    for (Eigen::Index i = 0; i < cols; ++i) {
      xs(i) = n_grid[static_cast<std::size_t>(i)];
      ys(i) = std::log(summary.mean(i));
      const double rel = out.std_error[static_cast<std::size_t>(i)] / summary.mean(i);
      ws(i) = deterministic ? 1.0 : 1.0 / std::max(rel * rel, 1e-300);
      for (Eigen::Index j = 0; j < cols; ++j) {
        log_cov(i, j) = summary.covariance(i, j) / (summary.mean(i) * summary.mean(j));
      }
    }
    const LineFit fit = weighted_line_fit(xs, ys, ws, deterministic ? nullptr : &log_cov);
    out.alpha_hat = -fit.slope;
    out.alpha_std_error = deterministic ? 0.0 : std::sqrt(fit.covariance(1, 1));
  }
  return out;
}

}  // namespace fmm
