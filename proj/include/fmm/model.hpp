#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace fmm {

enum class Flavor { Continuum, Discrete };

/// Uniform law on [min, max]. min == max is accepted as a point mass
/// (zero-width disorder) for deterministic reference runs.
struct Uniform {
  double min = 0.0;
  double max = 1.0;
};

/// Density taking value densities[i] on [breakpoints[i], breakpoints[i+1]).
struct PiecewiseConstantDensity {
  std::vector<double> breakpoints;
  std::vector<double> densities;
};

class CouplingDistribution {
 public:
  using Law = std::variant<Uniform, PiecewiseConstantDensity>;

  CouplingDistribution(Uniform law);
  CouplingDistribution(PiecewiseConstantDensity law);

  const Law& law() const { return law_; }
  double min() const;
  double max() const;
  double mean() const;
  double variance() const;
  /// Inverse CDF; u in [0, 1).
  double quantile(double u) const;

 private:
  void validate() const;

  Law law_;
  std::vector<double> cumulative_;  // piecewise only: mass below breakpoints[i]
};

/// One random operator family. Continuum flavor:
///   H = -d^2/dx^2 + W + sum_n eta_n f(. - n)
/// with W 1-periodic and f supported on [0,1], both constant on the m
/// subcells [k/m, (k+1)/m). Discrete flavor: (h u)(n) = -u(n+1) - u(n-1) + eta_n u(n);
/// background and single_site are ignored.
struct ModelSpec {
  Flavor flavor = Flavor::Continuum;
  int subcells_per_unit = 1;
  std::vector<double> background{0.0};
  std::vector<double> single_site{1.0};
  CouplingDistribution coupling{Uniform{0.0, 1.0}};

  /// Throws Error(InvalidSpec).
  void validate() const;

  /// Strict deterministic lower bound of W + V_omega over all realizations
  /// (continuum), or of the diagonal eta_n (discrete).
  double potential_lower_bound() const;
  /// Deterministic upper bound of W + V_omega.
  double potential_upper_bound() const;

  static ModelSpec continuum_default() { return {}; }
  static ModelSpec discrete_with(CouplingDistribution law);
};

std::uint64_t splitmix64(std::uint64_t x);

/// Uniform variate in [0,1) for one site, from a counter-based hash of
/// (master_seed, realization_index, site):
///   h0 = splitmix64(master_seed)
///   h1 = splitmix64(h0 ^ realization_index)
///   h2 = splitmix64(h1 ^ uint64(site))
///   u  = (h2 >> 11) * 2^-53
/// The value for a site is independent of the interval it is sampled in.
double site_uniform(std::uint64_t master_seed, std::uint64_t realization_index, std::int64_t site);

struct SeedLineage {
  std::uint64_t master_seed = 0;
  std::uint64_t realization_index = 0;
};

/// Couplings eta_a, ..., eta_{b-1} on the half-open site range [a, b).
/// For the continuum model eta_n multiplies f on the cell [n, n+1], so
/// the realization describes the potential on [a, b]. For the discrete
/// model the sites are a..b-1.
class Realization {
 public:
  Realization(int a, std::vector<double> couplings, SeedLineage lineage = {});

  int begin_site() const { return a_; }
  int end_site() const { return a_ + static_cast<int>(couplings_.size()); }
  int size() const { return static_cast<int>(couplings_.size()); }
  bool contains(int site) const { return site >= begin_site() && site < end_site(); }
  /// Throws Error(OutOfInterval).
  double coupling(int site) const;
  std::span<const double> couplings() const { return couplings_; }
  const SeedLineage& lineage() const { return lineage_; }

  Realization with_coupling(int site, double eta) const;

 private:
  int a_;
  std::vector<double> couplings_;
  SeedLineage lineage_;
};

/// Samples couplings for sites a..b-1 (requires a < b).
Realization sample_realization(const ModelSpec& spec, int a, int b, std::uint64_t master_seed,
                               std::uint64_t realization_index);

/// Piecewise-constant q on [edges.front(), edges.back()], value values[i]
/// on [edges[i], edges[i+1]).
class PotentialProfile {
 public:
  PotentialProfile(std::vector<double> edges, std::vector<double> values);

  double begin() const { return edges_.front(); }
  double end() const { return edges_.back(); }
  std::size_t size() const { return values_.size(); }
  double edge(std::size_t i) const { return edges_[i]; }
  double value(std::size_t i) const { return values_[i]; }
  double length(std::size_t i) const { return edges_[i + 1] - edges_[i]; }
  std::span<const double> edges() const { return edges_; }
  std::span<const double> values() const { return values_; }

  bool contains(double x) const { return x >= begin() && x <= end(); }
  /// Index of the piece containing x; x == end() maps to the last piece.
  std::size_t piece_index(double x) const;
  double value_at(double x) const;
  double min_value() const;
  double max_value() const;

  /// q + delta.
  PotentialProfile shifted(double delta) const;
  /// Same function with an edge at every integer in [begin, end].
  PotentialProfile refined_at_integers() const;
  /// Restriction to [from, to] (from < to, both inside).
  PotentialProfile restricted(double from, double to) const;
  /// Integral of |offset + q| over [from, to].
  double abs_integral(double from, double to, double offset = 0.0) const;

 private:
  std::vector<double> edges_;
  std::vector<double> values_;
};

/// Pointwise w + lambda * v on the union of both edge sets; both profiles
/// must cover the same interval.
PotentialProfile combine(const PotentialProfile& w, const PotentialProfile& v, double lambda);

/// q = W + V_omega - E on [realization.begin_site(), realization.end_site()];
/// adjacent pieces with equal value are merged. Throws FlavorMismatch for
/// discrete specs.
PotentialProfile build_profile(const ModelSpec& spec, const Realization& realization, double energy);

/// f(. - site) as a profile on [a, b], zero outside [site, site+1].
PotentialProfile single_site_profile(const ModelSpec& spec, int site, int a, int b);

}  // namespace fmm
