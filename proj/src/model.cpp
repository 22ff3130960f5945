#include "fmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fmm/error.hpp"

namespace fmm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

CouplingDistribution::CouplingDistribution(Uniform law) : law_(law) { validate(); }

CouplingDistribution::CouplingDistribution(PiecewiseConstantDensity law) : law_(std::move(law)) {
  validate();
  const auto& pw = std::get<PiecewiseConstantDensity>(law_);
  cumulative_.assign(pw.breakpoints.size(), 0.0);
  for (std::size_t i = 0; i < pw.densities.size(); ++i) {
    cumulative_[i + 1] = cumulative_[i] + pw.densities[i] * (pw.breakpoints[i + 1] - pw.breakpoints[i]);
  }
}

void CouplingDistribution::validate() const {
  std::visit(Overloaded{
                 [](const Uniform& u) {
                   if (!std::isfinite(u.min) || !std::isfinite(u.max) || u.min > u.max) {
                     throw Error(ErrorKind::InvalidSpec, "uniform law needs finite min <= max");
                   }
                 },
                 [](const PiecewiseConstantDensity& pw) {
                   const auto& b = pw.breakpoints;
                   const auto& d = pw.densities;
                   if (b.size() < 2 || d.size() + 1 != b.size()) {
                     throw Error(ErrorKind::InvalidSpec, "piecewise density needs k+1 breakpoints for k densities");
                   }
                   double mass = 0.0;
                   for (std::size_t i = 0; i < d.size(); ++i) {
                     if (!(b[i + 1] > b[i]) || !std::isfinite(b[i + 1]) || !std::isfinite(b[i])) {
                       throw Error(ErrorKind::InvalidSpec, "breakpoints must be finite and strictly increasing");
                     }
                     if (!(d[i] >= 0.0) || !std::isfinite(d[i])) {
                       throw Error(ErrorKind::InvalidSpec, "densities must be finite and non-negative");
                     }
                     mass += d[i] * (b[i + 1] - b[i]);
                   }
                   if (std::abs(mass - 1.0) > 1e-12) {
                     throw Error(ErrorKind::InvalidSpec, "density must integrate to 1 within 1e-12");
                   }
                 },
             },
             law_);
}

double CouplingDistribution::min() const {
  return std::visit(Overloaded{[](const Uniform& u) { return u.min; },
                               [](const PiecewiseConstantDensity& pw) { return pw.breakpoints.front(); }},
                    law_);
}

double CouplingDistribution::max() const {
  return std::visit(Overloaded{[](const Uniform& u) { return u.max; },
                               [](const PiecewiseConstantDensity& pw) { return pw.breakpoints.back(); }},
                    law_);
}

double CouplingDistribution::mean() const {
  return std::visit(Overloaded{[](const Uniform& u) { return 0.5 * (u.min + u.max); },
                               [](const PiecewiseConstantDensity& pw) {
                                 double m = 0.0;
                                 for (std::size_t i = 0; i < pw.densities.size(); ++i) {
                                   const double lo = pw.breakpoints[i], hi = pw.breakpoints[i + 1];
                                   m += pw.densities[i] * 0.5 * (hi * hi - lo * lo);
                                 }
                                 return m;
                               }},
                    law_);
}

double CouplingDistribution::variance() const {
  const double mu = mean();
  return std::visit(Overloaded{[](const Uniform& u) { return (u.max - u.min) * (u.max - u.min) / 12.0; },
                               [mu](const PiecewiseConstantDensity& pw) {
                                 double m2 = 0.0;
                                 for (std::size_t i = 0; i < pw.densities.size(); ++i) {
                                   const double lo = pw.breakpoints[i], hi = pw.breakpoints[i + 1];
                                   m2 += pw.densities[i] * (hi * hi * hi - lo * lo * lo) / 3.0;
                                 }
                                 return m2 - mu * mu;
                               }},
                    law_);
}

double CouplingDistribution::quantile(double u) const {
  return std::visit(Overloaded{[u](const Uniform& law) { return law.min + (law.max - law.min) * u; },
                               [u, this](const PiecewiseConstantDensity& pw) {
                                 const auto& c = cumulative_;
                                 // first cell whose upper cumulative mass exceeds u
                                 auto it = std::upper_bound(c.begin() + 1, c.end(), u);
                                 std::size_t i = std::min<std::size_t>(it - c.begin() - 1, pw.densities.size() - 1);
                                 while (pw.densities[i] == 0.0 && i + 1 < pw.densities.size()) ++i;
                                 const double lo = pw.breakpoints[i], hi = pw.breakpoints[i + 1];
                                 const double x = lo + (u - c[i]) / pw.densities[i];
                                 return std::clamp(x, lo, hi);
                               }},
                    law_);
}

void ModelSpec::validate() const {
  if (flavor == Flavor::Discrete) return;
  if (subcells_per_unit < 1) throw Error(ErrorKind::InvalidSpec, "subcells_per_unit must be >= 1");
  const auto m = static_cast<std::size_t>(subcells_per_unit);
  if (background.size() != m) throw Error(ErrorKind::InvalidSpec, "background needs exactly m entries");
  if (single_site.size() != m) throw Error(ErrorKind::InvalidSpec, "single_site needs exactly m entries");
  bool positive = false;
  for (double f : single_site) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw Error(ErrorKind::InvalidSpec, "single_site must be finite and >= 0");
    positive = positive || f > 0.0;
  }
  if (!positive) throw Error(ErrorKind::InvalidSpec, "single_site must be positive on at least one subcell");
  for (double w : background) {
    if (!std::isfinite(w)) throw Error(ErrorKind::InvalidSpec, "background must be finite");
  }
}

double ModelSpec::potential_lower_bound() const {
  if (flavor == Flavor::Discrete) return coupling.min();
  double lo = background[0] + std::min(coupling.min() * single_site[0], coupling.max() * single_site[0]);
  for (std::size_t k = 1; k < background.size(); ++k) {
    lo = std::min(lo, background[k] + std::min(coupling.min() * single_site[k], coupling.max() * single_site[k]));
  }
  return lo;
}

double ModelSpec::potential_upper_bound() const {
  if (flavor == Flavor::Discrete) return coupling.max();
  double hi = background[0] + std::max(coupling.min() * single_site[0], coupling.max() * single_site[0]);
  for (std::size_t k = 1; k < background.size(); ++k) {
    hi = std::max(hi, background[k] + std::max(coupling.min() * single_site[k], coupling.max() * single_site[k]));
  }
  return hi;
}

ModelSpec ModelSpec::discrete_with(CouplingDistribution law) {
  ModelSpec spec;
  spec.flavor = Flavor::Discrete;
  spec.coupling = std::move(law);
  return spec;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double site_uniform(std::uint64_t master_seed, std::uint64_t realization_index, std::int64_t site) {
  const std::uint64_t h0 = splitmix64(master_seed);
  const std::uint64_t h1 = splitmix64(h0 ^ realization_index);
  const std::uint64_t h2 = splitmix64(h1 ^ static_cast<std::uint64_t>(site));
  return static_cast<double>(h2 >> 11) * 0x1.0p-53;
}

Realization::Realization(int a, std::vector<double> couplings, SeedLineage lineage)
    : a_(a), couplings_(std::move(couplings)), lineage_(lineage) {
  if (couplings_.empty()) throw Error(ErrorKind::InvalidSpec, "realization needs at least one site");
}

double Realization::coupling(int site) const {
  if (!contains(site)) {
    throw Error(ErrorKind::OutOfInterval, "site " + std::to_string(site) + " outside realization");
  }
  return couplings_[static_cast<std::size_t>(site - a_)];
}

Realization Realization::with_coupling(int site, double eta) const {
  if (!contains(site)) throw Error(ErrorKind::OutOfInterval, "site outside realization");
  Realization copy = *this;
  copy.couplings_[static_cast<std::size_t>(site - a_)] = eta;
  return copy;
}

Realization sample_realization(const ModelSpec& spec, int a, int b, std::uint64_t master_seed,
                               std::uint64_t realization_index) {
  if (!(a < b)) throw Error(ErrorKind::OutOfInterval, "realization interval must satisfy a < b");
  std::vector<double> etas(static_cast<std::size_t>(b - a));
  for (int n = a; n < b; ++n) {
    etas[static_cast<std::size_t>(n - a)] = spec.coupling.quantile(site_uniform(master_seed, realization_index, n));
  }
  return Realization(a, std::move(etas), SeedLineage{master_seed, realization_index});
}

PotentialProfile::PotentialProfile(std::vector<double> edges, std::vector<double> values)
    : edges_(std::move(edges)), values_(std::move(values)) {
  if (values_.empty() || edges_.size() != values_.size() + 1) {
    throw Error(ErrorKind::InvalidSpec, "profile needs n+1 edges for n values");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(edges_[i + 1] > edges_[i])) throw Error(ErrorKind::InvalidSpec, "profile pieces must have positive length");
  }
}

std::size_t PotentialProfile::piece_index(double x) const {
  if (!contains(x)) throw Error(ErrorKind::OutOfInterval, "position outside profile");
  auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - edges_.begin());
  return std::min(i == 0 ? 0 : i - 1, values_.size() - 1);
}

double PotentialProfile::value_at(double x) const { return values_[piece_index(x)]; }

double PotentialProfile::min_value() const { return *std::min_element(values_.begin(), values_.end()); }

double PotentialProfile::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

PotentialProfile PotentialProfile::shifted(double delta) const {
  std::vector<double> v = values_;
  for (double& x : v) x += delta;
  return {edges_, std::move(v)};
}

PotentialProfile PotentialProfile::refined_at_integers() const {
  std::vector<double> e;
  std::vector<double> v;
  e.push_back(edges_.front());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double next_int = std::floor(e.back()) + 1.0;
    while (next_int < edges_[i + 1]) {
      if (next_int > e.back()) {
        e.push_back(next_int);
        v.push_back(values_[i]);
      }
      next_int += 1.0;
    }
    e.push_back(edges_[i + 1]);
    v.push_back(values_[i]);
  }
  return {std::move(e), std::move(v)};
}

PotentialProfile PotentialProfile::restricted(double from, double to) const {
  if (!(from < to) || !contains(from) || !contains(to)) {
    throw Error(ErrorKind::OutOfInterval, "restriction must be a non-empty sub-interval");
  }
  std::vector<double> e{from};
  std::vector<double> v;
  for (std::size_t i = piece_index(from); i < values_.size(); ++i) {
    const double hi = std::min(edges_[i + 1], to);
    if (hi > e.back()) {
      e.push_back(hi);
      v.push_back(values_[i]);
    }
    if (hi >= to) break;
  }
  return {std::move(e), std::move(v)};
}

double PotentialProfile::abs_integral(double from, double to, double offset) const {
  if (from > to) std::swap(from, to);
  double acc = 0.0;
  for (std::size_t i = piece_index(from); i < values_.size() && edges_[i] < to; ++i) {
    const double lo = std::max(edges_[i], from), hi = std::min(edges_[i + 1], to);
    if (hi > lo) acc += std::abs(offset + values_[i]) * (hi - lo);
  }
  return acc;
}

PotentialProfile combine(const PotentialProfile& w, const PotentialProfile& v, double lambda) {
  if (w.begin() != v.begin() || w.end() != v.end()) {
    throw Error(ErrorKind::OutOfInterval, "combined profiles must cover the same interval");
  }
  std::vector<double> edges;
  std::merge(w.edges().begin(), w.edges().end(), v.edges().begin(), v.edges().end(), std::back_inserter(edges));
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<double> values(edges.size() - 1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double mid = 0.5 * (edges[i] + edges[i + 1]);
    values[i] = w.value_at(mid) + lambda * v.value_at(mid);
  }
  return {std::move(edges), std::move(values)};
}

namespace {

PotentialProfile merged_profile(int a, int m, const std::vector<double>& raw) {
  std::vector<double> edges{static_cast<double>(a)};
  std::vector<double> values;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const double right = static_cast<double>(a) + static_cast<double>(k + 1) / m;
    if (!values.empty() && values.back() == raw[k]) {
      edges.back() = right;
    } else {
      values.push_back(raw[k]);
      edges.push_back(right);
    }
  }
  return {std::move(edges), std::move(values)};
}

}  // namespace

PotentialProfile build_profile(const ModelSpec& spec, const Realization& realization, double energy) {
  if (spec.flavor != Flavor::Continuum) throw Error(ErrorKind::FlavorMismatch, "build_profile needs a continuum spec");
  const int m = spec.subcells_per_unit;
  std::vector<double> raw;
  raw.reserve(static_cast<std::size_t>(realization.size() * m));
  for (int n = realization.begin_site(); n < realization.end_site(); ++n) {
    const double eta = realization.coupling(n);
    for (int k = 0; k < m; ++k) {
      raw.push_back(spec.background[k] + eta * spec.single_site[k] - energy);
    }
  }
  return merged_profile(realization.begin_site(), m, raw);
}

PotentialProfile single_site_profile(const ModelSpec& spec, int site, int a, int b) {
  if (spec.flavor != Flavor::Continuum) throw Error(ErrorKind::FlavorMismatch, "single_site_profile needs a continuum spec");
  if (!(a < b)) throw Error(ErrorKind::OutOfInterval, "empty interval");
  const int m = spec.subcells_per_unit;
  std::vector<double> raw;
  raw.reserve(static_cast<std::size_t>((b - a) * m));
  for (int n = a; n < b; ++n) {
    for (int k = 0; k < m; ++k) raw.push_back(n == site ? spec.single_site[k] : 0.0);
  }
  return merged_profile(a, m, raw);
}

}  // namespace fmm
