#include "fmm/propagate.hpp"

#include <cmath>

namespace fmm {

ScaledMatrix2<double> transfer(const PotentialProfile& profile, double from, double to, ScaleWindow window) {
  if (!profile.contains(from) || !profile.contains(to)) {
    throw Error(ErrorKind::OutOfInterval, "transfer endpoints outside profile");
  }
  if (from == to) return ScaledMatrix2<double>::identity();
  const double lo = std::min(from, to), hi = std::max(from, to);
  ScaledMatrix2<double> acc;
  for (std::size_t i = profile.piece_index(lo); i < profile.size() && profile.edge(i) < hi; ++i) {
    const double a = std::max(profile.edge(i), lo), b = std::min(profile.edge(i + 1), hi);
    if (b > a) acc = cell_propagator(profile.value(i), b - a).times(acc, window);
  }
  return from < to ? acc : acc.inverse_unimodular();
}

ScaledMatrix2<double> discrete_transfer(const Realization& realization, int from, int to, double energy,
                                        ScaleWindow window) {
  const int lo = std::min(from, to), hi = std::max(from, to);
  if (lo < realization.begin_site() || hi > realization.end_site()) {
    throw Error(ErrorKind::OutOfInterval, "discrete transfer outside realization");
  }
  ScaledMatrix2<double> acc;
  for (int n = lo; n < hi; ++n) {
    acc = discrete_step(realization.coupling(n), energy).times(acc, window);
  }
  return from <= to ? acc : acc.inverse_unimodular();
}

ScaledMatrix2<double> unit_cell_transfer(const ModelSpec& spec, double eta, double energy) {
  if (spec.flavor != Flavor::Continuum) throw Error(ErrorKind::FlavorMismatch, "unit cell transfer is continuum only");
  const int m = spec.subcells_per_unit;
  const double h = 1.0 / m;
  ScaledMatrix2<double> acc;
  for (int k = 0; k < m; ++k) {
    acc = cell_propagator(spec.background[k] + eta * spec.single_site[k] - energy, h) * acc;
  }
  return acc;
}

Applied apply(const ScaledMatrix2<double>& matrix, const State2& state) {
  const double in = state.norm();
  if (!(in > 0.0)) throw Error(ErrorKind::ZeroState, "cannot apply a matrix to the zero state");
  const State2 image = matrix.entries() * (state / in);
  const double out = image.norm();
  return {image / out, std::log(out) + matrix.log_scale()};
}

}  // namespace fmm
