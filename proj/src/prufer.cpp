#include "fmm/prufer.hpp"

#include <cmath>
#include <numbers>

namespace fmm {

namespace {

constexpr double kPi = std::numbers::pi;
// (1 + |1+q|) h stays below this, which is < pi/2.
constexpr double kPhaseStep = 1.4;

// Advances the state over a constant piece by a signed length.
void advance(double q, double signed_length, PruferState& s) {
  const double len = std::abs(signed_length);
  if (len == 0.0) return;
  const int n = std::max(1, static_cast<int>(std::ceil(len * (1.0 + std::abs(1.0 + q)) / kPhaseStep)));
  const double h = signed_length / n;
  ScaledMatrix2<double> step = cell_propagator(q, std::abs(h));
  if (h < 0.0) step = step.inverse_unimodular();
  for (int k = 0; k < n; ++k) {
    State2 v = step.entries() * s.direction;
    const double norm = v.norm();
    s.log_R += std::log(norm) + step.log_scale();
    s.direction = v / norm;
    const double sin_phi = std::sin(s.phi);
    const double predicted = s.phi + h * (1.0 - (1.0 + q) * sin_phi * sin_phi);
    const double principal = std::atan2(s.direction(0), s.direction(1));
    s.phi = principal + 2.0 * kPi * std::round((predicted - principal) / (2.0 * kPi));
  }
  s.position += signed_length;
}

PruferState initial_state(double c, double theta) {
  PruferState s;
  s.anchor = c;
  s.theta = theta;
  s.phi = theta;
  s.position = c;
  s.direction = State2(std::sin(theta), std::cos(theta));
  return s;
}

// Walks constant segments from `from` to `to`; visit(q, signed_len, state_at_segment_start).
template <class Visit>
PruferState walk(const PotentialProfile& profile, double from, double to, double theta, Visit&& visit) {
  if (!profile.contains(from) || !profile.contains(to)) {
    throw Error(ErrorKind::OutOfInterval, "Prüfer evolution outside profile");
  }
  PruferState s = initial_state(from, theta);
  if (from == to) return s;
  if (from < to) {
    for (std::size_t i = profile.piece_index(from); i < profile.size() && s.position < to; ++i) {
      const double seg_end = std::min(profile.edge(i + 1), to);
      if (seg_end <= s.position) continue;
      visit(profile.value(i), seg_end - s.position, s);
      advance(profile.value(i), seg_end - s.position, s);
      s.position = seg_end;
    }
  } else {
    std::size_t i = profile.piece_index(from);
    if (i > 0 && profile.edge(i) == from) --i;
    while (s.position > to) {
      const double seg_end = std::max(profile.edge(i), to);
      visit(profile.value(i), seg_end - s.position, s);
      advance(profile.value(i), seg_end - s.position, s);
      s.position = seg_end;
      if (i == 0) break;
      --i;
    }
  }
  s.position = to;
  return s;
}

// Mass of u^2 over a segment starting at state s, in units of R(start)^2.
double segment_unit_mass(double q, double signed_len, const PruferState& s) {
  const double sign = signed_len < 0.0 ? -1.0 : 1.0;
  return unit_mass(q, std::abs(signed_len), s.direction(0), sign * s.direction(1));
}

double scaled_sum(const std::vector<std::pair<double, double>>& terms, double log_ref) {
  // sum_i w_i exp(l_i - log_ref)
  double acc = 0.0;
  for (const auto& [log_w, w] : terms) acc += w * std::exp(log_w - log_ref);
  return acc;
}

}  // namespace

PruferPolar to_prufer(const State2& state) {
  const double r = state.norm();
  if (!(r > 0.0)) throw Error(ErrorKind::ZeroState, "Prüfer variables of the zero state");
  return {std::log(r), std::atan2(state(0), state(1))};
}

PruferState evolve_prufer(const PotentialProfile& profile, double from, double to, double theta) {
  return walk(profile, from, to, theta, [](double, double, const PruferState&) {});
}

std::vector<PruferState> prufer_edge_states(const PotentialProfile& profile, bool from_left, double theta) {
  std::vector<PruferState> out(profile.size() + 1);
  if (from_left) {
    PruferState s = initial_state(profile.begin(), theta);
    out[0] = s;
    for (std::size_t i = 0; i < profile.size(); ++i) {
      advance(profile.value(i), profile.length(i), s);
      s.position = profile.edge(i + 1);
      out[i + 1] = s;
    }
  } else {
    PruferState s = initial_state(profile.end(), theta);
    out[profile.size()] = s;
    for (std::size_t i = profile.size(); i-- > 0;) {
      advance(profile.value(i), -profile.length(i), s);
      s.position = profile.edge(i);
      out[i] = s;
    }
  }
  return out;
}

MassKernel mass_kernel(double q, double length) {
  const double L = length;
  const double x = q * L * L;
  if (std::abs(x) <= 1.0) {
    // termwise integrals of cosh(2kt) = sum_j (4 q t^2)^j / (2j)!
    const double y = 4.0 * x;
    double g = 1.0;    // y^j / (2j)!
    double h = 0.5;    // y^(j-1) / (2j)!, j >= 1
    double p = 0.5;    // y^j / (2j+2)!
    double cc = 0.0, cs = 0.0, ss = 0.0;
    for (int j = 0; j < 40; ++j) {
      cc += g / (2 * j + 1);
      cs += p;
      if (j >= 1) {
        ss += h / (2 * j + 1);
        h *= y / ((2.0 * j + 1) * (2.0 * j + 2));
      }
      g *= y / ((2.0 * j + 1) * (2.0 * j + 2));
      p *= y / ((2.0 * j + 3) * (2.0 * j + 4));
      if (j >= 2 && std::abs(g) < 1e-18 && std::abs(h) < 1e-18) break;
    }
    return {0.5 * L * (1.0 + cc), L * L * cs, 2.0 * L * L * L * ss};
  }
  if (q < 0.0) {
    const double k = std::sqrt(-q);
    const double s2 = std::sin(2.0 * k * L), s1 = std::sin(k * L);
    return {L / 2 + s2 / (4 * k), s1 * s1 / (2 * k * k), (L / 2 - s2 / (4 * k)) / (k * k)};
  }
  const double k = std::sqrt(q);
  const double sh2 = std::sinh(2.0 * k * L), sh1 = std::sinh(k * L);
  return {L / 2 + sh2 / (4 * k), sh1 * sh1 / (2 * k * k), (sh2 / (4 * k) - L / 2) / (k * k)};
}

double unit_mass(double q, double length, double c, double d) {
  const double L = length;
  if (q > 0.0 && q * L * L > 1.0) {
    // u = alpha e^{kt} + beta e^{-kt}: every term is non-negative except a bounded cross term
    const double k = std::sqrt(q);
    const double alpha = 0.5 * (c + d / k), beta = 0.5 * (c - d / k);
    const double grow = std::expm1(2.0 * k * L) / (2.0 * k);
    const double decay = -std::expm1(-2.0 * k * L) / (2.0 * k);
    return alpha * alpha * grow + 2.0 * alpha * beta * L + beta * beta * decay;
  }
  const MassKernel m = mass_kernel(q, L);
  return c * c * m.cc + 2.0 * c * d * m.cs + d * d * m.ss;
}

namespace {

// -R^{-2}(to) * integral_from^to V u^2 with V given per segment.
template <class PerturbationAt>
double weighted_phase_derivative(const PotentialProfile& q, double from, double to, double theta,
                                 PerturbationAt&& perturbation_at) {
  std::vector<std::pair<double, double>> terms;  // (2 log R at segment start, V * unit mass)
  PruferState end = walk(q, from, to, theta, [&](double qv, double signed_len, const PruferState& s) {
    const double mid = s.position + 0.5 * signed_len;
    const double v = perturbation_at(mid);
    if (v != 0.0) terms.emplace_back(2.0 * s.log_R, v * segment_unit_mass(qv, signed_len, s));
  });
  const double orientation = to >= from ? 1.0 : -1.0;
  return -orientation * scaled_sum(terms, 2.0 * end.log_R);
}

}  // namespace

double phase_coupling_derivative(const PotentialProfile& background, const PotentialProfile& perturbation,
                                 double lambda, double from, double to, double theta) {
  const PotentialProfile q = combine(background, perturbation, lambda);
  return weighted_phase_derivative(q, from, to, theta, [&](double x) { return perturbation.value_at(x); });
}

double phase_energy_derivative(const PotentialProfile& profile, double from, double to, double theta,
                               double energy) {
  const PotentialProfile q = energy == 0.0 ? profile : profile.shifted(-energy);
  return weighted_phase_derivative(q, from, to, theta, [](double) { return -1.0; });
}

int eigenvalue_count_below(const ModelSpec& spec, const Realization& realization, double energy) {
  if (spec.flavor != Flavor::Continuum) throw Error(ErrorKind::FlavorMismatch, "eigenvalue count is continuum only");
  const PotentialProfile q = build_profile(spec, realization, energy);
  const PruferState s = evolve_prufer(q, q.begin(), q.end(), 0.0);
  return static_cast<int>(std::floor(s.phi / kPi));
}

std::vector<ContinuumEigenpair> continuum_eigensystem_below(const ModelSpec& spec, const Realization& realization,
                                                            double e0, int samples_per_unit) {
  if (spec.flavor != Flavor::Continuum) throw Error(ErrorKind::FlavorMismatch, "eigensystem is continuum only");
  const PotentialProfile base = build_profile(spec, realization, 0.0).refined_at_integers();
  const double a = base.begin(), b = base.end();
  auto end_phase = [&](double e) { return evolve_prufer(base.shifted(-e), a, b, 0.0).phi; };

  const int count = static_cast<int>(std::floor(end_phase(e0) / kPi));
  std::vector<ContinuumEigenpair> out;
  double lo = spec.potential_lower_bound() - 1.0;
  for (int k = 1; k <= count; ++k) {
    const double target = k * kPi;
    double left = lo, right = e0;
    while (right - left > 1e-10 * (1.0 + std::abs(left) + std::abs(right)) / 2.0) {
      const double mid = 0.5 * (left + right);
      if (mid <= left || mid >= right) break;
      (end_phase(mid) < target ? left : right) = mid;
    }
    double e = 0.5 * (left + right);
    for (int it = 0; it < 3; ++it) {
      const double f = end_phase(e) - target;
      const double df = phase_energy_derivative(base, a, b, 0.0, e);
      if (!(df > 0.0)) break;
      const double next = e - f / df;
      if (!(next >= left && next <= right)) break;
      if (std::abs(end_phase(next) - target) >= std::abs(f)) break;
      e = next;
    }
    lo = e;

    const PotentialProfile q = base.shifted(-e);
    const auto states = prufer_edge_states(q, true, 0.0);
    ContinuumEigenpair pair;
    pair.energy = e;
    pair.residual = std::abs(states.back().direction(0));

    // piece masses relative to the largest amplitude
    double log_ref = 0.0;
    for (const auto& s : states) log_ref = std::max(log_ref, s.log_R);
    std::vector<double> piece_mass(q.size());
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      piece_mass[i] = std::exp(2.0 * (states[i].log_R - log_ref)) *
                      unit_mass(q.value(i), q.length(i), states[i].direction(0), states[i].direction(1));
      total += piece_mass[i];
    }
    const int cells = static_cast<int>(std::lround(b - a));
    pair.cell_mass.assign(static_cast<std::size_t>(cells), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto cell = static_cast<std::size_t>(std::floor(q.edge(i) - a + 1e-9));
      pair.cell_mass[std::min<std::size_t>(cell, cells - 1)] += piece_mass[i] / total;
    }
    const double log_norm = log_ref + 0.5 * std::log(total);
    pair.sample_step = 1.0 / samples_per_unit;
    const int n_samples = cells * samples_per_unit + 1;
    pair.samples.resize(static_cast<std::size_t>(n_samples));
    for (int j = 0; j < n_samples; ++j) {
      const double x = j == n_samples - 1 ? b : a + j * pair.sample_step;
      const std::size_t i = q.piece_index(x);
      const double t = x - q.edge(i);
      const auto prop = cell_propagator(q.value(i), t);
      const double u = (prop.entries() * states[i].direction)(0);
      pair.samples[static_cast<std::size_t>(j)] = u * std::exp(prop.log_scale() + states[i].log_R - log_norm);
    }
    out.push_back(std::move(pair));
  }
  return out;
}

double solution_mass_ratio(const PotentialProfile& profile, double c, double ell, double theta) {
  double acc = 0.0;
  walk(profile, c, c + ell, theta, [&](double qv, double signed_len, const PruferState& s) {
    acc += std::exp(2.0 * s.log_R) * segment_unit_mass(qv, signed_len, s);
  });
  return acc;
}

double apriori_mass_lower_bound(double ell, double m) {
  const double c1 = std::exp(-(ell + m));
  const double c2 = std::exp(ell + m);
  const double c3 = std::sqrt(c1 / 2.0);
  const double c4 = std::sqrt(2.0 * c2);
  const double alpha = 0.99 * ell / (2.0 + ell);
  const double level = alpha * c3 / 2.0;
  const double width = std::min(alpha * c3 / (2.0 * c4), ell);
  return level * level * width;
}

}  // namespace fmm
