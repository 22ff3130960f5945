#include "fmm/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "fmm/error.hpp"
#include "fmm/green.hpp"
#include "fmm/lyapunov.hpp"
#include "fmm/moments.hpp"
#include "fmm/propagate.hpp"
#include "fmm/prufer.hpp"

namespace fmm {

namespace {

constexpr double kPi = std::numbers::pi;

class Checker {
 public:
  explicit Checker(SuiteResult& result) : result_(result) {}

  void expect(bool ok, const std::string& what) {
    ++result_.checks;
    if (ok) return;
    ++result_.failures;
    if (result_.messages.size() < 10) result_.messages.push_back(what);
  }

  void close(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << got << ", want " << want;
    expect(std::abs(got - want) <= tol, os.str());
  }

 private:
  SuiteResult& result_;
};

struct Env {
  ModelSpec continuum;
  ModelSpec lattice;
  std::mt19937_64 rng;
  int trials;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

  PotentialProfile profile(double a, double b, double lo, double hi, int max_pieces = 8) {
    const int n = std::uniform_int_distribution<int>(1, max_pieces)(rng);
    std::vector<double> cuts;
    for (int i = 1; i < n; ++i) cuts.push_back(uniform(a, b));
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> edges{a};
    for (double c : cuts) {
      if (c - edges.back() > 1e-3 && b - c > 1e-3) edges.push_back(c);
    }
    edges.push_back(b);
    std::vector<double> values;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) values.push_back(uniform(lo, hi));
    return {edges, values};
  }
};

void model_suite(Env& env, Checker& c) {
  for (int t = 0; t < env.trials; ++t) {
    const auto seed = env.rng();
    const auto r1 = sample_realization(env.continuum, 0, 20, seed, t);
    const auto r2 = sample_realization(env.continuum, -5, 30, seed, t);
    bool same = true, inside = true;
    for (int n = 0; n < 20; ++n) {
      same = same && r1.coupling(n) == r2.coupling(n);
      inside = inside && r1.coupling(n) >= env.continuum.coupling.min() && r1.coupling(n) <= env.continuum.coupling.max();
    }
    c.expect(same, "realization depends on the sampling interval");
    c.expect(inside, "coupling outside the support");

    const double energy = env.uniform(-5, 5);
    const auto p = build_profile(env.continuum, r1, energy);
    const int m = env.continuum.subcells_per_unit;
    bool exact = true;
    for (int n = 0; n < 20; ++n) {
      for (int k = 0; k < m; ++k) {
        const double x = n + (k + 0.5) / m;
        const auto ku = static_cast<std::size_t>(k);
        exact = exact && p.value_at(x) == env.continuum.background[ku] + r1.coupling(n) * env.continuum.single_site[ku] - energy;
      }
    }
    c.expect(exact, "profile value differs from pointwise evaluation");
  }
}

void propagate_suite(Env& env, Checker& c) {
  for (int t = 0; t < env.trials; ++t) {
    const auto p = env.profile(0.0, 4.0, -4.0, 2.0, 12);
    const auto fwd = transfer(p, 0.0, 4.0);
    c.expect(fwd.entries().norm() >= 0.5 && fwd.entries().norm() <= 2.0, "entries outside the scale window");
    if (fwd.log_scale() <= 5.0) {
      c.close(fwd.determinant(), 1.0, 1e-9, "determinant");
      const auto back = transfer(p, 4.0, 0.0);
      c.expect(((back * fwd).value() - Eigen::Matrix2d::Identity()).norm() < 1e-8, "forward-backward product");
    }
    const double cut = env.uniform(0.5, 3.5);
    const auto split = transfer(p, cut, 4.0) * transfer(p, 0.0, cut);
    c.expect((split.entries() * std::exp(split.log_scale() - fwd.log_scale()) - fwd.entries()).norm() <
                 1e-8 * fwd.entries().norm(),
             "composition T(4,c) T(c,0) != T(4,0)");

    const auto rough = env.profile(0.0, 2.0, -15.0, 15.0);
    const double theta = env.uniform(0, 2 * kPi);
    const double m = rough.abs_integral(0.0, 2.0, 1.0);
    const double ratio =
        std::exp(2.0 * apply(transfer(rough, 0.0, 2.0), State2(std::sin(theta), std::cos(theta))).log_gain);
    c.expect(ratio <= std::exp(m) * (1 + 1e-12) && ratio >= std::exp(-m) * (1 - 1e-12), "growth bound");
  }
}

void prufer_suite(Env& env, Checker& c) {
  for (int t = 0; t < env.trials; ++t) {
    const auto p = env.profile(0.0, 4.0, -30.0, 30.0, 6);
    const double theta = env.uniform(0, 2 * kPi);
    const auto end = evolve_prufer(p, 0.0, 4.0, theta);
    const auto applied = apply(transfer(p, 0.0, 4.0), State2(std::sin(theta), std::cos(theta)));
    c.close(end.log_R, applied.log_gain, 1e-8 * std::max(1.0, std::abs(applied.log_gain)), "round trip log R");
    c.expect((end.direction - applied.direction).norm() < 1e-8, "round trip direction");

    const std::size_t piece = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(env.rng);
    const double x = p.edge(piece) + p.length(piece) * env.uniform(0.25, 0.75);
    const double h = std::min(1e-4, 0.2 * p.length(piece));
    const auto lo = evolve_prufer(p, 0.0, x - h, theta);
    const auto mid = evolve_prufer(p, 0.0, x, theta);
    const auto hi = evolve_prufer(p, 0.0, x + h, theta);
    const double q = p.value(piece);
    const double sp = std::sin(mid.phi);
    c.close((hi.phi - lo.phi) / (2 * h), 1.0 - (1.0 + q) * sp * sp, 1e-5 * (1 + std::abs(q)), "phase ODE");
    c.close((hi.log_R - lo.log_R) / h, (1.0 + q) * std::sin(2 * mid.phi), 1e-5 * (1 + std::abs(q)), "amplitude ODE");

    const auto v = env.profile(0.0, 4.0, -3.0, 3.0, 4);
    const double lambda = env.uniform(-1, 1), dl = 1e-5;
    const double fd = (evolve_prufer(combine(p, v, lambda + dl), 0.0, x, theta).phi -
                       evolve_prufer(combine(p, v, lambda - dl), 0.0, x, theta).phi) /
                      (2 * dl);
    c.close(phase_coupling_derivative(p, v, lambda, 0.0, x, theta), fd, 1e-5 * (1 + std::abs(fd)), "coupling derivative");
    const double energy = env.uniform(-5, 15);
    const double fe = (evolve_prufer(p.shifted(-(energy + dl)), 0.0, x, theta).phi -
                       evolve_prufer(p.shifted(-(energy - dl)), 0.0, x, theta).phi) /
                      (2 * dl);
    const double de = phase_energy_derivative(p, 0.0, x, theta, energy);
    c.expect(de > 0.0, "energy derivative not positive");
    c.close(de, fe, 1e-5 * (1 + std::abs(fe)), "energy derivative");
  }

  // phase splitting and the coupling monotonicity at a site
  const ModelSpec& spec = env.continuum;
  for (int t = 0; t < std::max(1, env.trials / 5); ++t) {
    const auto r = sample_realization(spec, 0, 20, env.rng(), 0);
    const double energy = env.uniform(-1, 8);
    const ContinuumGreen g(spec, r, energy);
    const int x = 2 + t % 8, y = x + 7;
    const PruferState* sx = nullptr;
    const PruferState* sy = nullptr;
    for (const auto& s : g.right_states()) {
      if (s.position == x) sx = &s;
      if (s.position == y) sy = &s;
    }
    if (sx && sy) {
      const auto a = apply(transfer(g.profile(), y, x), State2(std::sin(sy->phi), std::cos(sy->phi)));
      c.close(sx->log_R - sy->log_R, a.log_gain, 1e-7, "phase splitting");
    } else {
      c.expect(false, "missing integer Prüfer state");
    }
    const auto q = build_profile(spec, r, energy);
    const double slope = phase_coupling_derivative(q, single_site_profile(spec, x, 0, 20), 0.0, 20.0, x, 0.0);
    c.expect(slope > 0.0, "phase not increasing in the local coupling");
    c.expect(slope <= std::exp(q.abs_integral(x, x + 1.0, 1.0)) * (1 + 1e-12), "coupling derivative above bracket");
    int last = -1;
    bool monotone = true;
    for (double e = -1.0; e < 30.0; e += 1.5) {
      const int n = eigenvalue_count_below(spec, r, e);
      monotone = monotone && n >= last;
      last = n;
    }
    c.expect(monotone, "eigenvalue count not monotone");
  }
}

void green_suite(Env& env, Checker& c) {
  for (int t = 0; t < std::max(1, env.trials / 5); ++t) {
    const auto r = sample_realization(env.continuum, 0, 12, env.rng(), 0);
    const ContinuumGreen g(env.continuum, r, env.uniform(-1, 20));
    if (g.status() != GreenStatus::Ok) continue;
    c.expect(g.wronskian_spread() < 1e-8, "continuum Wronskian not constant");
    const double s = env.uniform(0, 12), u = env.uniform(0, 12);
    c.expect(g.value(s, u) == g.value(u, s), "continuum Green function not symmetric");
    const int x = t % 11, y = (t * 7) % 11;
    c.expect(g.hs_block_norm(x, y) == g.hs_block_norm(y, x), "block norm not symmetric");
    c.expect(g.hs_block_norm(x, y) <= g.hs_block_bound(x, y) * (1 + 1e-12), "block norm above its bound");
  }
  for (int t = 0; t < env.trials; ++t) {
    const int len = std::uniform_int_distribution<int>(2, 60)(env.rng);
    const auto r = sample_realization(env.lattice, 0, len, env.rng(), 0);
    const double energy = env.uniform(env.lattice.coupling.min() - 3, env.lattice.coupling.max() + 3);
    const int b = len - 1;
    const int x = std::uniform_int_distribution<int>(0, b)(env.rng);
    const int y = std::uniform_int_distribution<int>(x, b)(env.rng);
    try {
      const auto direct = discrete_green_solve(r, x, b, energy);
      const DiscreteSolutionGreen sol(r, x, b, energy);
      if (sol.status() != GreenStatus::Ok) continue;
      const double ref = direct(x, y);
      const double tol = 1e-8 * std::abs(ref);
      c.close(sol.sample(x, y).value, ref, tol, "solution form vs direct solve");
      c.close(krein_entry(r, x, b, energy, x, y), ref, tol, "Krein vs direct solve");
      c.expect(std::abs(sol.wronskian_deviation(std::max(x, b - 1))) < 1e-9, "discrete Wronskian not constant");
      if (x > 0) {
        const auto full = discrete_green_solve(r, 0, b, energy);
        c.close(full(x, y), (1.0 + full(x, x - 1)) * ref, 1e-8 * std::abs(full(x, y)), "resolvent identity");
      }
      const auto gz = discrete_green_solve(r, x, b, energy, 0.1);
      c.expect(gz(x, x).imag() > 0.0, "Herglotz property");
    } catch (const Error& e) {
      c.expect(e.kind() == ErrorKind::EigenvalueHit || e.kind() == ErrorKind::SingularReduction,
               std::string("unexpected error: ") + e.what());
    }
  }
}

void lyapunov_suite(Env& env, Checker& c) {
  const ModelSpec free = ModelSpec::discrete_with(Uniform{0.0, 0.0});
  const auto gap = lyapunov_estimate(free, 3.0, 100000, env.rng());
  c.expect(std::abs(gap.gamma - std::log((3 + std::sqrt(5.0)) / 2)) <= 3 * gap.std_error + 1e-12, "free chain at E = 3");
  c.close(lyapunov_estimate(free, 0.0, 10000, 1).gamma, 0.0, 1e-6, "free chain at E = 0");

  for (int t = 0; t < env.trials; ++t) {
    const double e = env.uniform(-3, 40), eta = env.uniform(env.continuum.coupling.min(), env.continuum.coupling.max());
    const auto f = floquet(env.continuum, e, eta);
    c.expect(std::abs(f.rho * f.rho_inv - 1.0) < 1e-9, "rho rho^-1 != 1");
    if (std::abs(f.discriminant) < 2.0 - 1e-9) c.expect(std::abs(std::abs(f.rho) - 1.0) < 1e-9, "band multiplier off the circle");
  }
  LyapunovOptions wide;
  wide.window = {0.25, 4.0};
  const auto seed = env.rng();
  const auto a = lyapunov_estimate(env.continuum, 1.0, 5000, seed);
  const auto b = lyapunov_estimate(env.continuum, 1.0, 5000, seed, wide);
  c.close(a.log_growth, b.log_growth, 1e-10 * std::max(1.0, std::abs(a.log_growth)), "window independence");
}

void moments_suite(Env& env, Checker& c) {
  std::vector<int> d;
  for (int k = 2; k <= 30; ++k) d.push_back(k);
  const ModelSpec fixed = ModelSpec::discrete_with(Uniform{1.0, 1.0});
  const auto curve = fractional_moment_curve(fixed, {0, 60}, -2.0, 0.3, 10, d, 20, env.rng());
  bool zero = true;
  for (double se : curve.std_errors) zero = zero && se == 0.0;
  c.expect(zero, "zero-width disorder has nonzero errors");
  c.close(fit_decay(curve).eta_hat, 0.3 * std::log((3 + std::sqrt(5.0)) / 2), 1e-6, "deterministic decay rate");

  MomentOptions one, four;
  four.workers = 4;
  const auto seed = env.rng();
  const auto x = fractional_moment_curve(env.lattice, {0, 40}, 0.5, 0.3, 10, d, 200, seed, one);
  const auto y = fractional_moment_curve(env.lattice, {0, 40}, 0.5, 0.3, 10, d, 200, seed, four);
  c.expect(x.means == y.means && x.std_errors == y.std_errors, "worker count changes the result");

  for (int t = 0; t < env.trials; ++t) {
    try {
      const auto r = sample_realization(env.lattice, 0, 40, env.rng(), 0);
      for (double g : discrete_green_solve(r, 0, 39, 0.5).row(20)) {
        const double a = std::abs(g);
        if (a <= 1.0) c.expect(std::pow(a, 0.4) <= std::pow(a, 0.2), "s-monotonicity");
      }
    } catch (const Error& e) {
      c.expect(e.kind() == ErrorKind::EigenvalueHit, e.what());
    }
  }
}

using Suite = std::function<void(Env&, Checker&)>;

const std::map<std::string, Suite>& suites() {
  static const std::map<std::string, Suite> table{
      {"model", model_suite},       {"propagate", propagate_suite}, {"prufer", prufer_suite},
      {"green", green_suite},       {"lyapunov", lyapunov_suite},   {"moments", moments_suite},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& selftest_suite_names() {
  static const std::vector<std::string> names{"model", "propagate", "prufer", "green", "lyapunov", "moments"};
  return names;
}

SuiteResult run_selftest_suite(const std::string& name, const ModelSpec& spec, std::uint64_t seed, int trials) {
  const auto it = suites().find(name);
  if (it == suites().end()) throw Error(ErrorKind::InvalidSpec, "unknown selftest suite '" + name + "'");
  spec.validate();
  Env env{spec.flavor == Flavor::Continuum ? spec : ModelSpec::continuum_default(),
          spec.flavor == Flavor::Discrete ? spec : ModelSpec::discrete_with(spec.coupling),
          std::mt19937_64(seed), std::max(1, trials)};
  SuiteResult result;
  result.name = name;
  Checker checker(result);
  const auto start = std::chrono::steady_clock::now();
  try {
    it->second(env, checker);
  } catch (const std::exception& e) {
    checker.expect(false, std::string("suite aborted: ") + e.what());
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace fmm
