#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fmm/error.hpp"
#include "fmm/green.hpp"
#include "fmm/moments.hpp"
#include "fmm/stats.hpp"

using namespace fmm;

namespace {
std::vector<int> range(int lo, int hi) {
  std::vector<int> v;
  for (int k = lo; k <= hi; ++k) v.push_back(k);
  return v;
}
}  // namespace

TEST_CASE("zero-width disorder reproduces the deterministic decay") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{1.0, 1.0});
  const double energy = -2.0;  // gap: spectrum is [-1, 3]
  const auto curve = fractional_moment_curve(spec, {0, 80}, energy, 0.3, 10, range(2, 40), 40, 5);
  const auto r = sample_realization(spec, 0, 81, 5, 0);
  const auto g = discrete_green_solve(r, 0, 80, energy);
  for (std::size_t i = 0; i < curve.distances.size(); ++i) {
    CHECK(curve.means[i] == std::pow(std::abs(g(10, 10 + curve.distances[i])), 0.3));
    CHECK(curve.std_errors[i] == 0.0);
  }
  const auto fit = fit_decay(curve);
  // |rho| + 1/|rho| = |eta - E| = 3
  const double log_rho = std::log((3.0 + std::sqrt(5.0)) / 2.0);
  CHECK(fit.eta_hat == doctest::Approx(0.3 * log_rho).epsilon(1e-6));
  CHECK(fit.eta_std_error == 0.0);
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("s close to zero gives unit means") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 2.0});
  const auto curve = fractional_moment_curve(spec, {0, 40}, 0.5, 1e-9, 5, range(0, 20), 30, 2);
  for (double m : curve.means) CHECK(m == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("argument checks") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 2.0});
  CHECK_THROWS_AS(fractional_moment_curve(spec, {0, 40}, 0.5, 0.3, 5, range(0, 5), 19, 2), Error);
  CHECK_THROWS_AS(fractional_moment_curve(spec, {0, 40}, 0.5, 0.6, 5, range(0, 5), 50, 2), Error);
  CHECK_THROWS_AS(fractional_moment_curve(spec, {0, 40}, 0.5, 0.3, 5, range(0, 40), 50, 2), Error);
  try {
    fractional_moment_curve(spec, {0, 40}, 0.5, 0.3, 5, range(0, 5), 10, 2);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientSamples);
  }
  MomentOptions complex_cont;
  complex_cont.epsilon = 0.1;
  CHECK_THROWS_AS(fractional_moment_curve(ModelSpec{}, {0, 10}, 1.0, 0.3, 1, range(0, 3), 30, 2, complex_cont), Error);
}

TEST_CASE("fit_decay on exact and degenerate curves") {
  CurveStats exact;
  for (int d = 0; d < 12; ++d) {
    exact.distances.push_back(d);
    exact.means.push_back(2.0 * std::exp(-0.3 * d));
    exact.std_errors.push_back(0.0);
  }
  const auto fit = fit_decay(exact);
  CHECK(fit.C_hat == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(fit.eta_hat == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(fit.r_squared >= 0.0);
  CHECK(fit.r_squared <= 1.0);
  CHECK_THROWS_AS(fit_decay(exact, 0, 3), Error);

  CurveStats noisy = exact;
  noisy.std_errors.assign(12, 0.01);
  noisy.means[7] = 0.015;
  try {
    fit_decay(noisy);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateFit);
  }
}

TEST_CASE("disordered lattice: decay, adjoint symmetry, volume and seed stability") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 2.0});
  const auto right = fractional_moment_curve(spec, {0, 100}, 0.5, 0.3, 50, range(1, 30), 3000, 7);
  MomentOptions left_opts;
  left_opts.direction = Direction::Left;
  const auto left = fractional_moment_curve(spec, {0, 100}, 0.5, 0.3, 50, range(1, 30), 3000, 8, left_opts);
  for (std::size_t i = 0; i < right.means.size(); ++i) {
    CHECK(std::abs(right.means[i] - left.means[i]) < 3 * std::hypot(right.std_errors[i], left.std_errors[i]));
  }
  CHECK(right.median_of_means);
  CHECK(right.reliable);
  for (std::size_t i = 1; i < right.means.size(); ++i) CHECK(right.means[i] < right.means[i - 1] * 1.05);

  const auto fit = fit_decay(right);
  CHECK(fit.eta_hat > 3 * fit.eta_std_error);
  const auto wide = fractional_moment_curve(spec, {0, 200}, 0.5, 0.3, 100, range(1, 30), 3000, 9);
  const auto fit_wide = fit_decay(wide);
  CHECK(std::abs(fit.eta_hat - fit_wide.eta_hat) < 3 * std::hypot(fit.eta_std_error, fit_wide.eta_std_error));
}

TEST_CASE("s-monotonicity holds per sample") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 2.0});
  for (int k = 0; k < 50; ++k) {
    const auto r = sample_realization(spec, 0, 60, 3, k);
    const auto row = discrete_green_solve(r, 0, 59, 0.5).row(20);
    for (double g : row) {
      const double a = std::abs(g);
      if (a <= 1.0) CHECK(std::pow(a, 0.4) <= std::pow(a, 0.2));
    }
  }
}

// Consecutive epsilon values are compared once both lie below 0.01; the
// last step compares against the real-energy curve.
TEST_CASE("complex energies converge as epsilon shrinks") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 2.0});
  std::vector<MomentCurve> curves;
  for (double eps : {1e-3, 1e-4, 0.0}) {
    MomentOptions o;
    if (eps > 0.0) o.epsilon = eps;
    curves.push_back(fractional_moment_curve(spec, {0, 60}, 0.5, 0.3, 30, range(0, 20), 2000, 4, o));
  }
  for (std::size_t k = 0; k + 1 < curves.size(); ++k) {
    const auto& a = curves[k];
    const auto& b = curves[k + 1];
    for (std::size_t i = 0; i < a.means.size(); ++i) {
      CHECK(std::abs(a.means[i] - b.means[i]) < 3 * std::hypot(a.std_errors[i], b.std_errors[i]));
    }
  }
}

TEST_CASE("results do not depend on the worker count") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 2.0});
  MomentOptions one, many;
  many.workers = 4;
  const auto a = fractional_moment_curve(spec, {0, 60}, 0.5, 0.3, 20, range(1, 20), 500, 4, one);
  const auto b = fractional_moment_curve(spec, {0, 60}, 0.5, 0.3, 20, range(1, 20), 500, 4, many);
  CHECK(a.means == b.means);
  CHECK(a.std_errors == b.std_errors);

  const ModelSpec cont;
  MomentOptions c1, c3;
  c1.check_phase_splitting = c3.check_phase_splitting = true;
  c3.workers = 3;
  const auto ca = fractional_moment_curve(cont, {0, 30}, 2.0, 0.3, 5, range(0, 20), 60, 4, c1);
  const auto cb = fractional_moment_curve(cont, {0, 30}, 2.0, 0.3, 5, range(0, 20), 60, 4, c3);
  CHECK(ca.means == cb.means);
  CHECK(ca.max_phase_split_error < 1e-7);
  CHECK(ca.max_wronskian_spread < 1e-8);
}

TEST_CASE("continuum curve uses the Hilbert-Schmidt block norms") {
  const ModelSpec spec;
  const auto curve = fractional_moment_curve(spec, {0, 12}, 1.0, 0.5, 2, {0, 3, 7}, 20, 13);
  double sum = 0.0;
  for (int k = 0; k < 20; ++k) {
    const ContinuumGreen g(spec, sample_realization(spec, 0, 12, 13, k), 1.0);
    sum += std::sqrt(g.hs_block_norm(2, 9));
  }
  CHECK(curve.means[2] == doctest::Approx(sum / 20).epsilon(1e-12));
}

TEST_CASE("a-priori scan") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 1.0});
  const auto grid = default_apriori_grid(spec);
  CHECK(grid.size() == 25);
  CHECK(grid.front() == -3.0);
  CHECK(grid.back() == 4.0);
  const auto scan = apriori_bound_scan(spec, {0, 40}, 0.3, {-1e2, -1e4, -1e6}, 100, 3);
  CHECK(scan.rows[1].diagonal_mean < scan.rows[0].diagonal_mean);
  CHECK(scan.rows[2].diagonal_mean < scan.rows[1].diagonal_mean);
  CHECK(scan.rows[2].diagonal_mean < 0.02);
  CHECK(scan.rows[2].neighbor_mean < 1e-3);
  CHECK_THROWS_AS(apriori_bound_scan(ModelSpec{}, {0, 40}, 0.3, {}, 100, 3), Error);

  // the diagonal moment settles as the sample grows
  const auto small = apriori_bound_scan(spec, {0, 40}, 0.3, {0.5}, 1000, 5);
  const auto large = apriori_bound_scan(spec, {0, 40}, 0.3, {0.5}, 8000, 6);
  CHECK(std::isfinite(large.max_mean));
  CHECK(std::abs(small.rows[0].diagonal_mean - large.rows[0].diagonal_mean) <
        3 * std::hypot(small.rows[0].diagonal_std_error, large.rows[0].diagonal_std_error));
}

TEST_CASE("free-chain correlator closed form") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 0.0});
  const int len = 30;
  const auto curve = correlator_curve(spec, {1, len}, 3.0, 5, range(0, 20), 3, 1);
  for (std::size_t i = 0; i < curve.distances.size(); ++i) {
    const int x = 5, y = 5 + curve.distances[i];
    double q = 0.0;
    for (int k = 1; k <= len; ++k) {
      const double norm = std::sqrt(2.0 / (len + 1));
      q += norm * std::abs(std::sin(std::numbers::pi * k * x / (len + 1))) * norm *
           std::abs(std::sin(std::numbers::pi * k * y / (len + 1)));
    }
    CHECK(std::abs(curve.means[i] - q) < 1e-8);
  }
}

TEST_CASE("correlator obeys Cauchy-Schwarz on average and decays with disorder") {
  const ModelSpec spec = ModelSpec::discrete_with(Uniform{0.0, 2.0});
  const auto curve = correlator_curve(spec, {0, 120}, 0.0, 30, range(0, 80), 100, 2);
  for (double m : curve.means) CHECK(m <= curve.means[0]);
  const auto fit = fit_decay(curve, 5, 60);
  CHECK(fit.eta_hat > 3 * fit.eta_std_error);

  const ModelSpec cont;
  const auto cc = correlator_curve(cont, {0, 10}, 10.0, 2, range(0, 7), 5, 2);
  for (double m : cc.means) CHECK(m <= cc.means[0] + 1e-12);
  CHECK_THROWS_AS(correlator_curve(spec, {0, 600}, 0.0, 1, {1}, 5, 1), Error);
}

TEST_CASE("median of means") {
  Eigen::MatrixXd samples(400, 1);
  for (int i = 0; i < 400; ++i) samples(i, 0) = i % 20;
  const auto s = summarize_columns(samples);
  CHECK(s.median_of_means);
  CHECK(s.mean(0) == doctest::Approx(9.5));
  const auto plain = summarize_columns(samples.topRows(100));
  CHECK(!plain.median_of_means);
}
