#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "fmm/error.hpp"
#include "fmm/model.hpp"

namespace fmm {

/// (u, u') for the continuum equation, (u(n), u(n-1)) for the discrete one.
template <class Scalar>
using State2T = Eigen::Matrix<Scalar, 2, 1>;
using State2 = State2T<double>;

/// Renormalization window for the Frobenius norm of the stored entries.
struct ScaleWindow {
  double lo = 0.5;
  double hi = 2.0;
};

/// 2x2 matrix exp(log_scale) * entries. Products accumulate the scale so
/// long transfer-matrix chains stay representable.
template <class Scalar>
class ScaledMatrix2 {
 public:
  using Matrix = Eigen::Matrix<Scalar, 2, 2>;

  ScaledMatrix2() : entries_(Matrix::Identity()), log_scale_(0) {}
  ScaledMatrix2(const Matrix& entries, Scalar log_scale = Scalar(0)) : entries_(entries), log_scale_(log_scale) {}

  static ScaledMatrix2 identity() { return {}; }

  const Matrix& entries() const { return entries_; }
  Scalar log_scale() const { return log_scale_; }
  /// exp(log_scale) * entries; may overflow for long products.
  Matrix value() const { return std::exp(log_scale_) * entries_; }
  Scalar determinant() const { return entries_.determinant() * std::exp(Scalar(2) * log_scale_); }
  Scalar trace() const { return entries_.trace() * std::exp(log_scale_); }

  void renormalize(ScaleWindow window = {}) {
    using std::log;
    const Scalar norm = entries_.norm();
    if (norm < Scalar(window.lo) || norm > Scalar(window.hi)) {
      entries_ /= norm;
      log_scale_ += log(norm);
    }
  }

  /// Exact inverse of a unimodular matrix via the adjugate.
  ScaledMatrix2 inverse_unimodular() const {
    Matrix adj;
    adj << entries_(1, 1), -entries_(0, 1), -entries_(1, 0), entries_(0, 0);
    const Scalar det = entries_.determinant();
    return {adj / det, -log_scale_};
  }

  /// this * rhs, renormalized.
  ScaledMatrix2 operator*(const ScaledMatrix2& rhs) const {
    ScaledMatrix2 out(entries_ * rhs.entries_, log_scale_ + rhs.log_scale_);
    out.renormalize();
    return out;
  }

  ScaledMatrix2 times(const ScaledMatrix2& rhs, ScaleWindow window) const {
    ScaledMatrix2 out(entries_ * rhs.entries_, log_scale_ + rhs.log_scale_);
    out.renormalize(window);
    return out;
  }

 private:
  Matrix entries_;
  Scalar log_scale_;
};

/// Exact propagator of -u'' + q u = 0 over a constant piece of length L,
/// acting on (u, u'). Uses the series in q L^2 near q = 0 and a factored
/// exponential scale for large hyperbolic k L.
template <class Scalar = double>
ScaledMatrix2<Scalar> cell_propagator(Scalar q, Scalar length) {
  using std::abs;
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::sin;
  using std::sinh;
  using std::sqrt;
  using Matrix = typename ScaledMatrix2<Scalar>::Matrix;
  const Scalar L = length;
  const Scalar x = q * L * L;
  Matrix m;
  if (abs(x) < Scalar(1e-8)) {
    // C = 1 + x/2 + x^2/24, S/L = 1 + x/6 + x^2/120
    const Scalar c = Scalar(1) + x / Scalar(2) + x * x / Scalar(24);
    const Scalar s_over_l = Scalar(1) + x / Scalar(6) + x * x / Scalar(120);
    m << c, L * s_over_l, q * L * s_over_l, c;
    return {m, Scalar(0)};
  }
  if (q > Scalar(0)) {
    const Scalar k = sqrt(q);
    const Scalar kl = k * L;
    if (kl > Scalar(20)) {
      // cosh = e^{kl}/2 (1 + e^{-2kl}), sinh = e^{kl}/2 (1 - e^{-2kl})
      const Scalar r = exp(Scalar(-2) * kl);
      const Scalar ch = Scalar(1) + r;
      const Scalar sh = Scalar(1) - r;
      m << ch, sh / k, k * sh, ch;
      ScaledMatrix2<Scalar> out(m, kl - std::log(Scalar(2)));
      return out;
    }
    const Scalar ch = cosh(kl), sh = sinh(kl);
    m << ch, sh / k, k * sh, ch;
    return {m, Scalar(0)};
  }
  const Scalar k = sqrt(-q);
  const Scalar kl = k * L;
  const Scalar c = cos(kl), s = sin(kl);
  m << c, s / k, -k * s, c;
  return {m, Scalar(0)};
}

/// [[eta - E, -1], [1, 0]] acting on (u(n), u(n-1)).
template <class Scalar = double>
ScaledMatrix2<Scalar> discrete_step(Scalar eta, Scalar energy) {
  typename ScaledMatrix2<Scalar>::Matrix m;
  m << eta - energy, Scalar(-1), Scalar(1), Scalar(0);
  return {m, Scalar(0)};
}

/// Transfer matrix of the profile from position `from` to position `to`
/// (either order). Throws OutOfInterval.
ScaledMatrix2<double> transfer(const PotentialProfile& profile, double from, double to,
                               ScaleWindow window = {});

/// Discrete transfer matrix T(to, from) mapping (u(from), u(from-1)) to
/// (u(to), u(to-1)); uses couplings at sites from..to-1 (or the inverse
/// product when to < from). Throws OutOfInterval.
ScaledMatrix2<double> discrete_transfer(const Realization& realization, int from, int to, double energy,
                                        ScaleWindow window = {});

/// Transfer matrix of one unit cell [0,1] of -u'' + (W + eta f) u = E u.
ScaledMatrix2<double> unit_cell_transfer(const ModelSpec& spec, double eta, double energy);

struct Applied {
  State2 direction;    // unit vector along T * state
  double log_gain;     // log(|T state| / |state|)
};

/// Throws ZeroState for a zero input.
Applied apply(const ScaledMatrix2<double>& matrix, const State2& state);

}  // namespace fmm
