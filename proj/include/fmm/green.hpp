#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <vector>

#include "fmm/error.hpp"
#include "fmm/model.hpp"
#include "fmm/prufer.hpp"

namespace fmm {

enum class GreenStatus { Ok, NearEigenvalue };

/// |W| below this fraction of the product of the two solution amplitudes at
/// the matching point is reported as NearEigenvalue.
inline constexpr double kWronskianTolerance = 1e-12;

struct GreenSample {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
  double log_abs_wronskian = 0.0;
  double wronskian_sign = 1.0;
  /// max over evaluation points of |W(n) / W(p) - 1|.
  double wronskian_spread = 0.0;
  GreenStatus status = GreenStatus::Ok;
};

struct BlockNorm {
  double value = 0.0;
  GreenStatus status = GreenStatus::Ok;
};

/// Dirichlet Green function of -d^2/dx^2 + q on [a, b] from the shooting
/// solutions u_a, u_b (phase 0 at a and b), carried in Prüfer form.
class ContinuumGreen {
 public:
  /// q has the energy absorbed.
  explicit ContinuumGreen(const PotentialProfile& q);
  ContinuumGreen(const ModelSpec& spec, const Realization& realization, double energy);

  double a() const { return profile_.begin(); }
  double b() const { return profile_.end(); }
  const PotentialProfile& profile() const { return profile_; }
  GreenStatus status() const { return status_; }
  double log_abs_wronskian() const { return log_abs_w_; }
  double wronskian_sign() const { return sign_w_; }
  double wronskian_spread() const { return spread_; }
  /// Edge states of u_a (forward from a) and u_b (backward from b) on the
  /// integer-refined profile.
  const std::vector<PruferState>& left_states() const { return left_; }
  const std::vector<PruferState>& right_states() const { return right_; }

  double value(double s, double t) const;
  GreenSample sample(double s, double t) const;

  /// log of integral over [x, x+1] of u_a^2 (resp. u_b^2).
  double log_cell_mass_left(int x) const;
  double log_cell_mass_right(int y) const;
  /// Hilbert-Schmidt norm of chi_x G chi_y.
  double hs_block_norm(int x, int y) const;
  /// exp((M_x + M_y)/2) R_a(x) R_b(y) / |W| with M_x = integral_x^{x+1} |1+q|.
  double hs_block_bound(int x, int y) const;

  /// u_a(s) = exp(log) * sign, u_b(t) likewise.
  std::pair<double, double> log_left_solution(double s) const;
  std::pair<double, double> log_right_solution(double t) const;

 private:
  std::size_t edge_at(double x) const;
  double diagonal_block_squared_scaled(int x, double& log_scale) const;

  PotentialProfile profile_;
  std::vector<PruferState> left_;
  std::vector<PruferState> right_;
  std::size_t match_ = 0;
  double log_abs_w_ = 0.0;
  double sign_w_ = 1.0;
  double spread_ = 0.0;
  GreenStatus status_ = GreenStatus::Ok;
};

GreenSample continuum_green(const ModelSpec& spec, const Realization& realization, double energy, double s,
                            double t);
BlockNorm hs_block_norm(const ModelSpec& spec, const Realization& realization, double energy, int x, int y);

/// Resolvent of h_[first,last] - z for the discrete model, from left and
/// right continued-fraction pivots of the symmetric tridiagonal matrix
/// (diagonal eta_n - z, off-diagonal -1).
template <class Scalar>
class TridiagonalResolvent {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  /// check_pivots: throw EigenvalueHit when a pivot falls below
  /// 1e-13 * scale (used for real energies).
  TridiagonalResolvent(std::vector<Scalar> diagonal, int first, bool check_pivots)
      : first_(first), diag_(std::move(diagonal)), left_(diag_.size()), right_(diag_.size()) {
    const std::size_t n = diag_.size();
    if (n == 0) throw Error(ErrorKind::OutOfInterval, "empty resolvent interval");
    double scale = 2.0;
    for (const auto& d : diag_) scale = std::max(scale, std::abs(d));
    const double tiny = 1e-13 * scale;
    auto check = [&](const Scalar& pivot) {
      if (check_pivots && !(std::abs(pivot) >= tiny)) {
        throw Error(ErrorKind::EigenvalueHit, "degenerate pivot in tridiagonal resolvent");
      }
    };
    left_[0] = diag_[0];
    check(left_[0]);
    for (std::size_t i = 1; i < n; ++i) {
      left_[i] = diag_[i] - Scalar(1) / left_[i - 1];
      check(left_[i]);
    }
    right_[n - 1] = diag_[n - 1];
    check(right_[n - 1]);
    for (std::size_t i = n - 1; i-- > 0;) {
      right_[i] = diag_[i] - Scalar(1) / right_[i + 1];
      check(right_[i]);
    }
    for (std::size_t i = 0; i < n; ++i) check(left_[i] + right_[i] - diag_[i]);
  }

  int first() const { return first_; }
  int last() const { return first_ + static_cast<int>(diag_.size()) - 1; }
  int size() const { return static_cast<int>(diag_.size()); }

  Scalar diagonal_entry(int x) const {
    const std::size_t i = index(x);
    return Scalar(1) / (left_[i] + right_[i] - diag_[i]);
  }

  Scalar operator()(int x, int y) const {
    if (x > y) std::swap(x, y);
    const std::size_t i = index(x), j = index(y);
    Scalar g = diagonal_entry(x);
    for (std::size_t k = i + 1; k <= j; ++k) g /= right_[k];
    return g;
  }

  /// G(x, y) for y = first..last.
  std::vector<Scalar> row(int x) const {
    const std::size_t i = index(x);
    std::vector<Scalar> out(diag_.size());
    out[i] = diagonal_entry(x);
    for (std::size_t k = i + 1; k < diag_.size(); ++k) out[k] = out[k - 1] / right_[k];
    for (std::size_t k = i; k-- > 0;) out[k] = out[k + 1] / left_[k];
    return out;
  }

  Matrix dense() const {
    const auto n = static_cast<Eigen::Index>(diag_.size());
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = row(first_ + static_cast<int>(i));
      for (Eigen::Index j = 0; j < n; ++j) g(i, j) = r[static_cast<std::size_t>(j)];
    }
    return g;
  }

  /// Negative left pivots = eigenvalues of h below Re z (real z only).
  int negative_pivots() const {
    int count = 0;
    for (const auto& l : left_) count += std::real(l) < 0.0 ? 1 : 0;
    return count;
  }

 private:
  std::size_t index(int x) const {
    if (x < first_ || x > last()) throw Error(ErrorKind::OutOfInterval, "site outside resolvent interval");
    return static_cast<std::size_t>(x - first_);
  }

  int first_;
  std::vector<Scalar> diag_;
  std::vector<Scalar> left_;
  std::vector<Scalar> right_;
};

/// Direct solve on sites first..last at real energy. Throws EigenvalueHit.
TridiagonalResolvent<double> discrete_green_solve(const Realization& realization, int first, int last,
                                                  double energy);
/// Direct solve at E + i epsilon, epsilon > 0.
TridiagonalResolvent<std::complex<double>> discrete_green_solve(const Realization& realization, int first,
                                                                int last, double energy, double epsilon);

/// Eigenvalues of h_[first,last] strictly below E (Sturm sequence).
int discrete_sturm_count(const Realization& realization, int first, int last, double energy);

/// Green function of h_[first,last] from the solutions u_l (u(first-1) = 0,
/// u(first) = 1) and u_r (u(last) = 1, u(last+1) = 0), with Wronskian
/// W(n) = u_l(n+1) u_r(n) - u_l(n) u_r(n+1) evaluated at n = first.
class DiscreteSolutionGreen {
 public:
  DiscreteSolutionGreen(const Realization& realization, int first, int last, double energy);

  GreenSample sample(int s, int t) const;
  /// W(n) / W(first) - 1.
  double wronskian_deviation(int n) const;
  GreenStatus status() const { return status_; }

 private:
  struct LogState {
    Eigen::Vector2d dir;  // (u(n), u(n+1)) / norm
    double log_norm;
  };
  std::size_t index(int n) const;

  int first_;
  int last_;
  std::vector<LogState> left_;
  std::vector<LogState> right_;
  double w_dir_ = 0.0;  // normalized Wronskian at n = first
  double log_w_ = 0.0;
  double spread_ = 0.0;
  GreenStatus status_ = GreenStatus::Ok;
};

/// G_[x,b](x, y; E) for x <= y <= b.
GreenSample discrete_green_solution_form(const Realization& realization, int x, int b, double energy, int y);

/// Green entry G_[a,b](x, y; E) through Krein's formula: the couplings at x
/// and y are removed, A = P (h_hat - E)^{-1} P, and
/// G = [A^{-1} + diag(eta_x, eta_y)]^{-1}(x, y). x == y uses the rank-one
/// version. Throws SingularReduction.
double krein_entry(const Realization& realization, int a, int b, double energy, int x, int y);

}  // namespace fmm
