#include "fmm/green.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "quadrature.hpp"

namespace fmm {

namespace {

double signed_log(double v, double& sign) {
  sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  return std::log(std::abs(v));
}

double log_sum(const std::vector<double>& logs) {
  double ref = -std::numeric_limits<double>::infinity();
  for (double l : logs) ref = std::max(ref, l);
  if (!std::isfinite(ref)) return ref;
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - ref);
  return ref + std::log(acc);
}

}  // namespace

ContinuumGreen::ContinuumGreen(const PotentialProfile& q)
    : profile_(q.refined_at_integers()),
      left_(prufer_edge_states(profile_, true, 0.0)),
      right_(prufer_edge_states(profile_, false, 0.0)) {
  const double mid = 0.5 * (a() + b());
  const auto edges = profile_.edges();
  match_ = 0;
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (std::abs(edges[i] - mid) < std::abs(edges[match_] - mid)) match_ = i;
  }
  auto normalized_w = [&](std::size_t e) {
    const auto& l = left_[e].direction;
    const auto& r = right_[e].direction;
    return l(0) * r(1) - l(1) * r(0);
  };
  const double s = normalized_w(match_);
  log_abs_w_ = left_[match_].log_R + right_[match_].log_R + signed_log(s, sign_w_);
  status_ = std::abs(s) < kWronskianTolerance ? GreenStatus::NearEigenvalue : GreenStatus::Ok;
  spread_ = 0.0;
  if (status_ == GreenStatus::Ok) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      double sign = 1.0;
      const double lw = left_[e].log_R + right_[e].log_R + signed_log(normalized_w(e), sign);
      spread_ = std::max(spread_, std::abs(sign * sign_w_ * std::exp(lw - log_abs_w_) - 1.0));
    }
  }
}

ContinuumGreen::ContinuumGreen(const ModelSpec& spec, const Realization& realization, double energy)
    : ContinuumGreen(build_profile(spec, realization, energy)) {}

std::pair<double, double> ContinuumGreen::log_left_solution(double s) const {
  const std::size_t i = profile_.piece_index(s);
  const auto prop = cell_propagator(profile_.value(i), s - profile_.edge(i));
  const double u = (prop.entries() * left_[i].direction)(0);
  double sign = 0.0;
  const double lu = signed_log(u, sign);
  return {left_[i].log_R + prop.log_scale() + lu, sign};
}

std::pair<double, double> ContinuumGreen::log_right_solution(double t) const {
  const std::size_t j = profile_.piece_index(t);
  const auto prop = cell_propagator(profile_.value(j), profile_.edge(j + 1) - t).inverse_unimodular();
  const double u = (prop.entries() * right_[j + 1].direction)(0);
  double sign = 0.0;
  const double lu = signed_log(u, sign);
  return {right_[j + 1].log_R + prop.log_scale() + lu, sign};
}

double ContinuumGreen::value(double s, double t) const {
  if (!profile_.contains(s) || !profile_.contains(t)) throw Error(ErrorKind::OutOfInterval, "Green argument outside");
  const auto [la, sa] = log_left_solution(std::min(s, t));
  const auto [lb, sb] = log_right_solution(std::max(s, t));
  if (sa == 0.0 || sb == 0.0) return 0.0;
  // the jump condition of -d^2/dx^2 fixes G = -u_a u_b / W
  return -sa * sb * sign_w_ * std::exp(la + lb - log_abs_w_);
}

GreenSample ContinuumGreen::sample(double s, double t) const {
  GreenSample out;
  out.x = s;
  out.y = t;
  out.value = value(s, t);
  out.log_abs_wronskian = log_abs_w_;
  out.wronskian_sign = sign_w_;
  out.wronskian_spread = spread_;
  out.status = status_;
  return out;
}

std::size_t ContinuumGreen::edge_at(double x) const {
  const auto edges = profile_.edges();
  auto it = std::lower_bound(edges.begin(), edges.end(), x);
  if (it == edges.end() || *it != x || x + 1.0 > b()) {
    throw Error(ErrorKind::OutOfInterval, "cell [x, x+1] not inside the Green interval");
  }
  return static_cast<std::size_t>(it - edges.begin());
}

double ContinuumGreen::log_cell_mass_left(int x) const {
  std::vector<double> logs;
  for (std::size_t i = edge_at(x); i < profile_.size() && profile_.edge(i) < x + 1.0; ++i) {
    const auto& s = left_[i];
    logs.push_back(2.0 * s.log_R +
                   std::log(unit_mass(profile_.value(i), profile_.length(i), s.direction(0), s.direction(1))));
  }
  return log_sum(logs);
}

double ContinuumGreen::log_cell_mass_right(int y) const {
  std::vector<double> logs;
  for (std::size_t i = edge_at(y); i < profile_.size() && profile_.edge(i) < y + 1.0; ++i) {
    const auto& s = right_[i + 1];
    logs.push_back(2.0 * s.log_R +
                   std::log(unit_mass(profile_.value(i), profile_.length(i), s.direction(0), -s.direction(1))));
  }
  return log_sum(logs);
}

double ContinuumGreen::diagonal_block_squared_scaled(int x, double& log_scale) const {
  // integral_x^{x+1} u_b(t)^2 A(t) dt with A(t) = integral_x^t u_a^2, in units of
  // R_a(x)^2 R_b(x+1)^2.
  const auto& rule = detail::gauss_legendre_24();
  const std::size_t first = edge_at(x);
  std::size_t last = first;
  while (last < profile_.size() && profile_.edge(last) < x + 1.0) ++last;
  const double la_ref = left_[first].log_R;
  const double lb_ref = right_[last].log_R;
  log_scale = 2.0 * (la_ref + lb_ref);

  double accumulated = 0.0;  // A at the current piece start
  double integral = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const double q = profile_.value(i);
    const double len = profile_.length(i);
    const auto& sa = left_[i];
    const auto& sb = right_[i + 1];
    const double wa = std::exp(2.0 * (sa.log_R - la_ref));
    const double wb = std::exp(2.0 * (sb.log_R - lb_ref));
    const double k = std::sqrt(std::abs(q));
    const int chunks = std::max(1, static_cast<int>(std::ceil(k * len / 4.0)));
    const double h = len / chunks;
    for (int c = 0; c < chunks; ++c) {
      for (Eigen::Index n = 0; n < rule.nodes.size(); ++n) {
        const double tau = c * h + 0.5 * h * (rule.nodes(n) + 1.0);
        const double inner = accumulated + wa * unit_mass(q, tau, sa.direction(0), sa.direction(1));
        const auto back = cell_propagator(q, len - tau).inverse_unimodular();
        const double ub = (back.entries() * sb.direction)(0) * std::exp(back.log_scale());
        integral += 0.5 * h * rule.weights(n) * wb * ub * ub * inner;
      }
    }
    accumulated += wa * unit_mass(q, len, sa.direction(0), sa.direction(1));
  }
  return integral;
}

double ContinuumGreen::hs_block_norm(int x, int y) const {
  if (x == y) {
    double log_scale = 0.0;
    const double integral = diagonal_block_squared_scaled(x, log_scale);
    return std::sqrt(2.0 * integral) * std::exp(0.5 * log_scale - log_abs_w_);
  }
  const int lo = std::min(x, y), hi = std::max(x, y);
  return std::exp(0.5 * (log_cell_mass_left(lo) + log_cell_mass_right(hi)) - log_abs_w_);
}

double ContinuumGreen::hs_block_bound(int x, int y) const {
  const int lo = std::min(x, y), hi = std::max(x, y);
  const double mx = profile_.abs_integral(lo, lo + 1.0, 1.0);
  const double my = profile_.abs_integral(hi, hi + 1.0, 1.0);
  const double lra = left_[edge_at(lo)].log_R;
  const double lrb = right_[edge_at(hi)].log_R;
  return std::exp(0.5 * (mx + my) + lra + lrb - log_abs_w_);
}

GreenSample continuum_green(const ModelSpec& spec, const Realization& realization, double energy, double s,
                            double t) {
  return ContinuumGreen(spec, realization, energy).sample(s, t);
}

BlockNorm hs_block_norm(const ModelSpec& spec, const Realization& realization, double energy, int x, int y) {
  const ContinuumGreen green(spec, realization, energy);
  return {green.hs_block_norm(x, y), green.status()};
}

namespace {

void check_sites(const Realization& realization, int first, int last) {
  if (first > last || !realization.contains(first) || !realization.contains(last)) {
    throw Error(ErrorKind::OutOfInterval, "discrete interval outside realization");
  }
}

}  // namespace

TridiagonalResolvent<double> discrete_green_solve(const Realization& realization, int first, int last,
                                                  double energy) {
  check_sites(realization, first, last);
  std::vector<double> diag;
  for (int n = first; n <= last; ++n) diag.push_back(realization.coupling(n) - energy);
  return {std::move(diag), first, true};
}

TridiagonalResolvent<std::complex<double>> discrete_green_solve(const Realization& realization, int first,
                                                                int last, double energy, double epsilon) {
  check_sites(realization, first, last);
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidSpec, "complex energy needs epsilon > 0");
  const std::complex<double> z(energy, epsilon);
  std::vector<std::complex<double>> diag;
  for (int n = first; n <= last; ++n) diag.push_back(realization.coupling(n) - z);
  return {std::move(diag), first, false};
}

int discrete_sturm_count(const Realization& realization, int first, int last, double energy) {
  check_sites(realization, first, last);
  int count = 0;
  double pivot = 1.0;
  for (int n = first; n <= last; ++n) {
    pivot = realization.coupling(n) - energy - (n == first ? 0.0 : 1.0 / pivot);
    if (pivot == 0.0) pivot = -std::numeric_limits<double>::epsilon();
    if (pivot < 0.0) ++count;
  }
  return count;
}

DiscreteSolutionGreen::DiscreteSolutionGreen(const Realization& realization, int first, int last, double energy)
    : first_(first), last_(last) {
  check_sites(realization, first, last);
  const auto n = static_cast<std::size_t>(last - first + 1);
  left_.resize(n);
  right_.resize(n);

  auto normalized = [](Eigen::Vector2d v, double log_norm) {
    const double norm = v.norm();
    return LogState{v / norm, log_norm + std::log(norm)};
  };

  left_[0] = normalized({1.0, realization.coupling(first) - energy}, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const auto& prev = left_[i - 1];
    const double eta = realization.coupling(first + static_cast<int>(i));
    left_[i] = normalized({prev.dir(1), (eta - energy) * prev.dir(1) - prev.dir(0)}, prev.log_norm);
  }
  right_[n - 1] = LogState{{1.0, 0.0}, 0.0};
  for (std::size_t i = n - 1; i-- > 0;) {
    const auto& next = right_[i + 1];
    const double eta = realization.coupling(first + static_cast<int>(i) + 1);
    right_[i] = normalized({(eta - energy) * next.dir(0) - next.dir(1), next.dir(0)}, next.log_norm);
  }

  auto w_dir = [&](std::size_t i) {
    return left_[i].dir(1) * right_[i].dir(0) - left_[i].dir(0) * right_[i].dir(1);
  };
  w_dir_ = w_dir(0);
  log_w_ = left_[0].log_norm + right_[0].log_norm;
  status_ = std::abs(w_dir_) < kWronskianTolerance ? GreenStatus::NearEigenvalue : GreenStatus::Ok;
  if (status_ == GreenStatus::Ok) {
    for (std::size_t i = 0; i < n; ++i) {
      spread_ = std::max(spread_, std::abs(wronskian_deviation(first + static_cast<int>(i))));
    }
  }
}

std::size_t DiscreteSolutionGreen::index(int n) const {
  if (n < first_ || n > last_) throw Error(ErrorKind::OutOfInterval, "site outside solution-form interval");
  return static_cast<std::size_t>(n - first_);
}

double DiscreteSolutionGreen::wronskian_deviation(int n) const {
  const std::size_t i = index(n);
  const double w = left_[i].dir(1) * right_[i].dir(0) - left_[i].dir(0) * right_[i].dir(1);
  const double log_scale = left_[i].log_norm + right_[i].log_norm - log_w_;
  return w / w_dir_ * std::exp(log_scale) - 1.0;
}

GreenSample DiscreteSolutionGreen::sample(int s, int t) const {
  const int lo = std::min(s, t), hi = std::max(s, t);
  const std::size_t i = index(lo), j = index(hi);
  GreenSample out;
  out.x = s;
  out.y = t;
  out.value = left_[i].dir(0) * right_[j].dir(0) / w_dir_ *
              std::exp(left_[i].log_norm + right_[j].log_norm - log_w_);
  double sign = 1.0;
  out.log_abs_wronskian = log_w_ + signed_log(w_dir_, sign);
  out.wronskian_sign = sign;
  out.wronskian_spread = spread_;
  out.status = status_;
  return out;
}

GreenSample discrete_green_solution_form(const Realization& realization, int x, int b, double energy, int y) {
  if (y < x || y > b) throw Error(ErrorKind::OutOfInterval, "solution form needs x <= y <= b");
  return DiscreteSolutionGreen(realization, x, b, energy).sample(x, y);
}

double krein_entry(const Realization& realization, int a, int b, double energy, int x, int y) {
  check_sites(realization, a, b);
  if (x < a || x > b || y < a || y > b) throw Error(ErrorKind::OutOfInterval, "Krein sites outside interval");
  std::vector<double> diag;
  for (int n = a; n <= b; ++n) diag.push_back((n == x || n == y ? 0.0 : realization.coupling(n)) - energy);
  try {
    const TridiagonalResolvent<double> reduced(std::move(diag), a, true);
    if (x == y) {
      const double inv = 1.0 / reduced(x, x) + realization.coupling(x);
      if (std::abs(inv) < 1e-13 * (1.0 + std::abs(realization.coupling(x)))) {
        throw Error(ErrorKind::SingularReduction, "rank-one Krein denominator vanishes");
      }
      return 1.0 / inv;
    }
    Eigen::Matrix2d a_mat;
    a_mat << reduced(x, x), reduced(x, y), reduced(y, x), reduced(y, y);
    auto condition = [](const Eigen::Matrix2d& m) {
      const Eigen::Vector2d sv = Eigen::JacobiSVD<Eigen::Matrix2d>(m).singularValues();
      return sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
    };
    if (condition(a_mat) > 1e13) throw Error(ErrorKind::SingularReduction, "reduced 2x2 resolvent is singular");
    Eigen::Matrix2d bracket = a_mat.inverse();
    bracket(0, 0) += realization.coupling(x);
    bracket(1, 1) += realization.coupling(y);
    if (condition(bracket) > 1e13) throw Error(ErrorKind::SingularReduction, "Krein bracket is singular");
    return bracket.inverse()(0, 1);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::EigenvalueHit) {
      throw Error(ErrorKind::SingularReduction, "energy is an eigenvalue of the decoupled operator");
    }
    throw;
  }
}

}  // namespace fmm
