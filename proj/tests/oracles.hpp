#pragma once

// Independent reference computations used only by the tests.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "fmm/model.hpp"

namespace oracle {

// Fixed-step RK4 for (u, u')' = (u', q u) across a piecewise-constant q,
// restarting at every edge.
inline Eigen::Vector2d rk4(const fmm::PotentialProfile& q, double from, double to, Eigen::Vector2d y,
                           int steps_per_unit = 2000) {
  auto rhs = [](double qv, const Eigen::Vector2d& s) { return Eigen::Vector2d(s(1), qv * s(0)); };
  std::vector<double> cuts{from};
  for (double e : q.edges()) {
    if (e > std::min(from, to) && e < std::max(from, to)) cuts.push_back(e);
  }
  std::sort(cuts.begin() + 1, cuts.end());
  if (to < from) std::reverse(cuts.begin() + 1, cuts.end());
  cuts.push_back(to);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    const double qv = q.value_at(0.5 * (cuts[i] + cuts[i + 1]));
    const int n = std::max(4, static_cast<int>(std::ceil(std::abs(len) * steps_per_unit)));
    const double h = len / n;
    for (int k = 0; k < n; ++k) {
      const Eigen::Vector2d k1 = rhs(qv, y);
      const Eigen::Vector2d k2 = rhs(qv, y + 0.5 * h * k1);
      const Eigen::Vector2d k3 = rhs(qv, y + 0.5 * h * k2);
      const Eigen::Vector2d k4 = rhs(qv, y + h * k3);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return y;
}

// Random profile on [a, b] with pieces of random length and values in
// [lo, hi].
inline fmm::PotentialProfile random_profile(std::mt19937_64& rng, double a, double b, double lo, double hi,
                                            int max_pieces = 8) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> np(1, max_pieces);
  const int n = np(rng);
  std::vector<double> edges{a};
  std::vector<double> cuts;
  for (int i = 1; i < n; ++i) cuts.push_back(a + (b - a) * u(rng));
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts) {
    if (c - edges.back() > 1e-3 && b - c > 1e-3) edges.push_back(c);
  }
  edges.push_back(b);
  std::vector<double> values;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) values.push_back(lo + (hi - lo) * u(rng));
  return {edges, values};
}

// Dirichlet finite-difference resolvent of -d^2/dx^2 + q on [a, b] with
// mesh h: G(s, t) ~ (H^-1)_{ij} / h for nodes s = a + i h. Nodes at a jump
// use the average of the two sides. Columns are solved on demand (Thomas).
class MeshGreen {
 public:
  MeshGreen(const fmm::PotentialProfile& q, int per_unit) : a_(q.begin()), h_(1.0 / per_unit) {
    n_ = static_cast<int>(std::lround((q.end() - a_) * per_unit)) - 1;
    diag_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      const double x = a_ + (i + 1) * h_;
      diag_[static_cast<std::size_t>(i)] =
          2.0 / (h_ * h_) + 0.5 * (q.value_at(std::max(q.begin(), x - 1e-9)) + q.value_at(std::min(q.end(), x + 1e-9)));
    }
    const double off = -1.0 / (h_ * h_);
    c_.resize(diag_.size());
    denom_.resize(diag_.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < diag_.size(); ++i) {
      denom_[i] = diag_[i] - off * prev;
      c_[i] = off / denom_[i];
      prev = c_[i];
    }
  }

  // G(., t) on the interior nodes
  const std::vector<double>& column(int j) const {
    auto it = cache_.find(j);
    if (it != cache_.end()) return it->second;
    const double off = -1.0 / (h_ * h_);
    std::vector<double> d(diag_.size()), g(diag_.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < diag_.size(); ++i) {
      d[i] = ((static_cast<int>(i) == j ? 1.0 : 0.0) - off * prev) / denom_[i];
      prev = d[i];
    }
    g.back() = d.back();
    for (std::size_t i = diag_.size() - 1; i-- > 0;) g[i] = d[i] - c_[i] * g[i + 1];
    for (double& v : g) v /= h_;
    return cache_.emplace(j, std::move(g)).first->second;
  }

  int node(double x) const { return static_cast<int>(std::lround((x - a_) / h_)) - 1; }
  double value(double s, double t) const { return column(node(t))[static_cast<std::size_t>(node(s))]; }

  // Frobenius norm of chi_x G chi_y with trapezoid weights on the node grid.
  double hs_block(int x, int y) const {
    const int per = static_cast<int>(std::lround(1.0 / h_));
    double sum = 0.0;
    for (int j = 0; j <= per; ++j) {
      const int nj = node(y + j * h_);
      if (nj < 0 || nj >= n_) continue;
      const double wj = (j == 0 || j == per) ? 0.5 : 1.0;
      const auto& col = column(nj);
      for (int i = 0; i <= per; ++i) {
        const int ni = node(x + i * h_);
        if (ni < 0 || ni >= n_) continue;
        const double wi = (i == 0 || i == per) ? 0.5 : 1.0;
        const double g = col[static_cast<std::size_t>(ni)];
        sum += wi * wj * g * g;
      }
    }
    return std::sqrt(sum) * h_;
  }

 private:
  double a_, h_;
  int n_;
  std::vector<double> diag_, c_, denom_;
  mutable std::map<int, std::vector<double>> cache_;
};

// Free-chain Green function of h = -Delta on sites 1..n (Dirichlet at 0
// and n+1) at real E outside [-2, 2], from the two exponential solutions.
inline double free_chain_green(int n, double energy, int x, int y) {
  // -u(k+1) - u(k-1) = E u(k); u = r^k with r + 1/r = -E
  const double e = -energy;
  const double r = (e + (e > 0 ? 1.0 : -1.0) * std::sqrt(e * e - 4.0)) / 2.0;  // |r| > 1
  auto sol = [&](int k) { return std::pow(r, k) - std::pow(r, -k); };
  if (x > y) std::swap(x, y);
  // u_l(k) = sol(k), u_r(k) = sol(n+1-k); Wronskian in the h convention
  const double w = sol(2) * sol(n) - sol(1) * sol(n - 1);
  return sol(x) * sol(n + 1 - y) / w;
}

}  // namespace oracle
