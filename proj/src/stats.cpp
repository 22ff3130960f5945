#include "fmm/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numbers>
#include <vector>

namespace fmm {

LineFit weighted_line_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                          const Eigen::MatrixXd* y_covariance) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd design(n, 2);
  design.col(0).setOnes();
  design.col(1) = x;
  const Eigen::MatrixXd wx = weights.asDiagonal() * design;
  const Eigen::Matrix2d normal = design.transpose() * wx;
  const Eigen::Matrix2d normal_inv = normal.inverse();
  const Eigen::Vector2d beta = normal_inv * (wx.transpose() * y);

  LineFit fit;
  fit.intercept = beta(0);
  fit.slope = beta(1);
  fit.covariance = y_covariance ? Eigen::Matrix2d(normal_inv * (wx.transpose() * (*y_covariance) * wx) * normal_inv)
                                : normal_inv;

  const double w_total = weights.sum();
  const double y_bar = weights.dot(y) / w_total;
  const Eigen::VectorXd resid = y - design * beta;
  const double ss_res = weights.dot(resid.cwiseProduct(resid));
  const Eigen::VectorXd centered = y.array() - y_bar;
  const double ss_tot = weights.dot(centered.cwiseProduct(centered));
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

ColumnSummary summarize_columns(const Eigen::MatrixXd& samples, int mom_threshold, int groups) {
  const Eigen::Index n = samples.rows();
  ColumnSummary out;
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  Eigen::MatrixXd cov = n > 1 ? Eigen::MatrixXd(centered.transpose() * centered / double(n - 1))
                              : Eigen::MatrixXd::Zero(samples.cols(), samples.cols());
  cov /= double(std::max<Eigen::Index>(n, 1));
  out.mean = mean.transpose();

  if (n >= mom_threshold && groups > 1) {
    out.median_of_means = true;
    cov *= std::numbers::pi / 2.0;
    Eigen::MatrixXd group_means(groups, samples.cols());
    for (int g = 0; g < groups; ++g) {
      const Eigen::Index lo = n * g / groups, hi = n * (g + 1) / groups;
      group_means.row(g) = samples.middleRows(lo, hi - lo).colwise().mean();
    }
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
      std::vector<double> col(group_means.col(c).data(), group_means.col(c).data() + groups);
      std::sort(col.begin(), col.end());
      out.mean(c) = groups % 2 ? col[groups / 2] : 0.5 * (col[groups / 2 - 1] + col[groups / 2]);
    }
  }
  // constant columns (deterministic quantities) are reported exactly
  for (Eigen::Index c = 0; c < samples.cols() && n > 0; ++c) {
    if (samples.col(c).minCoeff() == samples.col(c).maxCoeff()) {
      out.mean(c) = samples(0, c);
      cov.row(c).setZero();
      cov.col(c).setZero();
    }
  }
  out.covariance = cov;
  return out;
}

}  // namespace fmm
