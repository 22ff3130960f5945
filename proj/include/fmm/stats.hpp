#pragma once

#include <Eigen/Core>

namespace fmm {

/// y = intercept + slope * x by weighted least squares.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  /// Covariance of (intercept, slope). With y_covariance given it is the
  /// sandwich (X'WX)^{-1} X'W S W X (X'WX)^{-1}; otherwise (X'WX)^{-1}.
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double r_squared = 0.0;
};

LineFit weighted_line_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                          const Eigen::MatrixXd* y_covariance = nullptr);

/// Column estimates from a samples matrix (rows = realizations).
struct ColumnSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // covariance of the estimator
  bool median_of_means = false;
};

/// Plain means below `mom_threshold` rows; otherwise the median of
/// `groups` contiguous group means, with covariance (pi/2) S / n.
ColumnSummary summarize_columns(const Eigen::MatrixXd& samples, int mom_threshold = 200, int groups = 20);

}  // namespace fmm
