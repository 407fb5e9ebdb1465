#pragma once

// Small models with exact or grid-computable filters, used for the MSE
// experiments and the oracle cross-checks.

#include "dualpf/model.hpp"

namespace dualpf {

/// x' = a x + b u + N(0, q),  y = c x + N(0, r),  x_0 ~ N(m0, p0).
struct LinearGaussian1DParams {
  double a = 0.9;
  double b = 1.0;
  double q = 1.0;
  double c = 1.0;
  double r = 1.0;
  double m0 = 0.0;
  double p0 = 4.0;
};

ModelSpec make_linear_gaussian_1d(const LinearGaussian1DParams& p);

/// x' = A x + B u + N(0, Q),  y = C x + N(0, R),  x_0 ~ N(m0, P0), x in R^2.
struct LinearGaussian2DParams {
  Eigen::Matrix2d A = (Eigen::Matrix2d() << 0.9, 0.2, 0.0, 0.8).finished();
  Eigen::Matrix<double, 2, 1> B = Eigen::Matrix<double, 2, 1>(0.0, 1.0);
  Eigen::Matrix2d Q = Eigen::Matrix2d::Identity() * 0.5;
  Eigen::Matrix2d C = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
  Eigen::Vector2d m0 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d P0 = Eigen::Matrix2d::Identity() * 2.0;
};

ModelSpec make_linear_gaussian_2d(const LinearGaussian2DParams& p);

/// State uniform on [-L, L), redrawn independently at every step; observation
/// on the same circle: with probability p uniform clutter, otherwise the state
/// plus truncated Gaussian noise (sd sigma, support radius R < L), wrapped.
/// The predicted likelihood <mu_{k|k-1}, rho> is exactly 1/(2L) for every
/// observation, so gamma is known in closed form.
struct BoundedClutterParams {
  double L = 500.0;
  double sigma = 150.0;
  double support = 450.0;
  double clutter = 0.976;
};

ModelSpec make_bounded_clutter(const BoundedClutterParams& p);

/// Wraps v into [-L, L).
double wrap_symmetric(double v, double L);

}  // namespace dualpf
