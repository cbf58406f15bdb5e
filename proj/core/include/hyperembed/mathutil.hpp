#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "hyperembed/errors.hpp"

namespace hyperembed {

// Smallest representable spacing away from the endpoints of (0,1); keeps
// probabilities strictly interior even where exp saturates the double grid.
inline constexpr double kProbFloor = 2.2250738585072014e-308;  // DBL_MIN
inline constexpr double kProbCeil = 1.0 - 1.1102230246251565e-16;  // 1 - eps/2

// Logistic function, overflow-safe on the whole real line, valued in (0,1).
inline double sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::min(std::max(s, kProbFloor), kProbCeil);
}

// Derivative of the logistic function, sigma'(x) = sigma(x) * (1 - sigma(x)).
inline double sigmoid_deriv(double x) {
  const double e = std::exp(-std::abs(x));
  const double d = 1.0 + e;
  return e / (d * d);
}

// log(1 + exp(x)) without overflow; branches at |x| = 30 where exp is safe.
inline double log1pexp(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  if (x < -30.0) return std::log1p(std::exp(x));
  return std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Elementwise logistic map with a single exp(-|x|) so no branch overflows.
inline Eigen::MatrixXd sigmoid_matrix(const Eigen::MatrixXd& theta) {
  const Eigen::ArrayXXd e = (-theta.array().abs()).exp();
  return ((theta.array() >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e)))
      .max(kProbFloor)
      .min(kProbCeil)
      .matrix();
}

inline Eigen::MatrixXd sigmoid_deriv_matrix(const Eigen::MatrixXd& theta) {
  const Eigen::ArrayXXd e = (-theta.array().abs()).exp();
  return (e / (1.0 + e).square()).matrix();
}

// Sum of log(1+exp(theta_ji)) over all entries, numerically stable.
inline double log1pexp_sum(const Eigen::MatrixXd& theta) {
  const Eigen::ArrayXXd a = theta.array();
  return (a.max(0.0) + (-a.abs()).exp().log1p()).sum();
}

double normal_cdf(double x);

// Inverse standard normal CDF. Rational approximation polished by Newton
// steps on erfc, accurate to ~1e-15 over (0,1).
double normal_quantile(double p);

// chi-square with 2 degrees of freedom has the exact quantile -2 log(1-p).
inline double chi2_2_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("chi2 quantile level must be in (0,1)");
  return -2.0 * std::log1p(-p);
}

// Strict lower-triangular part (k<l entries zeroed, diagonal zeroed).
inline Eigen::MatrixXd strict_lower(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd out = a;
  out.triangularView<Eigen::Upper>().setZero();
  out.diagonal().setZero();
  return out;
}

}  // namespace hyperembed
