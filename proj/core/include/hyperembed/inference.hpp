#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperembed/estimator.hpp"
#include "hyperembed/model.hpp"

namespace hyperembed {

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.0;

  double lo() const { return center - half_width; }
  double hi() const { return center + half_width; }
};

struct ConfidenceEllipse {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d shape = Eigen::Matrix2d::Identity();
  double radius2 = 0.0;
  double level = 0.0;
};

// Plug-in asymptotic covariances at fitted parameters. With q_j = (1, f_j)
// and w_ji = sigma'(theta_ji):
//   cov_nu(i)  = (sum_j w_ji q_j q_j^T)^{-1}      covariance of (alpha_i, z_i)
//   cov_f(j)   = (sum_i w_ji z_i z_i^T)^{-1}      covariance of f_j
//   cross(j,i) = cov_nu(i) (w_ji q_j z_i^T) cov_f(j)
// The exp(-beta*) and m,n normalizations of the limit theory cancel in these
// unnormalized forms, which is why beta* never needs to be estimated here.
class PluginCovariances {
 public:
  explicit PluginCovariances(UncenteredParams params);

  const UncenteredParams& params() const { return params_; }
  int m() const { return params_.m(); }
  int n() const { return params_.n(); }
  int k() const { return params_.k(); }

  const Eigen::MatrixXd& cov_nu(int i) const;  // (K+1)x(K+1), SPD
  const Eigen::MatrixXd& cov_f(int j) const;   // KxK, SPD
  Eigen::MatrixXd cross(int j, int i) const;   // (K+1)xK, computed on demand

  double var_theta(int j, int i) const;
  double var_p(int j, int i) const;

 private:
  UncenteredParams params_;
  std::vector<std::optional<Eigen::MatrixXd>> a_inv_;  // per vertex
  std::vector<std::optional<Eigen::MatrixXd>> b_inv_;  // per hyperlink
};

enum class TargetKind { AlphaDagger, ZEntry, FEntry, Theta, Prob };

struct TargetSpec {
  TargetKind kind = TargetKind::AlphaDagger;
  int i = -1;  // vertex (AlphaDagger, ZEntry, Theta, Prob)
  int j = -1;  // hyperlink (FEntry, Theta, Prob)
  int dim = -1;  // coordinate (ZEntry, FEntry)
};

ConfidenceInterval confidence_interval(const PluginCovariances& pc, const TargetSpec& target,
                                       double level);

// 2-D confidence region for vertex embedding i; requires K = 2.
ConfidenceEllipse confidence_ellipse(const PluginCovariances& pc, int i, double level);

struct IntervalRow {
  std::string target;
  std::string index;  // 1-based, "i", "i:k", or "j:i"
  double estimate = 0.0;
  double variance = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
};

IntervalRow make_interval_row(const PluginCovariances& pc, const TargetSpec& target,
                              double level);

// CSV with header target,index,estimate,variance,lo,hi,level. Probability
// rows carry endpoints clipped to (0,1).
std::string intervals_to_csv(const std::vector<IntervalRow>& rows);

// Ellipse export: JSON array of {vertex, center, shape, radius2, level} and
// an SVG scatter of all vertex embeddings with the ellipses overlaid.
std::string ellipses_to_json(const std::vector<std::pair<int, ConfidenceEllipse>>& ellipses);
std::string ellipses_to_svg(const Eigen::MatrixXd& z,
                            const std::vector<std::pair<int, ConfidenceEllipse>>& ellipses,
                            const std::vector<std::string>& labels = {});

}  // namespace hyperembed
