#include <doctest.h>

#include <cmath>

#include "hyperembed/errors.hpp"
#include "hyperembed/inference.hpp"
#include "hyperembed/mathutil.hpp"
#include "test_util.hpp"

using namespace hyperembed;
using hyperembed::testing::random_params;

namespace {

// Direct per-index accumulation, the reduction-order oracle for the GEMM
// implementation inside PluginCovariances.
Eigen::MatrixXd cov_nu_oracle(const UncenteredParams& p, int i, bool reverse) {
  const int k = p.k();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd q(k + 1);
  auto add = [&](int j) {
    q[0] = 1.0;
    q.tail(k) = p.F.row(j).transpose();
    acc += sigmoid_deriv(theta(p, j, i)) * q * q.transpose();
  };
  if (reverse) {
    for (int j = p.m() - 1; j >= 0; --j) add(j);
  } else {
    for (int j = 0; j < p.m(); ++j) add(j);
  }
  return acc.inverse();
}

UncenteredParams flat_balanced_params(int m, int n) {
  // theta == 0 with F columns orthogonal of squared norm m and Z of norm n;
  // alternating signs keep every column exactly centered.
  UncenteredParams p;
  p.alpha_dagger = Eigen::VectorXd::Zero(n);
  p.F.resize(m, 2);
  p.Z.resize(n, 2);
  for (int j = 0; j < m; ++j) {
    p.F(j, 0) = (j % 2 == 0) ? 1.0 : -1.0;
    p.F(j, 1) = (j / 2 % 2 == 0) ? 1.0 : -1.0;
  }
  for (int i = 0; i < n; ++i) {
    p.Z(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
    p.Z(i, 1) = (i / 2 % 2 == 0) ? 1.0 : -1.0;
  }
  // zero out the bilinear part so theta stays 0: use Z only in cov_f checks
  return p;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("cov_nu block-diagonal closed form at theta = 0") {
  // F centered with F^T F = m I and Z = 0 so theta == 0 exactly
  const int m = 8, n = 3;
  UncenteredParams p = flat_balanced_params(m, n);
  p.Z.setZero();
  const PluginCovariances pc(p);
  const Eigen::MatrixXd expected =
      (4.0 / m) * Eigen::MatrixXd::Identity(3, 3);
  CHECK((pc.cov_nu(0) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cov_nu for the intercept-only model (K = 0)") {
  UncenteredParams p;
  p.alpha_dagger = Eigen::VectorXd::Constant(2, -1.0);
  p.F = Eigen::MatrixXd(5, 0);
  p.Z = Eigen::MatrixXd(2, 0);
  const PluginCovariances pc(p);
  double expected = 0.0;
  for (int j = 0; j < 5; ++j) expected += sigmoid_deriv(-1.0);
  CHECK(pc.cov_nu(0)(0, 0) == doctest::Approx(1.0 / expected).epsilon(1e-12));
  CHECK(pc.var_theta(0, 0) == doctest::Approx(1.0 / expected).epsilon(1e-12));
}

TEST_CASE("cov_nu matches the independent accumulation oracle both ways") {
  const UncenteredParams p = random_params(12, 6, 2, 2024, 0.8);
  const PluginCovariances pc(p);
  for (int i = 0; i < 6; ++i) {
    CHECK((pc.cov_nu(i) - cov_nu_oracle(p, i, false)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pc.cov_nu(i) - cov_nu_oracle(p, i, true)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("cov_f closed form and weight scaling") {
  const int m = 4, n = 8;
  UncenteredParams p = flat_balanced_params(m, n);
  p.F.setZero();  // theta == 0, Z^T Z = n I
  const PluginCovariances pc(p);
  const Eigen::MatrixXd expected = (4.0 / n) * Eigen::MatrixXd::Identity(2, 2);
  CHECK((pc.cov_f(0) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cov matrices are symmetric and pass Cholesky") {
  const UncenteredParams p = random_params(15, 10, 2, 8181, 0.9);
  const PluginCovariances pc(p);
  for (int i = 0; i < 10; ++i) {
    const Eigen::MatrixXd& a = pc.cov_nu(i);
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(a).info() == Eigen::Success);
  }
  for (int j = 0; j < 15; ++j) {
    const Eigen::MatrixXd& b = pc.cov_f(j);
    CHECK((b - b.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(b).info() == Eigen::Success);
  }
}

TEST_CASE("degenerate embeddings raise rank-deficiency errors") {
  UncenteredParams p = random_params(6, 4, 2, 3, 0.5);
  p.F.setZero();  // every q_j identical
  const PluginCovariances pc(p);
  CHECK_THROWS_AS(pc.cov_nu(0), RankDeficiencyError);
}

TEST_CASE("var_theta equals the explicit joint quadratic form") {
  const UncenteredParams p = random_params(9, 7, 2, 5150, 0.7);
  const PluginCovariances pc(p);
  const int k = 2;
  for (int j : {0, 4, 8}) {
    for (int i : {0, 3, 6}) {
      Eigen::VectorXd q(k + 1);
      q[0] = 1.0;
      q.tail(k) = p.F.row(j).transpose();
      const Eigen::VectorXd z = p.Z.row(i).transpose();
      Eigen::MatrixXd joint(2 * k + 1, 2 * k + 1);
      joint.topLeftCorner(k + 1, k + 1) = pc.cov_nu(i);
      joint.bottomRightCorner(k, k) = pc.cov_f(j);
      joint.topRightCorner(k + 1, k) = pc.cross(j, i);
      joint.bottomLeftCorner(k, k + 1) = pc.cross(j, i).transpose();
      Eigen::VectorXd stacked(2 * k + 1);
      stacked.head(k + 1) = q;
      stacked.tail(k) = z;
      const double direct = stacked.dot(joint * stacked);
      CHECK(pc.var_theta(j, i) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("var_theta drops to the nu-block when z is zero") {
  UncenteredParams p = random_params(9, 7, 2, 62, 0.7);
  p.Z.row(0).setZero();
  const PluginCovariances pc(p);
  Eigen::VectorXd q(3);
  q[0] = 1.0;
  q.tail(2) = p.F.row(2).transpose();
  CHECK(pc.var_theta(2, 0) == doctest::Approx(q.dot(pc.cov_nu(0) * q)).epsilon(1e-12));
}

TEST_CASE("var_p is the delta-method scaling of var_theta") {
  const UncenteredParams p = random_params(9, 7, 2, 63, 0.7);
  const PluginCovariances pc(p);
  const double th = theta(p, 1, 1);
  const double d = sigmoid_deriv(th);
  CHECK(pc.var_p(1, 1) == doctest::Approx(d * d * pc.var_theta(1, 1)).epsilon(1e-12));

  // theta = 0 cell: sigma'(0) = 1/4 so var_p = var_theta / 16
  UncenteredParams q = p;
  q.alpha_dagger[2] = -q.F.row(2).dot(q.Z.row(2));
  const PluginCovariances pcq(q);
  CHECK(pcq.var_p(2, 2) == doctest::Approx(pcq.var_theta(2, 2) / 16.0).epsilon(1e-12));
}

TEST_CASE("var_p vanishes in the far tail") {
  UncenteredParams p = random_params(9, 7, 2, 64, 0.5);
  p.alpha_dagger.array() -= 30.0;
  const PluginCovariances pc(p);
  CHECK(pc.var_p(0, 0) < 1e-20 * pc.var_theta(0, 0) + 1e-300);
}

TEST_CASE("confidence intervals use the normal quantile") {
  const UncenteredParams p = random_params(10, 6, 2, 404, 0.6);
  const PluginCovariances pc(p);
  const TargetSpec spec{TargetKind::AlphaDagger, 2, -1, -1};
  const ConfidenceInterval ci = confidence_interval(pc, spec, 0.95);
  CHECK(ci.center == doctest::Approx(p.alpha_dagger[2]));
  const double sd = std::sqrt(pc.cov_nu(2)(0, 0));
  CHECK(ci.half_width == doctest::Approx(1.959963984540054 * sd).epsilon(1e-9));

  // half-widths are monotone in the level
  const double w90 = confidence_interval(pc, spec, 0.90).half_width;
  const double w99 = confidence_interval(pc, spec, 0.99).half_width;
  CHECK(w90 < ci.half_width);
  CHECK(ci.half_width < w99);
}

TEST_CASE("quadrupling the variance doubles the width") {
  const UncenteredParams p = random_params(10, 6, 2, 405, 0.6);
  const PluginCovariances pc(p);
  const ConfidenceInterval ci = confidence_interval(pc, {TargetKind::Theta, 1, 1, -1}, 0.95);
  // duplicate-free direct check through the formula
  const double z = normal_quantile(0.975);
  CHECK(ci.half_width == doctest::Approx(z * std::sqrt(pc.var_theta(1, 1))).epsilon(1e-12));
  CHECK(2.0 * z * std::sqrt(pc.var_theta(1, 1)) ==
        doctest::Approx(z * std::sqrt(4.0 * pc.var_theta(1, 1))).epsilon(1e-12));
}

TEST_CASE("confidence ellipse geometry") {
  const UncenteredParams p = random_params(20, 8, 2, 11, 0.6);
  const PluginCovariances pc(p);
  const ConfidenceEllipse e = confidence_ellipse(pc, 3, 0.95);
  CHECK(e.radius2 == doctest::Approx(5.991464547107979).epsilon(1e-12));
  CHECK(e.center == p.Z.row(3).transpose());
  CHECK(e.shape.isApprox(pc.cov_nu(3).block(1, 1, 2, 2), 1e-14));

  // orientation agrees with the eigenvectors of the z-block
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(e.shape);
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  // boundary point along the major axis lies on the ellipse
  const Eigen::Vector2d x =
      e.center + std::sqrt(e.radius2 * eig.eigenvalues()[1]) * major;
  const double quad = (x - e.center).dot(e.shape.inverse() * (x - e.center));
  CHECK(quad == doctest::Approx(e.radius2).epsilon(1e-9));
}

TEST_CASE("isotropic shape gives a circle") {
  UncenteredParams p = flat_balanced_params(16, 4);
  p.Z.setZero();  // theta = 0 and F^T F = m I => z-block is (4/m) I
  const PluginCovariances pc(p);
  const ConfidenceEllipse e = confidence_ellipse(pc, 0, 0.95);
  const double c = 4.0 / 16.0;
  CHECK(e.shape.isApprox(c * Eigen::Matrix2d::Identity(), 1e-12));
  // radius of the circle is sqrt(5.991 * c)
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(e.shape);
  CHECK(std::sqrt(e.radius2 * eig.eigenvalues()[1]) ==
        doctest::Approx(std::sqrt(5.991464547107979 * c)).epsilon(1e-9));
}

TEST_CASE("ellipse requires K = 2") {
  const UncenteredParams p = random_params(10, 5, 3, 12, 0.5);
  const PluginCovariances pc(p);
  CHECK_THROWS_AS(confidence_ellipse(pc, 0, 0.95), DataError);
}

TEST_CASE("interval rows clip probability endpoints") {
  UncenteredParams p = random_params(10, 6, 2, 500, 0.4);
  p.alpha_dagger.array() += 4.0;  // push p toward 1 so the raw hi exceeds 1
  const PluginCovariances pc(p);
  const IntervalRow row = make_interval_row(pc, {TargetKind::Prob, 0, 0, -1}, 0.9999);
  CHECK(row.hi <= 1.0);
  CHECK(row.lo >= 0.0);
  // unclipped width recoverable from the variance column
  CHECK(row.variance > 0.0);
}

TEST_CASE("interval CSV shape") {
  const UncenteredParams p = random_params(3, 2, 2, 1, 0.4);
  const PluginCovariances pc(p);
  std::vector<IntervalRow> rows;
  rows.push_back(make_interval_row(pc, {TargetKind::AlphaDagger, 0, -1, -1}, 0.95));
  rows.push_back(make_interval_row(pc, {TargetKind::ZEntry, 1, -1, 1}, 0.95));
  rows.push_back(make_interval_row(pc, {TargetKind::FEntry, -1, 2, 0}, 0.95));
  const std::string csv = intervals_to_csv(rows);
  CHECK(csv.find("target,index,estimate,variance,lo,hi,level\n") == 0);
  CHECK(csv.find("alpha_dagger,1,") != std::string::npos);
  CHECK(csv.find("z,2:2,") != std::string::npos);
  CHECK(csv.find("f,3:1,") != std::string::npos);
}

TEST_CASE("ellipse exports are well-formed") {
  const UncenteredParams p = random_params(10, 6, 2, 2, 0.5);
  const PluginCovariances pc(p);
  std::vector<std::pair<int, ConfidenceEllipse>> es;
  es.emplace_back(1, confidence_ellipse(pc, 1, 0.95));
  es.emplace_back(4, confidence_ellipse(pc, 4, 0.95));
  const std::string json = ellipses_to_json(es);
  CHECK(json.find("\"vertex\":2") != std::string::npos);
  CHECK(json.find("\"radius2\":") != std::string::npos);
  const std::string svg = ellipses_to_svg(p.Z, es);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("<ellipse") != std::string::npos);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
}

}  // TEST_SUITE
