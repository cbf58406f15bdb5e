#include <doctest.h>

#include <cmath>

#include "hyperembed/errors.hpp"
#include "hyperembed/mathutil.hpp"
#include "hyperembed/model.hpp"
#include "test_util.hpp"

using namespace hyperembed;
using hyperembed::testing::random_params;

namespace {

// Exhaustive oracle: total probability over all 2^n vertex subsets.
double enumerate_total_probability(const UncenteredParams& params, int j) {
  const int n = params.n();
  REQUIRE(n <= 12);
  double total = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> e;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) e.push_back(i);
    }
    total += hyperlink_probability(params, j, e);
  }
  return total;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("numeric kernels") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  CHECK(sigmoid(-3.0) == doctest::Approx(1.0 / (1.0 + std::exp(3.0))).epsilon(1e-14));
  for (double x : {50.0, -50.0, 500.0, -500.0, 800.0}) {
    const double s = sigmoid(x);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isfinite(log1pexp(x)));
  }
  CHECK(log1pexp(800.0) == doctest::Approx(800.0));
  CHECK(log1pexp(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(chi2_2_quantile(0.95) == doctest::Approx(5.991464547107979).epsilon(1e-12));
}

TEST_CASE("theta evaluates the affine-bilinear form") {
  UncenteredParams p;
  p.alpha_dagger = Eigen::VectorXd::Zero(1);
  p.F = Eigen::MatrixXd::Zero(1, 2);
  p.Z = Eigen::MatrixXd::Zero(1, 2);
  CHECK(theta(p, 0, 0) == 0.0);

  p.alpha_dagger[0] = -3.0;
  p.F << 1.0, 0.0;
  p.Z << 2.0, 0.0;
  CHECK(theta(p, 0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("theta matrix equals the entrywise loop") {
  const UncenteredParams p = random_params(5, 4, 2, 11);
  const Eigen::MatrixXd th = theta_matrix(p);
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 4; ++i) {
      CHECK(th(j, i) == doctest::Approx(theta(p, j, i)).epsilon(1e-14));
    }
  }
}

TEST_CASE("prob stays in (0,1) and matches the closed form") {
  UncenteredParams p;
  p.alpha_dagger = Eigen::VectorXd::Constant(1, -3.0);
  p.F = Eigen::MatrixXd::Zero(1, 1);
  p.Z = Eigen::MatrixXd::Zero(1, 1);
  CHECK(prob(p, 0, 0) == doctest::Approx(0.04742587317756678).epsilon(1e-12));

  p.alpha_dagger[0] = 0.0;
  CHECK(prob(p, 0, 0) == doctest::Approx(0.5));
}

TEST_CASE("hyperlink probability of independent fair coins") {
  UncenteredParams p;
  p.alpha_dagger = Eigen::VectorXd::Zero(2);
  p.F = Eigen::MatrixXd::Zero(1, 1);
  p.Z = Eigen::MatrixXd::Zero(2, 1);
  const std::vector<int> e{0};
  CHECK(hyperlink_probability(p, 0, e) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(hyperlink_probability(p, 0, std::vector<int>{}) ==
        doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("empty subset probability is the product of complements") {
  const UncenteredParams p = random_params(3, 6, 2, 21);
  double expected = 1.0;
  for (int i = 0; i < 6; ++i) expected *= 1.0 - prob(p, 1, i);
  CHECK(hyperlink_probability(p, 1, std::vector<int>{}) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("subset probabilities sum to one (exhaustive oracle)") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const int n = 3 + static_cast<int>(seed % 6);
    const UncenteredParams p = random_params(2, n, 2, 1000 + seed, 1.5);
    CHECK(enumerate_total_probability(p, 0) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("log likelihood closed forms") {
  UncenteredParams p;
  p.alpha_dagger = Eigen::VectorXd::Zero(4);
  p.F = Eigen::MatrixXd::Zero(3, 2);
  p.Z = Eigen::MatrixXd::Zero(4, 2);
  IncidenceMatrix y;
  y.m = 3;
  y.n = 4;
  y.rows = {{0, 1}, {}, {2}};
  CHECK(log_likelihood(p, y) == doctest::Approx(-12.0 * std::log(2.0)).epsilon(1e-13));

  UncenteredParams q;
  q.alpha_dagger = Eigen::VectorXd::Zero(2);
  q.F = Eigen::MatrixXd::Zero(1, 1);
  q.Z = Eigen::MatrixXd::Zero(2, 1);
  IncidenceMatrix y10;
  y10.m = 1;
  y10.n = 2;
  y10.rows = {{0}};
  CHECK(log_likelihood(q, y10) == doctest::Approx(std::log(0.25)).epsilon(1e-13));
}

TEST_CASE("log likelihood factorizes over hyperlinks") {
  const UncenteredParams p = random_params(3, 6, 2, 31);
  IncidenceMatrix y;
  y.m = 3;
  y.n = 6;
  y.rows = {{0, 2, 5}, {}, {1, 2, 3, 4}};
  double sum = 0.0;
  for (int j = 0; j < 3; ++j) sum += hyperlink_log_probability(p, j, y.rows[j]);
  CHECK(log_likelihood(p, y) == doctest::Approx(sum).epsilon(1e-10));
  CHECK(log_likelihood(p, y.to_dense()) == doctest::Approx(sum).epsilon(1e-10));
}

TEST_CASE("log likelihood is nonpositive") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const UncenteredParams p = random_params(4, 5, 2, 500 + seed, 2.0);
    const Eigen::MatrixXd y = hyperembed::testing::random_binary(4, 5, 0.4, 900 + seed);
    CHECK(log_likelihood(p, y) < 0.0);
  }
}

TEST_CASE("gradient closed forms") {
  UncenteredParams p;
  p.alpha_dagger = Eigen::VectorXd::Zero(4);
  p.F = Eigen::MatrixXd::Zero(6, 2);
  p.Z = Eigen::MatrixXd::Zero(4, 2);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(6, 4);
  const Gradients g = gradient(p, ones);
  CHECK(g.alpha_dagger.isApprox(Eigen::VectorXd::Constant(4, 3.0)));
  CHECK(g.F.isZero());
  CHECK(g.Z.isZero());
}

TEST_CASE("gradient vanishes at Y = P") {
  const UncenteredParams p = random_params(5, 4, 3, 77);
  const Gradients g = gradient(p, prob_matrix(p));
  CHECK(g.alpha_dagger.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.F.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.Z.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient matches central finite differences") {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    UncenteredParams p = random_params(6, 5, 2, 1234 + seed);
    const Eigen::MatrixXd y = hyperembed::testing::random_binary(6, 5, 0.45, 4321 + seed);
    const Gradients g = gradient(p, y);
    auto loglik = [&]() { return log_likelihood(p, y); };

    for (int i = 0; i < 5; ++i) {
      const double fd = hyperembed::testing::central_diff(loglik, p.alpha_dagger[i], h);
      CHECK(g.alpha_dagger[i] ==
            doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1e-8));
    }
    for (int j = 0; j < 6; ++j) {
      for (int c = 0; c < 2; ++c) {
        const double fd = hyperembed::testing::central_diff(loglik, p.F(j, c), h);
        CHECK(g.F(j, c) == doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1e-8));
      }
    }
    for (int i = 0; i < 5; ++i) {
      for (int c = 0; c < 2; ++c) {
        const double fd = hyperembed::testing::central_diff(loglik, p.Z(i, c), h);
        CHECK(g.Z(i, c) == doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1e-8));
      }
    }
  }
}

TEST_CASE("penalty vanishes exactly on the constraint set") {
  // identifiability transform output satisfies C1-C2; centering gives C3
  UncenteredParams p = random_params(8, 6, 2, 55);
  p.F.rowwise() -= p.F.colwise().mean();
  const TransformResult tr = identifiability_transform(p.F, p.Z);
  CHECK(penalty(tr.Z, tr.F, 1.0) < 1e-16 * 48);
}

TEST_CASE("penalty reduces to the centering term") {
  const int m = 4, n = 4;
  const double c = 0.5, lambda = 2.0;
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(m, 1, c);
  Eigen::MatrixXd z(n, 1);
  z << c, -c, c, -c;
  // diag equality holds, K=1 kills off-diagonal terms, only centering remains
  CHECK(penalty(z, f, lambda) ==
        doctest::Approx(lambda * m * n / 2.0 * c * c).epsilon(1e-14));
}

TEST_CASE("penalty gradient matches central finite differences") {
  const double h = 1e-5;
  const double lambda = 1.7;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    UncenteredParams p = random_params(8, 6, 2, 90 + seed);
    const PenaltyGradients g = penalty_gradient(p.Z, p.F, lambda);
    auto pen = [&]() { return -penalty(p.Z, p.F, lambda); };
    for (int j = 0; j < 8; ++j) {
      for (int c = 0; c < 2; ++c) {
        const double fd = -hyperembed::testing::central_diff(pen, p.F(j, c), h);
        CHECK(g.F(j, c) == doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1e-6));
      }
    }
    for (int i = 0; i < 6; ++i) {
      for (int c = 0; c < 2; ++c) {
        const double fd = -hyperembed::testing::central_diff(pen, p.Z(i, c), h);
        CHECK(g.Z(i, c) == doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1e-6));
      }
    }
  }
}

TEST_CASE("identifiability transform achieves the constraints") {
  const UncenteredParams raw = random_params(50, 40, 2, 808);
  Eigen::MatrixXd f = raw.F;
  f.rowwise() -= f.colwise().mean();
  const Eigen::MatrixXd product = f * raw.Z.transpose();
  const TransformResult tr = identifiability_transform(f, raw.Z);

  CHECK((tr.F * tr.Z.transpose() - product).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(tr.diag_equality < 1e-8);
  CHECK(tr.off_diag_F < 1e-8);
  CHECK(tr.off_diag_Z < 1e-8);
  CHECK(tr.f_centering < 1e-10);
  CHECK_FALSE(tr.degenerate_spectrum);

  const Eigen::MatrixXd gram_f = tr.F.transpose() * tr.F / 50.0;
  CHECK(gram_f(0, 0) > gram_f(1, 1));  // strictly decreasing diagonal
}

TEST_CASE("transform is a fixed point on constraint-satisfying input") {
  UncenteredParams p = random_params(30, 20, 2, 313);
  p.F.rowwise() -= p.F.colwise().mean();
  const TransformResult once = identifiability_transform(p.F, p.Z);
  const TransformResult twice = identifiability_transform(once.F, once.Z);
  // G is +-identity up to column signs
  Eigen::MatrixXd abs_g = twice.G.cwiseAbs();
  CHECK((abs_g - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("transform agrees with an independent 2x2 eigen oracle") {
  const UncenteredParams raw = random_params(50, 40, 2, 424);
  Eigen::MatrixXd f = raw.F;
  f.rowwise() -= f.colwise().mean();
  const Eigen::MatrixXd& z = raw.Z;

  // closed-form symmetric 2x2 eigendecomposition as the oracle
  auto eig2 = [](const Eigen::Matrix2d& s) {
    const double tr = s(0, 0) + s(1, 1);
    const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    Eigen::Vector2d vals(tr / 2.0 + disc, tr / 2.0 - disc);
    Eigen::Matrix2d vecs;
    for (int c = 0; c < 2; ++c) {
      Eigen::Vector2d v;
      if (std::abs(s(0, 1)) > 1e-14) {
        v << s(0, 1), vals[c] - s(0, 0);
      } else {
        v = Eigen::Vector2d::Unit(c);
      }
      v.normalize();
      for (int r = 0; r < 2; ++r) {
        if (v[r] != 0.0) {
          if (v[r] < 0.0) v = -v;
          break;
        }
      }
      vecs.col(c) = v;
    }
    return std::make_pair(vals, vecs);
  };

  const Eigen::Matrix2d gram_z = z.transpose() * z;
  auto [zvals, zvecs] = eig2(gram_z);
  const Eigen::Matrix2d sqrt_gram_z =
      zvecs * zvals.cwiseSqrt().asDiagonal() * zvecs.transpose();
  const Eigen::Matrix2d w = sqrt_gram_z * (f.transpose() * f) * sqrt_gram_z / (50.0 * 40.0);
  auto [wvals, wvecs] = eig2(w);
  const Eigen::Matrix2d g_oracle = (sqrt_gram_z / std::sqrt(40.0)) * wvecs *
                                   wvals.array().pow(-0.25).matrix().asDiagonal();

  const TransformResult tr = identifiability_transform(f, z);
  // same up to column signs
  for (int c = 0; c < 2; ++c) {
    const double same = (tr.G.col(c) - g_oracle.col(c)).norm();
    const double flipped = (tr.G.col(c) + g_oracle.col(c)).norm();
    CHECK(std::min(same, flipped) < 1e-8);
  }
}

TEST_CASE("transform rejects rank-deficient input") {
  UncenteredParams p = random_params(10, 8, 2, 5);
  p.F.col(1) = p.F.col(0);  // rank one
  p.F.rowwise() -= p.F.colwise().mean();
  CHECK_THROWS_AS(identifiability_transform(p.F, p.Z), RankDeficiencyError);
}

TEST_CASE("sign convention flips negative leading coordinates") {
  UncenteredParams p = random_params(4, 3, 2, 62);
  p.Z(0, 0) = -0.3;
  p.Z(0, 1) = 0.2;
  const UncenteredParams aligned = sign_align(p);
  CHECK(aligned.Z(0, 0) == doctest::Approx(0.3));
  CHECK(aligned.Z(0, 1) == doctest::Approx(0.2));
  CHECK(aligned.F.col(0) == -p.F.col(0));
  CHECK(aligned.F.col(1) == p.F.col(1));
  // product invariance
  CHECK((aligned.F * aligned.Z.transpose()).isApprox(p.F * p.Z.transpose(), 1e-14));
}

TEST_CASE("sign_align is idempotent") {
  const UncenteredParams p = random_params(4, 3, 2, 63);
  const UncenteredParams once = sign_align(p);
  const UncenteredParams twice = sign_align(once);
  CHECK(once.Z == twice.Z);
  CHECK(once.F == twice.F);
}

TEST_CASE("sign_align recovers a planted sign matrix against a reference") {
  for (unsigned pattern = 0; pattern < 8; ++pattern) {
    const UncenteredParams p = random_params(5, 4, 3, 100 + pattern);
    Eigen::Vector3d d;
    for (int c = 0; c < 3; ++c) d[c] = (pattern & (1u << c)) ? -1.0 : 1.0;
    UncenteredParams flipped = p;
    flipped.Z = p.Z * d.asDiagonal();
    flipped.F = p.F * d.asDiagonal();
    const UncenteredParams aligned = sign_align(flipped, &p.Z);
    CHECK(aligned.Z.isApprox(p.Z, 1e-14));
    CHECK(aligned.F.isApprox(p.F, 1e-14));

    // oracle: exhaustive search over all sign patterns agrees
    double best = 1e300;
    Eigen::Vector3d best_d;
    for (unsigned q = 0; q < 8; ++q) {
      Eigen::Vector3d dq;
      for (int c = 0; c < 3; ++c) dq[c] = (q & (1u << c)) ? -1.0 : 1.0;
      const double err = (flipped.Z * dq.asDiagonal() - p.Z).norm();
      if (err < best) {
        best = err;
        best_d = dq;
      }
    }
    CHECK((flipped.Z * best_d.asDiagonal()).isApprox(aligned.Z, 1e-14));
  }
}

TEST_CASE("sign convention walks past exact zeros") {
  UncenteredParams p = random_params(3, 3, 1, 8);
  p.Z(0, 0) = 0.0;
  p.Z(1, 0) = -2.0;
  const UncenteredParams aligned = sign_align(p);
  CHECK(aligned.Z(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("centered and uncentered parameterizations convert exactly") {
  const UncenteredParams p = random_params(6, 5, 2, 9);
  const ModelParams c = center(p);
  CHECK(std::abs(c.alpha.sum()) < 1e-12);
  const UncenteredParams back = uncenter(c);
  CHECK(back.alpha_dagger.isApprox(p.alpha_dagger, 1e-14));
  CHECK(c.beta == doctest::Approx(p.alpha_dagger.mean()));
}

TEST_CASE("params JSON round-trips bit-exactly") {
  UncenteredParams p = random_params(4, 3, 2, 10);
  const ModelParams c = center(p);
  const std::string json = model_params_to_json(c);
  const ModelParams back = model_params_from_json(json);
  CHECK(back.beta == c.beta);
  CHECK(back.alpha == c.alpha);
  CHECK(back.F == c.F);
  CHECK(back.Z == c.Z);
}

}  // TEST_SUITE
