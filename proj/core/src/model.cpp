#include "hyperembed/model.hpp"

#include <algorithm>
#include <cmath>

#include "hyperembed/errors.hpp"
#include "hyperembed/jsonio.hpp"
#include "hyperembed/mathutil.hpp"

#include <nlohmann/json.hpp>

namespace hyperembed {

namespace {

void check_dims(const UncenteredParams& params, Eigen::Index rows, Eigen::Index cols) {
  if (params.F.cols() != params.Z.cols()) {
    throw DataError("embedding dimension mismatch between F and Z");
  }
  if (rows != params.m() || cols != params.n()) {
    throw DataError("incidence dimensions do not match parameters");
  }
}

}  // namespace

ModelParams center(const UncenteredParams& params) {
  ModelParams out;
  out.beta = params.alpha_dagger.mean();
  out.alpha = params.alpha_dagger.array() - out.beta;
  out.F = params.F;
  out.Z = params.Z;
  return out;
}

UncenteredParams uncenter(const ModelParams& params) {
  UncenteredParams out;
  out.alpha_dagger = params.alpha.array() + params.beta;
  out.F = params.F;
  out.Z = params.Z;
  return out;
}

double theta(const UncenteredParams& params, int j, int i) {
  return params.alpha_dagger[i] + params.F.row(j).dot(params.Z.row(i));
}

Eigen::MatrixXd theta_matrix(const UncenteredParams& params) {
  Eigen::MatrixXd th = params.F * params.Z.transpose();
  th.rowwise() += params.alpha_dagger.transpose();
  return th;
}

Eigen::MatrixXd theta_matrix(const ModelParams& params) {
  return theta_matrix(uncenter(params));
}

Eigen::VectorXd theta_row(const UncenteredParams& params, int j) {
  return params.alpha_dagger + params.Z * params.F.row(j).transpose();
}

Eigen::VectorXd theta_col(const UncenteredParams& params, int i) {
  return (params.F * params.Z.row(i).transpose()).array() + params.alpha_dagger[i];
}

double prob(const UncenteredParams& params, int j, int i) {
  return sigmoid(theta(params, j, i));
}

Eigen::MatrixXd prob_matrix(const UncenteredParams& params) {
  return sigmoid_matrix(theta_matrix(params));
}

double hyperlink_log_probability(const UncenteredParams& params, int j,
                                 std::span<const int> e) {
  const Eigen::VectorXd th = theta_row(params, j);
  // log p = theta - log(1+exp(theta)), log(1-p) = -log(1+exp(theta))
  double logp = 0.0;
  for (int i = 0; i < params.n(); ++i) logp -= log1pexp(th[i]);
  for (int i : e) {
    if (i < 0 || i >= params.n()) throw DataError("hyperlink member out of range");
    logp += th[i];
  }
  return logp;
}

double hyperlink_probability(const UncenteredParams& params, int j, std::span<const int> e) {
  return std::exp(hyperlink_log_probability(params, j, e));
}

double log_likelihood(const UncenteredParams& params, const Eigen::MatrixXd& y) {
  check_dims(params, y.rows(), y.cols());
  const Eigen::MatrixXd th = theta_matrix(params);
  return (y.array() * th.array()).sum() - log1pexp_sum(th);
}

double log_likelihood(const UncenteredParams& params, const IncidenceMatrix& y) {
  check_dims(params, y.m, y.n);
  const Eigen::MatrixXd th = theta_matrix(params);
  double acc = -log1pexp_sum(th);
  for (int j = 0; j < y.m; ++j) {
    for (int i : y.rows[j]) acc += th(j, i);
  }
  return acc;
}

Gradients gradient(const UncenteredParams& params, const Eigen::MatrixXd& y) {
  check_dims(params, y.rows(), y.cols());
  const Eigen::MatrixXd residual = y - prob_matrix(params);
  Gradients g;
  g.alpha_dagger = residual.colwise().sum().transpose();
  g.Z = residual.transpose() * params.F;
  g.F = residual * params.Z;
  return g;
}

Gradients gradient(const UncenteredParams& params, const IncidenceMatrix& y) {
  return gradient(params, y.to_dense());
}

double penalty(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& F, double lambda) {
  if (lambda <= 0.0) throw ConfigError("penalty weight lambda must be positive");
  const double m = static_cast<double>(F.rows());
  const double n = static_cast<double>(Z.rows());
  const double mn = m * n;
  const Eigen::MatrixXd gram_z = Z.transpose() * Z / n;
  const Eigen::MatrixXd gram_f = F.transpose() * F / m;
  const Eigen::VectorXd diag_gap = (gram_z - gram_f).diagonal();
  const Eigen::VectorXd f_mean = F.colwise().mean();
  return lambda * mn / 8.0 * diag_gap.squaredNorm() +
         lambda * mn / 2.0 * f_mean.squaredNorm() +
         lambda * mn / 2.0 * strict_lower(gram_f).squaredNorm() +
         lambda * mn / 2.0 * strict_lower(gram_z).squaredNorm();
}

PenaltyGradients penalty_gradient(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& F,
                                  double lambda) {
  if (lambda <= 0.0) throw ConfigError("penalty weight lambda must be positive");
  const double m = static_cast<double>(F.rows());
  const double n = static_cast<double>(Z.rows());
  const Eigen::MatrixXd gram_z = Z.transpose() * Z;  // unnormalized
  const Eigen::MatrixXd gram_f = F.transpose() * F;
  const Eigen::VectorXd diag_gap = gram_z.diagonal() / n - gram_f.diagonal() / m;
  const Eigen::VectorXd f_mean = F.colwise().mean();

  Eigen::MatrixXd off_z = gram_z / n;
  off_z.diagonal().setZero();
  Eigen::MatrixXd off_f = gram_f / m;
  off_f.diagonal().setZero();

  PenaltyGradients g;
  g.Z = lambda * m / 2.0 * (Z * diag_gap.asDiagonal()) + lambda * m * (Z * off_z);
  g.F = -lambda * n / 2.0 * (F * diag_gap.asDiagonal()) + lambda * n * (F * off_f);
  g.F.rowwise() += lambda * n * f_mean.transpose();
  return g;
}

namespace {

struct SymEig {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, sign-normalized
};

// Self-adjoint eigendecomposition sorted descending with a deterministic
// sign convention (first nonzero coefficient of each eigenvector positive).
SymEig sym_eig_descending(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition failed");
  }
  const int k = static_cast<int>(a.rows());
  SymEig out;
  out.values.resize(k);
  out.vectors.resize(k, k);
  for (int c = 0; c < k; ++c) {
    out.values[c] = solver.eigenvalues()[k - 1 - c];
    Eigen::VectorXd v = solver.eigenvectors().col(k - 1 - c);
    for (int r = 0; r < k; ++r) {
      if (v[r] != 0.0) {
        if (v[r] < 0.0) v = -v;
        break;
      }
    }
    out.vectors.col(c) = v;
  }
  return out;
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& a, const char* what) {
  const SymEig eig = sym_eig_descending(a);
  const double top = eig.values[0];
  if (!(top > 0.0) || eig.values.minCoeff() <= top * 1e-12) {
    throw RankDeficiencyError(std::string("singular Gram matrix in ") + what);
  }
  return eig.vectors * eig.values.array().sqrt().matrix().asDiagonal() *
         eig.vectors.transpose();
}

}  // namespace

TransformResult identifiability_transform(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Z,
                                          double gap_tol) {
  if (F.cols() != Z.cols()) throw DataError("embedding dimension mismatch between F and Z");
  const double m = static_cast<double>(F.rows());
  const double n = static_cast<double>(Z.rows());
  const int k = static_cast<int>(F.cols());
  if (k == 0) throw DataError("identifiability transform requires K >= 1");

  const Eigen::MatrixXd sqrt_gram_z = sym_sqrt(Z.transpose() * Z, "identifiability transform (Z)");
  const Eigen::MatrixXd gram_f = F.transpose() * F;

  const Eigen::MatrixXd w = sqrt_gram_z * gram_f * sqrt_gram_z / (m * n);
  const SymEig eig = sym_eig_descending(w);
  if (!(eig.values.maxCoeff() > 0.0) ||
      eig.values.minCoeff() <= eig.values.maxCoeff() * 1e-12) {
    throw RankDeficiencyError("singular Gram matrix in identifiability transform (F)");
  }

  TransformResult out;
  for (int c = 0; c + 1 < k; ++c) {
    if (eig.values[c] - eig.values[c + 1] <= gap_tol * eig.values[0]) {
      out.degenerate_spectrum = true;
    }
  }

  const Eigen::VectorXd quarter = eig.values.array().pow(-0.25);
  out.G = (sqrt_gram_z / std::sqrt(n)) * eig.vectors * quarter.asDiagonal();
  out.F = F * out.G;
  // Z * G^{-T} solved as (G^{-1} Z^T)^T to avoid forming the inverse.
  out.Z = out.G.partialPivLu().solve(Z.transpose()).transpose();

  const Eigen::MatrixXd gz = out.Z.transpose() * out.Z / n;
  const Eigen::MatrixXd gf = out.F.transpose() * out.F / m;
  out.diag_equality = (gz - gf).diagonal().norm();
  out.off_diag_F = strict_lower(gf).norm();
  out.off_diag_Z = strict_lower(gz).norm();
  out.f_centering = out.F.colwise().mean().norm();
  return out;
}

namespace {

Eigen::VectorXd sign_flips(const Eigen::MatrixXd& Z, const Eigen::MatrixXd* z_reference) {
  const int k = static_cast<int>(Z.cols());
  Eigen::VectorXd d = Eigen::VectorXd::Ones(k);
  if (z_reference != nullptr) {
    if (z_reference->rows() != Z.rows() || z_reference->cols() != Z.cols()) {
      throw DataError("sign_align reference shape mismatch");
    }
    for (int c = 0; c < k; ++c) {
      if (Z.col(c).dot(z_reference->col(c)) < 0.0) d[c] = -1.0;
    }
    return d;
  }
  for (int c = 0; c < k; ++c) {
    for (Eigen::Index r = 0; r < Z.rows(); ++r) {
      if (Z(r, c) != 0.0) {
        if (Z(r, c) < 0.0) d[c] = -1.0;
        break;
      }
    }
  }
  return d;
}

}  // namespace

UncenteredParams sign_align(const UncenteredParams& params, const Eigen::MatrixXd* z_reference) {
  const Eigen::VectorXd d = sign_flips(params.Z, z_reference);
  UncenteredParams out = params;
  out.Z = params.Z * d.asDiagonal();
  out.F = params.F * d.asDiagonal();
  return out;
}

ModelParams sign_align(const ModelParams& params, const Eigen::MatrixXd* z_reference) {
  const Eigen::VectorXd d = sign_flips(params.Z, z_reference);
  ModelParams out = params;
  out.Z = params.Z * d.asDiagonal();
  out.F = params.F * d.asDiagonal();
  return out;
}

std::string model_params_to_json(const ModelParams& params) {
  JsonWriter w;
  w.begin_object();
  w.field("beta", params.beta, false);
  w.field("alpha", params.alpha);
  w.field("F", params.F);
  w.field("Z", params.Z);
  w.field("K", params.k());
  w.end_object();
  return w.str();
}

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* key) {
  const auto& arr = j.at(key);
  if (!arr.is_array()) throw DataError(std::string("expected array for ") + key);
  const Eigen::Index rows = static_cast<Eigen::Index>(arr.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index cols = static_cast<Eigen::Index>(arr.at(0).size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = arr.at(r);
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError(std::string("ragged rows in ") + key);
    }
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = row.at(c).get<double>();
  }
  return out;
}

}  // namespace

ModelParams model_params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid params JSON: ") + e.what());
  }
  try {
    ModelParams params;
    params.beta = j.at("beta").get<double>();
    const auto& alpha = j.at("alpha");
    params.alpha.resize(static_cast<Eigen::Index>(alpha.size()));
    for (Eigen::Index i = 0; i < params.alpha.size(); ++i) {
      params.alpha[i] = alpha.at(i).get<double>();
    }
    params.F = matrix_from_json(j, "F");
    params.Z = matrix_from_json(j, "Z");
    const int k = j.at("K").get<int>();
    if (params.F.cols() != k || params.Z.cols() != k) {
      // 0-row matrices parse as 0x0; fix up their column count.
      if (params.F.rows() == 0) params.F.resize(0, k);
      if (params.Z.rows() == 0) params.Z.resize(0, k);
      if (params.F.cols() != k || params.Z.cols() != k) {
        throw DataError("params JSON: K does not match matrix shapes");
      }
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid params JSON: ") + e.what());
  }
}

}  // namespace hyperembed
