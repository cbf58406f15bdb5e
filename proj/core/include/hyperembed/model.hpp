#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>

#include "hyperembed/hypergraph.hpp"

namespace hyperembed {

// Centered parameterization: theta_ji = beta + alpha_i + f_j . z_i with
// sum(alpha) = 0 and column-centered F.
struct ModelParams {
  double beta = 0.0;
  Eigen::VectorXd alpha;  // length n
  Eigen::MatrixXd F;      // m x K, rows are hyperlink embeddings
  Eigen::MatrixXd Z;      // n x K, rows are vertex embeddings

  int n() const { return static_cast<int>(alpha.size()); }
  int m() const { return static_cast<int>(F.rows()); }
  int k() const { return static_cast<int>(Z.cols()); }
};

// Un-centered vertex degrees: alpha_dagger_i = beta + alpha_i. The form used
// by the entry-wise estimator and all inference formulas.
struct UncenteredParams {
  Eigen::VectorXd alpha_dagger;  // length n
  Eigen::MatrixXd F;             // m x K
  Eigen::MatrixXd Z;             // n x K

  int n() const { return static_cast<int>(alpha_dagger.size()); }
  int m() const { return static_cast<int>(F.rows()); }
  int k() const { return static_cast<int>(Z.cols()); }
};

struct PenaltyWeights {
  double lambda = 1.0;
};

// Exact conversions: beta = mean(alpha_dagger), alpha = alpha_dagger - beta.
ModelParams center(const UncenteredParams& params);
UncenteredParams uncenter(const ModelParams& params);

double theta(const UncenteredParams& params, int j, int i);
Eigen::MatrixXd theta_matrix(const UncenteredParams& params);
Eigen::MatrixXd theta_matrix(const ModelParams& params);

// theta values of one hyperlink row: alpha_dagger + Z f_j.
Eigen::VectorXd theta_row(const UncenteredParams& params, int j);
// theta values of one vertex column: alpha_dagger_i + F z_i.
Eigen::VectorXd theta_col(const UncenteredParams& params, int i);

double prob(const UncenteredParams& params, int j, int i);
Eigen::MatrixXd prob_matrix(const UncenteredParams& params);

// log P(E_j = e) for a vertex subset e, accumulated in log space.
double hyperlink_log_probability(const UncenteredParams& params, int j, std::span<const int> e);
double hyperlink_probability(const UncenteredParams& params, int j, std::span<const int> e);

double log_likelihood(const UncenteredParams& params, const IncidenceMatrix& y);
// Core form on a dense observation matrix; y entries may be real-valued,
// which the gradient checks exploit.
double log_likelihood(const UncenteredParams& params, const Eigen::MatrixXd& y);

struct Gradients {
  Eigen::VectorXd alpha_dagger;  // length n
  Eigen::MatrixXd Z;             // n x K
  Eigen::MatrixXd F;             // m x K
};

Gradients gradient(const UncenteredParams& params, const IncidenceMatrix& y);
Gradients gradient(const UncenteredParams& params, const Eigen::MatrixXd& y);

// Lagrangian penalty enforcing the identifiability constraints: equal
// diagonal Gram matrices, vanishing off-diagonals, column-centered F.
double penalty(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& F, double lambda);

struct PenaltyGradients {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd F;
};

PenaltyGradients penalty_gradient(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& F,
                                  double lambda);

struct TransformResult {
  Eigen::MatrixXd F;  // F * G
  Eigen::MatrixXd Z;  // Z * G^{-T}
  Eigen::MatrixXd G;
  double diag_equality = 0.0;   // ||diag(Z'Z'/n - F'F'/m)||_F
  double off_diag_F = 0.0;      // ||strict lower of F'F'/m||_F
  double off_diag_Z = 0.0;      // ||strict lower of Z'Z'/n||_F
  double f_centering = 0.0;     // ||F'^T 1_m / m||_2
  bool degenerate_spectrum = false;
};

// Maps (F, Z) onto the identified representative: Gram matrices become equal
// and diagonal with strictly decreasing diagonal while F Z^T is unchanged.
// F must be column-centered on entry. Throws RankDeficiencyError when either
// Gram matrix is numerically singular; near-equal spectral gaps only set the
// degenerate_spectrum flag.
TransformResult identifiability_transform(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Z,
                                          double gap_tol = 1e-10);

// Joint column sign flips. Default convention: first vertex embedding has
// nonnegative coordinates (first nonzero row decides when Z(0,k) == 0).
// With a reference, the flips minimize ||Z D - Z_ref||_F per column.
UncenteredParams sign_align(const UncenteredParams& params,
                            const Eigen::MatrixXd* z_reference = nullptr);
ModelParams sign_align(const ModelParams& params, const Eigen::MatrixXd* z_reference = nullptr);

// JSON with keys beta, alpha, F, Z, K (row-major nested arrays, 17
// significant digits).
std::string model_params_to_json(const ModelParams& params);
ModelParams model_params_from_json(const std::string& text);

}  // namespace hyperembed
