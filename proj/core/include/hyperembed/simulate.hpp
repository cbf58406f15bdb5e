#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hyperembed/estimator.hpp"
#include "hyperembed/hypergraph.hpp"
#include "hyperembed/model.hpp"

namespace hyperembed {

// Synthetic design: K near-equal vertex groups, embeddings from truncated
// Gaussians with AR(1) covariance 0.2 * rho^|i-j|, degree offsets from
// centered Uniform[-1,1], and a global order-adjusting intercept.
struct SimDesign {
  int n = 0;
  int m = 0;
  int k = 2;
  double rho = 0.0;
  double beta_star = 0.0;
  std::uint64_t seed = 0;
  int mc_reps = 1;

  void validate() const;
};

struct GroundTruth {
  ModelParams params;             // beta*, alpha*, F*, Z*
  Eigen::VectorXd alpha_dagger;   // beta* + alpha*
  Eigen::MatrixXd theta;          // m x n
};

GroundTruth gen_ground_truth(const SimDesign& design);

// Independent Bernoulli incidence y_ji ~ Bern(sigma(theta*_ji)).
Hypergraph gen_hypergraph(const GroundTruth& gt, std::uint64_t seed);

using Logger = std::function<void(const std::string&)>;

struct QuartileStat {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

QuartileStat quartiles(std::vector<double> values);

// ---- error scaling (F1 estimator) -----------------------------------------

struct ErrorScalingConfig {
  std::vector<int> n_grid;
  double m_ratio = 10.0;        // m = round(m_ratio * n) unless m_grid given
  std::vector<int> m_grid;      // optional, parallel to n_grid
  std::vector<int> k_grid{2};
  std::vector<double> beta_grid{-3.0};
  double rho = 0.0;
  int mc_reps = 20;
  std::uint64_t seed = 0;
  FitConfig fit;
  int threads = 1;
};

struct ErrorScalingCell {
  int n = 0, m = 0, k = 0;
  double beta_star = 0.0;
  double rho = 0.0;
  int reps = 0;    // successful reps
  int failed = 0;
  QuartileStat rel_theta;   // ||Theta_hat - Theta*||_F / sqrt(mn)
  QuartileStat alpha_err;   // ||alpha_hat - alpha*||_2 / sqrt(n)
  QuartileStat beta_err;    // |beta_hat - beta*|
};

std::vector<ErrorScalingCell> experiment_error_scaling(const ErrorScalingConfig& config,
                                                       const Logger& log = {});
std::string error_scaling_to_csv(const std::vector<ErrorScalingCell>& cells);

// ---- coverage (F2 estimator + plug-in inference) ---------------------------

struct CoverageConfig {
  std::vector<int> n_grid;  // m = n
  std::vector<double> beta_grid{0.0, -1.0};
  double level = 0.95;
  double rho = 0.0;
  int k = 2;
  int mc_reps = 100;
  std::uint64_t seed = 0;
  FitConfig fit;
  int threads = 1;
};

struct CoverageFamily {
  double coverage = 0.0;
  double mean_length = 0.0;
  long long count = 0;  // pooled (entry, rep) indicators
};

struct CoverageCell {
  int n = 0, m = 0;
  double beta_star = 0.0;
  double level = 0.0;
  int reps = 0;
  int failed = 0;
  CoverageFamily alpha_dagger, z, f, theta_diag, p_diag;
};

std::vector<CoverageCell> experiment_coverage(const CoverageConfig& config,
                                              const Logger& log = {});
std::string coverage_to_csv(const std::vector<CoverageCell>& cells);

// ---- sparsity phase transitions --------------------------------------------

enum class SparsityMode { ConstantOverN, PowerOverN };  // p=a/n vs p=n^eps/n

struct SparsityConfig {
  std::vector<int> n_grid;  // m = n
  SparsityMode mode = SparsityMode::ConstantOverN;
  double a = 0.5;
  double eps = 0.6;
  int mc_reps = 50;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SparsityCell {
  int n = 0, m = 0;
  double p = 0.0;
  int reps = 0;
  double frac_empty_link = 0.0;
  double frac_null_vertex = 0.0;
  double oracle_empty_link = 0.0;   // 1 - (1 - (1-p)^n)^m
  double oracle_null_vertex = 0.0;  // 1 - (1 - (1-p)^m)^n
};

std::vector<SparsityCell> experiment_sparsity(const SparsityConfig& config,
                                              const Logger& log = {});
std::string sparsity_to_csv(const std::vector<SparsityCell>& cells);

}  // namespace hyperembed
