#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperembed/hypergraph.hpp"
#include "hyperembed/model.hpp"

namespace hyperembed {

struct FitConfig {
  int k = 2;              // latent dimension
  double c_prime = 1.5;   // multiplier C' for the C_beta tuning rule
  double c1 = 3.0;        // F1 bound on |alpha_i|, ||z_i||, ||f_j||
  double c2 = 1.0;        // F1 upper bound on beta
  double c3_prime = 0.9;  // F2 upper bound factor, C3 = -C3' * C_beta
  double c4 = 2.0;        // F2 bound on centered alpha-dagger deviations
  double c5 = 3.0;        // F2 bound on embedding row norms; the Gram-balanced
                          // representative of K-group designs needs > 2.3
  double lambda = 1.0;    // Lagrangian penalty weight
  double step = 1.0;      // initial/maximal step size
  double armijo_shrink = 0.5;
  double armijo_slope = 1e-4;
  double tol = 1e-8;      // relative objective change for stopping
  int max_iters = 2000;
  std::uint64_t seed = 0;
  double usvt_mult = 2.01;  // singular value threshold multiplier

  void validate() const;
};

// Feasible band for the un-centered parameterization. The strict form keeps
// the theoretical upper bound -C3'*C_beta on mean(alpha_dagger), which is
// negative by construction and infeasible for dense data (beta* near 0).
// The fit band swaps in the C2 upper bound used for beta elsewhere; the
// choice of the upper constant is known to be flexible in practice.
struct F2Bounds {
  double c_beta = 0.0;
  double mean_lo = 0.0;
  double mean_hi = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;

  static F2Bounds strict(double c_beta, double c3_prime, double c4, double c5);
  static F2Bounds for_fit(double c_beta, const FitConfig& config);
};

struct F1Bounds {
  double c_beta = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

UncenteredParams project_f2(const UncenteredParams& params, const F2Bounds& bounds);
// Spec-style call sites: strict band derived from (c_beta, c3_prime, c4, c5).
UncenteredParams project_f2(const UncenteredParams& params, double c_beta, double c3_prime,
                            double c4, double c5);
ModelParams project_f1(const ModelParams& params, const F1Bounds& bounds);

// Largest constraint violation (0 on feasible points); ignores F centering,
// which is not part of the F2 region proper.
double f2_violation(const UncenteredParams& params, const F2Bounds& bounds);
double f1_violation(const ModelParams& params, const F1Bounds& bounds);

struct TuneResult {
  double c_beta = 0.0;  // C' * C_hat
  double c_hat = 0.0;   // -log(density); point estimate of -beta*
};

TuneResult tune_c_beta(const IncidenceMatrix& y, double c_prime);

// Spectral initialization: singular value thresholding of Y, entrywise
// clipping, logit transform, then a degree/low-rank split of the logits.
UncenteredParams usvt_init(const IncidenceMatrix& y, int k, double c_beta);
UncenteredParams usvt_init(const IncidenceMatrix& y, int k, double c_beta,
                           const F2Bounds& bounds, double usvt_mult);

struct ConstraintResiduals {
  double diag_equality = 0.0;
  double off_diag_F = 0.0;
  double off_diag_Z = 0.0;
  double F_centering = 0.0;
};

struct FitResult {
  UncenteredParams params;      // after identifiability transform + sign fix
  ModelParams params_centered;  // exact reparameterization of params
  double c_beta = 0.0;
  double c_hat = 0.0;
  std::vector<double> objective_trace;  // penalized objective per accepted step
  ConstraintResiduals constraint_residuals;
  double penalty_value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool transform_applied = false;
  bool degenerate_spectrum = false;
  double mean_lo = 0.0;  // band enforced for mean(alpha_dagger)
  double mean_hi = 0.0;
  double max_iterate_violation = 0.0;  // worst feasibility residual along the path

  int m() const { return params.m(); }
  int n() const { return params.n(); }
  int k() const { return params.k(); }
};

// Penalized CMLE over the F2 band: tune, initialize, projected gradient
// ascent with Armijo backtracking on L - P, then finalize with the
// identifiability transform and the sign convention.
FitResult fit(const IncidenceMatrix& y, const FitConfig& config);

// Same ascent from a caller-supplied starting point (projected onto the fit
// band first). fit() is fit_from() started at the USVT initializer.
FitResult fit_from(const IncidenceMatrix& y, const FitConfig& config,
                   const UncenteredParams& init);

// The F1 estimator in the (beta, alpha, F, Z) parameterization; no penalty
// and no identifiability transform. Used by the error-scaling experiments.
FitResult fit_f1(const IncidenceMatrix& y, const FitConfig& config);

std::string fit_result_to_json(const FitResult& result);
FitResult fit_result_from_json(const std::string& text);

}  // namespace hyperembed
