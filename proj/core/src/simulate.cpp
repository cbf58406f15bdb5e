#include "hyperembed/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hyperembed/errors.hpp"
#include "hyperembed/inference.hpp"
#include "hyperembed/jsonio.hpp"
#include "hyperembed/mathutil.hpp"
#include "hyperembed/parallel.hpp"
#include "hyperembed/rng.hpp"

namespace hyperembed {

void SimDesign::validate() const {
  if (n < 1 || m < 1) throw ConfigError("simulation sizes must be positive");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must be in [0,1)");
  if (mc_reps < 1) throw ConfigError("mc_reps must be >= 1");
}

namespace {

Eigen::MatrixXd ar_covariance(int k, double rho) {
  Eigen::MatrixXd sigma(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) sigma(a, b) = 0.2 * std::pow(rho, std::abs(a - b));
  }
  return sigma;
}

// Draw from N(mu, sigma) restricted to the box mu +- 1 per coordinate:
// correlated draw first, joint rejection if any coordinate leaves the band.
Eigen::VectorXd truncated_gaussian(Rng& rng, const Eigen::VectorXd& mu,
                                   const Eigen::MatrixXd& chol) {
  const int k = static_cast<int>(mu.size());
  Eigen::VectorXd u(k);
  for (;;) {
    for (int c = 0; c < k; ++c) u[c] = rng.normal();
    Eigen::VectorXd x = mu + chol * u;
    if (((x - mu).cwiseAbs().array() <= 1.0).all()) return x;
  }
}

}  // namespace

GroundTruth gen_ground_truth(const SimDesign& design) {
  design.validate();
  Rng rng(design.seed);
  const Eigen::MatrixXd sigma = ar_covariance(design.k, design.rho);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();

  GroundTruth gt;
  gt.params.beta = design.beta_star;
  gt.params.Z.resize(design.n, design.k);
  gt.params.F.resize(design.m, design.k);

  // K near-equal groups; the first n % k groups take the extra vertex.
  const int base = design.n / design.k;
  const int extra = design.n % design.k;
  int row = 0;
  for (int g = 0; g < design.k; ++g) {
    const int size = base + (g < extra ? 1 : 0);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(design.k);
    mu[g] = 1.0;
    for (int s = 0; s < size; ++s, ++row) {
      gt.params.Z.row(row) = truncated_gaussian(rng, mu, chol).transpose();
    }
  }

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(design.k);
  for (int j = 0; j < design.m; ++j) {
    gt.params.F.row(j) = truncated_gaussian(rng, zero, chol).transpose();
  }
  gt.params.F.rowwise() -= gt.params.F.colwise().mean();  // exact centering

  gt.params.alpha.resize(design.n);
  for (int i = 0; i < design.n; ++i) gt.params.alpha[i] = rng.uniform(-1.0, 1.0);
  gt.params.alpha.array() -= gt.params.alpha.mean();

  gt.alpha_dagger = gt.params.alpha.array() + gt.params.beta;
  gt.theta = gt.params.F * gt.params.Z.transpose();
  gt.theta.rowwise() += gt.alpha_dagger.transpose();
  return gt;
}

Hypergraph gen_hypergraph(const GroundTruth& gt, std::uint64_t seed) {
  Rng rng(seed);
  const Eigen::MatrixXd p = sigmoid_matrix(gt.theta);
  Hypergraph hg;
  hg.n = static_cast<int>(p.cols());
  hg.links.resize(p.rows());
  for (Eigen::Index j = 0; j < p.rows(); ++j) {
    auto& link = hg.links[j];
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
      if (rng.bernoulli(p(j, i))) link.push_back(static_cast<int>(i));
    }
  }
  return hg;
}

QuartileStat quartiles(std::vector<double> values) {
  QuartileStat out;
  if (values.empty()) {
    out.median = out.q25 = out.q75 = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::sort(values.begin(), values.end());
  auto interp = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  out.q25 = interp(0.25);
  out.median = interp(0.5);
  out.q75 = interp(0.75);
  return out;
}

// ---- error scaling ----------------------------------------------------------

std::vector<ErrorScalingCell> experiment_error_scaling(const ErrorScalingConfig& config,
                                                       const Logger& log) {
  if (config.n_grid.empty()) throw ConfigError("error-scaling experiment needs a nonempty n grid");
  if (!config.m_grid.empty() && config.m_grid.size() != config.n_grid.size()) {
    throw ConfigError("m_grid must be parallel to n_grid");
  }
  if (config.mc_reps < 1) throw ConfigError("mc_reps must be >= 1");

  std::vector<ErrorScalingCell> cells;
  std::uint64_t cell_index = 0;
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    const int n = config.n_grid[ni];
    const int m = config.m_grid.empty()
                      ? static_cast<int>(std::lround(config.m_ratio * n))
                      : config.m_grid[ni];
    for (int k : config.k_grid) {
      for (double beta : config.beta_grid) {
        const std::uint64_t cell_seed = child_seed(config.seed, cell_index++);
        ErrorScalingCell cell;
        cell.n = n;
        cell.m = m;
        cell.k = k;
        cell.beta_star = beta;
        cell.rho = config.rho;

        std::vector<double> rel_theta(config.mc_reps,
                                      std::numeric_limits<double>::quiet_NaN());
        std::vector<double> alpha_err = rel_theta, beta_err = rel_theta;
        std::vector<char> ok(config.mc_reps, 0);

        parallel_for(config.mc_reps, config.threads, [&](int rep) {
          try {
            SimDesign design;
            design.n = n;
            design.m = m;
            design.k = k;
            design.rho = config.rho;
            design.beta_star = beta;
            design.seed = child_seed(cell_seed, static_cast<std::uint64_t>(rep) * 2);
            const GroundTruth gt = gen_ground_truth(design);
            const Hypergraph hg =
                gen_hypergraph(gt, child_seed(cell_seed, static_cast<std::uint64_t>(rep) * 2 + 1));
            FitConfig fc = config.fit;
            fc.k = k;
            const FitResult fr = fit_f1(incidence(hg), fc);
            const Eigen::MatrixXd theta_hat = theta_matrix(fr.params);
            rel_theta[rep] = (theta_hat - gt.theta).norm() /
                             std::sqrt(static_cast<double>(m) * n);
            alpha_err[rep] = (fr.params_centered.alpha - gt.params.alpha).norm() /
                             std::sqrt(static_cast<double>(n));
            beta_err[rep] = std::abs(fr.params_centered.beta - gt.params.beta);
            ok[rep] = 1;
          } catch (const std::exception&) {
            ok[rep] = 0;
          }
        });

        std::vector<double> rt, ae, be;
        for (int rep = 0; rep < config.mc_reps; ++rep) {
          if (!ok[rep]) continue;
          rt.push_back(rel_theta[rep]);
          ae.push_back(alpha_err[rep]);
          be.push_back(beta_err[rep]);
        }
        cell.reps = static_cast<int>(rt.size());
        cell.failed = config.mc_reps - cell.reps;
        cell.rel_theta = quartiles(std::move(rt));
        cell.alpha_err = quartiles(std::move(ae));
        cell.beta_err = quartiles(std::move(be));
        cells.push_back(cell);
        if (log) {
          std::ostringstream msg;
          msg << "error-scaling cell n=" << n << " m=" << m << " k=" << k << " beta=" << beta
              << " median_rel_theta=" << cell.rel_theta.median << " reps=" << cell.reps;
          log(msg.str());
        }
      }
    }
  }
  return cells;
}

std::string error_scaling_to_csv(const std::vector<ErrorScalingCell>& cells) {
  std::ostringstream out;
  out << "n,m,K,beta_star,rho,metric,median,q25,q75,reps\n";
  auto emit = [&](const ErrorScalingCell& c, const char* metric, const QuartileStat& s) {
    out << c.n << ',' << c.m << ',' << c.k << ',' << json_double(c.beta_star) << ','
        << json_double(c.rho) << ',' << metric << ',' << json_double(s.median) << ','
        << json_double(s.q25) << ',' << json_double(s.q75) << ',' << c.reps << '\n';
  };
  for (const auto& c : cells) {
    emit(c, "rel_theta_fro", c.rel_theta);
    emit(c, "alpha_l2_over_sqrt_n", c.alpha_err);
    emit(c, "beta_abs", c.beta_err);
  }
  return out.str();
}

// ---- coverage ---------------------------------------------------------------

namespace {

struct CoverageSums {
  long long covered = 0;
  long long total = 0;
  double length_sum = 0.0;

  void add(bool cover, double length) {
    covered += cover ? 1 : 0;
    ++total;
    length_sum += length;
  }
  void merge(const CoverageSums& o) {
    covered += o.covered;
    total += o.total;
    length_sum += o.length_sum;
  }
  CoverageFamily finish() const {
    CoverageFamily f;
    f.count = total;
    f.coverage = total > 0 ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
    f.mean_length = total > 0 ? length_sum / static_cast<double>(total) : 0.0;
    return f;
  }
};

struct RepCoverage {
  CoverageSums alpha, z, f, theta, p;
  bool ok = false;
};

}  // namespace

std::vector<CoverageCell> experiment_coverage(const CoverageConfig& config, const Logger& log) {
  if (config.n_grid.empty()) throw ConfigError("coverage experiment needs a nonempty n grid");
  if (!(config.level > 0.0 && config.level < 1.0)) {
    throw ConfigError("coverage level must be in (0,1)");
  }
  if (config.mc_reps < 1) throw ConfigError("mc_reps must be >= 1");

  const double zq = normal_quantile(0.5 * (1.0 + config.level));
  std::vector<CoverageCell> cells;
  std::uint64_t cell_index = 0;
  for (int n : config.n_grid) {
    for (double beta : config.beta_grid) {
      const std::uint64_t cell_seed = child_seed(config.seed, cell_index++);
      SimDesign design;
      design.n = n;
      design.m = n;
      design.k = config.k;
      design.rho = config.rho;
      design.beta_star = beta;
      design.seed = cell_seed;

      // Fixed truth per cell; only the incidence is redrawn. The estimand
      // for embeddings is the identified representative of (F*, Z*).
      const GroundTruth gt = gen_ground_truth(design);
      const TransformResult ident = identifiability_transform(gt.params.F, gt.params.Z);
      const Eigen::MatrixXd z_star = ident.Z;
      const Eigen::MatrixXd f_star = ident.F;
      const int diag = std::min(design.m, design.n);

      std::vector<RepCoverage> reps(config.mc_reps);
      parallel_for(config.mc_reps, config.threads, [&](int rep) {
        RepCoverage& rc = reps[rep];
        try {
          const Hypergraph hg = gen_hypergraph(gt, child_seed(cell_seed, rep + 1));
          FitConfig fc = config.fit;
          fc.k = config.k;
          const FitResult fr = fit(incidence(hg), fc);
          if (!fr.transform_applied) return;
          const UncenteredParams aligned = sign_align(fr.params, &z_star);
          const PluginCovariances pc(aligned);

          for (int i = 0; i < design.n; ++i) {
            const double hw = zq * std::sqrt(pc.cov_nu(i)(0, 0));
            rc.alpha.add(std::abs(aligned.alpha_dagger[i] - gt.alpha_dagger[i]) <= hw,
                         2.0 * hw);
            for (int c = 0; c < config.k; ++c) {
              const double hwz = zq * std::sqrt(pc.cov_nu(i)(c + 1, c + 1));
              rc.z.add(std::abs(aligned.Z(i, c) - z_star(i, c)) <= hwz, 2.0 * hwz);
            }
          }
          for (int j = 0; j < design.m; ++j) {
            for (int c = 0; c < config.k; ++c) {
              const double hwf = zq * std::sqrt(pc.cov_f(j)(c, c));
              rc.f.add(std::abs(aligned.F(j, c) - f_star(j, c)) <= hwf, 2.0 * hwf);
            }
          }
          for (int d = 0; d < diag; ++d) {
            const double th_hat = theta(aligned, d, d);
            const double hwt = zq * std::sqrt(pc.var_theta(d, d));
            rc.theta.add(std::abs(th_hat - gt.theta(d, d)) <= hwt, 2.0 * hwt);
            const double p_hat = sigmoid(th_hat);
            const double hwp = zq * std::sqrt(pc.var_p(d, d));
            rc.p.add(std::abs(p_hat - sigmoid(gt.theta(d, d))) <= hwp, 2.0 * hwp);
          }
          rc.ok = true;
        } catch (const std::exception&) {
          rc.ok = false;
        }
      });

      CoverageCell cell;
      cell.n = n;
      cell.m = n;
      cell.beta_star = beta;
      cell.level = config.level;
      CoverageSums alpha, z, f, theta_sums, p;
      for (const auto& rc : reps) {
        if (!rc.ok) {
          ++cell.failed;
          continue;
        }
        ++cell.reps;
        alpha.merge(rc.alpha);
        z.merge(rc.z);
        f.merge(rc.f);
        theta_sums.merge(rc.theta);
        p.merge(rc.p);
      }
      cell.alpha_dagger = alpha.finish();
      cell.z = z.finish();
      cell.f = f.finish();
      cell.theta_diag = theta_sums.finish();
      cell.p_diag = p.finish();
      cells.push_back(cell);
      if (log) {
        std::ostringstream msg;
        msg << "coverage cell n=" << n << " beta=" << beta
            << " alpha_cov=" << cell.alpha_dagger.coverage << " z_cov=" << cell.z.coverage
            << " f_cov=" << cell.f.coverage << " theta_cov=" << cell.theta_diag.coverage
            << " reps=" << cell.reps;
        log(msg.str());
      }
    }
  }
  return cells;
}

std::string coverage_to_csv(const std::vector<CoverageCell>& cells) {
  std::ostringstream out;
  out << "n,m,beta_star,level,family,coverage,mean_length,count,reps\n";
  auto emit = [&](const CoverageCell& c, const char* family, const CoverageFamily& f) {
    out << c.n << ',' << c.m << ',' << json_double(c.beta_star) << ','
        << json_double(c.level) << ',' << family << ',' << json_double(f.coverage) << ','
        << json_double(f.mean_length) << ',' << f.count << ',' << c.reps << '\n';
  };
  for (const auto& c : cells) {
    emit(c, "alpha_dagger", c.alpha_dagger);
    emit(c, "z", c.z);
    emit(c, "f", c.f);
    emit(c, "theta_diag", c.theta_diag);
    emit(c, "p_diag", c.p_diag);
  }
  return out.str();
}

// ---- sparsity ---------------------------------------------------------------

std::vector<SparsityCell> experiment_sparsity(const SparsityConfig& config, const Logger& log) {
  if (config.n_grid.empty()) throw ConfigError("sparsity experiment needs a nonempty n grid");
  if (config.mc_reps < 1) throw ConfigError("mc_reps must be >= 1");

  std::vector<SparsityCell> cells;
  std::uint64_t cell_index = 0;
  for (int n : config.n_grid) {
    const int m = n;
    double p = 0.0;
    switch (config.mode) {
      case SparsityMode::ConstantOverN: p = config.a / n; break;
      case SparsityMode::PowerOverN: p = std::pow(n, config.eps) / n; break;
    }
    p = std::min(p, 1.0);
    const std::uint64_t cell_seed = child_seed(config.seed, cell_index++);

    std::vector<char> empty_link(config.mc_reps, 0), null_vertex(config.mc_reps, 0);
    parallel_for(config.mc_reps, config.threads, [&](int rep) {
      Rng rng(child_seed(cell_seed, rep));
      std::vector<char> vertex_seen(n, 0);
      bool any_empty = false;
      for (int j = 0; j < m; ++j) {
        bool row_empty = true;
        for (int i = 0; i < n; ++i) {
          if (rng.bernoulli(p)) {
            row_empty = false;
            vertex_seen[i] = 1;
          }
        }
        any_empty = any_empty || row_empty;
      }
      empty_link[rep] = any_empty ? 1 : 0;
      null_vertex[rep] =
          std::any_of(vertex_seen.begin(), vertex_seen.end(), [](char c) { return !c; }) ? 1
                                                                                         : 0;
    });

    SparsityCell cell;
    cell.n = n;
    cell.m = m;
    cell.p = p;
    cell.reps = config.mc_reps;
    cell.frac_empty_link =
        static_cast<double>(std::count(empty_link.begin(), empty_link.end(), 1)) /
        config.mc_reps;
    cell.frac_null_vertex =
        static_cast<double>(std::count(null_vertex.begin(), null_vertex.end(), 1)) /
        config.mc_reps;
    // P(at least one all-zero row) with q = (1-p)^n per row
    const double log_q_link = n * std::log1p(-p);
    cell.oracle_empty_link = -std::expm1(m * std::log1p(-std::exp(log_q_link)));
    const double log_q_vertex = m * std::log1p(-p);
    cell.oracle_null_vertex = -std::expm1(n * std::log1p(-std::exp(log_q_vertex)));
    cells.push_back(cell);
    if (log) {
      std::ostringstream msg;
      msg << "sparsity cell n=" << n << " p=" << p << " empty_frac=" << cell.frac_empty_link
          << " oracle=" << cell.oracle_empty_link;
      log(msg.str());
    }
  }
  return cells;
}

std::string sparsity_to_csv(const std::vector<SparsityCell>& cells) {
  std::ostringstream out;
  out << "n,m,p,reps,frac_empty_link,frac_null_vertex,oracle_empty_link,oracle_null_vertex\n";
  for (const auto& c : cells) {
    out << c.n << ',' << c.m << ',' << json_double(c.p) << ',' << c.reps << ','
        << json_double(c.frac_empty_link) << ',' << json_double(c.frac_null_vertex) << ','
        << json_double(c.oracle_empty_link) << ',' << json_double(c.oracle_null_vertex) << '\n';
  }
  return out.str();
}

}  // namespace hyperembed
