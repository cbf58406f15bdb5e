#include "hyperembed/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hyperembed/errors.hpp"
#include "hyperembed/jsonio.hpp"
#include "hyperembed/mathutil.hpp"

namespace hyperembed {

namespace {

// Inverse of a small symmetric PD matrix; empty optional means the weighted
// second moment is rank deficient (all embeddings in a proper subspace).
std::optional<Eigen::MatrixXd> spd_inverse(const Eigen::MatrixXd& a) {
  const Eigen::Index k = a.rows();
  if (k == 0) return Eigen::MatrixXd(0, 0);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
  if (!inv.allFinite()) return std::nullopt;
  inv = ((inv + inv.transpose()) / 2.0).eval();
  return inv;
}

}  // namespace

PluginCovariances::PluginCovariances(UncenteredParams params) : params_(std::move(params)) {
  const int m = params_.m();
  const int n = params_.n();
  const int k = params_.k();
  if (m <= 0 || n <= 0) throw DataError("plug-in covariances require a nonempty fit");

  const Eigen::MatrixXd w = sigmoid_deriv_matrix(theta_matrix(params_));

  // Pairwise coordinate products, so every weighted Gram accumulation below
  // is a plain matrix product with a deterministic reduction order.
  const int pairs = k * (k + 1) / 2;
  Eigen::MatrixXd f_prod(m, pairs);
  Eigen::MatrixXd z_prod(n, pairs);
  {
    int c = 0;
    for (int a = 0; a < k; ++a) {
      for (int b = a; b < k; ++b, ++c) {
        f_prod.col(c) = params_.F.col(a).cwiseProduct(params_.F.col(b));
        z_prod.col(c) = params_.Z.col(a).cwiseProduct(params_.Z.col(b));
      }
    }
  }

  // Per-vertex blocks: sum_j w_ji, sum_j w_ji f_j, sum_j w_ji f_j f_j^T.
  const Eigen::VectorXd w_col = w.colwise().sum().transpose();            // n
  const Eigen::MatrixXd wf = w.transpose() * params_.F;                   // n x k
  const Eigen::MatrixXd wff = w.transpose() * f_prod;                     // n x pairs
  // Per-hyperlink blocks over vertices.
  const Eigen::MatrixXd wz = w * params_.Z;                               // m x k
  const Eigen::MatrixXd wzz = w * z_prod;                                 // m x pairs

  a_inv_.reserve(n);
  Eigen::MatrixXd a(k + 1, k + 1);
  for (int i = 0; i < n; ++i) {
    a(0, 0) = w_col[i];
    for (int c = 0; c < k; ++c) {
      a(0, c + 1) = wf(i, c);
      a(c + 1, 0) = wf(i, c);
    }
    int c = 0;
    for (int p = 0; p < k; ++p) {
      for (int q = p; q < k; ++q, ++c) {
        a(p + 1, q + 1) = wff(i, c);
        a(q + 1, p + 1) = wff(i, c);
      }
    }
    a_inv_.push_back(spd_inverse(a));
  }

  b_inv_.reserve(m);
  Eigen::MatrixXd b(k, k);
  for (int j = 0; j < m; ++j) {
    int c = 0;
    for (int p = 0; p < k; ++p) {
      for (int q = p; q < k; ++q, ++c) {
        b(p, q) = wzz(j, c);
        b(q, p) = wzz(j, c);
      }
    }
    b_inv_.push_back(spd_inverse(b));
  }
}

const Eigen::MatrixXd& PluginCovariances::cov_nu(int i) const {
  if (i < 0 || i >= n()) throw DataError("cov_nu: vertex index out of range");
  if (!a_inv_[i]) {
    throw RankDeficiencyError("singular plug-in information matrix for vertex " +
                              std::to_string(i + 1));
  }
  return *a_inv_[i];
}

const Eigen::MatrixXd& PluginCovariances::cov_f(int j) const {
  if (j < 0 || j >= m()) throw DataError("cov_f: hyperlink index out of range");
  if (!b_inv_[j]) {
    throw RankDeficiencyError("singular plug-in information matrix for hyperlink " +
                              std::to_string(j + 1));
  }
  return *b_inv_[j];
}

Eigen::MatrixXd PluginCovariances::cross(int j, int i) const {
  const Eigen::MatrixXd& a = cov_nu(i);
  const Eigen::MatrixXd& b = cov_f(j);
  const double w = sigmoid_deriv(theta(params_, j, i));
  Eigen::VectorXd q(k() + 1);
  q[0] = 1.0;
  q.tail(k()) = params_.F.row(j).transpose();
  return a * (w * q * params_.Z.row(i)) * b;
}

double PluginCovariances::var_theta(int j, int i) const {
  const Eigen::MatrixXd& a = cov_nu(i);
  const Eigen::MatrixXd& b = cov_f(j);
  Eigen::VectorXd q(k() + 1);
  q[0] = 1.0;
  q.tail(k()) = params_.F.row(j).transpose();
  const Eigen::VectorXd z = params_.Z.row(i).transpose();
  const double qa = q.dot(a * q);
  const double zb = k() > 0 ? z.dot(b * z) : 0.0;
  const double w = sigmoid_deriv(theta(params_, j, i));
  const double v = qa + zb + 2.0 * w * qa * zb;
  if (v < 0.0) {
    if (v < -1e-12) throw NumericalError("negative plug-in variance for theta");
    return 0.0;
  }
  return v;
}

double PluginCovariances::var_p(int j, int i) const {
  const double w = sigmoid_deriv(theta(params_, j, i));
  return w * w * var_theta(j, i);
}

namespace {

struct PointVariance {
  double center;
  double variance;
};

PointVariance point_and_variance(const PluginCovariances& pc, const TargetSpec& target) {
  const UncenteredParams& p = pc.params();
  switch (target.kind) {
    case TargetKind::AlphaDagger:
      return {p.alpha_dagger(target.i), pc.cov_nu(target.i)(0, 0)};
    case TargetKind::ZEntry:
      if (target.dim < 0 || target.dim >= pc.k()) throw DataError("z coordinate out of range");
      return {p.Z(target.i, target.dim),
              pc.cov_nu(target.i)(target.dim + 1, target.dim + 1)};
    case TargetKind::FEntry:
      if (target.dim < 0 || target.dim >= pc.k()) throw DataError("f coordinate out of range");
      return {p.F(target.j, target.dim), pc.cov_f(target.j)(target.dim, target.dim)};
    case TargetKind::Theta:
      return {theta(p, target.j, target.i), pc.var_theta(target.j, target.i)};
    case TargetKind::Prob:
      return {prob(p, target.j, target.i), pc.var_p(target.j, target.i)};
  }
  throw DataError("unknown target kind");
}

}  // namespace

ConfidenceInterval confidence_interval(const PluginCovariances& pc, const TargetSpec& target,
                                       double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must be in (0,1)");
  const PointVariance pv = point_and_variance(pc, target);
  ConfidenceInterval ci;
  ci.center = pv.center;
  ci.half_width = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(pv.variance);
  ci.level = level;
  return ci;
}

ConfidenceEllipse confidence_ellipse(const PluginCovariances& pc, int i, double level) {
  if (pc.k() != 2) {
    throw DataError("confidence_ellipse requires a 2-dimensional embedding (K=2), got K=" +
                    std::to_string(pc.k()));
  }
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must be in (0,1)");
  ConfidenceEllipse e;
  e.center = pc.params().Z.row(i).transpose();
  e.shape = pc.cov_nu(i).block(1, 1, 2, 2);
  e.radius2 = chi2_2_quantile(level);
  e.level = level;
  return e;
}

IntervalRow make_interval_row(const PluginCovariances& pc, const TargetSpec& target,
                              double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must be in (0,1)");
  const PointVariance pv = point_and_variance(pc, target);
  const double hw = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(pv.variance);
  IntervalRow row;
  row.estimate = pv.center;
  row.level = level;
  row.variance = pv.variance;
  row.lo = pv.center - hw;
  row.hi = pv.center + hw;
  switch (target.kind) {
    case TargetKind::AlphaDagger:
      row.target = "alpha_dagger";
      row.index = std::to_string(target.i + 1);
      break;
    case TargetKind::ZEntry:
      row.target = "z";
      row.index = std::to_string(target.i + 1) + ":" + std::to_string(target.dim + 1);
      break;
    case TargetKind::FEntry:
      row.target = "f";
      row.index = std::to_string(target.j + 1) + ":" + std::to_string(target.dim + 1);
      break;
    case TargetKind::Theta:
      row.target = "theta";
      row.index = std::to_string(target.j + 1) + ":" + std::to_string(target.i + 1);
      break;
    case TargetKind::Prob:
      row.target = "p";
      row.index = std::to_string(target.j + 1) + ":" + std::to_string(target.i + 1);
      // endpoints live in (0,1); unclipped width is recoverable from variance
      row.lo = std::max(row.lo, 0.0);
      row.hi = std::min(row.hi, 1.0);
      break;
  }
  return row;
}

std::string intervals_to_csv(const std::vector<IntervalRow>& rows) {
  std::ostringstream out;
  out << "target,index,estimate,variance,lo,hi,level\n";
  for (const auto& r : rows) {
    out << r.target << ',' << r.index << ',' << json_double(r.estimate) << ','
        << json_double(r.variance) << ',' << json_double(r.lo) << ',' << json_double(r.hi)
        << ',' << json_double(r.level) << '\n';
  }
  return out.str();
}

std::string ellipses_to_json(const std::vector<std::pair<int, ConfidenceEllipse>>& ellipses) {
  JsonWriter w;
  w.begin_array();
  for (std::size_t idx = 0; idx < ellipses.size(); ++idx) {
    if (idx) w.comma();
    const auto& [vertex, e] = ellipses[idx];
    w.begin_object();
    w.field("vertex", vertex + 1, false);
    w.comma().key("center").begin_array().value(e.center[0]).comma().value(e.center[1]).end_array();
    Eigen::MatrixXd shape = e.shape;
    w.field("shape", shape);
    w.field("radius2", e.radius2);
    w.field("level", e.level);
    w.end_object();
  }
  w.end_array();
  return w.str();
}

namespace {

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct EllipseGeometry {
  double rx, ry, angle_deg;
};

EllipseGeometry ellipse_axes(const ConfidenceEllipse& e) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(e.shape);
  const Eigen::Vector2d vals = eig.eigenvalues().cwiseMax(0.0);
  // columns sorted ascending; major axis is column 1
  const Eigen::Vector2d major = eig.eigenvectors().col(1);
  EllipseGeometry g;
  g.rx = std::sqrt(e.radius2 * vals[1]);
  g.ry = std::sqrt(e.radius2 * vals[0]);
  g.angle_deg = std::atan2(major[1], major[0]) * 180.0 / M_PI;
  return g;
}

}  // namespace

std::string ellipses_to_svg(const Eigen::MatrixXd& z,
                            const std::vector<std::pair<int, ConfidenceEllipse>>& ellipses,
                            const std::vector<std::string>& labels) {
  if (z.cols() != 2) throw DataError("ellipse SVG requires 2-dimensional embeddings");

  double xmin = z.col(0).minCoeff(), xmax = z.col(0).maxCoeff();
  double ymin = z.col(1).minCoeff(), ymax = z.col(1).maxCoeff();
  for (const auto& [vertex, e] : ellipses) {
    const EllipseGeometry g = ellipse_axes(e);
    const double r = std::max(g.rx, g.ry);
    xmin = std::min(xmin, e.center[0] - r);
    xmax = std::max(xmax, e.center[0] + r);
    ymin = std::min(ymin, e.center[1] - r);
    ymax = std::max(ymax, e.center[1] + r);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double size = 760.0, margin = 40.0;
  const double scale = size / span;
  auto px = [&](double x) { return margin + (x - xmin) * scale; };
  auto py = [&](double y) { return margin + (ymax - y) * scale; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" height=\"840\" "
         "viewBox=\"0 0 840 840\">\n";
  out << "<!-- hyperembed ellipse plot -->\n";
  out << "<rect width=\"840\" height=\"840\" fill=\"white\"/>\n";
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out << "<circle cx=\"" << svg_num(px(z(i, 0))) << "\" cy=\"" << svg_num(py(z(i, 1)))
        << "\" r=\"1.5\" fill=\"#9aa7b1\"/>\n";
  }
  for (const auto& [vertex, e] : ellipses) {
    const EllipseGeometry g = ellipse_axes(e);
    const double cx = px(e.center[0]);
    const double cy = py(e.center[1]);
    out << "<ellipse cx=\"" << svg_num(cx) << "\" cy=\"" << svg_num(cy) << "\" rx=\""
        << svg_num(g.rx * scale) << "\" ry=\"" << svg_num(g.ry * scale)
        << "\" fill=\"none\" stroke=\"#c23b22\" stroke-width=\"1.2\" transform=\"rotate("
        << svg_num(-g.angle_deg) << ' ' << svg_num(cx) << ' ' << svg_num(cy) << ")\"/>\n";
    out << "<circle cx=\"" << svg_num(cx) << "\" cy=\"" << svg_num(cy)
        << "\" r=\"2.5\" fill=\"#c23b22\"/>\n";
    std::string label;
    if (vertex >= 0 && vertex < static_cast<int>(labels.size())) {
      label = labels[vertex];
    } else {
      label = std::to_string(vertex + 1);
    }
    out << "<text x=\"" << svg_num(cx + 5.0) << "\" y=\"" << svg_num(cy - 5.0)
        << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"#222\">"
        << json_escape(label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace hyperembed
