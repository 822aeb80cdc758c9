#include "handkin/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

namespace {

constexpr double kRankTolerance = 1e-12;

void check_pair(const Points3& a, const Points3& b) {
  if (a.rows() != b.rows())
    throw ShapeError("point counts differ: " + std::to_string(a.rows()) + " vs " + std::to_string(b.rows()));
  if (a.rows() == 0) throw ShapeError("empty point set");
  if (!a.allFinite() || !b.allFinite()) throw NumericalError("point set contains non-finite values");
}

// Fraction of points in `from` whose nearest neighbor in `to` is closer than t.
double matched_fraction(const Points3& from, const Points3& to, double t) {
  const double t2 = t * t;
  int hits = 0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < to.rows() && best >= t2; ++j)
      best = std::min(best, (from.row(i) - to.row(j)).squaredNorm());
    if (best < t2) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(from.rows());
}

Points3 centered(const Points3& p, const Vec3& origin) {
  return p.rowwise() - origin.transpose();
}

}  // namespace

double mpjpe(const Points3& pred, const Points3& gt) {
  check_pair(pred, gt);
  return (pred - gt).rowwise().norm().mean();
}

Points3 Similarity::apply(const Points3& p) const {
  Points3 out = (scale * (p * rotation.transpose())).rowwise() + translation.transpose();
  return out;
}

ProcrustesResult procrustes_align(const Points3& pred, const Points3& gt) {
  check_pair(pred, gt);
  const double n = static_cast<double>(pred.rows());
  const Vec3 mu_p = pred.colwise().mean().transpose();
  const Vec3 mu_g = gt.colwise().mean().transpose();
  const Points3 x = centered(pred, mu_p);
  const Points3 y = centered(gt, mu_g);
  const Mat3 cov = y.transpose() * x / n;
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (!(d[1] > kRankTolerance * std::max(d[0], std::numeric_limits<double>::min())))
    throw NumericalError("degenerate point configuration for Procrustes alignment (rank < 2)");
  Vec3 s = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s[2] = -1.0;
  ProcrustesResult r;
  r.transform.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  const double var_p = x.squaredNorm() / n;
  r.transform.scale = d.dot(s) / var_p;
  r.transform.translation = mu_g - r.transform.scale * r.transform.rotation * mu_p;
  r.aligned = r.transform.apply(pred);
  return r;
}

FScore fscore_detail(const Points3& pred, const Points3& gt, double threshold) {
  if (pred.rows() == 0 || gt.rows() == 0) throw ShapeError("F-score needs nonempty point sets");
  if (!(threshold > 0.0)) throw DomainError("F-score threshold must be > 0");
  FScore s;
  s.precision = matched_fraction(pred, gt, threshold);
  s.recall = matched_fraction(gt, pred, threshold);
  const double sum = s.precision + s.recall;
  s.f = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

double fscore(const Points3& pred, const Points3& gt, double threshold) {
  return fscore_detail(pred, gt, threshold).f;
}

EvalReport evaluate(const std::vector<EvalSample>& pred, const std::vector<EvalSample>& gt,
                    const EvalOptions& options) {
  if (pred.empty()) throw ShapeError("no samples to evaluate");
  if (pred.size() != gt.size())
    throw ShapeError("prediction and ground-truth sample counts differ");
  for (double t : options.thresholds)
    if (!(t > 0.0)) throw DomainError("F-score thresholds must be > 0");

  bool with_vertices = true;
  for (std::size_t i = 0; i < pred.size(); ++i)
    with_vertices = with_vertices && pred[i].vertices.has_value() && gt[i].vertices.has_value();

  EvalReport r;
  r.samples = static_cast<int>(pred.size());
  r.f_on = with_vertices ? "vertices" : "joints";
  double mpvpe_sum = 0.0, pa_mpvpe_sum = 0.0;
  std::map<double, double> f_sum;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Points3 pj = pred[i].joints, gj = gt[i].joints;
    check_pair(pj, gj);
    const Vec3 root_p = pj.row(0).transpose(), root_g = gj.row(0).transpose();
    if (options.root_center) {
      pj = centered(pj, root_p);
      gj = centered(gj, root_g);
    }
    const double e = mpjpe(pj, gj);
    const double pa = mpjpe(procrustes_align(pj, gj).aligned, gj);
    r.per_sample_mpjpe.push_back(e);
    r.per_sample_pa_mpjpe.push_back(pa);
    r.mpjpe += e;
    r.pa_mpjpe += pa;

    Points3 fp, fg;
    if (with_vertices) {
      Points3 pv = *pred[i].vertices, gv = *gt[i].vertices;
      if (options.root_center) {
        pv = centered(pv, root_p);
        gv = centered(gv, root_g);
      }
      mpvpe_sum += mpjpe(pv, gv);
      fp = procrustes_align(pv, gv).aligned;
      fg = gv;
      pa_mpvpe_sum += mpjpe(fp, fg);
    } else {
      fp = procrustes_align(pj, gj).aligned;
      fg = gj;
    }
    for (double t : options.thresholds) f_sum[t] += fscore(fp, fg, t);
  }
  const double n = static_cast<double>(pred.size());
  r.mpjpe /= n;
  r.pa_mpjpe /= n;
  if (with_vertices) {
    r.mpvpe = mpvpe_sum / n;
    r.pa_mpvpe = pa_mpvpe_sum / n;
  }
  for (const auto& [t, s] : f_sum) r.f_at[t] = s / n;
  return r;
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "samples " << r.samples << '\n';
  os << "MPJPE " << format_number(r.mpjpe) << '\n';
  os << "PA-MPJPE " << format_number(r.pa_mpjpe) << '\n';
  if (r.mpvpe) os << "MPVPE " << format_number(*r.mpvpe) << '\n';
  if (r.pa_mpvpe) os << "PA-MPVPE " << format_number(*r.pa_mpvpe) << '\n';
  for (const auto& [t, f] : r.f_at) os << "F@" << format_number(t) << ' ' << format_number(f) << '\n';
  os << "F-points " << r.f_on << '\n';
  return os.str();
}

}  // namespace handkin
