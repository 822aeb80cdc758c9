#include "handkin/lixel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "handkin/error.hpp"
#include "handkin/text_format.hpp"

namespace handkin {

char axis_label(Axis a) { return a == Axis::x ? 'X' : a == Axis::y ? 'Y' : 'Z'; }

void Heatmap1D::validate() const {
  if (values.size() == 0) throw ShapeError("empty heatmap");
  if (!values.allFinite()) throw NumericalError("heatmap contains non-finite values");
  if ((values.array() < 0.0).any()) throw DomainError("heatmap values must be nonnegative");
  if (!(values.sum() > 0.0)) throw DomainError("heatmap is all zero");
}

Heatmap1D encode(double coord, int lixels, double sigma, Axis axis) {
  if (!(coord >= 0.0 && coord <= 1.0)) throw DomainError("coordinate must lie in [0, 1]");
  if (lixels < 1) throw DomainError("lixel count must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");
  Heatmap1D h;
  h.axis = axis;
  h.values.resize(lixels);
  const double mu = coord * lixels;
  for (int i = 0; i < lixels; ++i) {
    const double d = i + 0.5 - mu;
    h.values[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return h;
}

double soft_argmax(const Heatmap1D& h) {
  h.validate();
  const int n = h.size();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += h.values[i] * (i + 0.5);
    den += h.values[i];
  }
  return num / den / n;
}

double decode_logits(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw ShapeError("empty heatmap");
  if (!logits.allFinite()) throw NumericalError("heatmap contains non-finite values");
  Heatmap1D h;
  h.values = (logits.array() - logits.maxCoeff()).exp();
  return soft_argmax(h);
}

double decode(const Heatmap1D& h) {
  const double coarse = soft_argmax(h);
  const int n = h.size();
  if (n < 3) return coarse;
  Eigen::Index peak = 0;
  h.values.maxCoeff(&peak);
  // Three-point window around the peak, kept inside the map.
  const int c = std::clamp(static_cast<int>(peak), 1, n - 2);
  const double a = h.values[c - 1], b = h.values[c], d = h.values[c + 1];
  if (!(a > 0.0 && b > 0.0 && d > 0.0)) return coarse;
  const double la = std::log(a), lb = std::log(b), ld = std::log(d);
  const double curvature = la - 2.0 * lb + ld;
  if (!(curvature < 0.0)) return coarse;  // flat or convex: no peak to refine
  const double offset = 0.5 * (la - ld) / curvature;
  const double refined = (c + 0.5 + offset) / n;
  if (!std::isfinite(refined)) return coarse;
  return std::clamp(refined, 0.0, 1.0);
}

Grid3D::Grid3D(int nx_, int ny_, int nz_) : nx(nx_), ny(ny_), nz(nz_) {
  if (nx < 1 || ny < 1 || nz < 1) throw DomainError("grid dimensions must be >= 1");
  values.assign(static_cast<std::size_t>(nx) * ny * nz, 0.0);
}

std::array<Heatmap1D, 3> marginalize(const Grid3D& g) {
  if (g.nx < 1 || g.ny < 1 || g.nz < 1 ||
      g.values.size() != static_cast<std::size_t>(g.nx) * g.ny * g.nz)
    throw ShapeError("grid storage does not match its dimensions");
  std::array<Heatmap1D, 3> m;
  m[0].axis = Axis::x;
  m[1].axis = Axis::y;
  m[2].axis = Axis::z;
  m[0].values = Eigen::VectorXd::Zero(g.nx);
  m[1].values = Eigen::VectorXd::Zero(g.ny);
  m[2].values = Eigen::VectorXd::Zero(g.nz);
  double total = 0.0;
  for (int x = 0; x < g.nx; ++x)
    for (int y = 0; y < g.ny; ++y)
      for (int z = 0; z < g.nz; ++z) {
        const double v = g.at(x, y, z);
        if (!std::isfinite(v)) throw NumericalError("grid contains non-finite values");
        if (v < 0.0) throw DomainError("grid values must be nonnegative");
        m[0].values[x] += v;
        m[1].values[y] += v;
        m[2].values[z] += v;
        total += v;
      }
  if (!(total > 0.0)) throw DomainError("grid is all zero");
  return m;
}

std::string heatmaps_csv(const std::array<Heatmap1D, 3>& maps) {
  const int n = maps[0].size();
  if (maps[1].size() != n || maps[2].size() != n) throw ShapeError("heatmaps differ in length");
  std::ostringstream os;
  os << "lixel," << axis_label(maps[0].axis) << ',' << axis_label(maps[1].axis) << ','
     << axis_label(maps[2].axis) << '\n';
  for (int i = 0; i < n; ++i)
    os << i << ',' << format_number(maps[0].values[i]) << ',' << format_number(maps[1].values[i])
       << ',' << format_number(maps[2].values[i]) << '\n';
  return os.str();
}

}  // namespace handkin
