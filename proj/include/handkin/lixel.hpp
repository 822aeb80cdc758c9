#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace handkin {

inline constexpr int kDefaultLixels = 64;
inline constexpr double kDefaultLixelSigma = 2.5;

enum class Axis { x, y, z };
char axis_label(Axis a);

// 1D likelihood over L lixels; lixel i covers [i, i + 1) / L of the
// normalized coordinate range.
struct Heatmap1D {
  Eigen::VectorXd values;
  Axis axis = Axis::x;

  int size() const { return static_cast<int>(values.size()); }
  // Nonnegative, finite, not all zero.
  void validate() const;
};

// values[i] = exp(-(i + 0.5 - coord * L)^2 / (2 sigma^2)).
Heatmap1D encode(double coord, int lixels = kDefaultLixels, double sigma = kDefaultLixelSigma,
                 Axis axis = Axis::x);

// Expectation of the lixel centers under p_i = h_i / sum(h), i.e. the
// softmax of log h.
double soft_argmax(const Heatmap1D& h);

// Softmax of raw scores, then the expectation of the lixel centers. Adding
// a constant to every score leaves the result unchanged.
double decode_logits(const Eigen::VectorXd& logits);

// Coordinate estimate from a likelihood map. Starts from the soft-argmax
// and, when the peak has positive neighbors, refines it with a second-order
// fit of log h around the peak; a Gaussian profile is then recovered
// exactly, including near the borders where the plain expectation is
// pulled inward by truncation. Uniform maps decode to 0.5 and one-hot maps
// to the center of the hot lixel.
double decode(const Heatmap1D& h);

// Dense nx x ny x nz likelihood grid, stored at (x * ny + y) * nz + z.
struct Grid3D {
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> values;

  Grid3D() = default;
  Grid3D(int nx, int ny, int nz);
  double& at(int x, int y, int z) { return values[(static_cast<std::size_t>(x) * ny + y) * nz + z]; }
  double at(int x, int y, int z) const {
    return values[(static_cast<std::size_t>(x) * ny + y) * nz + z];
  }
};

// hx = sum over (y, z), hy = sum over (x, z), hz = sum over (x, y).
std::array<Heatmap1D, 3> marginalize(const Grid3D& grid);

// "lixel,x,y,z" rows for plotting; maps must have equal length.
std::string heatmaps_csv(const std::array<Heatmap1D, 3>& maps);

}  // namespace handkin
