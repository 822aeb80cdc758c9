#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "handkin/types.hpp"

namespace handkin {

// Mean Euclidean distance between corresponding points.
double mpjpe(const Points3& pred, const Points3& gt);

struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Points3 apply(const Points3& p) const;
};

struct ProcrustesResult {
  Similarity transform;  // aligned = s R pred + t
  Points3 aligned;
};

// Least-squares similarity taking pred onto gt (rotation restricted to
// det = +1). Throws NumericalError when either set spans fewer than two
// dimensions.
ProcrustesResult procrustes_align(const Points3& pred, const Points3& gt);

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Nearest-neighbor matching with a strict "< threshold" test.
FScore fscore_detail(const Points3& pred, const Points3& gt, double threshold);
double fscore(const Points3& pred, const Points3& gt, double threshold);

struct EvalSample {
  Points3 joints;                   // 21 x 3
  std::optional<Points3> vertices;  // V x 3
};

struct EvalOptions {
  std::vector<double> thresholds = {5.0, 15.0};  // mm
  // Subtract joint 0 (per sample, and from the vertices too) before the
  // unaligned metrics.
  bool root_center = false;
};

struct EvalReport {
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
  std::optional<double> mpvpe;
  std::optional<double> pa_mpvpe;
  // F-scores on vertices when every sample has them, else on joints;
  // both use the Procrustes-aligned prediction.
  std::map<double, double> f_at;
  std::string f_on = "joints";
  int samples = 0;
  std::vector<double> per_sample_mpjpe;
  std::vector<double> per_sample_pa_mpjpe;
};

EvalReport evaluate(const std::vector<EvalSample>& pred, const std::vector<EvalSample>& gt,
                    const EvalOptions& options = {});

// "key value" lines: samples, MPJPE, PA-MPJPE, MPVPE, PA-MPVPE, F@<t>.
std::string report_text(const EvalReport& report);

}  // namespace handkin
