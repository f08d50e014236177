// Copyright 2026 The DGR Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dgr/image_io.hpp"
#include "dgr/tensor.hpp"
#include "dgr/warp.hpp"

namespace dgr {

/// Reported for identical images so that aggregates stay finite.
inline constexpr double kPsnrSentinel = 99.0;

/// 10 log10(1 / MSE) with peak 1.0; MSE over every element.
double psnr(const Tensor<float>& a, const Tensor<float>& b);

/// Fixed heatmap window: a per-pixel error of 0.5 maps to 255.
inline constexpr double kHeatmapWindow = 0.5;

struct MaeHeatmap {
  Image8 heatmap;     // 1 x H x W, channel-mean |a - b| over [0, 0.5]
  double mae = 0.0;   // mean |a - b| on the 0-255 scale
};

/// Uses batch item 0 of two 1 x C x H x W images.
MaeHeatmap mae_heatmap(const Tensor<float>& a, const Tensor<float>& b);

struct Point2 {
  double y = 0.0, x = 0.0;
};

inline constexpr int kProfileSamples = 256;

struct IntensityProfile {
  std::vector<double> a, b;
  std::optional<double> pcc;  // empty when either profile has zero variance
};

/// Channel-mean intensity sampled bilinearly at 256 evenly spaced points from
/// p0 to p1 (inclusive), plus the Pearson correlation of the two profiles.
IntensityProfile intensity_profile_pcc(const Tensor<float>& a, const Tensor<float>& b, Point2 p0,
                                       Point2 p1);

/// Pearson correlation; empty when either input has zero variance.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

struct ImageMetrics {
  int id = 0;
  double psnr = 0.0, ssim = 0.0, mae = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double p025 = 0.0, p975 = 0.0;
};

/// Mean, std and nearest-rank 2.5 / 97.5 percentiles.
Aggregate aggregate(const std::vector<double>& values);

/// Nearest-rank percentile: the ceil(p / 100 * n)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, double p);

struct MetricsReport {
  std::vector<ImageMetrics> rows;
  Aggregate psnr, ssim, mae;
  std::optional<FieldStats> r2_self;   // mean field stats of R2(x, G(x))
  std::optional<FieldStats> r2_cross;  // mean field stats of R2(x, y)

  /// Recomputes the aggregates from rows.
  void finalize();
};

/// Per-image CSV: id,psnr,ssim,mae.
void write_metrics_csv(const MetricsReport& report, const std::string& path);
std::vector<ImageMetrics> read_metrics_csv(const std::string& path);

/// Aggregate summary as JSON text.
std::string report_json(const MetricsReport& report);

}  // namespace dgr
