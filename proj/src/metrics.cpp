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

#include "dgr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dgr {
namespace {

void require_same(const Tensor<float>& a, const Tensor<float>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Channel mean of batch item 0 at a real-valued location, border-clamped.
double sample_mean(const Tensor<float>& img, double y, double x) {
  const Index c = img.dim(1), h = img.dim(2), w = img.dim(3);
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const Index y0 = std::min<Index>(static_cast<Index>(std::floor(y)), h - 1);
  const Index x0 = std::min<Index>(static_cast<Index>(std::floor(x)), w - 1);
  const Index y1 = std::min<Index>(y0 + 1, h - 1), x1 = std::min<Index>(x0 + 1, w - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  const float* d = img.data().data();
  double acc = 0.0;
  for (Index ch = 0; ch < c; ++ch) {
    const float* p = d + ch * h * w;
    acc += (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
           fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
  }
  return acc / static_cast<double>(c);
}

}  // namespace

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  require_same(a, b, "psnr");
  const Index n = a.size();
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    sum += d * d;
  }
  if (sum == 0.0) return kPsnrSentinel;
  return std::min(kPsnrSentinel, -10.0 * std::log10(sum / static_cast<double>(n)));
}

MaeHeatmap mae_heatmap(const Tensor<float>& a, const Tensor<float>& b) {
  require_same(a, b, "mae_heatmap");
  if (a.rank() != 4) throw ShapeError("mae_heatmap: expected B x C x H x W");
  const Index c = a.dim(1), h = a.dim(2), w = a.dim(3);
  MaeHeatmap out;
  out.heatmap = Image8(1, h, w);
  double total = 0.0;
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j) {
      double px = 0.0;
      for (Index ch = 0; ch < c; ++ch) {
        const Index k = (ch * h + i) * w + j;
        px += std::abs(static_cast<double>(a.data()[k]) - static_cast<double>(b.data()[k]));
      }
      total += px;
      const double level = std::clamp(px / static_cast<double>(c) / kHeatmapWindow, 0.0, 1.0);
      out.heatmap.at(0, i, j) = static_cast<std::uint8_t>(std::lround(level * 255.0));
    }
  out.mae = 255.0 * total / static_cast<double>(c * h * w);
  return out;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("pearson: size mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

IntensityProfile intensity_profile_pcc(const Tensor<float>& a, const Tensor<float>& b, Point2 p0,
                                       Point2 p1) {
  require_same(a, b, "intensity_profile_pcc");
  if (a.rank() != 4) throw ShapeError("intensity_profile_pcc: expected B x C x H x W");
  if (p0.y == p1.y && p0.x == p1.x) {
    throw std::invalid_argument("intensity_profile_pcc: zero-length line");
  }
  const double h = static_cast<double>(a.dim(2)), w = static_cast<double>(a.dim(3));
  for (const Point2& p : {p0, p1}) {
    if (p.y < 0 || p.x < 0 || p.y > h - 1 || p.x > w - 1) {
      throw std::out_of_range("intensity_profile_pcc: endpoint outside the image");
    }
  }
  IntensityProfile out;
  out.a.resize(kProfileSamples);
  out.b.resize(kProfileSamples);
  for (int k = 0; k < kProfileSamples; ++k) {
    const double t = static_cast<double>(k) / (kProfileSamples - 1);
    const double y = p0.y + t * (p1.y - p0.y), x = p0.x + t * (p1.x - p0.x);
    out.a[static_cast<std::size_t>(k)] = sample_mean(a, y, x);
    out.b[static_cast<std::size_t>(k)] = sample_mean(b, y, x);
  }
  out.pcc = pearson(out.a, out.b);
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("nearest_rank_percentile: empty input");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate agg;
  if (values.empty()) return agg;
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - agg.mean) * (v - agg.mean);
  agg.std = std::sqrt(var / static_cast<double>(values.size()));
  agg.p025 = nearest_rank_percentile(values, 2.5);
  agg.p975 = nearest_rank_percentile(values, 97.5);
  return agg;
}

void MetricsReport::finalize() {
  std::vector<double> p, s, m;
  for (const auto& r : rows) {
    p.push_back(r.psnr);
    s.push_back(r.ssim);
    m.push_back(r.mae);
  }
  psnr = aggregate(p);
  ssim = aggregate(s);
  mae = aggregate(m);
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "id,psnr,ssim,mae\n";
  for (const auto& r : report.rows) {
    out << r.id << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << ',' << fmt(r.mae) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<ImageMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  std::vector<ImageMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    ImageMetrics r;
    std::getline(ss, cell, ',');
    r.id = std::stoi(cell);
    std::getline(ss, cell, ',');
    r.psnr = std::stod(cell);
    std::getline(ss, cell, ',');
    r.ssim = std::stod(cell);
    std::getline(ss, cell, ',');
    r.mae = std::stod(cell);
    rows.push_back(r);
  }
  return rows;
}

std::string report_json(const MetricsReport& report) {
  auto agg = [](const Aggregate& a) {
    return nlohmann::ordered_json{{"mean", a.mean}, {"std", a.std}, {"p2.5", a.p025}, {"p97.5", a.p975}};
  };
  nlohmann::ordered_json j;
  j["images"] = report.rows.size();
  j["psnr"] = agg(report.psnr);
  j["ssim"] = agg(report.ssim);
  j["mae"] = agg(report.mae);
  auto stats = [](const std::optional<FieldStats>& s) {
    return s ? nlohmann::ordered_json{{"mean_px", s->mean_magnitude}, {"max_px", s->max_magnitude}}
             : nlohmann::ordered_json(nullptr);
  };
  j["r2_self"] = stats(report.r2_self);
  j["r2_cross"] = stats(report.r2_cross);
  return j.dump(2);
}

}  // namespace dgr
