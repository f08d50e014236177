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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dgr/image_io.hpp"
#include "dgr/misalign.hpp"

namespace dgr {

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Nucleus {
  double cy, cx, radius;
};

/// Tissue-like structure shared by both stains. All planes are h x w in [0, 1].
struct StructureMap {
  std::uint64_t seed = 0;
  Plane nuclei;  // clamped sum of unit-peak Gaussian splats
  Plane stroma;  // 4-octave value noise
  Plane gland;   // smooth blob mask
  std::vector<Nucleus> nuclei_list;

  Index height() const { return stroma.rows(); }
  Index width() const { return stroma.cols(); }
};

/// Splats are truncated at this many radii.
inline constexpr double kSplatCutoff = 3.0;

/// Integral of one truncated unit-peak splat: 2 pi r^2 (1 - exp(-cutoff^2 / 2)).
double splat_mass(double radius);

/// Sum of splats without the [0, 1] clamp; used to check splat mass.
Plane unclamped_nuclei(const StructureMap& map);

StructureMap generate_structure(std::uint64_t seed, Index height, Index width);

enum class StainStyle { stain_a, stain_b };

std::string to_string(StainStyle style);
StainStyle parse_style(const std::string& name);

/// Per-style colour transfer. The mix matrix is the outer product of a
/// style-specific RGB absorbance and a density weighting shared by all styles.
struct StainModel {
  std::array<double, 3> white;              // background colour
  std::array<std::array<double, 3>, 3> mix;  // rows: R, G, B; columns: nuclei, stroma, gland
  double gamma;
};

StainModel stain_model(StainStyle style);

/// rgb = clamp(white + mix * s, 0, 1)^gamma per pixel; returns 1 x 3 x H x W.
Tensor<float> render_stain(const StructureMap& map, StainStyle style);

/// Renders a constant structure vector with the same transfer as render_stain.
std::array<double, 3> render_constant(const std::array<double, 3>& s, StainStyle style);

struct DatasetOptions {
  int n_train = 2000;
  int n_test = 200;
  int level = 0;
  std::uint64_t seed = 1;
  Index source_size = 160;
  Index crop = 64;
  StainStyle source_style = StainStyle::stain_a;
  StainStyle target_style = StainStyle::stain_b;
  int threads = 1;
};

/// One JSON-lines manifest record. Paths are relative to the manifest.
struct ManifestRecord {
  int id = 0;
  Split split = Split::train;
  int level = 0;
  std::uint64_t structure_seed = 0;
  std::uint64_t transform_seed = 0;
  AffineParams affine;
  std::string x, y, y_ideal, x_aligned;
};

inline constexpr const char* kManifestName = "manifest.jsonl";

/// Per-pair structure seeds. Train and test draw from disjoint streams.
std::uint64_t structure_seed(std::uint64_t seed, Split split, int index);
/// Per-pair misalignment stream; independent of the level so that every level
/// shares the same draws, scaled by its bounds.
std::uint64_t transform_seed(std::uint64_t seed, Split split, int index);

/// Writes PNGs plus manifest.jsonl under out_dir. Train pairs carry a sampled
/// misalignment at `level`; test pairs store the misaligned x and the aligned x.
std::vector<ManifestRecord> build_dataset(const DatasetOptions& opts,
                                          const std::filesystem::path& out_dir);

std::string manifest_line(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest_path);

/// Test-split pair as loaded for evaluation.
struct LoadedPair {
  ManifestRecord record;
  Image8 x, y, y_ideal, x_aligned;
};

/// Loads all records of `split`. x_aligned falls back to x when absent.
std::vector<LoadedPair> load_split(const std::filesystem::path& manifest_path, Split split,
                                   int threads = 1);

/// Hash over the test records' structure and transform seeds; equal hashes
/// mean two datasets share the same frozen test noise draws.
std::uint64_t test_transform_hash(const std::vector<ManifestRecord>& records);

/// Content hash of the manifest and every image it references.
std::uint64_t dataset_content_hash(const std::filesystem::path& manifest_path);

}  // namespace dgr
