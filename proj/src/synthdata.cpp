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

#include "dgr/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dgr/hash.hpp"
#include "dgr/parallel.hpp"

namespace dgr {
namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise: random lattice values at spacing `cell`, smoothstep-bilinear.
Plane value_noise_octave(std::mt19937_64& rng, Index h, Index w, double cell) {
  const Index gh = static_cast<Index>(std::ceil(static_cast<double>(h) / cell)) + 2;
  const Index gw = static_cast<Index>(std::ceil(static_cast<double>(w) / cell)) + 2;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Plane lattice(gh, gw);
  for (Index i = 0; i < gh; ++i)
    for (Index j = 0; j < gw; ++j) lattice(i, j) = unit(rng);
  Plane out(h, w);
  for (Index i = 0; i < h; ++i) {
    const double fy = static_cast<double>(i) / cell;
    const Index y0 = static_cast<Index>(fy);
    const double ty = smoothstep(fy - static_cast<double>(y0));
    for (Index j = 0; j < w; ++j) {
      const double fx = static_cast<double>(j) / cell;
      const Index x0 = static_cast<Index>(fx);
      const double tx = smoothstep(fx - static_cast<double>(x0));
      const double top = lattice(y0, x0) * (1 - tx) + lattice(y0, x0 + 1) * tx;
      const double bot = lattice(y0 + 1, x0) * (1 - tx) + lattice(y0 + 1, x0 + 1) * tx;
      out(i, j) = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

void add_splat(Plane& plane, const Nucleus& n) {
  const double reach = kSplatCutoff * n.radius;
  const Index i0 = std::max<Index>(0, static_cast<Index>(std::floor(n.cy - reach)));
  const Index i1 = std::min<Index>(plane.rows() - 1, static_cast<Index>(std::ceil(n.cy + reach)));
  const Index j0 = std::max<Index>(0, static_cast<Index>(std::floor(n.cx - reach)));
  const Index j1 = std::min<Index>(plane.cols() - 1, static_cast<Index>(std::ceil(n.cx + reach)));
  const double inv = 1.0 / (2.0 * n.radius * n.radius);
  for (Index i = i0; i <= i1; ++i)
    for (Index j = j0; j <= j1; ++j) {
      const double dy = static_cast<double>(i) - n.cy, dx = static_cast<double>(j) - n.cx;
      const double d2 = dy * dy + dx * dx;
      if (d2 <= reach * reach) plane(i, j) += std::exp(-d2 * inv);
    }
}

std::string pad_id(int id) {
  std::string s = std::to_string(id);
  return std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

double splat_mass(double radius) {
  return 2.0 * std::numbers::pi * radius * radius *
         (1.0 - std::exp(-kSplatCutoff * kSplatCutoff / 2.0));
}

Plane unclamped_nuclei(const StructureMap& map) {
  Plane p = Plane::Zero(map.height(), map.width());
  for (const auto& n : map.nuclei_list) add_splat(p, n);
  return p;
}

StructureMap generate_structure(std::uint64_t seed, Index height, Index width) {
  if (height < 64 || width < 64) {
    throw std::invalid_argument("generate_structure: dims must be >= 64, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  StructureMap map;
  map.seed = seed;
  std::mt19937_64 rng(mix_seed(seed, 0));

  map.stroma = Plane::Zero(height, width);
  double amp = 1.0, total = 0.0, cell = 32.0;
  for (int octave = 0; octave < 4; ++octave) {
    map.stroma += amp * value_noise_octave(rng, height, width, cell);
    total += amp;
    amp *= 0.5;
    cell *= 0.5;
  }
  map.stroma /= total;

  std::uniform_int_distribution<int> n_nuclei(40, 120);
  std::uniform_real_distribution<double> radius(2.0, 5.0);
  const int count = n_nuclei(rng);
  map.nuclei_list.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double r = radius(rng);
    // Centres keep the truncated footprint inside the map.
    const double m = kSplatCutoff * r;
    std::uniform_real_distribution<double> cy(m, static_cast<double>(height - 1) - m);
    std::uniform_real_distribution<double> cx(m, static_cast<double>(width - 1) - m);
    const double y = cy(rng);
    map.nuclei_list.push_back({y, cx(rng), r});
  }
  map.nuclei = unclamped_nuclei(map).min(1.0);

  std::uniform_int_distribution<int> n_glands(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = static_cast<double>(std::min(height, width)) / 160.0;
  map.gland = Plane::Zero(height, width);
  const int glands = n_glands(rng);
  for (int g = 0; g < glands; ++g) {
    const double cy = unit(rng) * static_cast<double>(height - 1);
    const double cx = unit(rng) * static_cast<double>(width - 1);
    const double a = (10.0 + 20.0 * unit(rng)) * scale;
    const double b = (10.0 + 20.0 * unit(rng)) * scale;
    const double theta = unit(rng) * std::numbers::pi;
    const double c = std::cos(theta), s = std::sin(theta);
    for (Index i = 0; i < height; ++i)
      for (Index j = 0; j < width; ++j) {
        const double dy = static_cast<double>(i) - cy, dx = static_cast<double>(j) - cx;
        const double u = (c * dy + s * dx) / a, v = (-s * dy + c * dx) / b;
        const double mask = 1.0 / (1.0 + std::exp(-8.0 * (1.0 - (u * u + v * v))));
        map.gland(i, j) = std::max(map.gland(i, j), mask);
      }
  }
  return map;
}

std::string to_string(StainStyle style) {
  return style == StainStyle::stain_a ? "stain_a" : "stain_b";
}

StainStyle parse_style(const std::string& name) {
  if (name == "stain_a" || name == "stain_A") return StainStyle::stain_a;
  if (name == "stain_b" || name == "stain_B") return StainStyle::stain_b;
  throw std::invalid_argument("unknown stain style '" + name + "'");
}

StainModel stain_model(StainStyle style) {
  // Both styles colour one shared density (nuclei, stroma, gland weighted by
  // kDensity) with their own absorbance ramp, so luma edges coincide.
  static constexpr std::array<double, 3> kDensity{0.45, 0.40, 0.15};
  const bool a = style == StainStyle::stain_a;
  const std::array<double, 3> absorb = a ? std::array<double, 3>{0.80, 0.90, 0.60}
                                         : std::array<double, 3>{0.55, 0.85, 0.90};
  StainModel m;
  m.white = a ? std::array<double, 3>{0.96, 0.94, 0.97} : std::array<double, 3>{0.97, 0.97, 0.98};
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 3; ++k) m.mix[c][k] = -absorb[c] * kDensity[k];
  m.gamma = a ? 0.8 : 1.2;
  return m;
}

std::array<double, 3> render_constant(const std::array<double, 3>& s, StainStyle style) {
  const StainModel m = stain_model(style);
  std::array<double, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    double v = m.white[c];
    for (int k = 0; k < 3; ++k) v += m.mix[c][k] * s[k];
    rgb[c] = std::pow(std::clamp(v, 0.0, 1.0), m.gamma);
  }
  return rgb;
}

Tensor<float> render_stain(const StructureMap& map, StainStyle style) {
  const Index h = map.height(), w = map.width();
  Buffer<float> out(3 * h * w);
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j) {
      const auto rgb = render_constant({map.nuclei(i, j), map.stroma(i, j), map.gland(i, j)}, style);
      for (Index c = 0; c < 3; ++c) out[(c * h + i) * w + j] = static_cast<float>(rgb[c]);
    }
  return Tensor<float>(Shape{1, 3, h, w}, std::move(out));
}

std::uint64_t structure_seed(std::uint64_t seed, Split split, int index) {
  const std::uint64_t stream = split == Split::train ? 1 : 2;
  return mix_seed(mix_seed(seed, stream), static_cast<std::uint64_t>(index));
}

std::uint64_t transform_seed(std::uint64_t seed, Split split, int index) {
  const std::uint64_t stream = split == Split::train ? 3 : 4;
  return mix_seed(mix_seed(seed, stream), static_cast<std::uint64_t>(index));
}

std::string manifest_line(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["split"] = to_string(r.split);
  j["level"] = r.level;
  j["structure_seed"] = r.structure_seed;
  j["transform_seed"] = r.transform_seed;
  j["affine"] = {{"rotation_deg", r.affine.rotation_deg},
                 {"ty", r.affine.ty},
                 {"tx", r.affine.tx},
                 {"scale", r.affine.scale}};
  j["x"] = r.x;
  j["y"] = r.y;
  j["y_ideal"] = r.y_ideal;
  if (!r.x_aligned.empty()) j["x_aligned"] = r.x_aligned;
  return j.dump();
}

ManifestRecord parse_manifest_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ManifestRecord r;
    r.id = j.at("id").get<int>();
    r.split = parse_split(j.at("split").get<std::string>());
    r.level = j.at("level").get<int>();
    r.structure_seed = j.at("structure_seed").get<std::uint64_t>();
    r.transform_seed = j.at("transform_seed").get<std::uint64_t>();
    const auto& a = j.at("affine");
    r.affine = {a.at("rotation_deg").get<double>(), a.at("ty").get<double>(),
                a.at("tx").get<double>(), a.at("scale").get<double>()};
    r.x = j.at("x").get<std::string>();
    r.y = j.at("y").get<std::string>();
    r.y_ideal = j.at("y_ideal").get<std::string>();
    if (j.contains("x_aligned")) r.x_aligned = j.at("x_aligned").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest line: ") + e.what());
  }
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  std::vector<ManifestRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(parse_manifest_line(line));
  }
  return records;
}

std::vector<ManifestRecord> build_dataset(const DatasetOptions& opts,
                                          const std::filesystem::path& out_dir) {
  if (opts.n_train < 1 || opts.n_test < 1) {
    throw std::invalid_argument("build_dataset: n_train and n_test must be >= 1");
  }
  const MisalignmentSpec spec = level_spec(opts.level);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "train", ec);
  std::filesystem::create_directories(out_dir / "test", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const int total = opts.n_train + opts.n_test;
  std::vector<ManifestRecord> records(static_cast<std::size_t>(total));
  parallel_for(total, opts.threads, [&](Index k) {
    const bool is_train = k < opts.n_train;
    const Split split = is_train ? Split::train : Split::test;
    const int id = static_cast<int>(is_train ? k : k - opts.n_train);
    ManifestRecord r;
    r.id = id;
    r.split = split;
    r.level = opts.level;
    r.structure_seed = structure_seed(opts.seed, split, id);
    r.transform_seed = transform_seed(opts.seed, split, id);
    std::mt19937_64 rng(r.transform_seed);
    r.affine = quantize_params(sample_affine(spec, rng));

    const StructureMap map = generate_structure(r.structure_seed, opts.source_size, opts.source_size);
    ImagePair pair;
    pair.split = split;
    pair.x = render_stain(map, opts.source_style);
    pair.y = render_stain(map, opts.target_style);
    const ImagePair out = apply_misalignment(pair, r.affine, opts.crop);

    const std::string dir = to_string(split) + "/";
    const std::string stem = dir + pad_id(id);
    r.x = stem + "_x.png";
    r.y = stem + "_y.png";
    // Only x is warped, so the ideal target is the stored target itself.
    r.y_ideal = r.y;
    write_png((out_dir / r.x).string(), to_image8(out.x));
    write_png((out_dir / r.y).string(), to_image8(out.y));
    if (!is_train) {
      r.x_aligned = stem + "_x_aligned.png";
      write_png((out_dir / r.x_aligned).string(), to_image8(*out.x_aligned));
    }
    records[static_cast<std::size_t>(k)] = std::move(r);
  });

  std::ofstream manifest(out_dir / kManifestName, std::ios::binary | std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest under " + out_dir.string());
  for (const auto& r : records) manifest << manifest_line(r) << '\n';
  if (!manifest) throw IoError("failed writing manifest under " + out_dir.string());
  return records;
}

std::vector<LoadedPair> load_split(const std::filesystem::path& manifest_path, Split split,
                                   int threads) {
  const auto root = manifest_path.parent_path();
  std::vector<ManifestRecord> selected;
  for (auto& r : read_manifest(manifest_path))
    if (r.split == split) selected.push_back(std::move(r));
  std::vector<LoadedPair> pairs(selected.size());
  parallel_for(static_cast<Index>(selected.size()), threads, [&](Index k) {
    auto& p = pairs[static_cast<std::size_t>(k)];
    p.record = selected[static_cast<std::size_t>(k)];
    p.x = read_png((root / p.record.x).string());
    p.y = read_png((root / p.record.y).string());
    p.y_ideal = p.record.y_ideal == p.record.y ? p.y : read_png((root / p.record.y_ideal).string());
    p.x_aligned = p.record.x_aligned.empty() ? p.x : read_png((root / p.record.x_aligned).string());
  });
  return pairs;
}

std::uint64_t test_transform_hash(const std::vector<ManifestRecord>& records) {
  std::uint64_t h = kFnvOffset;
  for (const auto& r : records) {
    if (r.split != Split::test) continue;
    h = fnv1a(&r.id, sizeof r.id, h);
    h = fnv1a(&r.structure_seed, sizeof r.structure_seed, h);
    h = fnv1a(&r.transform_seed, sizeof r.transform_seed, h);
  }
  return h;
}

std::uint64_t dataset_content_hash(const std::filesystem::path& manifest_path) {
  const auto root = manifest_path.parent_path();
  const auto manifest = read_bytes(manifest_path);
  std::uint64_t h = fnv1a(manifest.data(), manifest.size());
  for (const auto& r : read_manifest(manifest_path)) {
    for (const std::string* path : {&r.x, &r.y, &r.x_aligned}) {
      if (path->empty()) continue;
      const auto bytes = read_bytes(root / *path);
      h = fnv1a(bytes.data(), bytes.size(), h);
    }
  }
  return h;
}

}  // namespace dgr
