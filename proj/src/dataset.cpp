/*
 * Copyright 2026 GeoFuse Contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "geofuse/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "geofuse/rng.hpp"
#include "geofuse/scene.hpp"

namespace geofuse {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> sorted_pngs(const fs::path& dir, const fs::path& root) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ".png") continue;
    out.push_back(fs::relative(entry.path(), root).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

SplitIndex load_split(const fs::path& root, const std::string& split) {
  const fs::path split_dir = root / split;
  if (!fs::exists(split_dir))
    throw DataError(concat("load_dataset: missing split directory '", split_dir.string(), "'"));

  std::set<std::string> class_names;
  for (const char* view : {"drone", "satellite", "roadmap"}) {
    const fs::path view_dir = split_dir / view;
    if (!fs::exists(view_dir)) continue;
    for (const auto& entry : fs::directory_iterator(view_dir))
      if (entry.is_directory()) class_names.insert(entry.path().filename().string());
  }
  if (class_names.empty())
    throw DataError(concat("load_dataset: split '", split, "' is empty"));

  SplitIndex index;
  for (const std::string& name : class_names) {  // std::set iterates sorted
    ClassEntry entry;
    entry.name = name;
    try {
      entry.class_id = std::stoi(name);
    } catch (...) {
      throw DataError(concat("load_dataset: class directory '", name,
                             "' is not a numeric class id"));
    }
    entry.drone = sorted_pngs(split_dir / "drone" / name, root);
    entry.satellite = sorted_pngs(split_dir / "satellite" / name, root);
    entry.roadmap = sorted_pngs(split_dir / "roadmap" / name, root);
    if (entry.satellite.empty())
      throw DataError(concat("load_dataset: class '", name, "' in split '", split,
                             "' has no satellite image"));
    if (entry.roadmap.empty())
      throw DataError(concat("load_dataset: class '", name, "' in split '", split,
                             "' has no roadmap image"));
    if (entry.drone.empty())
      throw DataError(concat("load_dataset: class '", name, "' in split '", split,
                             "' has no drone images"));
    index.classes.push_back(std::move(entry));
  }
  return index;
}

}  // namespace

DatasetIndex load_dataset(const fs::path& root) {
  if (!fs::exists(root))
    throw DataError(concat("load_dataset: root '", root.string(), "' does not exist"));
  DatasetIndex index;
  index.root = root;
  index.train = load_split(root, "train");
  index.test = load_split(root, "test");
  return index;
}

// ---- synchronized augmentation ---------------------------------------------

AugmentOp sample_augment(std::uint64_t seed) {
  Rng rng(seed);
  AugmentOp op;
  op.flip = rng.index(2) == 1;
  op.quarter_turns = static_cast<int>(rng.index(4));
  return op;
}

AugmentOp inverse_augment(AugmentOp op) {
  // The transform is rotate(quarter_turns) after flip; flipping conjugates
  // a rotation into its inverse, which makes flipped ops self-inverse.
  if (op.flip) return op;
  return AugmentOp{false, (4 - op.quarter_turns) % 4};
}

namespace {

Image flip_horizontal(const Image& in) {
  Image out(in.width, in.height);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < in.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out.at(y, x, c) = in.at(y, in.width - 1 - x, c);
  return out;
}

Image rotate90_ccw(const Image& in) {
  Image out(in.height, in.width);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < in.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out.at(in.width - 1 - x, y, c) = in.at(y, x, c);
  return out;
}

}  // namespace

Image apply_augment(const Image& img, AugmentOp op) {
  Image out = op.flip ? flip_horizontal(img) : img;
  for (int k = 0; k < op.quarter_turns; ++k) out = rotate90_ccw(out);
  return out;
}

std::pair<Image, Image> synchronized_augment(const Image& satellite, const Image& roadmap,
                                             std::uint64_t seed) {
  if (!satellite.same_size(roadmap))
    throw DataError(concat("synchronized_augment: size mismatch ", satellite.width, "x",
                           satellite.height, " vs ", roadmap.width, "x", roadmap.height));
  const AugmentOp op = sample_augment(seed);
  return {apply_augment(satellite, op), apply_augment(roadmap, op)};
}

// ---- manifest -----------------------------------------------------------------

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw DataError(concat("write_manifest: cannot open '", path.string(), "'"));
  for (const auto& e : entries)
    out << e.class_id << '\t' << e.view << '\t' << e.seed << '\t' << e.path << '\n';
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(concat("read_manifest: cannot open '", path.string(), "'"));
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string id_str, seed_str;
    if (!std::getline(ss, id_str, '\t') || !std::getline(ss, e.view, '\t') ||
        !std::getline(ss, seed_str, '\t') || !std::getline(ss, e.path))
      throw DataError(concat("read_manifest: malformed line ", lineno));
    e.class_id = std::stoi(id_str);
    e.seed = std::stoull(seed_str);
    entries.push_back(std::move(e));
  }
  return entries;
}

// ---- synthetic generation --------------------------------------------------------

std::vector<ManifestEntry> generate_synthetic_dataset(const SynthConfig& cfg,
                                                      const fs::path& out_root) {
  if (cfg.classes == 0) throw ConfigError("generate_synthetic_dataset: classes must be >= 1");
  if (cfg.views_per_class == 0)
    throw ConfigError("generate_synthetic_dataset: views_per_class must be >= 1");
  if (fs::exists(out_root) && !fs::is_empty(out_root) && !cfg.force)
    throw ConfigError(concat("generate_synthetic_dataset: output '", out_root.string(),
                             "' is not empty (use force to overwrite)"));
  fs::create_directories(out_root);

  std::vector<ManifestEntry> manifest;
  char name[16];
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    std::snprintf(name, sizeof(name), "%04zu", c);
    const SceneSpec scene = generate_scene(static_cast<int>(c), cfg.seed);
    const Image satellite = render_satellite(scene, cfg.image_size);
    const Image roadmap = render_roadmap(scene, cfg.image_size);

    for (int split = 0; split < 2; ++split) {
      const std::string split_name = split == 0 ? "train" : "test";
      for (const char* view : {"satellite", "roadmap", "drone"})
        fs::create_directories(out_root / split_name / view / name);

      const std::string sat_rel = split_name + "/satellite/" + name + "/sat.png";
      const std::string road_rel = split_name + "/roadmap/" + name + "/road.png";
      save_png(satellite, (out_root / sat_rel).string());
      save_png(roadmap, (out_root / road_rel).string());
      manifest.push_back({static_cast<int>(c), "satellite", scene.seed, sat_rel});
      manifest.push_back({static_cast<int>(c), "roadmap", scene.seed, road_rel});

      for (std::size_t v = 0; v < cfg.views_per_class; ++v) {
        const std::size_t view_index = split == 0 ? v : cfg.views_per_class + v;
        char fname[32];
        std::snprintf(fname, sizeof(fname), "drone_%02zu.png", view_index);
        const std::string drone_rel = split_name + "/drone/" + name + "/" + fname;
        save_png(render_drone(scene, cfg.image_size, view_index),
                 (out_root / drone_rel).string());
        manifest.push_back({static_cast<int>(c), "drone",
                            drone_view_seed(scene, view_index), drone_rel});
      }
    }
  }
  write_manifest(out_root / "manifest.tsv", manifest);
  return manifest;
}

}  // namespace geofuse
