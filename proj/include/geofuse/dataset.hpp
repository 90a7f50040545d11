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

#ifndef GEOFUSE_DATASET_HPP_
#define GEOFUSE_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "geofuse/image.hpp"

namespace geofuse {

// On-disk layout: root/{train,test}/{drone,satellite,roadmap}/<class_id>/*.png
// Classes and file lists are sorted lexicographically for determinism.

struct ClassEntry {
  std::string name;  // directory name, e.g. "0007"
  int class_id = 0;
  std::vector<std::string> drone;      // paths relative to the dataset root
  std::vector<std::string> satellite;
  std::vector<std::string> roadmap;
};

struct SplitIndex {
  std::vector<ClassEntry> classes;
};

struct DatasetIndex {
  std::filesystem::path root;
  SplitIndex train;
  SplitIndex test;
};

DatasetIndex load_dataset(const std::filesystem::path& root);

// ---- synchronized augmentation ---------------------------------------------

// One flip-then-rotate transform applied identically to a satellite-roadmap
// pair. Quarter turns are counterclockwise.
struct AugmentOp {
  bool flip = false;
  int quarter_turns = 0;
};

AugmentOp sample_augment(std::uint64_t seed);
AugmentOp inverse_augment(AugmentOp op);
Image apply_augment(const Image& img, AugmentOp op);
std::pair<Image, Image> synchronized_augment(const Image& satellite, const Image& roadmap,
                                             std::uint64_t seed);

// ---- generator manifest ------------------------------------------------------

// Line format: class_id<TAB>view<TAB>seed<TAB>path
struct ManifestEntry {
  int class_id = 0;
  std::string view;  // satellite | roadmap | drone
  std::uint64_t seed = 0;
  std::string path;  // relative to the dataset root

  bool operator==(const ManifestEntry&) const = default;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// ---- synthetic benchmark generation ------------------------------------------

struct SynthConfig {
  std::size_t classes = 32;
  std::size_t views_per_class = 8;  // drone views per class, per split
  std::size_t image_size = 96;
  std::uint64_t seed = 42;
  bool force = false;  // overwrite a non-empty output directory
};

// Materializes the dataset layout plus "manifest.tsv" under out_root and
// returns the manifest entries. Train and test splits share scenes; test
// drone views use fresh warp jitter.
std::vector<ManifestEntry> generate_synthetic_dataset(const SynthConfig& cfg,
                                                      const std::filesystem::path& out_root);

}  // namespace geofuse

#endif  // GEOFUSE_DATASET_HPP_
