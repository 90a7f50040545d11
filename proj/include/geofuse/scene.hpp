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

#ifndef GEOFUSE_SCENE_HPP_
#define GEOFUSE_SCENE_HPP_

#include <cstdint>
#include <vector>

#include "geofuse/image.hpp"

namespace geofuse {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct Segment {
  Vec2 a, b;
  bool operator==(const Segment&) const = default;
};

struct BuildingRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int color_index = 0;
  bool operator==(const BuildingRect&) const = default;
};

// Procedural scene in unit-square coordinates: a road graph shared by the
// satellite and roadmap renders, plus building footprints.
struct SceneSpec {
  std::uint64_t seed = 0;
  int class_id = 0;
  std::vector<std::vector<Vec2>> roads;  // polylines
  std::vector<BuildingRect> buildings;

  std::vector<Segment> segments() const;
  void validate() const;
};

// Deterministic scene per (class_id, seed); distinct ids give distinct roads.
SceneSpec generate_scene(int class_id, std::uint64_t seed);

struct SceneViews {
  Image satellite;
  Image roadmap;
  Image drone_clean;
};

// Renders the aligned triplet. The roadmap depends on the road graph only.
// drone_view selects the seeded jitter of the fixed perspective-style warp.
SceneViews render_views(const SceneSpec& scene, std::size_t size, std::size_t drone_view = 0);

Image render_satellite(const SceneSpec& scene, std::size_t size);
Image render_roadmap(const SceneSpec& scene, std::size_t size);
Image render_drone(const SceneSpec& scene, std::size_t size, std::size_t drone_view);

// Seed of the jitter stream behind a drone view; recorded in manifests.
std::uint64_t drone_view_seed(const SceneSpec& scene, std::size_t drone_view);

// Boolean road-stroke raster used by both renders; exposed for alignment
// checks.
std::vector<bool> road_mask(const SceneSpec& scene, std::size_t size);

}  // namespace geofuse

#endif  // GEOFUSE_SCENE_HPP_
