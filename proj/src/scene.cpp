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

#include "geofuse/scene.hpp"

#include <algorithm>
#include <cmath>

#include "geofuse/rng.hpp"

namespace geofuse {

namespace {

constexpr std::uint64_t kSceneTag = 0x5CE11E;
constexpr std::uint64_t kDroneTag = 0xD201E;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double dist_point_segment(double px, double py, const Segment& s) {
  const double vx = s.b.x - s.a.x, vy = s.b.y - s.a.y;
  const double wx = px - s.a.x, wy = py - s.a.y;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (s.a.x + t * vx), dy = py - (s.a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Smooth per-scene value noise from a seeded lattice, bilinearly upsampled.
struct NoiseLattice {
  std::size_t n;
  std::vector<double> values;

  NoiseLattice(std::size_t n_, std::uint64_t seed) : n(n_), values(n_ * n_) {
    Rng rng(seed);
    for (auto& v : values) v = rng.uniform(-1.0, 1.0);
  }

  double sample(double u, double v) const {
    const double gu = clamp01(u) * (n - 1);
    const double gv = clamp01(v) * (n - 1);
    const std::size_t x0 = std::min(static_cast<std::size_t>(gu), n - 2);
    const std::size_t y0 = std::min(static_cast<std::size_t>(gv), n - 2);
    const double fx = gu - x0, fy = gv - y0;
    const double top = values[y0 * n + x0] * (1 - fx) + values[y0 * n + x0 + 1] * fx;
    const double bot = values[(y0 + 1) * n + x0] * (1 - fx) + values[(y0 + 1) * n + x0 + 1] * fx;
    return top * (1 - fy) + bot * fy;
  }
};

constexpr double kRoadSatColor[3] = {0.24, 0.24, 0.27};
constexpr double kRoadMapColor[3] = {0.15, 0.15, 0.15};

const double kPalette[4][3] = {
    {0.55, 0.52, 0.50},  // concrete gray
    {0.62, 0.42, 0.35},  // brick
    {0.35, 0.37, 0.40},  // dark slate
    {0.68, 0.63, 0.52},  // tan
};

std::vector<Vec2> horizontal_road(Rng& rng) {
  std::vector<Vec2> pts;
  const int bends = 1 + static_cast<int>(rng.index(2));
  pts.push_back({0.0, rng.uniform(0.15, 0.85)});
  for (int i = 1; i <= bends; ++i) {
    const double x = static_cast<double>(i) / (bends + 1) + rng.uniform(-0.08, 0.08);
    pts.push_back({clamp01(x), rng.uniform(0.12, 0.88)});
  }
  pts.push_back({1.0, rng.uniform(0.15, 0.85)});
  return pts;
}

std::vector<Vec2> vertical_road(Rng& rng) {
  std::vector<Vec2> pts = horizontal_road(rng);
  for (auto& p : pts) std::swap(p.x, p.y);
  return pts;
}

}  // namespace

std::vector<Segment> SceneSpec::segments() const {
  std::vector<Segment> out;
  for (const auto& poly : roads)
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) out.push_back({poly[i], poly[i + 1]});
  return out;
}

void SceneSpec::validate() const {
  if (segments().size() < 2) throw DataError("SceneSpec: fewer than 2 road segments");
  if (buildings.empty()) throw DataError("SceneSpec: no buildings");
  for (const auto& poly : roads)
    for (const auto& p : poly)
      if (p.x < 0 || p.x > 1 || p.y < 0 || p.y > 1)
        throw DataError("SceneSpec: road point outside the unit square");
  for (const auto& b : buildings)
    if (b.x0 < 0 || b.y0 < 0 || b.x1 > 1 || b.y1 > 1 || b.x0 >= b.x1 || b.y0 >= b.y1)
      throw DataError("SceneSpec: building outside the unit square");
}

SceneSpec generate_scene(int class_id, std::uint64_t seed) {
  SceneSpec scene;
  scene.seed = derive_seed(seed, static_cast<std::uint64_t>(class_id), kSceneTag);
  scene.class_id = class_id;
  Rng rng(scene.seed);

  scene.roads.push_back(horizontal_road(rng));
  scene.roads.push_back(vertical_road(rng));
  if (rng.uniform() < 0.6) {
    // Diagonal connector from mid-canvas to a random edge.
    Vec2 from{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
    Vec2 to;
    switch (rng.index(4)) {
      case 0: to = {0.0, rng.uniform(0.1, 0.9)}; break;
      case 1: to = {1.0, rng.uniform(0.1, 0.9)}; break;
      case 2: to = {rng.uniform(0.1, 0.9), 0.0}; break;
      default: to = {rng.uniform(0.1, 0.9), 1.0}; break;
    }
    scene.roads.push_back({from, to});
  }
  if (rng.uniform() < 0.35) {
    const double y = rng.uniform(0.1, 0.9);
    scene.roads.push_back({{rng.uniform(0.0, 0.25), y},
                           {rng.uniform(0.75, 1.0), clamp01(y + rng.uniform(-0.15, 0.15))}});
  }

  const auto segs = scene.segments();
  const std::size_t n_buildings = 4 + rng.index(4);
  for (std::size_t b = 0; b < n_buildings; ++b) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double w = rng.uniform(0.08, 0.20);
      const double h = rng.uniform(0.08, 0.20);
      const double cx = rng.uniform(w / 2, 1.0 - w / 2);
      const double cy = rng.uniform(h / 2, 1.0 - h / 2);
      double d = 1e9;
      for (const auto& s : segs) d = std::min(d, dist_point_segment(cx, cy, s));
      if (d < 0.075) continue;
      BuildingRect rect;
      rect.x0 = cx - w / 2;
      rect.y0 = cy - h / 2;
      rect.x1 = cx + w / 2;
      rect.y1 = cy + h / 2;
      rect.color_index = static_cast<int>(rng.index(4));
      scene.buildings.push_back(rect);
      break;
    }
  }
  if (scene.buildings.empty()) {
    // Crowded road graph: place one building regardless of distance.
    scene.buildings.push_back({0.05, 0.05, 0.18, 0.18, static_cast<int>(rng.index(4))});
  }
  scene.validate();
  return scene;
}

std::vector<bool> road_mask(const SceneSpec& scene, std::size_t size) {
  const auto segs = scene.segments();
  const double half_width = std::max(2.0, static_cast<double>(size) / 24.0) / 2.0;
  std::vector<bool> mask(size * size, false);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = (x + 0.5) / size, py = (y + 0.5) / size;
      for (const auto& s : segs) {
        if (dist_point_segment(px, py, s) * size <= half_width) {
          mask[y * size + x] = true;
          break;
        }
      }
    }
  }
  return mask;
}

Image render_satellite(const SceneSpec& scene, std::size_t size) {
  Image img(size, size);
  NoiseLattice coarse(5, derive_seed(scene.seed, 11));
  NoiseLattice fine(17, derive_seed(scene.seed, 12));
  const double base[3] = {0.40, 0.46, 0.32};
  const double chan[3] = {0.9, 1.0, 0.8};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      const double n = 0.10 * coarse.sample(u, v) + 0.05 * fine.sample(u, v);
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = clamp01(base[c] + n * chan[c]);
    }
  }
  for (const auto& b : scene.buildings) {
    const double* color = kPalette[b.color_index % 4];
    const long x0 = std::lround(b.x0 * size), x1 = std::lround(b.x1 * size);
    const long y0 = std::lround(b.y0 * size), y1 = std::lround(b.y1 * size);
    for (long y = std::max(0L, y0); y < std::min<long>(size, y1); ++y) {
      for (long x = std::max(0L, x0); x < std::min<long>(size, x1); ++x) {
        const bool border = (y == y0 || y == y1 - 1 || x == x0 || x == x1 - 1);
        for (std::size_t c = 0; c < 3; ++c)
          img.at(y, x, c) = border ? color[c] * 0.65 : color[c];
      }
    }
  }
  const auto mask = road_mask(scene, size);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t c = 0; c < 3; ++c) img.px[i * 3 + c] = kRoadSatColor[c];
  }
  return img;
}

Image render_roadmap(const SceneSpec& scene, std::size_t size) {
  Image img(size, size, 1.0);
  const auto mask = road_mask(scene, size);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t c = 0; c < 3; ++c) img.px[i * 3 + c] = kRoadMapColor[c];
  }
  return img;
}

std::uint64_t drone_view_seed(const SceneSpec& scene, std::size_t drone_view) {
  return derive_seed(scene.seed, kDroneTag, drone_view);
}

Image render_drone(const SceneSpec& scene, std::size_t size, std::size_t drone_view) {
  const Image sat = render_satellite(scene, size);
  Rng rng(drone_view_seed(scene, drone_view));
  const double theta = rng.uniform(-0.105, 0.105);     // about +/- 6 degrees
  const double scale = rng.uniform(0.92, 1.08);
  const double tx = rng.uniform(-0.04, 0.04);
  const double ty = rng.uniform(-0.04, 0.04);
  // Fixed mildly-perspective source quad: the top edge is pinched inward.
  const Vec2 q_tl{0.07, 0.10}, q_tr{0.93, 0.10}, q_br{1.0, 0.97}, q_bl{0.0, 0.97};

  const double c = std::cos(theta), s = std::sin(theta);
  Image out(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double u = (x + 0.5) / size - 0.5;
      double v = (y + 0.5) / size - 0.5;
      const double ru = 0.5 + scale * (c * u - s * v) + tx;
      const double rv = 0.5 + scale * (s * u + c * v) + ty;
      const double pu = clamp01(ru), pv = clamp01(rv);
      const double sx = ((1 - pv) * ((1 - pu) * q_tl.x + pu * q_tr.x) +
                         pv * ((1 - pu) * q_bl.x + pu * q_br.x));
      const double sy = ((1 - pv) * ((1 - pu) * q_tl.y + pu * q_tr.y) +
                         pv * ((1 - pu) * q_bl.y + pu * q_br.y));
      double fx = std::clamp(sx * size - 0.5, 0.0, static_cast<double>(size - 1));
      double fy = std::clamp(sy * size - 0.5, 0.0, static_cast<double>(size - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t y0 = static_cast<std::size_t>(fy);
      const std::size_t x1 = std::min(x0 + 1, size - 1);
      const std::size_t y1 = std::min(y0 + 1, size - 1);
      const double ax = fx - x0, ay = fy - y0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double top = sat.at(y0, x0, ch) * (1 - ax) + sat.at(y0, x1, ch) * ax;
        const double bot = sat.at(y1, x0, ch) * (1 - ax) + sat.at(y1, x1, ch) * ax;
        out.at(y, x, ch) = top * (1 - ay) + bot * ay;
      }
    }
  }
  return out;
}

SceneViews render_views(const SceneSpec& scene, std::size_t size, std::size_t drone_view) {
  SceneViews views;
  views.satellite = render_satellite(scene, size);
  views.roadmap = render_roadmap(scene, size);
  views.drone_clean = render_drone(scene, size, drone_view);
  return views;
}

}  // namespace geofuse
