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

#include "geofuse/weather.hpp"

#include <algorithm>
#include <cmath>

#include "geofuse/rng.hpp"

namespace geofuse {

const std::array<WeatherCondition, kNumWeatherConditions>& all_weather_conditions() {
  static const std::array<WeatherCondition, kNumWeatherConditions> kAll = {
      WeatherCondition::kNormal,   WeatherCondition::kFog,      WeatherCondition::kRain,
      WeatherCondition::kSnow,     WeatherCondition::kFogRain,  WeatherCondition::kFogSnow,
      WeatherCondition::kRainSnow, WeatherCondition::kDark,     WeatherCondition::kOverExposed,
      WeatherCondition::kWind};
  return kAll;
}

const std::string& weather_name(WeatherCondition c) {
  static const std::array<std::string, kNumWeatherConditions> kNames = {
      "Normal", "Fog", "Rain", "Snow", "FogRain", "FogSnow", "RainSnow",
      "Dark", "OverExposed", "Wind"};
  return kNames[static_cast<std::size_t>(c)];
}

WeatherCondition parse_weather(const std::string& name) {
  for (WeatherCondition c : all_weather_conditions())
    if (weather_name(c) == name) return c;
  throw DataError(concat("unknown weather condition '", name, "'"));
}

namespace {

void blend_px(Image& img, std::size_t y, std::size_t x, double alpha, double r, double g,
              double b) {
  img.at(y, x, 0) += alpha * (r - img.at(y, x, 0));
  img.at(y, x, 1) += alpha * (g - img.at(y, x, 1));
  img.at(y, x, 2) += alpha * (b - img.at(y, x, 2));
}

Image fog(const Image& in, double severity) {
  const double a = 0.75 * severity;
  Image out = in;
  for (auto& v : out.px) v += a * (1.0 - v);
  return out;
}

Image rain(const Image& in, double severity, std::uint64_t seed) {
  Image out = in;
  Rng rng(seed);
  const std::size_t s = std::min(in.width, in.height);
  const long count = std::lround(severity * 0.0055 * static_cast<double>(s) * s);
  const double dx = 0.33, dy = 0.94;  // fixed slant
  for (long k = 0; k < count; ++k) {
    double x = rng.uniform(0.0, static_cast<double>(in.width));
    double y = rng.uniform(-0.2 * in.height, static_cast<double>(in.height));
    const double len = s * (0.10 + 0.10 * rng.uniform());
    const double alpha = 0.30 + 0.35 * rng.uniform();
    const long steps = std::lround(len);
    for (long t = 0; t < steps; ++t) {
      const long xi = std::lround(x + t * dx);
      const long yi = std::lround(y + t * dy);
      if (xi < 0 || yi < 0 || xi >= static_cast<long>(in.width) ||
          yi >= static_cast<long>(in.height))
        continue;
      blend_px(out, yi, xi, alpha, 0.75, 0.78, 0.82);
    }
  }
  return out;
}

Image snow(const Image& in, double severity, std::uint64_t seed) {
  Image out = in;
  Rng rng(seed);
  const std::size_t s = std::min(in.width, in.height);
  const long count = std::lround(severity * 0.012 * static_cast<double>(s) * s);
  for (long k = 0; k < count; ++k) {
    const double cx = rng.uniform(0.0, static_cast<double>(in.width));
    const double cy = rng.uniform(0.0, static_cast<double>(in.height));
    const double rad = 0.7 + 1.1 * rng.uniform();
    const double alpha = 0.5 + 0.4 * rng.uniform();
    const long r = static_cast<long>(std::ceil(rad));
    for (long oy = -r; oy <= r; ++oy) {
      for (long ox = -r; ox <= r; ++ox) {
        const long xi = std::lround(cx) + ox;
        const long yi = std::lround(cy) + oy;
        if (xi < 0 || yi < 0 || xi >= static_cast<long>(in.width) ||
            yi >= static_cast<long>(in.height))
          continue;
        if (ox * ox + oy * oy > rad * rad) continue;
        blend_px(out, yi, xi, alpha, 0.98, 0.98, 1.0);
      }
    }
  }
  // Light whitening veil on top of the flakes.
  const double veil = 0.08 * severity;
  for (auto& v : out.px) v += veil * (1.0 - v);
  return out;
}

Image dark(const Image& in, double severity) {
  const double gamma = 1.0 + 1.2 * severity;
  const double gain = 1.0 - 0.55 * severity;
  Image out = in;
  for (auto& v : out.px) v = std::pow(std::max(v, 0.0), gamma) * gain;
  return out;
}

Image over_exposed(const Image& in, double severity) {
  const double gain = 1.0 + 1.6 * severity;
  const double lift = 0.15 * severity;
  Image out = in;
  for (auto& v : out.px) v = v * gain + lift;
  return out;
}

Image wind(const Image& in, double severity) {
  const std::size_t s = std::min(in.width, in.height);
  const long r = std::lround(severity * 0.045 * static_cast<double>(s));
  if (r == 0) return in;
  const double ang = 25.0 * 3.14159265358979323846 / 180.0;
  const double dx = std::cos(ang), dy = std::sin(ang);
  Image out(in.width, in.height);
  const double inv = 1.0 / static_cast<double>(2 * r + 1);
  for (std::size_t y = 0; y < in.height; ++y) {
    for (std::size_t x = 0; x < in.width; ++x) {
      double acc[3] = {0, 0, 0};
      for (long t = -r; t <= r; ++t) {
        // Bilinear sample with edge clamping.
        double sx = static_cast<double>(x) + t * dx;
        double sy = static_cast<double>(y) + t * dy;
        sx = std::clamp(sx, 0.0, static_cast<double>(in.width - 1));
        sy = std::clamp(sy, 0.0, static_cast<double>(in.height - 1));
        const std::size_t x0 = static_cast<std::size_t>(sx);
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t x1 = std::min(x0 + 1, in.width - 1);
        const std::size_t y1 = std::min(y0 + 1, in.height - 1);
        const double fx = sx - x0, fy = sy - y0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double top = in.at(y0, x0, c) * (1 - fx) + in.at(y0, x1, c) * fx;
          const double bot = in.at(y1, x0, c) * (1 - fx) + in.at(y1, x1, c) * fx;
          acc[c] += top * (1 - fy) + bot * fy;
        }
      }
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = acc[c] * inv;
    }
  }
  return out;
}

}  // namespace

Image apply_weather(const Image& img, WeatherCondition condition, double severity,
                    std::uint64_t seed) {
  if (severity < 0.0 || severity > 1.0)
    throw ConfigError(concat("apply_weather: severity ", severity, " outside [0, 1]"));
  if (condition == WeatherCondition::kNormal || severity == 0.0) return img;

  Image out;
  switch (condition) {
    case WeatherCondition::kNormal:
      out = img;
      break;
    case WeatherCondition::kFog:
      out = fog(img, severity);
      break;
    case WeatherCondition::kRain:
      out = rain(img, severity, derive_seed(seed, 1));
      break;
    case WeatherCondition::kSnow:
      out = snow(img, severity, derive_seed(seed, 2));
      break;
    case WeatherCondition::kFogRain:
      out = rain(fog(img, severity), severity, derive_seed(seed, 1));
      break;
    case WeatherCondition::kFogSnow:
      out = snow(fog(img, severity), severity, derive_seed(seed, 2));
      break;
    case WeatherCondition::kRainSnow:
      out = snow(rain(img, severity, derive_seed(seed, 1)), severity, derive_seed(seed, 2));
      break;
    case WeatherCondition::kDark:
      out = dark(img, severity);
      break;
    case WeatherCondition::kOverExposed:
      out = over_exposed(img, severity);
      break;
    case WeatherCondition::kWind:
      out = wind(img, severity);
      break;
  }
  out.clip01();
  return out;
}

}  // namespace geofuse
