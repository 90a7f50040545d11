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

#ifndef GEOFUSE_WEATHER_HPP_
#define GEOFUSE_WEATHER_HPP_

#include <array>
#include <string>

#include "geofuse/image.hpp"

namespace geofuse {

// The ten evaluation conditions. Compounds apply their constituents in fixed
// order (fog first, then precipitation; rain before snow).
enum class WeatherCondition {
  kNormal = 0,
  kFog,
  kRain,
  kSnow,
  kFogRain,
  kFogSnow,
  kRainSnow,
  kDark,
  kOverExposed,
  kWind,
};

inline constexpr std::size_t kNumWeatherConditions = 10;

const std::array<WeatherCondition, kNumWeatherConditions>& all_weather_conditions();
const std::string& weather_name(WeatherCondition c);
WeatherCondition parse_weather(const std::string& name);

// Deterministic parametric corruption. severity in [0, 1]; severity 0 and
// Normal are exact identities. Output stays in [0, 1] with the input's shape.
Image apply_weather(const Image& img, WeatherCondition condition, double severity,
                    std::uint64_t seed);

}  // namespace geofuse

#endif  // GEOFUSE_WEATHER_HPP_
