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

#ifndef GEOFUSE_RETRIEVAL_HPP_
#define GEOFUSE_RETRIEVAL_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/model.hpp"
#include "geofuse/weather.hpp"

namespace geofuse {

enum class Direction { kDroneToSatellite, kSatelliteToDrone };

const std::string& direction_name(Direction d);

// Gallery indices by ascending Euclidean distance; ties broken by ascending
// gallery index so rankings are bitwise reproducible.
std::vector<std::size_t> rank_gallery(const std::vector<double>& query,
                                      const std::vector<std::vector<double>>& gallery);

// Fraction of queries with at least one relevant item in the top k. k larger
// than the gallery is clamped with a warning counter in the report.
double recall_at_k(const std::vector<std::vector<std::size_t>>& rankings,
                   const std::vector<std::vector<bool>>& relevance, std::size_t k);

// Standard information-retrieval AP of one ranking; 1/rank for a single
// relevant item.
double average_precision(const std::vector<std::size_t>& ranking,
                         const std::vector<bool>& relevance);

struct ConditionMetrics {
  double r1 = 0, r5 = 0, r10 = 0, ap = 0;
};

struct RetrievalReport {
  Direction direction = Direction::kDroneToSatellite;
  std::vector<std::pair<WeatherCondition, ConditionMetrics>> conditions;
  ConditionMetrics mean;
  std::size_t query_count = 0;
  std::size_t gallery_count = 0;
  std::size_t skipped_queries = 0;  // queries with zero relevant items
};

struct EvalConfig {
  double severity = 0.7;
  std::uint64_t seed = 1234;
  std::vector<Direction> directions = {Direction::kDroneToSatellite,
                                       Direction::kSatelliteToDrone};
};

// Per-condition retrieval over the test split. Drone-to-satellite ranks
// weather-corrupted drone queries against one fused satellite-roadmap
// embedding per class; satellite-to-drone is the reverse.
std::vector<RetrievalReport> evaluate_conditions(
    const GeoFuseModel& model, const DatasetIndex& data, const EvalConfig& cfg,
    const std::function<const Image&(const std::string&)>& load);

void write_reports_json(const std::filesystem::path& path,
                        const std::vector<RetrievalReport>& reports);
void write_reports_csv(const std::filesystem::path& path,
                       const std::vector<RetrievalReport>& reports);
std::string format_report_table(const std::vector<RetrievalReport>& reports);

}  // namespace geofuse

#endif  // GEOFUSE_RETRIEVAL_HPP_
