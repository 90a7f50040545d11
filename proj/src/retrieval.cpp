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

#include "geofuse/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace geofuse {

const std::string& direction_name(Direction d) {
  static const std::string kD2S = "drone_to_satellite", kS2D = "satellite_to_drone";
  return d == Direction::kDroneToSatellite ? kD2S : kS2D;
}

std::vector<std::size_t> rank_gallery(const std::vector<double>& query,
                                      const std::vector<std::vector<double>>& gallery) {
  if (gallery.empty()) throw DataError("rank_gallery: empty gallery");
  std::vector<double> dist(gallery.size());
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    if (gallery[g].size() != query.size())
      throw ShapeError(concat("rank_gallery: feature width ", gallery[g].size(),
                              " vs query ", query.size()));
    double d2 = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      const double diff = query[j] - gallery[g][j];
      d2 += diff * diff;
    }
    dist[g] = d2;
  }
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&dist](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return a < b;
  });
  return order;
}

double recall_at_k(const std::vector<std::vector<std::size_t>>& rankings,
                   const std::vector<std::vector<bool>>& relevance, std::size_t k) {
  if (k < 1) throw ConfigError("recall_at_k: k must be >= 1");
  if (rankings.size() != relevance.size())
    throw ShapeError(concat("recall_at_k: ", rankings.size(), " rankings vs ",
                            relevance.size(), " relevance rows"));
  if (rankings.empty()) throw DataError("recall_at_k: no queries");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const std::size_t kk = std::min(k, rankings[q].size());
    for (std::size_t r = 0; r < kk; ++r) {
      if (relevance[q][rankings[q][r]]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double average_precision(const std::vector<std::size_t>& ranking,
                         const std::vector<bool>& relevance) {
  std::size_t total_relevant = 0;
  for (bool r : relevance)
    if (r) ++total_relevant;
  if (total_relevant == 0)
    throw DataError("average_precision: no relevant items for this query");
  double score = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    if (relevance[ranking[r]]) {
      ++hits;
      score += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return score / static_cast<double>(total_relevant);
}

namespace {

struct MetricAccum {
  std::vector<std::vector<std::size_t>> rankings;
  std::vector<std::vector<bool>> relevance;
  std::size_t skipped = 0;

  void add(const std::vector<double>& query, const std::vector<std::vector<double>>& gallery,
           const std::vector<bool>& rel) {
    bool any = false;
    for (bool r : rel)
      if (r) any = true;
    if (!any) {
      ++skipped;
      return;
    }
    rankings.push_back(rank_gallery(query, gallery));
    relevance.push_back(rel);
  }

  ConditionMetrics metrics() const {
    ConditionMetrics m;
    m.r1 = recall_at_k(rankings, relevance, 1);
    m.r5 = recall_at_k(rankings, relevance, 5);
    m.r10 = recall_at_k(rankings, relevance, 10);
    double ap = 0.0;
    for (std::size_t q = 0; q < rankings.size(); ++q)
      ap += average_precision(rankings[q], relevance[q]);
    m.ap = ap / static_cast<double>(rankings.size());
    return m;
  }
};

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<RetrievalReport> evaluate_conditions(
    const GeoFuseModel& model, const DatasetIndex& data, const EvalConfig& cfg,
    const std::function<const Image&(const std::string&)>& load) {
  const SplitIndex& split = data.test;
  if (split.classes.empty()) throw DataError("evaluate_conditions: empty test split");

  // Gallery side: fused satellite-roadmap embeddings, one per pair.
  std::vector<std::vector<double>> fused_gallery;
  std::vector<int> fused_labels;
  for (const ClassEntry& entry : split.classes) {
    const std::size_t pairs = std::min(entry.satellite.size(), entry.roadmap.size());
    for (std::size_t i = 0; i < pairs; ++i) {
      fused_gallery.push_back(
          model.fused_feature_values(load(entry.satellite[i]), load(entry.roadmap[i])));
      fused_labels.push_back(entry.class_id);
    }
  }

  // Query side: every test drone image, per condition.
  std::vector<std::string> drone_paths;
  std::vector<int> drone_labels;
  for (const ClassEntry& entry : split.classes) {
    for (const std::string& p : entry.drone) {
      drone_paths.push_back(p);
      drone_labels.push_back(entry.class_id);
    }
  }

  std::vector<RetrievalReport> reports(cfg.directions.size());
  for (std::size_t di = 0; di < cfg.directions.size(); ++di)
    reports[di].direction = cfg.directions[di];

  // Queries are encoded once per condition and shared by both directions.
  for (std::size_t ci = 0; ci < kNumWeatherConditions; ++ci) {
    const WeatherCondition cond = all_weather_conditions()[ci];
    std::vector<std::vector<double>> drone_feats(drone_paths.size());
    for (std::size_t i = 0; i < drone_paths.size(); ++i) {
      const Image corrupted = apply_weather(load(drone_paths[i]), cond, cfg.severity,
                                            derive_seed(cfg.seed, ci, i));
      drone_feats[i] = model.view_feature_values(corrupted);
    }

    for (std::size_t di = 0; di < cfg.directions.size(); ++di) {
      RetrievalReport& report = reports[di];
      MetricAccum accum;
      if (report.direction == Direction::kDroneToSatellite) {
        for (std::size_t q = 0; q < drone_feats.size(); ++q) {
          std::vector<bool> rel(fused_labels.size());
          for (std::size_t g = 0; g < fused_labels.size(); ++g)
            rel[g] = fused_labels[g] == drone_labels[q];
          accum.add(drone_feats[q], fused_gallery, rel);
        }
        report.gallery_count = fused_gallery.size();
        report.query_count = drone_feats.size();
      } else {
        for (std::size_t q = 0; q < fused_gallery.size(); ++q) {
          std::vector<bool> rel(drone_labels.size());
          for (std::size_t g = 0; g < drone_labels.size(); ++g)
            rel[g] = drone_labels[g] == fused_labels[q];
          accum.add(fused_gallery[q], drone_feats, rel);
        }
        report.gallery_count = drone_feats.size();
        report.query_count = fused_gallery.size();
      }
      report.skipped_queries += accum.skipped;
      report.conditions.emplace_back(cond, accum.metrics());
    }
  }

  for (RetrievalReport& report : reports) {
    double sum_r1 = 0, sum_r5 = 0, sum_r10 = 0, sum_ap = 0;
    for (const auto& [cond, m] : report.conditions) {
      sum_r1 += m.r1;
      sum_r5 += m.r5;
      sum_r10 += m.r10;
      sum_ap += m.ap;
    }
    const double n = static_cast<double>(kNumWeatherConditions);
    report.mean = {sum_r1 / n, sum_r5 / n, sum_r10 / n, sum_ap / n};
  }
  return reports;
}

void write_reports_json(const std::filesystem::path& path,
                        const std::vector<RetrievalReport>& reports) {
  nlohmann::ordered_json root = nlohmann::ordered_json::array();
  for (const auto& report : reports) {
    nlohmann::ordered_json obj;
    obj["direction"] = direction_name(report.direction);
    nlohmann::ordered_json conds;
    for (const auto& [cond, m] : report.conditions) {
      conds[weather_name(cond)] = {{"r1", m.r1}, {"r5", m.r5}, {"r10", m.r10}, {"ap", m.ap}};
    }
    obj["conditions"] = conds;
    obj["mean"] = {{"r1", report.mean.r1},
                   {"r5", report.mean.r5},
                   {"r10", report.mean.r10},
                   {"ap", report.mean.ap}};
    obj["query_count"] = report.query_count;
    obj["gallery_count"] = report.gallery_count;
    obj["skipped_queries"] = report.skipped_queries;
    root.push_back(obj);
  }
  std::ofstream out(path);
  if (!out) throw DataError(concat("write_reports_json: cannot open '", path.string(), "'"));
  out << root.dump(2) << '\n';
}

void write_reports_csv(const std::filesystem::path& path,
                       const std::vector<RetrievalReport>& reports) {
  std::ofstream out(path);
  if (!out) throw DataError(concat("write_reports_csv: cannot open '", path.string(), "'"));
  out << "direction,condition,r1,r5,r10,ap\n";
  for (const auto& report : reports) {
    for (const auto& [cond, m] : report.conditions) {
      out << direction_name(report.direction) << ',' << weather_name(cond) << ','
          << fmt_double(m.r1) << ',' << fmt_double(m.r5) << ',' << fmt_double(m.r10) << ','
          << fmt_double(m.ap) << '\n';
    }
    out << direction_name(report.direction) << ",Mean," << fmt_double(report.mean.r1) << ','
        << fmt_double(report.mean.r5) << ',' << fmt_double(report.mean.r10) << ','
        << fmt_double(report.mean.ap) << '\n';
  }
}

std::string format_report_table(const std::vector<RetrievalReport>& reports) {
  std::ostringstream os;
  for (const auto& report : reports) {
    os << "direction: " << direction_name(report.direction)
       << "  (queries=" << report.query_count << ", gallery=" << report.gallery_count << ")\n";
    char line[128];
    std::snprintf(line, sizeof(line), "  %-12s %8s %8s %8s %8s\n", "condition", "R@1", "R@5",
                  "R@10", "AP");
    os << line;
    auto row = [&](const std::string& name, const ConditionMetrics& m) {
      std::snprintf(line, sizeof(line), "  %-12s %8.4f %8.4f %8.4f %8.4f\n", name.c_str(),
                    m.r1, m.r5, m.r10, m.ap);
      os << line;
    };
    for (const auto& [cond, m] : report.conditions) row(weather_name(cond), m);
    row("Mean", report.mean);
  }
  return os.str();
}

}  // namespace geofuse
