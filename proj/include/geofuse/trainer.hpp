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

#ifndef GEOFUSE_TRAINER_HPP_
#define GEOFUSE_TRAINER_HPP_

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "geofuse/model.hpp"

namespace geofuse {

enum class AnchorRefresh { kEveryEpoch, kStatic };
enum class Ablation { kFull, kTokenOnly, kNoCc };

AnchorRefresh parse_anchor_refresh(const std::string& name);
Ablation parse_ablation(const std::string& name);
const std::string& ablation_name(Ablation a);
const std::string& anchor_refresh_name(AnchorRefresh r);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 0.002;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::vector<std::size_t> milestones{17, 26};  // 57% / 86% of the run
  std::vector<double> decay_factors{0.1, 0.1};
  double lambda = 0.10;
  double tau = 0.07;
  double clamp_lo = 1e-8;
  bool it_enabled = true;
  bool normalize_features = true;  // l2-normalize features entering the similarities
  double weather_severity = 0.7;
  AnchorRefresh anchor_refresh = AnchorRefresh::kEveryEpoch;
  Ablation ablation = Ablation::kFull;
  std::uint64_t seed = 42;

  void validate() const;
  // Class contrastive weight after ablation flags.
  double effective_lambda() const;
  double lr_at_epoch(std::size_t epoch) const;  // epochs are 1-based
};

struct LossRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double l_it = 0, l_ce = 0, l_cc = 0, l_total = 0, lr = 0;
};

struct SgdState {
  std::map<std::string, std::vector<double>> velocity;
};

// Classical momentum with coupled weight decay:
//   v <- momentum * v + (g + wd * theta); theta <- theta - lr * v.
// Parameters named in `frozen` are left untouched.
void sgd_step(ParameterStore& params, const GradMap& grads, SgdState& state, double lr,
              double momentum, double weight_decay,
              const std::set<std::string>& frozen = {});

// Loads dataset rasters once and serves them by root-relative path.
class ImageCache {
 public:
  explicit ImageCache(std::filesystem::path root) : root_(std::move(root)) {}
  const Image& get(const std::string& rel_path);

 private:
  std::filesystem::path root_;
  std::unordered_map<std::string, Image> cache_;
};

// Anchor recomputation from the current parameters (train split, clean pairs).
AnchorSet refresh_anchors(const GeoFuseModel& model, const SplitIndex& split,
                          ImageCache& cache);

struct TrainResult {
  std::vector<LossRow> log;
};

TrainResult train(GeoFuseModel& model, const DatasetIndex& data, const TrainConfig& cfg,
                  ImageCache& cache);

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRow>& rows);

}  // namespace geofuse

#endif  // GEOFUSE_TRAINER_HPP_
