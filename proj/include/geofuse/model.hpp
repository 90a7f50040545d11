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

#ifndef GEOFUSE_MODEL_HPP_
#define GEOFUSE_MODEL_HPP_

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/encoder.hpp"
#include "geofuse/fusion.hpp"
#include "geofuse/losses.hpp"

namespace geofuse {

enum class Modality { kRoadmap, kBlank };

Modality parse_modality(const std::string& name);
const std::string& modality_name(Modality m);

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t fusion_token_heads = 4;
  std::size_t fusion_channel_heads = 4;
  std::size_t fusion_ff_mult = 4;
  double gate_init = 0.1;
  std::size_t num_classes = 0;
  std::size_t text_templates = 3;
  Modality modality = Modality::kRoadmap;

  FusionConfig fusion_config() const;
  void validate() const;
};

// The full GeoFuse model: one shared image encoder for all three views, a
// text stub, the fusion stack, the shared classification head, and the
// image-text matching head.
class GeoFuseModel {
 public:
  GeoFuseModel(const ModelConfig& cfg, std::uint64_t seed);
  GeoFuseModel(const GeoFuseModel&) = delete;
  GeoFuseModel& operator=(const GeoFuseModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Swaps the roadmap raster for an all-white one under the blank ablation.
  Image roadmap_input(const Image& roadmap) const;

  Encoded encode_view(const Image& img) const;
  Tensor fused_raw(const Tensor& sat_tokens, const Tensor& road_tokens) const;

  // Retrieval feature: l2-normalized bottleneck output of a pooled embedding.
  Tensor feature(const Tensor& pooled) const { return head_.feature(pooled); }
  Tensor feature_rows(const Tensor& batch) const { return head_.feature_rows(batch); }

  // End-to-end helpers used by evaluation (untracked).
  std::vector<double> view_feature_values(const Image& img) const;
  std::vector<double> fused_feature_values(const Image& satellite, const Image& roadmap) const;

  Tensor caption_embedding(const WeatherCaption& caption) const;

  const ClassifierHead& head() const { return head_; }
  const MatchHead& match_head() const { return match_; }
  const FusionParams& fusion() const { return fusion_; }
  FusionParams& fusion() { return fusion_; }
  const EncoderParams& encoder() const { return encoder_; }

  // Anchors from the train split: per class, mean satellite embedding and
  // mean fused embedding, bottlenecked and normalized. Images come from the
  // provided loader (a cache-backed closure).
  AnchorSet build_anchors(const SplitIndex& split,
                          const std::function<const Image&(const std::string&)>& load) const;

 private:
  struct Seeds;
  GeoFuseModel(const ModelConfig& cfg, Seeds&& seeds);

  ModelConfig cfg_;
  EncoderParams encoder_;
  TextEncoderParams text_;
  FusionParams fusion_;
  ClassifierHead head_;
  MatchHead match_;
  ParameterStore params_;
};

// Versioned binary container of every named parameter; round-trips exactly.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params);
void load_checkpoint(const std::filesystem::path& path, ParameterStore& params);

}  // namespace geofuse

#endif  // GEOFUSE_MODEL_HPP_
