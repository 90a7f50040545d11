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

#ifndef GEOFUSE_ENCODER_HPP_
#define GEOFUSE_ENCODER_HPP_

#include <string>
#include <vector>

#include "geofuse/attention.hpp"
#include "geofuse/image.hpp"
#include "geofuse/tensor.hpp"
#include "geofuse/weather.hpp"

namespace geofuse {

// Small patch-token image encoder. One instance serves the drone, satellite,
// and roadmap views with shared weights.
struct EncoderConfig {
  std::size_t image_size = 96;
  std::size_t patch_size = 16;
  std::size_t d_model = 64;
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  bool pre_norm = false;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t tokens() const { return grid() * grid(); }
  std::size_t patch_dim() const { return patch_size * patch_size * 3; }
  MhaConfig block_config() const { return MhaConfig{d_model, heads, d_model * ff_mult, pre_norm}; }
  void validate() const;
};

struct EncoderParams {
  EncoderConfig config;
  Parameter patch_w;    // patch_dim x d_model
  Parameter patch_b;    // d_model
  Parameter pos_embed;  // tokens x d_model
  std::vector<AttnBlockParams> blocks;

  EncoderParams(const std::string& prefix, const EncoderConfig& cfg, Rng& rng);
  void register_into(ParameterStore& store);
};

// Non-overlapping patches flattened row-major (y, x, channel) per patch.
// Untracked constant: images are data, not parameters.
Tensor image_to_patches(const Image& img, const EncoderConfig& cfg);

// Patch projection plus learned positional embedding.
Tensor patch_embed(const Image& img, const EncoderParams& params);

struct Encoded {
  Tensor tokens;  // N x D
  Tensor pooled;  // D (token mean)
};

Encoded encode_image(const Image& img, const EncoderParams& params);

// ---- text side -----------------------------------------------------------

struct WeatherCaption {
  WeatherCondition condition = WeatherCondition::kNormal;
  std::size_t template_id = 0;
};

// Embedding-table stub standing in for a text encoder.
struct TextEncoderParams {
  std::size_t templates = 3;
  std::size_t d_model = 64;
  Parameter table;   // (10 * templates) x d_model
  Parameter proj_w;  // d_model x d_model
  Parameter proj_b;

  TextEncoderParams(const std::string& prefix, std::size_t templates_, std::size_t d, Rng& rng);
  void register_into(ParameterStore& store);
};

Tensor encode_caption(const WeatherCaption& caption, const TextEncoderParams& params);

}  // namespace geofuse

#endif  // GEOFUSE_ENCODER_HPP_
