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

#include "geofuse/encoder.hpp"

#include <cmath>

namespace geofuse {

void EncoderConfig::validate() const {
  if (patch_size == 0 || image_size == 0)
    throw ConfigError("EncoderConfig: zero image or patch size");
  if (image_size % patch_size != 0)
    throw ConfigError(concat("EncoderConfig: image_size ", image_size,
                             " not divisible by patch_size ", patch_size));
  block_config().validate();
}

EncoderParams::EncoderParams(const std::string& prefix, const EncoderConfig& cfg, Rng& rng)
    : config(cfg),
      patch_w(prefix + ".patch_w",
              Tensor::uniform({cfg.patch_dim(), cfg.d_model}, rng,
                              -1.0 / std::sqrt(static_cast<double>(cfg.patch_dim())),
                              1.0 / std::sqrt(static_cast<double>(cfg.patch_dim())))),
      patch_b(prefix + ".patch_b", Tensor::zeros({cfg.d_model})),
      pos_embed(prefix + ".pos_embed",
                Tensor::uniform({cfg.tokens(), cfg.d_model}, rng, -0.05, 0.05)) {
  config.validate();
  blocks.reserve(cfg.depth);
  for (std::size_t i = 0; i < cfg.depth; ++i)
    blocks.emplace_back(concat(prefix, ".block", i), cfg.block_config(), rng);
}

void EncoderParams::register_into(ParameterStore& store) {
  store.add(&patch_w);
  store.add(&patch_b);
  store.add(&pos_embed);
  for (auto& b : blocks) b.register_into(store);
}

Tensor image_to_patches(const Image& img, const EncoderConfig& cfg) {
  if (img.width != cfg.image_size || img.height != cfg.image_size)
    throw DataError(concat("image_to_patches: image ", img.width, "x", img.height,
                           " vs configured size ", cfg.image_size));
  const std::size_t g = cfg.grid(), p = cfg.patch_size;
  const std::size_t dim = cfg.patch_dim();
  std::vector<double> data(cfg.tokens() * dim);
  std::size_t idx = 0;
  for (std::size_t py = 0; py < g; ++py) {
    for (std::size_t px = 0; px < g; ++px) {
      const std::size_t start = idx;
      double mean = 0.0;
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x)
          for (std::size_t c = 0; c < 3; ++c) {
            const double v = img.at(py * p + y, px * p + x, c);
            data[idx++] = v;
            mean += v;
          }
      // Per-patch mean removal: the shared flat component would otherwise
      // dominate every projected token and drown the content signal.
      mean /= static_cast<double>(dim);
      for (std::size_t k = start; k < start + dim; ++k) data[k] -= mean;
    }
  }
  return Tensor::from_data({cfg.tokens(), cfg.patch_dim()}, std::move(data));
}

Tensor patch_embed(const Image& img, const EncoderParams& params) {
  Tensor patches = image_to_patches(img, params.config);
  Tensor projected = affine(patches, params.patch_w.tensor, params.patch_b.tensor);
  return add(projected, params.pos_embed.tensor);
}

Encoded encode_image(const Image& img, const EncoderParams& params) {
  Tensor tokens = patch_embed(img, params);
  for (const auto& block : params.blocks) tokens = attn_block(tokens, tokens, block);
  Encoded out;
  out.tokens = tokens;
  out.pooled = mean_axis0(tokens);
  return out;
}

TextEncoderParams::TextEncoderParams(const std::string& prefix, std::size_t templates_,
                                     std::size_t d, Rng& rng)
    : templates(templates_),
      d_model(d),
      table(prefix + ".table",
            Tensor::uniform({kNumWeatherConditions * templates_, d}, rng, -1.0, 1.0)),
      proj_w(prefix + ".proj_w",
             Tensor::uniform({d, d}, rng, -1.0 / std::sqrt(static_cast<double>(d)),
                             1.0 / std::sqrt(static_cast<double>(d)))),
      proj_b(prefix + ".proj_b", Tensor::zeros({d})) {
  if (templates_ == 0) throw ConfigError("TextEncoderParams: templates must be >= 1");
}

void TextEncoderParams::register_into(ParameterStore& store) {
  store.add(&table);
  store.add(&proj_w);
  store.add(&proj_b);
}

Tensor encode_caption(const WeatherCaption& caption, const TextEncoderParams& params) {
  const std::size_t cond = static_cast<std::size_t>(caption.condition);
  if (cond >= kNumWeatherConditions)
    throw DataError(concat("encode_caption: invalid condition index ", cond));
  if (caption.template_id >= params.templates)
    throw DataError(concat("encode_caption: template ", caption.template_id,
                           " out of range for ", params.templates, " templates"));
  Tensor row = get_row(params.table.tensor, cond * params.templates + caption.template_id);
  return l2_normalize(affine(row, params.proj_w.tensor, params.proj_b.tensor));
}

}  // namespace geofuse
