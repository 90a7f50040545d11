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

#include "geofuse/model.hpp"

#include <cstring>
#include <fstream>

namespace geofuse {

Modality parse_modality(const std::string& name) {
  if (name == "roadmap") return Modality::kRoadmap;
  if (name == "blank") return Modality::kBlank;
  throw ConfigError(concat("unknown modality '", name, "' (expected roadmap or blank)"));
}

const std::string& modality_name(Modality m) {
  static const std::string kRoad = "roadmap", kBlank = "blank";
  return m == Modality::kRoadmap ? kRoad : kBlank;
}

FusionConfig ModelConfig::fusion_config() const {
  FusionConfig cfg;
  cfg.n_tokens = encoder.tokens();
  cfg.d_model = encoder.d_model;
  cfg.token_heads = fusion_token_heads;
  cfg.channel_heads = fusion_channel_heads;
  cfg.ff_mult = fusion_ff_mult;
  cfg.pre_norm = encoder.pre_norm;
  cfg.gate_init = gate_init;
  return cfg;
}

void ModelConfig::validate() const {
  encoder.validate();
  fusion_config().validate();
  if (num_classes == 0) throw ConfigError("ModelConfig: num_classes must be >= 1");
  if (text_templates == 0) throw ConfigError("ModelConfig: text_templates must be >= 1");
}

struct GeoFuseModel::Seeds {
  Rng enc, text, fus, head, match;
  explicit Seeds(std::uint64_t s)
      : enc(derive_seed(s, 1)),
        text(derive_seed(s, 2)),
        fus(derive_seed(s, 3)),
        head(derive_seed(s, 4)),
        match(derive_seed(s, 5)) {}
};

namespace {
ModelConfig validated(ModelConfig cfg) {
  cfg.validate();
  return cfg;
}
}  // namespace

GeoFuseModel::GeoFuseModel(const ModelConfig& cfg, std::uint64_t seed)
    : GeoFuseModel(cfg, Seeds(seed)) {}

GeoFuseModel::GeoFuseModel(const ModelConfig& cfg, Seeds&& s)
    : cfg_(validated(cfg)),
      encoder_("encoder", cfg_.encoder, s.enc),
      text_("text", cfg_.text_templates, cfg_.encoder.d_model, s.text),
      fusion_("fusion", cfg_.fusion_config(), s.fus),
      head_("head", cfg_.encoder.d_model, cfg_.num_classes, s.head),
      match_("match", cfg_.encoder.d_model, s.match) {
  encoder_.register_into(params_);
  text_.register_into(params_);
  fusion_.register_into(params_);
  head_.register_into(params_);
  match_.register_into(params_);
}

Image GeoFuseModel::roadmap_input(const Image& roadmap) const {
  if (cfg_.modality == Modality::kRoadmap) return roadmap;
  return Image(roadmap.width, roadmap.height, 1.0);
}

Encoded GeoFuseModel::encode_view(const Image& img) const {
  return encode_image(img, encoder_);
}

Tensor GeoFuseModel::fused_raw(const Tensor& sat_tokens, const Tensor& road_tokens) const {
  return fuse_pair_raw(sat_tokens, road_tokens, fusion_);
}

std::vector<double> GeoFuseModel::view_feature_values(const Image& img) const {
  NoGradGuard guard;
  Encoded enc = encode_view(img);
  return feature(enc.pooled).values();
}

std::vector<double> GeoFuseModel::fused_feature_values(const Image& satellite,
                                                       const Image& roadmap) const {
  NoGradGuard guard;
  Encoded sat = encode_view(satellite);
  Encoded road = encode_view(roadmap_input(roadmap));
  Tensor raw = fused_raw(sat.tokens, road.tokens);
  return feature(raw).values();
}

Tensor GeoFuseModel::caption_embedding(const WeatherCaption& caption) const {
  return encode_caption(caption, text_);
}

AnchorSet GeoFuseModel::build_anchors(
    const SplitIndex& split,
    const std::function<const Image&(const std::string&)>& load) const {
  NoGradGuard guard;
  std::vector<int> labels;
  std::vector<std::vector<Tensor>> sat_embeds, fused_embeds;
  for (const ClassEntry& entry : split.classes) {
    if (entry.satellite.empty())
      throw ConfigError(concat("build_anchors: class ", entry.name, " has no satellite image"));
    labels.push_back(entry.class_id);
    std::vector<Tensor> sats, fuseds;
    const std::size_t pairs = std::min(entry.satellite.size(), entry.roadmap.size());
    for (std::size_t i = 0; i < entry.satellite.size(); ++i) {
      Encoded sat = encode_view(load(entry.satellite[i]));
      sats.push_back(sat.pooled);
      if (i < pairs) {
        Encoded road = encode_view(roadmap_input(load(entry.roadmap[i])));
        fuseds.push_back(fused_raw(sat.tokens, road.tokens));
      }
    }
    sat_embeds.push_back(std::move(sats));
    fused_embeds.push_back(std::move(fuseds));
  }
  return build_anchor_set(labels, sat_embeds, fused_embeds, head_);
}

// ---- checkpoint -----------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'G', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(concat("save_checkpoint: cannot open '", path.string(), "'"));
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(params.all().size()));
  for (const Parameter* p : params.all()) {
    write_pod(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod(out, static_cast<std::uint32_t>(p->tensor.ndim()));
    for (std::size_t d : p->tensor.shape()) write_pod(out, static_cast<std::uint64_t>(d));
    const auto& vals = p->tensor.values();
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(double)));
  }
  if (!out) throw DataError(concat("save_checkpoint: write failed for '", path.string(), "'"));
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(concat("load_checkpoint: cannot open '", path.string(), "'"));
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(concat("load_checkpoint: '", path.string(), "' is not a checkpoint"));
  std::uint32_t version = 0, count = 0;
  read_pod(in, version);
  if (version != kVersion)
    throw DataError(concat("load_checkpoint: unsupported version ", version));
  read_pod(in, count);
  if (count != params.all().size())
    throw DataError(concat("load_checkpoint: ", count, " tensors vs ",
                           params.all().size(), " model parameters"));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    read_pod(in, name_len);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint32_t ndim = 0;
    read_pod(in, ndim);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) {
      std::uint64_t v = 0;
      read_pod(in, v);
      d = static_cast<std::size_t>(v);
    }
    Parameter* p = params.find(name);
    if (!p) throw DataError(concat("load_checkpoint: unknown tensor '", name, "'"));
    if (p->tensor.shape() != shape)
      throw DataError(concat("load_checkpoint: tensor '", name, "' has shape ",
                             shape_str(shape), ", model expects ",
                             shape_str(p->tensor.shape())));
    auto& vals = p->tensor.mutable_values();
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!in) throw DataError(concat("load_checkpoint: truncated data for '", name, "'"));
  }
}

}  // namespace geofuse
