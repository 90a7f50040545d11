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

#include "geofuse/fusion.hpp"

namespace geofuse {

MhaConfig FusionConfig::token_block_config() const {
  return MhaConfig{d_model, token_heads, d_model * ff_mult, pre_norm};
}

MhaConfig FusionConfig::channel_block_config() const {
  return MhaConfig{n_tokens, channel_heads, n_tokens * ff_mult, pre_norm};
}

void FusionConfig::validate() const {
  if (n_tokens < 1 || d_model < 1) throw ConfigError("FusionConfig: n_tokens and d_model must be >= 1");
  token_block_config().validate();
  channel_block_config().validate();
}

FusionParams::FusionParams(const std::string& prefix, const FusionConfig& cfg, Rng& rng)
    : config(cfg),
      gate_w1(prefix + ".gate_w1", Tensor::scalar(cfg.gate_init)),
      gate_w2(prefix + ".gate_w2", Tensor::scalar(cfg.gate_init)),
      gate_w3(prefix + ".gate_w3", Tensor::scalar(cfg.gate_init)),
      token_cross(prefix + ".token_cross", cfg.token_block_config(), rng),
      token_self(prefix + ".token_self", cfg.token_block_config(), rng),
      channel_cross(prefix + ".channel_cross", cfg.channel_block_config(), rng) {
  config.validate();
}

void FusionParams::register_into(ParameterStore& store) {
  store.add(&gate_w1);
  store.add(&gate_w2);
  store.add(&gate_w3);
  token_cross.register_into(store);
  token_self.register_into(store);
  channel_cross.register_into(store);
}

namespace {
void check_pair(const Tensor& f_s, const Tensor& f_r, const FusionConfig& cfg, const char* op) {
  if (f_s.ndim() != 2 || f_r.ndim() != 2 || f_s.shape() != f_r.shape())
    throw ShapeError(concat(op, ": token matrices must match, got ", shape_str(f_s.shape()),
                            " vs ", shape_str(f_r.shape())));
  if (f_s.rows() != cfg.n_tokens || f_s.cols() != cfg.d_model)
    throw ShapeError(concat(op, ": expected (", cfg.n_tokens, ", ", cfg.d_model, "), got ",
                            shape_str(f_s.shape())));
}
}  // namespace

Tensor token_cross_fuse(const Tensor& f_s, const Tensor& f_r, const FusionParams& params) {
  check_pair(f_s, f_r, params.config, "token_cross_fuse");
  return add(f_s, scale(params.gate_w1.tensor, attn_block(f_s, f_r, params.token_cross)));
}

Tensor token_self_refine(const Tensor& f_s1, const FusionParams& params) {
  if (f_s1.ndim() != 2 || f_s1.rows() != params.config.n_tokens ||
      f_s1.cols() != params.config.d_model)
    throw ShapeError(concat("token_self_refine: expected (", params.config.n_tokens, ", ",
                            params.config.d_model, "), got ", shape_str(f_s1.shape())));
  return add(f_s1, scale(params.gate_w2.tensor, attn_block(f_s1, f_s1, params.token_self)));
}

Tensor channel_cross_fuse(const Tensor& f_s2, const Tensor& f_r, const FusionParams& params) {
  check_pair(f_s2, f_r, params.config, "channel_cross_fuse");
  Tensor s_t = transpose(f_s2);  // D x N
  Tensor r_t = transpose(f_r);
  return add(s_t, scale(params.gate_w3.tensor, attn_block(s_t, r_t, params.channel_cross)));
}

Tensor pool_fused(const Tensor& f_rs) {
  if (f_rs.ndim() != 2)
    throw ShapeError(concat("pool_fused: expected D x N matrix, got ", shape_str(f_rs.shape())));
  return mean_last_axis(f_rs);
}

Tensor fuse_pair_raw(const Tensor& f_s, const Tensor& f_r, const FusionParams& params) {
  Tensor f1 = token_cross_fuse(f_s, f_r, params);
  Tensor f2 = token_self_refine(f1, params);
  Tensor frs = channel_cross_fuse(f2, f_r, params);
  return pool_fused(frs);
}

Tensor fuse_pair(const Tensor& f_s, const Tensor& f_r, const FusionParams& params) {
  return l2_normalize(fuse_pair_raw(f_s, f_r, params));
}

}  // namespace geofuse
