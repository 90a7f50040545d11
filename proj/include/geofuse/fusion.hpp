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

#ifndef GEOFUSE_FUSION_HPP_
#define GEOFUSE_FUSION_HPP_

#include <string>

#include "geofuse/attention.hpp"
#include "geofuse/tensor.hpp"

namespace geofuse {

// Satellite-roadmap fusion: gated token-level cross attention, self
// refinement, gated channel-level cross attention over transposed features,
// then average pooling. Token matrices are N x D; the channel stage runs
// attention over D sequences of width N, so N is fixed per configuration.

struct FusionConfig {
  std::size_t n_tokens = 36;
  std::size_t d_model = 64;
  std::size_t token_heads = 4;
  std::size_t channel_heads = 4;
  std::size_t ff_mult = 4;
  bool pre_norm = false;
  double gate_init = 0.1;

  MhaConfig token_block_config() const;
  MhaConfig channel_block_config() const;
  void validate() const;
};

struct FusionParams {
  FusionConfig config;
  Parameter gate_w1, gate_w2, gate_w3;
  AttnBlockParams token_cross, token_self, channel_cross;

  FusionParams(const std::string& prefix, const FusionConfig& cfg, Rng& rng);
  void register_into(ParameterStore& store);
};

// F'_s = F_s + w1 * block(F_s, F_r): roadmap tokens act as keys/values.
Tensor token_cross_fuse(const Tensor& f_s, const Tensor& f_r, const FusionParams& params);

// F''_s = F'_s + w2 * block(F'_s, F'_s).
Tensor token_self_refine(const Tensor& f_s1, const FusionParams& params);

// F_rs = F''_s^T + w3 * block(F''_s^T, F_r^T); channels form the sequence.
// Result is D x N.
Tensor channel_cross_fuse(const Tensor& f_s2, const Tensor& f_r, const FusionParams& params);

// Average pooling over the token axis of a D x N matrix -> length-D vector.
Tensor pool_fused(const Tensor& f_rs);

// Whole pipeline without the final normalization.
Tensor fuse_pair_raw(const Tensor& f_s, const Tensor& f_r, const FusionParams& params);

// Whole pipeline, l2-normalized for similarity use.
Tensor fuse_pair(const Tensor& f_s, const Tensor& f_r, const FusionParams& params);

}  // namespace geofuse

#endif  // GEOFUSE_FUSION_HPP_
