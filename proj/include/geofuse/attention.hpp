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

#ifndef GEOFUSE_ATTENTION_HPP_
#define GEOFUSE_ATTENTION_HPP_

#include <string>
#include <vector>

#include "geofuse/tensor.hpp"

namespace geofuse {

struct MhaConfig {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t d_ff = 256;
  bool pre_norm = false;  // post-norm is the default Transformer ordering

  void validate() const;
  std::size_t head_dim() const { return d_model / heads; }
};

// Projection, feed-forward, and norm parameters of one attention block.
struct AttnBlockParams {
  MhaConfig config;
  Parameter w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  Parameter ff_w1, ff_b1, ff_w2, ff_b2;
  Parameter ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

  AttnBlockParams(const std::string& prefix, const MhaConfig& cfg, Rng& rng);
  void register_into(ParameterStore& store);
};

// Per-head attention weights captured for inspection in tests.
struct AttnTrace {
  std::vector<Tensor> head_weights;  // one Lq x Lk matrix per head
};

// Scaled dot-product multi-head attention. k_in and v_in must share sequence
// length; all widths equal config.d_model. Scale is 1/sqrt(d_model/heads).
Tensor mha(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
           const AttnBlockParams& params, AttnTrace* trace = nullptr);

// Full Transformer block: attention, residual + norm, feed-forward,
// residual + norm. Output has q_src's shape.
Tensor attn_block(const Tensor& q_src, const Tensor& kv_src, const AttnBlockParams& params);

}  // namespace geofuse

#endif  // GEOFUSE_ATTENTION_HPP_
