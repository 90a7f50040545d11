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

#include "geofuse/attention.hpp"

#include <cmath>

namespace geofuse {

void MhaConfig::validate() const {
  if (heads < 1) throw ConfigError("MhaConfig: heads must be >= 1");
  if (d_model % heads != 0)
    throw ConfigError(concat("MhaConfig: d_model ", d_model, " not divisible by heads ", heads));
  if (d_ff < d_model)
    throw ConfigError(concat("MhaConfig: d_ff ", d_ff, " must be >= d_model ", d_model));
}

namespace {

Parameter init_linear(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Parameter(name, Tensor::uniform({fan_in, fan_out}, rng, -bound, bound));
}

Parameter init_bias(const std::string& name, std::size_t fan_in, std::size_t n, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Parameter(name, Tensor::uniform({n}, rng, -bound, bound));
}

}  // namespace

AttnBlockParams::AttnBlockParams(const std::string& prefix, const MhaConfig& cfg, Rng& rng)
    : config(cfg),
      w_q(init_linear(prefix + ".w_q", cfg.d_model, cfg.d_model, rng)),
      b_q(init_bias(prefix + ".b_q", cfg.d_model, cfg.d_model, rng)),
      w_k(init_linear(prefix + ".w_k", cfg.d_model, cfg.d_model, rng)),
      b_k(init_bias(prefix + ".b_k", cfg.d_model, cfg.d_model, rng)),
      w_v(init_linear(prefix + ".w_v", cfg.d_model, cfg.d_model, rng)),
      b_v(init_bias(prefix + ".b_v", cfg.d_model, cfg.d_model, rng)),
      w_o(init_linear(prefix + ".w_o", cfg.d_model, cfg.d_model, rng)),
      b_o(init_bias(prefix + ".b_o", cfg.d_model, cfg.d_model, rng)),
      ff_w1(init_linear(prefix + ".ff_w1", cfg.d_model, cfg.d_ff, rng)),
      ff_b1(init_bias(prefix + ".ff_b1", cfg.d_model, cfg.d_ff, rng)),
      ff_w2(init_linear(prefix + ".ff_w2", cfg.d_ff, cfg.d_model, rng)),
      ff_b2(init_bias(prefix + ".ff_b2", cfg.d_ff, cfg.d_model, rng)),
      ln1_gamma(prefix + ".ln1_gamma", Tensor::full({cfg.d_model}, 1.0)),
      ln1_beta(prefix + ".ln1_beta", Tensor::zeros({cfg.d_model})),
      ln2_gamma(prefix + ".ln2_gamma", Tensor::full({cfg.d_model}, 1.0)),
      ln2_beta(prefix + ".ln2_beta", Tensor::zeros({cfg.d_model})) {
  config.validate();
}

void AttnBlockParams::register_into(ParameterStore& store) {
  for (Parameter* p : {&w_q, &b_q, &w_k, &b_k, &w_v, &b_v, &w_o, &b_o, &ff_w1, &ff_b1,
                       &ff_w2, &ff_b2, &ln1_gamma, &ln1_beta, &ln2_gamma, &ln2_beta})
    store.add(p);
}

Tensor mha(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
           const AttnBlockParams& params, AttnTrace* trace) {
  const MhaConfig& cfg = params.config;
  if (q_in.ndim() != 2 || k_in.ndim() != 2 || v_in.ndim() != 2)
    throw ShapeError("mha: token matrices must be 2-D");
  if (q_in.cols() != cfg.d_model || k_in.cols() != cfg.d_model || v_in.cols() != cfg.d_model)
    throw ShapeError(concat("mha: width mismatch, q ", shape_str(q_in.shape()), " k ",
                            shape_str(k_in.shape()), " v ", shape_str(v_in.shape()),
                            " vs d_model ", cfg.d_model));
  if (k_in.rows() != v_in.rows())
    throw ShapeError(concat("mha: key/value length mismatch ", shape_str(k_in.shape()),
                            " vs ", shape_str(v_in.shape())));

  Tensor q = affine(q_in, params.w_q.tensor, params.b_q.tensor);
  Tensor k = affine(k_in, params.w_k.tensor, params.b_k.tensor);
  Tensor v = affine(v_in, params.w_v.tensor, params.b_v.tensor);

  const std::size_t dh = cfg.head_dim();
  const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = mul_const(matmul(qh, transpose(kh)), scl);
    Tensor weights = softmax_last_axis(scores);
    if (trace) trace->head_weights.push_back(weights);
    heads.push_back(matmul(weights, vh));
  }
  Tensor merged = cfg.heads == 1 ? heads[0] : concat_cols(heads);
  return affine(merged, params.w_o.tensor, params.b_o.tensor);
}

Tensor attn_block(const Tensor& q_src, const Tensor& kv_src, const AttnBlockParams& params) {
  const MhaConfig& cfg = params.config;
  if (cfg.pre_norm) {
    Tensor qn = layer_norm(q_src, params.ln1_gamma.tensor, params.ln1_beta.tensor);
    Tensor kvn = layer_norm(kv_src, params.ln1_gamma.tensor, params.ln1_beta.tensor);
    Tensor h = add(q_src, mha(qn, kvn, kvn, params));
    Tensor hn = layer_norm(h, params.ln2_gamma.tensor, params.ln2_beta.tensor);
    Tensor ff = affine(gelu(affine(hn, params.ff_w1.tensor, params.ff_b1.tensor)),
                       params.ff_w2.tensor, params.ff_b2.tensor);
    return add(h, ff);
  }
  Tensor h = layer_norm(add(q_src, mha(q_src, kv_src, kv_src, params)),
                        params.ln1_gamma.tensor, params.ln1_beta.tensor);
  Tensor ff = affine(gelu(affine(h, params.ff_w1.tensor, params.ff_b1.tensor)),
                     params.ff_w2.tensor, params.ff_b2.tensor);
  return layer_norm(add(h, ff), params.ln2_gamma.tensor, params.ln2_beta.tensor);
}

}  // namespace geofuse
