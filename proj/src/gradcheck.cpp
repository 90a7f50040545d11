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

#include "geofuse/gradcheck.hpp"

#include <algorithm>
#include <functional>

#include "geofuse/encoder.hpp"
#include "geofuse/fusion.hpp"
#include "geofuse/losses.hpp"
#include "geofuse/scene.hpp"

namespace geofuse {

namespace {

std::vector<Parameter*> block_param_list(AttnBlockParams& b) {
  return {&b.w_q, &b.b_q, &b.w_k,  &b.b_k,  &b.w_v,  &b.b_v,  &b.w_o,  &b.b_o,
          &b.ff_w1, &b.ff_b1, &b.ff_w2, &b.ff_b2, &b.ln1_gamma, &b.ln1_beta,
          &b.ln2_gamma, &b.ln2_beta};
}

std::vector<Parameter*> fusion_param_list(FusionParams& f) {
  std::vector<Parameter*> out{&f.gate_w1, &f.gate_w2, &f.gate_w3};
  for (AttnBlockParams* b : {&f.token_cross, &f.token_self, &f.channel_cross})
    for (Parameter* p : block_param_list(*b)) out.push_back(p);
  return out;
}

CheckResult compare(const std::string& name, const std::function<Tensor()>& forward,
                    const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->tensor.zero_grad();
  backward(forward());
  GradMap fd = finite_diff_grad([&]() { return forward().item(); }, params);
  CheckResult result{name, 0.0, 0};
  for (Parameter* p : params) {
    const std::vector<double> ad = p->tensor.has_grad()
                                       ? p->tensor.grad()
                                       : std::vector<double>(p->tensor.size(), 0.0);
    const auto& fv = fd.at(p->name);
    for (std::size_t i = 0; i < fv.size(); ++i) {
      result.max_rel_err = std::max(result.max_rel_err, rel_err(ad[i], fv[i]));
      ++result.coords;
    }
  }
  for (Parameter* p : params) p->tensor.zero_grad();
  return result;
}

void tensor_checks(std::vector<CheckResult>& out) {
  Rng rng(1001);
  Parameter a("a", Tensor::uniform({3, 4}, rng, -1, 1, true));
  Parameter b("b", Tensor::uniform({3, 4}, rng, -1, 1, true));
  Parameter v("v", Tensor::uniform({4}, rng, -1, 1, true));
  Parameter v3("v3", Tensor::uniform({3}, rng, -1, 1, true));
  Parameter s("s", Tensor::scalar(0.6, true));
  Parameter g("g", Tensor::uniform({4}, rng, 0.5, 1.5, true));
  Parameter be("be", Tensor::uniform({4}, rng, -0.5, 0.5, true));
  std::vector<Parameter*> ab{&a, &b};
  std::vector<Parameter*> all{&a, &b, &v, &s, &g, &be};

  out.push_back(compare("matmul", [&]() {
    return sum_all(matmul(a.tensor, transpose(b.tensor)));
  }, ab));
  out.push_back(compare("softmax_last_axis", [&]() {
    return sum_all(mul(softmax_last_axis(a.tensor), b.tensor));
  }, ab));
  out.push_back(compare("layer_norm", [&]() {
    return sum_all(mul(layer_norm(a.tensor, g.tensor, be.tensor), b.tensor));
  }, all));
  out.push_back(compare("l2_normalize", [&]() {
    return dot(l2_normalize(v.tensor), v.tensor);
  }, {&v}));
  out.push_back(compare("l2_normalize_rows", [&]() {
    return sum_all(mul(l2_normalize_rows(a.tensor), b.tensor));
  }, ab));
  out.push_back(compare("gelu", [&]() { return sum_all(gelu(a.tensor)); }, {&a}));
  out.push_back(compare("exp_log", [&]() {
    return mean_all(log(add_const(exp(a.tensor), 1.0)));
  }, {&a}));
  out.push_back(compare("affine", [&]() {
    return sum_all(affine(a.tensor, transpose(b.tensor), v3.tensor));
  }, {&a, &b, &v3}));
  out.push_back(compare("scale_clamp", [&]() {
    return sum_all(scale(s.tensor, clamp_min(a.tensor, -0.25)));
  }, {&s, &a}));
  out.push_back(compare("reductions", [&]() {
    return add(mean_all(mean_last_axis(a.tensor)), sum_all(mean_axis0(mul(a.tensor, b.tensor))));
  }, ab));
  out.push_back(compare("softmax_cross_entropy", [&]() {
    return softmax_cross_entropy(a.tensor, {0, 2, 1});
  }, {&a}));
  out.push_back(compare("sigmoid_bce", [&]() {
    return sigmoid_bce_with_logits(v.tensor, {1.0, 0.0, 1.0, 0.0});
  }, {&v}));
}

void attention_checks(std::vector<CheckResult>& out) {
  int idx = 0;
  for (std::size_t lq : {1, 2, 4}) {
    for (std::size_t lk : {1, 2, 4}) {
      for (std::size_t h : {1, 2}) {
        Rng rng(2000 + idx++);
        AttnBlockParams blk("blk", MhaConfig{4, h, 8}, rng);
        Parameter q("q", Tensor::uniform({lq, 4}, rng, -1, 1, true));
        Parameter kv("kv", Tensor::uniform({lk, 4}, rng, -1, 1, true));
        std::vector<Parameter*> params = block_param_list(blk);
        params.push_back(&q);
        params.push_back(&kv);
        out.push_back(compare(concat("attn_block Lq=", lq, " Lk=", lk, " H=", h), [&]() {
          Tensor o = attn_block(q.tensor, kv.tensor, blk);
          return mean_all(mul(o, o));
        }, params));
      }
    }
  }
}

void fusion_checks(std::vector<CheckResult>& out) {
  Rng rng(3001);
  FusionConfig cfg;
  cfg.n_tokens = 4;
  cfg.d_model = 8;
  cfg.token_heads = 2;
  cfg.channel_heads = 2;
  cfg.ff_mult = 2;
  FusionParams fusion("fusion", cfg, rng);
  Parameter f_s("f_s", Tensor::uniform({4, 8}, rng, -1, 1, true));
  Parameter f_r("f_r", Tensor::uniform({4, 8}, rng, -1, 1, true));
  std::vector<Parameter*> params = fusion_param_list(fusion);
  params.push_back(&f_s);
  params.push_back(&f_r);

  out.push_back(compare("token_cross_fuse", [&]() {
    Tensor o = token_cross_fuse(f_s.tensor, f_r.tensor, fusion);
    return mean_all(mul(o, o));
  }, params));
  out.push_back(compare("token_self_refine", [&]() {
    Tensor o = token_self_refine(f_s.tensor, fusion);
    return mean_all(mul(o, o));
  }, params));
  out.push_back(compare("channel_cross_fuse", [&]() {
    Tensor o = channel_cross_fuse(f_s.tensor, f_r.tensor, fusion);
    return mean_all(mul(o, o));
  }, params));
  out.push_back(compare("fuse_pair", [&]() {
    Tensor o = fuse_pair(f_s.tensor, f_r.tensor, fusion);
    return sum_all(mul(o, o));
  }, params));
}

void losses_checks(std::vector<CheckResult>& out) {
  Rng rng(4001);
  const std::size_t b = 3, c = 3, d = 4;
  ClassifierHead head("head", d, c, rng);
  MatchHead match("match", d, rng);
  Parameter drone("drone", Tensor::uniform({b, d}, rng, -1, 1, true));
  Parameter sat("sat", Tensor::uniform({b, d}, rng, -1, 1, true));
  Parameter fused("fused", Tensor::uniform({b, d}, rng, -1, 1, true));
  Parameter text("text", Tensor::uniform({b, d}, rng, -1, 1, true));
  AnchorSet anchors;
  anchors.class_labels = {0, 1, 2};
  Rng arng(4002);
  anchors.sat = l2_normalize_rows(Tensor::uniform({c, d}, arng, -1, 1));
  anchors.fused = l2_normalize_rows(Tensor::uniform({c, d}, arng, -1, 1));
  const std::vector<int> ids{0, 2, 1};
  const std::vector<std::size_t> labels{0, 2, 1};

  std::vector<Parameter*> params{&head.bottleneck_w, &head.bottleneck_b, &head.cls_w,
                                 &head.cls_b,        &match.w1,          &match.b1,
                                 &match.w2,          &match.b2,          &drone,
                                 &sat,               &fused,             &text};
  out.push_back(compare("class_contrastive_loss", [&]() {
    Tensor feats = head.feature_rows(drone.tensor);
    SimilarityMatrices sims = similarity_to_anchors(feats, anchors, 0.07);
    PositiveMask mask = positive_mask(ids, anchors.class_labels);
    return class_contrastive_loss(sims, mask).total;
  }, params));
  out.push_back(compare("instance_ce_loss", [&]() {
    return instance_ce_loss(drone.tensor, sat.tensor, fused.tensor, labels, head);
  }, params));
  out.push_back(compare("image_text_losses", [&]() {
    Tensor feats = head.feature_rows(drone.tensor);
    Tensor tfeats = l2_normalize_rows(text.tensor);
    return image_text_losses(feats, tfeats, match, 0.07).total;
  }, params));
  out.push_back(compare("total_loss", [&]() {
    Tensor feats = head.feature_rows(drone.tensor);
    SimilarityMatrices sims = similarity_to_anchors(feats, anchors, 0.07);
    PositiveMask mask = positive_mask(ids, anchors.class_labels);
    ClassContrastive cc = class_contrastive_loss(sims, mask);
    Tensor ce = instance_ce_loss(drone.tensor, sat.tensor, fused.tensor, labels, head);
    ImageTextLoss it = image_text_losses(feats, l2_normalize_rows(text.tensor), match, 0.07);
    return total_loss(it.total, ce, cc.total, 0.10);
  }, params));
}

void encoder_checks(std::vector<CheckResult>& out) {
  Rng rng(5001);
  EncoderConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 16;
  cfg.d_model = 8;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.ff_mult = 2;
  EncoderParams enc("enc", cfg, rng);
  ClassifierHead head("head", cfg.d_model, 3, rng);
  const SceneSpec scene = generate_scene(0, 7);
  const Image img = render_satellite(scene, cfg.image_size);

  std::vector<Parameter*> params{&enc.patch_w, &enc.patch_b, &enc.pos_embed,
                                 &head.bottleneck_w, &head.bottleneck_b};
  for (Parameter* p : block_param_list(enc.blocks[0])) params.push_back(p);
  Rng probe_rng(5002);
  Tensor probe = Tensor::uniform({cfg.d_model}, probe_rng, 0.5, 1.5);

  out.push_back(compare("encode_image depth=1 D=8", [&]() {
    Encoded e = encode_image(img, enc);
    return dot(head.feature(e.pooled), probe);
  }, params));
}

void pipeline_checks(std::vector<CheckResult>& out) {
  // The whole objective at (N=4, D=8, H=2): token fusion, self refinement,
  // channel fusion, pooling, the shared head, anchors, and all three loss
  // terms combined with lambda = 0.10.
  Rng rng(6001);
  FusionConfig fcfg;
  fcfg.n_tokens = 4;
  fcfg.d_model = 8;
  fcfg.token_heads = 2;
  fcfg.channel_heads = 2;
  fcfg.ff_mult = 2;
  FusionParams fusion("fusion", fcfg, rng);
  const std::size_t b = 3, c = 3, d = 8;
  ClassifierHead head("head", d, c, rng);
  MatchHead match("match", d, rng);
  Parameter f_s("f_s", Tensor::uniform({4, 8}, rng, -1, 1, true));
  Parameter f_r("f_r", Tensor::uniform({4, 8}, rng, -1, 1, true));
  Parameter drone("drone", Tensor::uniform({b, d}, rng, -1, 1, true));
  Parameter text("text", Tensor::uniform({b, d}, rng, -1, 1, true));
  AnchorSet anchors;
  anchors.class_labels = {0, 1, 2};
  Rng arng(6002);
  anchors.sat = l2_normalize_rows(Tensor::uniform({c, d}, arng, -1, 1));
  anchors.fused = l2_normalize_rows(Tensor::uniform({c, d}, arng, -1, 1));
  const std::vector<int> ids{0, 2, 1};
  const std::vector<std::size_t> labels{0, 2, 1};

  std::vector<Parameter*> params = fusion_param_list(fusion);
  for (Parameter* p : {&head.bottleneck_w, &head.bottleneck_b, &head.cls_w, &head.cls_b,
                       &match.w1, &match.b1, &match.w2, &match.b2, &f_s, &f_r, &drone, &text})
    params.push_back(p);

  out.push_back(compare("pipeline N=4 D=8 H=2", [&]() {
    Tensor fused_vec = fuse_pair_raw(f_s.tensor, f_r.tensor, fusion);
    Tensor fused_batch = stack_rows({fused_vec, fused_vec, fused_vec});
    Tensor feats = head.feature_rows(drone.tensor);
    SimilarityMatrices sims = similarity_to_anchors(feats, anchors, 0.07);
    PositiveMask mask = positive_mask(ids, anchors.class_labels);
    ClassContrastive cc = class_contrastive_loss(sims, mask);
    Tensor ce = instance_ce_loss(drone.tensor, fused_batch, fused_batch, labels, head);
    ImageTextLoss it = image_text_losses(feats, l2_normalize_rows(text.tensor), match, 0.07);
    return total_loss(it.total, ce, cc.total, 0.10);
  }, params));
}

}  // namespace

std::vector<CheckResult> run_gradcheck(const std::string& scope) {
  const bool all = scope == "all";
  std::vector<CheckResult> out;
  if (all || scope == "tensor") tensor_checks(out);
  if (all || scope == "attention") attention_checks(out);
  if (all || scope == "fusion") fusion_checks(out);
  if (all || scope == "losses") losses_checks(out);
  if (all || scope == "encoder") encoder_checks(out);
  if (all || scope == "pipeline") pipeline_checks(out);
  if (out.empty())
    throw ConfigError(concat("gradcheck: unknown scope '", scope,
                             "' (expected all|tensor|attention|fusion|losses|encoder|pipeline)"));
  return out;
}

}  // namespace geofuse
