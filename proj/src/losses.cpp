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

#include "geofuse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace geofuse {

void AnchorSet::validate() const {
  if (class_labels.empty()) throw ConfigError("AnchorSet: no classes");
  std::set<int> uniq(class_labels.begin(), class_labels.end());
  if (uniq.size() != class_labels.size()) throw ConfigError("AnchorSet: duplicate class label");
  const std::size_t c = class_labels.size();
  if (sat.rows() != c || fused.rows() != c || sat.cols() != fused.cols())
    throw ShapeError(concat("AnchorSet: anchor shapes ", shape_str(sat.shape()), " / ",
                            shape_str(fused.shape()), " for ", c, " classes"));
  for (const Tensor* t : {&sat, &fused}) {
    const auto& v = t->values();
    const std::size_t d = t->cols();
    for (std::size_t i = 0; i < c; ++i) {
      double nsq = 0.0;
      for (std::size_t j = 0; j < d; ++j) nsq += v[i * d + j] * v[i * d + j];
      if (std::fabs(std::sqrt(nsq) - 1.0) > 1e-10)
        throw NumericalError(concat("AnchorSet: anchor row ", i, " not unit norm"));
    }
  }
}

ClassifierHead::ClassifierHead(const std::string& prefix, std::size_t d, std::size_t classes,
                               Rng& rng)
    : d_model(d),
      num_classes(classes),
      bottleneck_w(prefix + ".bottleneck_w",
                   Tensor::uniform({d, d}, rng, -1.0 / std::sqrt(static_cast<double>(d)),
                                   1.0 / std::sqrt(static_cast<double>(d)))),
      bottleneck_b(prefix + ".bottleneck_b",
                   Tensor::uniform({d}, rng, -1.0 / std::sqrt(static_cast<double>(d)),
                                   1.0 / std::sqrt(static_cast<double>(d)))),
      cls_w(prefix + ".cls_w",
            Tensor::uniform({d, classes}, rng, -1.0 / std::sqrt(static_cast<double>(d)),
                            1.0 / std::sqrt(static_cast<double>(d)))),
      cls_b(prefix + ".cls_b", Tensor::zeros({classes})) {
  if (d == 0 || classes == 0) throw ConfigError("ClassifierHead: zero-sized head");
}

void ClassifierHead::register_into(ParameterStore& store) {
  store.add(&bottleneck_w);
  store.add(&bottleneck_b);
  store.add(&cls_w);
  store.add(&cls_b);
}

Tensor ClassifierHead::bottleneck(const Tensor& pooled) const {
  return affine(pooled, bottleneck_w.tensor, bottleneck_b.tensor);
}

Tensor ClassifierHead::feature(const Tensor& pooled) const {
  return l2_normalize(bottleneck(pooled));
}

Tensor ClassifierHead::feature_rows(const Tensor& batch) const {
  return l2_normalize_rows(bottleneck(batch));
}

Tensor ClassifierHead::logits(const Tensor& batch) const {
  if (batch.ndim() != 2)
    throw ShapeError(concat("ClassifierHead::logits: expected a batch, got ",
                            shape_str(batch.shape())));
  Tensor feats = feature_rows(batch);
  Tensor class_dirs = transpose(l2_normalize_rows(transpose(cls_w.tensor)));
  return add_rowvec(mul_const(matmul(feats, class_dirs), logit_scale), cls_b.tensor);
}

MatchHead::MatchHead(const std::string& prefix, std::size_t d, Rng& rng)
    : d_model(d),
      w1(prefix + ".w1",
         Tensor::uniform({2 * d, d}, rng, -1.0 / std::sqrt(static_cast<double>(2 * d)),
                         1.0 / std::sqrt(static_cast<double>(2 * d)))),
      b1(prefix + ".b1", Tensor::zeros({d})),
      w2(prefix + ".w2",
         Tensor::uniform({d, 1}, rng, -1.0 / std::sqrt(static_cast<double>(d)),
                         1.0 / std::sqrt(static_cast<double>(d)))),
      b2(prefix + ".b2", Tensor::zeros({1})) {}

void MatchHead::register_into(ParameterStore& store) {
  store.add(&w1);
  store.add(&b1);
  store.add(&w2);
  store.add(&b2);
}

Tensor MatchHead::score(const Tensor& pairs) const {
  return affine(gelu(affine(pairs, w1.tensor, b1.tensor)), w2.tensor, b2.tensor);
}

AnchorSet build_anchor_set(const std::vector<int>& class_labels,
                           const std::vector<std::vector<Tensor>>& sat_embeds,
                           const std::vector<std::vector<Tensor>>& fused_embeds,
                           const ClassifierHead& head) {
  const std::size_t c = class_labels.size();
  if (sat_embeds.size() != c || fused_embeds.size() != c)
    throw ConfigError(concat("build_anchor_set: ", c, " labels vs ", sat_embeds.size(),
                             " satellite and ", fused_embeds.size(), " fused groups"));
  std::vector<Tensor> sat_rows, fused_rows;
  sat_rows.reserve(c);
  fused_rows.reserve(c);
  for (std::size_t i = 0; i < c; ++i) {
    if (sat_embeds[i].empty())
      throw ConfigError(concat("build_anchor_set: class ", class_labels[i],
                               " has no satellite images"));
    if (fused_embeds[i].empty())
      throw ConfigError(concat("build_anchor_set: class ", class_labels[i],
                               " has no fused embeddings"));
    Tensor sat_mean = sat_embeds[i].size() == 1 ? sat_embeds[i][0]
                                                : mean_axis0(stack_rows(sat_embeds[i]));
    Tensor fused_mean = fused_embeds[i].size() == 1 ? fused_embeds[i][0]
                                                    : mean_axis0(stack_rows(fused_embeds[i]));
    sat_rows.push_back(head.feature(sat_mean));
    fused_rows.push_back(head.feature(fused_mean));
  }
  AnchorSet out;
  out.class_labels = class_labels;
  out.sat = stack_rows(sat_rows);
  out.fused = stack_rows(fused_rows);
  out.validate();
  return out;
}

SimilarityMatrices similarity_to_anchors(const Tensor& drone_feats, const AnchorSet& anchors,
                                         double tau) {
  if (tau <= 0.0) throw ConfigError(concat("similarity_to_anchors: tau must be > 0, got ", tau));
  if (drone_feats.ndim() != 2 || drone_feats.cols() != anchors.sat.cols())
    throw ShapeError(concat("similarity_to_anchors: features ", shape_str(drone_feats.shape()),
                            " vs anchors ", shape_str(anchors.sat.shape())));
  SimilarityMatrices out;
  out.tau = tau;
  out.s_sat = mul_const(matmul(drone_feats, transpose(anchors.sat)), 1.0 / tau);
  out.s_fused = mul_const(matmul(drone_feats, transpose(anchors.fused)), 1.0 / tau);
  return out;
}

PositiveMask positive_mask(const std::vector<int>& batch_labels,
                           const std::vector<int>& anchor_labels) {
  const std::size_t b = batch_labels.size(), c = anchor_labels.size();
  if (b == 0 || c == 0) throw ConfigError("positive_mask: empty batch or anchor list");
  std::vector<double> m(b * c, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    bool found = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (batch_labels[i] == anchor_labels[j]) {
        m[i * c + j] = 1.0;
        found = true;
      }
    }
    if (!found)
      throw DataError(concat("positive_mask: batch label ", batch_labels[i],
                             " not among anchor classes"));
  }
  PositiveMask out;
  out.mask = Tensor::from_data({b, c}, std::move(m));
  out.batch_labels = batch_labels;
  return out;
}

namespace {
Tensor masked_infonce(const Tensor& sims, const Tensor& mask, double clamp_lo) {
  Tensor e = geofuse::exp(sims);
  Tensor num = clamp_min(sum_last_axis(mul(e, mask)), clamp_lo);
  Tensor den = clamp_min(sum_last_axis(e), clamp_lo);
  // -(1/B) sum_i log(num_i / den_i)
  return mean_all(sub(geofuse::log(den), geofuse::log(num)));
}
}  // namespace

ClassContrastive class_contrastive_loss(const SimilarityMatrices& sims,
                                        const PositiveMask& mask, double clamp_lo) {
  if (sims.s_sat.shape() != mask.mask.shape() || sims.s_fused.shape() != mask.mask.shape())
    throw ShapeError(concat("class_contrastive_loss: similarity ",
                            shape_str(sims.s_sat.shape()), " vs mask ",
                            shape_str(mask.mask.shape())));
  ClassContrastive out;
  out.sat = masked_infonce(sims.s_sat, mask.mask, clamp_lo);
  out.fused = masked_infonce(sims.s_fused, mask.mask, clamp_lo);
  out.total = add(out.sat, out.fused);
  return out;
}

Tensor instance_ce_loss(const Tensor& drone_pooled, const Tensor& sat_pooled,
                        const Tensor& fused_pooled, const std::vector<std::size_t>& labels,
                        const ClassifierHead& head) {
  Tensor l = softmax_cross_entropy(head.logits(drone_pooled), labels);
  l = add(l, softmax_cross_entropy(head.logits(sat_pooled), labels));
  l = add(l, softmax_cross_entropy(head.logits(fused_pooled), labels));
  return l;
}

ImageTextLoss image_text_losses(const Tensor& drone_feats, const Tensor& text_feats,
                                const MatchHead& head, double tau) {
  if (tau <= 0.0) throw ConfigError("image_text_losses: tau must be > 0");
  if (drone_feats.shape() != text_feats.shape())
    throw ShapeError(concat("image_text_losses: ", shape_str(drone_feats.shape()), " vs ",
                            shape_str(text_feats.shape())));
  const std::size_t b = drone_feats.rows();
  const std::size_t d = drone_feats.cols();

  ImageTextLoss out;
  if (b < 2) {
    out.itc = Tensor::scalar(0.0);
    out.itc_degenerate = true;
  } else {
    Tensor logits = mul_const(matmul(drone_feats, transpose(text_feats)), 1.0 / tau);
    std::vector<std::size_t> diag(b);
    for (std::size_t i = 0; i < b; ++i) diag[i] = i;
    Tensor i2t = softmax_cross_entropy(logits, diag);
    Tensor t2i = softmax_cross_entropy(transpose(logits), diag);
    out.itc = mul_const(add(i2t, t2i), 0.5);
  }

  // Matching loss: positives (i, i) plus the hardest in-batch negative text
  // for each drone feature. Negative selection reads values only; gradients
  // flow through the selected pairs.
  const auto& dv = drone_feats.values();
  const auto& tv = text_feats.values();
  std::vector<Tensor> pair_rows;
  std::vector<double> targets;
  for (std::size_t i = 0; i < b; ++i) {
    pair_rows.push_back(concat_vec({get_row(drone_feats, i), get_row(text_feats, i)}));
    targets.push_back(1.0);
  }
  if (b >= 2) {
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t hardest = (i + 1) % b;
      double best = -1e300;
      for (std::size_t j = 0; j < b; ++j) {
        if (j == i) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += dv[i * d + k] * tv[j * d + k];
        if (s > best) {
          best = s;
          hardest = j;
        }
      }
      pair_rows.push_back(concat_vec({get_row(drone_feats, i), get_row(text_feats, hardest)}));
      targets.push_back(0.0);
    }
  }
  Tensor pairs = stack_rows(pair_rows);
  out.itm = sigmoid_bce_with_logits(head.score(pairs), targets);
  out.total = add(out.itc, out.itm);
  return out;
}

Tensor total_loss(const Tensor& l_it, const Tensor& l_ce, const Tensor& l_cc, double lambda) {
  if (lambda < 0.0) throw ConfigError(concat("total_loss: lambda must be >= 0, got ", lambda));
  return add(add(l_it, l_ce), mul_const(l_cc, lambda));
}

}  // namespace geofuse
