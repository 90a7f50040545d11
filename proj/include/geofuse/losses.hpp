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

#ifndef GEOFUSE_LOSSES_HPP_
#define GEOFUSE_LOSSES_HPP_

#include <string>
#include <vector>

#include "geofuse/tensor.hpp"

namespace geofuse {

// Per-class reference features: one satellite anchor and one fused
// satellite-roadmap anchor per location class, all l2-normalized.
struct AnchorSet {
  std::vector<int> class_labels;  // C unique labels, in class order
  Tensor sat;                     // C x D
  Tensor fused;                   // C x D

  std::size_t num_classes() const { return class_labels.size(); }
  void validate() const;
};

struct SimilarityMatrices {
  Tensor s_sat;    // B x C
  Tensor s_fused;  // B x C
  double tau = 0.07;
};

struct PositiveMask {
  Tensor mask;                  // B x C of exact 0/1 values, untracked
  std::vector<int> batch_labels;
};

// Shared classification head: a bottleneck whose output is the retrieval
// feature, and a class projection used by the instance loss. One instance
// serves the drone, satellite, and fused embeddings. Class scores are scaled
// cosines between the normalized feature and normalized class columns, so
// the loss sees feature directions rather than magnitudes.
struct ClassifierHead {
  std::size_t d_model = 0;
  std::size_t num_classes = 0;
  double logit_scale = 16.0;
  Parameter bottleneck_w, bottleneck_b;
  Parameter cls_w, cls_b;  // D x C class directions plus per-class bias

  ClassifierHead(const std::string& prefix, std::size_t d, std::size_t classes, Rng& rng);
  void register_into(ParameterStore& store);

  Tensor bottleneck(const Tensor& pooled) const;     // vector or batch rows
  Tensor feature(const Tensor& pooled) const;        // l2-normalized bottleneck (vector)
  Tensor feature_rows(const Tensor& batch) const;    // row-wise variant
  Tensor logits(const Tensor& batch) const;          // batch class scores
};

// Binary matched/mismatched classifier over concatenated feature pairs.
struct MatchHead {
  std::size_t d_model = 0;
  Parameter w1, b1, w2, b2;

  MatchHead(const std::string& prefix, std::size_t d, Rng& rng);
  void register_into(ParameterStore& store);
  // One logit per row of a (pairs x 2D) matrix.
  Tensor score(const Tensor& pairs) const;
};

// Builds anchors from per-class embedding lists: mean, bottleneck, normalize.
// sat_embeds[c] / fused_embeds[c] hold the class's raw pooled embeddings.
AnchorSet build_anchor_set(const std::vector<int>& class_labels,
                           const std::vector<std::vector<Tensor>>& sat_embeds,
                           const std::vector<std::vector<Tensor>>& fused_embeds,
                           const ClassifierHead& head);

// S[i][c] = dot(drone_i, anchor_c) / tau for both anchor modalities.
SimilarityMatrices similarity_to_anchors(const Tensor& drone_feats, const AnchorSet& anchors,
                                         double tau);

// Exact indicator matrix M[i][c] = 1 iff batch label i equals anchor label c.
PositiveMask positive_mask(const std::vector<int>& batch_labels,
                           const std::vector<int>& anchor_labels);

struct ClassContrastive {
  Tensor sat;    // scalar
  Tensor fused;  // scalar
  Tensor total;  // sat + fused
};

// Per-modality masked InfoNCE over class anchors; numerator and denominator
// are clamped to clamp_lo before the division.
ClassContrastive class_contrastive_loss(const SimilarityMatrices& sims,
                                        const PositiveMask& mask, double clamp_lo = 1e-8);

// Sum of three softmax cross-entropies through the one shared head.
Tensor instance_ce_loss(const Tensor& drone_pooled, const Tensor& sat_pooled,
                        const Tensor& fused_pooled, const std::vector<std::size_t>& labels,
                        const ClassifierHead& head);

struct ImageTextLoss {
  Tensor itc;
  Tensor itm;
  Tensor total;
  bool itc_degenerate = false;  // batch too small for in-batch contrast
};

// Simplified drone-text objectives: symmetric in-batch InfoNCE plus a binary
// matching loss with one hardest in-batch negative per positive.
ImageTextLoss image_text_losses(const Tensor& drone_feats, const Tensor& text_feats,
                                const MatchHead& head, double tau);

// L_total = L_IT + L_CE + lambda * L_CC.
Tensor total_loss(const Tensor& l_it, const Tensor& l_ce, const Tensor& l_cc, double lambda);

}  // namespace geofuse

#endif  // GEOFUSE_LOSSES_HPP_
