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

#include <cmath>
#include <string>

#include "doctest.h"
#include "geofuse/losses.hpp"

using namespace geofuse;

namespace {

// Plain-loop scalar re-evaluation of the clamped class contrastive loss.
// Kept free of any Tensor machinery so it stays an independent oracle.
double cc_loss_oracle(const std::vector<std::vector<double>>& s,
                      const std::vector<std::vector<double>>& m, double clamp_lo) {
  double total = 0.0;
  const std::size_t b = s.size();
  for (std::size_t i = 0; i < b; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < s[i].size(); ++c) {
      const double e = std::exp(s[i][c]);
      den += e;
      num += e * m[i][c];
    }
    num = std::max(num, clamp_lo);
    den = std::max(den, clamp_lo);
    total += -std::log(num / den);
  }
  return total / static_cast<double>(b);
}

Tensor unit_rows(std::size_t r, std::size_t c, Rng& rng) {
  Tensor m = Tensor::uniform({r, c}, rng, -1, 1);
  return l2_normalize_rows(m);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("anchor set from single and repeated features") {
  Rng rng(61);
  ClassifierHead head("head", 4, 3, rng);

  Tensor u = Tensor::uniform({4}, rng, -1, 1);
  Tensor v = Tensor::uniform({4}, rng, -1, 1);

  // One pair per class: the anchor is that pair's feature exactly.
  AnchorSet single = build_anchor_set({0, 1}, {{u}, {v}}, {{v}, {u}}, head);
  Tensor fu = head.feature(u);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(single.sat.at(0, j) == doctest::Approx(fu.values()[j]).epsilon(1e-15));

  // Two identical images: same anchor as one.
  AnchorSet dup = build_anchor_set({0, 1}, {{u, u}, {v}}, {{v}, {u}}, head);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(dup.sat.at(0, j) == doctest::Approx(single.sat.at(0, j)).epsilon(1e-12));

  // Two distinct features: normalize(bottleneck(mean(u, v))).
  AnchorSet two = build_anchor_set({0}, {{u, v}}, {{u}}, head);
  std::vector<double> mean(4);
  for (std::size_t j = 0; j < 4; ++j) mean[j] = 0.5 * (u.values()[j] + v.values()[j]);
  Tensor expect = head.feature(Tensor::from_data({4}, mean));
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(two.sat.at(0, j) == doctest::Approx(expect.values()[j]).epsilon(1e-12));

  CHECK_THROWS_AS(build_anchor_set({0}, {{}}, {{u}}, head), ConfigError);
}

TEST_CASE("similarity to anchors") {
  Rng rng(62);
  Tensor f = l2_normalize(Tensor::uniform({4}, rng, -1, 1));
  std::vector<double> anti(4);
  for (std::size_t j = 0; j < 4; ++j) anti[j] = -f.values()[j];
  // Orthogonal partner built by Gram-Schmidt against f.
  Tensor g = l2_normalize(Tensor::uniform({4}, rng, -1, 1));
  double fg = 0.0;
  for (std::size_t j = 0; j < 4; ++j) fg += f.values()[j] * g.values()[j];
  std::vector<double> orth(4);
  for (std::size_t j = 0; j < 4; ++j) orth[j] = g.values()[j] - fg * f.values()[j];
  Tensor ortho = l2_normalize(Tensor::from_data({4}, orth));

  AnchorSet anchors;
  anchors.class_labels = {0, 1, 2};
  std::vector<double> rows;
  rows.insert(rows.end(), f.values().begin(), f.values().end());
  rows.insert(rows.end(), ortho.values().begin(), ortho.values().end());
  rows.insert(rows.end(), anti.begin(), anti.end());
  anchors.sat = Tensor::from_data({3, 4}, rows);
  anchors.fused = Tensor::from_data({3, 4}, rows);

  Tensor batch = Tensor::from_data({1, 4}, f.values());
  SimilarityMatrices sims = similarity_to_anchors(batch, anchors, 0.07);
  CHECK(sims.s_sat.at(0, 0) == doctest::Approx(1.0 / 0.07).epsilon(1e-12));
  CHECK(std::fabs(sims.s_sat.at(0, 1)) <= 1e-10);
  CHECK(sims.s_sat.at(0, 2) == doctest::Approx(-1.0 / 0.07).epsilon(1e-12));

  CHECK_THROWS_AS(similarity_to_anchors(batch, anchors, 0.0), ConfigError);
  CHECK_THROWS_AS(similarity_to_anchors(batch, anchors, -1.0), ConfigError);
}

TEST_CASE("positive mask construction") {
  PositiveMask ident = positive_mask({0, 1, 2}, {0, 1, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(ident.mask.at(i, j) == (i == j ? 1.0 : 0.0));

  PositiveMask col = positive_mask({5, 5, 5}, {5, 7, 9});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(col.mask.at(i, 0) == 1.0);
    CHECK(col.mask.at(i, 1) == 0.0);
    CHECK(col.mask.at(i, 2) == 0.0);
  }

  PositiveMask perm = positive_mask({0, 2, 1}, {0, 1, 2});
  CHECK(perm.mask.at(0, 0) == 1.0);
  CHECK(perm.mask.at(1, 2) == 1.0);
  CHECK(perm.mask.at(2, 1) == 1.0);
  double total = 0.0;
  for (double v : perm.mask.values()) total += v;
  CHECK(total == 3.0);

  try {
    positive_mask({0, 42}, {0, 1});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
}

TEST_CASE("class contrastive loss: closed forms") {
  // C=1, mask all ones: numerator == denominator, loss 0.
  SimilarityMatrices sims;
  sims.s_sat = Tensor::from_data({2, 1}, {3.0, -1.0});
  sims.s_fused = Tensor::from_data({2, 1}, {0.5, 2.0});
  PositiveMask mask;
  mask.mask = Tensor::full({2, 1}, 1.0);
  ClassContrastive cc = class_contrastive_loss(sims, mask);
  CHECK(cc.sat.item() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cc.fused.item() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cc.total.item() == doctest::Approx(0.0).epsilon(1e-15));

  // B=1, C=2, S = [s+, s-], M = [1, 0]: loss = log(1 + e^{s- - s+}).
  const double sp = 1.0 / 0.07, sn = 0.0;
  SimilarityMatrices s2;
  s2.s_sat = Tensor::from_data({1, 2}, {sp, sn});
  s2.s_fused = Tensor::from_data({1, 2}, {sp, sn});
  PositiveMask m2;
  m2.mask = Tensor::from_data({1, 2}, {1.0, 0.0});
  ClassContrastive cc2 = class_contrastive_loss(s2, m2);
  const double expect = std::log(1.0 + std::exp(sn - sp));
  CHECK(cc2.sat.item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(6.2e-7).epsilon(0.05));  // ~e^{-14.2857}

  // Engineered all-zero mask row: clamp path, finite result.
  PositiveMask m3;
  m3.mask = Tensor::from_data({1, 2}, {0.0, 0.0});
  ClassContrastive cc3 = class_contrastive_loss(s2, m3);
  double den = std::exp(sp) + std::exp(sn);
  CHECK(std::isfinite(cc3.sat.item()));
  CHECK(cc3.sat.item() == doctest::Approx(-std::log(1e-8 / den)).epsilon(1e-12));
}

TEST_CASE("class contrastive loss matches plain-loop oracle on random instances") {
  Rng rng(63);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t b = 1 + rng.index(8);
    const std::size_t c = 1 + rng.index(5);
    std::vector<std::vector<double>> s_sat(b, std::vector<double>(c));
    std::vector<std::vector<double>> s_fused(b, std::vector<double>(c));
    std::vector<std::vector<double>> m(b, std::vector<double>(c, 0.0));
    std::vector<double> flat_s, flat_f, flat_m;
    for (std::size_t i = 0; i < b; ++i) {
      bool any = false;
      for (std::size_t j = 0; j < c; ++j) {
        s_sat[i][j] = rng.uniform(-4.0 / 0.07, 4.0 / 0.07);
        s_fused[i][j] = rng.uniform(-4.0 / 0.07, 4.0 / 0.07);
        // A tenth of rows get engineered zero positive mass.
        if (rng.uniform() < 0.35 && trial % 10 != 0) {
          m[i][j] = 1.0;
          any = true;
        }
      }
      if (!any && trial % 10 != 0) m[i][rng.index(c)] = 1.0;
      for (std::size_t j = 0; j < c; ++j) {
        flat_s.push_back(s_sat[i][j]);
        flat_f.push_back(s_fused[i][j]);
        flat_m.push_back(m[i][j]);
      }
    }
    SimilarityMatrices sims;
    sims.s_sat = Tensor::from_data({b, c}, flat_s);
    sims.s_fused = Tensor::from_data({b, c}, flat_f);
    PositiveMask mask;
    mask.mask = Tensor::from_data({b, c}, flat_m);
    ClassContrastive cc = class_contrastive_loss(sims, mask);
    const double want = cc_loss_oracle(s_sat, m, 1e-8) + cc_loss_oracle(s_fused, m, 1e-8);
    CHECK(std::fabs(cc.total.item() - want) <= 1e-10);
    CHECK(cc.total.item() >= 0.0 - 1e-12);
    CHECK(std::isfinite(cc.total.item()));
  }
}

TEST_CASE("L_CC invariant under joint permutation of anchor columns") {
  Rng rng(64);
  const std::size_t b = 4, c = 5;
  Tensor s = Tensor::uniform({b, c}, rng, -10, 10);
  std::vector<double> m(b * c, 0.0);
  for (std::size_t i = 0; i < b; ++i) m[i * c + rng.index(c)] = 1.0;
  std::vector<std::size_t> perm{3, 1, 4, 0, 2};
  std::vector<double> sp(b * c), mp(b * c);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      sp[i * c + j] = s.at(i, perm[j]);
      mp[i * c + j] = m[i * c + perm[j]];
    }
  SimilarityMatrices s1, s2;
  s1.s_sat = s;
  s1.s_fused = s;
  s2.s_sat = Tensor::from_data({b, c}, sp);
  s2.s_fused = Tensor::from_data({b, c}, sp);
  PositiveMask m1, m2;
  m1.mask = Tensor::from_data({b, c}, m);
  m2.mask = Tensor::from_data({b, c}, mp);
  CHECK(class_contrastive_loss(s1, m1).total.item() ==
        doctest::Approx(class_contrastive_loss(s2, m2).total.item()).epsilon(1e-14));
}

TEST_CASE("instance CE: uniform, perfect, and hand-computed cases") {
  Rng rng(65);
  const std::size_t d = 4, c = 3;
  ClassifierHead head("head", d, c, rng);
  // Zero the classifier so logits are uniform: each view's term is ln C.
  head.cls_w.tensor.mutable_values().assign(d * c, 0.0);
  head.cls_b.tensor.mutable_values().assign(c, 0.0);
  Tensor batch = Tensor::uniform({2, d}, rng, -1, 1);
  Tensor l = instance_ce_loss(batch, batch, batch, {0, 1}, head);
  CHECK(l.item() == doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-12));

  // One-hot-perfect logits with growing margin drive the loss to zero.
  // Bypass the head's bottleneck by checking the CE op directly.
  for (double margin : {5.0, 20.0, 60.0}) {
    Tensor logits = Tensor::from_data({1, 3}, {margin, 0.0, 0.0});
    double ce = softmax_cross_entropy(logits, {0}).item();
    CHECK(ce <= std::log(1.0 + 2.0 * std::exp(-margin)) + 1e-12);
  }

  // Random 2-class instance against hand-computed -log softmax.
  Tensor logits = Tensor::from_data({1, 2}, {0.3, -1.1});
  double want = -std::log(std::exp(-1.1) / (std::exp(0.3) + std::exp(-1.1)));
  CHECK(softmax_cross_entropy(logits, {1}).item() == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(instance_ce_loss(batch, batch, batch, {0, 7}, head), DataError);
}

TEST_CASE("instance CE: weight sharing is real") {
  Rng rng(66);
  const std::size_t d = 4, c = 3;
  ClassifierHead head("head", d, c, rng);
  ParameterStore store;
  head.register_into(store);
  Tensor drone = Tensor::uniform({2, d}, rng, -1, 1);
  Tensor sat = Tensor::uniform({2, d}, rng, -1, 1);
  Tensor fused = Tensor::uniform({2, d}, rng, -1, 1);

  auto term = [&](const Tensor& batch) {
    return softmax_cross_entropy(head.logits(batch), std::vector<std::size_t>{0, 1});
  };
  // Gradient of each per-view term flows into the same parameter set.
  for (const Tensor* batch : {&drone, &sat, &fused}) {
    store.zero_grads();
    backward(term(*batch));
    double total = 0.0;
    for (double v : head.cls_w.tensor.grad()) total += std::fabs(v);
    CHECK(total > 0.0);
  }
}

TEST_CASE("image-text losses") {
  Rng rng(67);
  const std::size_t d = 8, b = 4;
  MatchHead mh("match", d, rng);
  // Orthonormal positive pairs: drone_i == text_i == e_i.
  std::vector<double> eye(b * d, 0.0);
  for (std::size_t i = 0; i < b; ++i) eye[i * d + i] = 1.0;
  Tensor dr = Tensor::from_data({b, d}, eye);
  Tensor tx = Tensor::from_data({b, d}, eye);
  ImageTextLoss itl = image_text_losses(dr, tx, mh, 0.07);
  const double want_itc = std::log(1.0 + (b - 1) * std::exp(-1.0 / 0.07));
  CHECK(itl.itc.item() == doctest::Approx(want_itc).epsilon(1e-10));
  CHECK(!itl.itc_degenerate);

  // Matching head forced to output logit 0 -> probability 0.5 -> ln 2.
  mh.w1.tensor.mutable_values().assign(mh.w1.tensor.size(), 0.0);
  mh.b1.tensor.mutable_values().assign(mh.b1.tensor.size(), 0.0);
  mh.w2.tensor.mutable_values().assign(mh.w2.tensor.size(), 0.0);
  mh.b2.tensor.mutable_values().assign(mh.b2.tensor.size(), 0.0);
  ImageTextLoss flat = image_text_losses(dr, tx, mh, 0.07);
  CHECK(flat.itm.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // B = 1: contrastive term is zero by contract, flagged.
  Tensor d1 = Tensor::from_data({1, d}, std::vector<double>(eye.begin(), eye.begin() + d));
  ImageTextLoss degen = image_text_losses(d1, d1, mh, 0.07);
  CHECK(degen.itc.item() == 0.0);
  CHECK(degen.itc_degenerate);
}

TEST_CASE("total loss combination") {
  Tensor l_it = Tensor::scalar(1.0);
  Tensor l_ce = Tensor::scalar(2.0);
  Tensor l_cc = Tensor::scalar(3.0);
  CHECK(total_loss(l_it, l_ce, l_cc, 0.10).item() == doctest::Approx(3.3).epsilon(1e-15));
  CHECK(total_loss(l_it, l_ce, l_cc, 0.0).item() == doctest::Approx(3.0).epsilon(1e-15));
  for (double lambda : {0.05, 0.10, 0.15}) {
    double diff = total_loss(l_it, l_ce, l_cc, lambda).item() -
                  total_loss(l_it, l_ce, l_cc, 0.0).item();
    CHECK(std::fabs(diff - lambda * 3.0) <= 1e-12);
  }
  CHECK_THROWS_AS(total_loss(l_it, l_ce, l_cc, -0.1), ConfigError);
}

TEST_CASE("loss gradients match finite differences end to end") {
  Rng rng(68);
  const std::size_t b = 3, c = 3, d = 4;
  ClassifierHead head("head", d, c, rng);
  MatchHead mh("match", d, rng);
  Parameter drone("drone", Tensor::uniform({b, d}, rng, -1, 1, true));
  Parameter text("text", Tensor::uniform({b, d}, rng, -1, 1, true));
  Rng arng(69);
  AnchorSet anchors;
  anchors.class_labels = {0, 1, 2};
  anchors.sat = unit_rows(c, d, arng);
  anchors.fused = unit_rows(c, d, arng);

  ParameterStore store;
  head.register_into(store);
  mh.register_into(store);
  store.add(&drone);
  store.add(&text);
  std::vector<std::size_t> labels{0, 2, 1};
  std::vector<int> int_labels{0, 2, 1};

  auto forward = [&]() {
    Tensor feats = head.feature_rows(drone.tensor);
    SimilarityMatrices sims = similarity_to_anchors(feats, anchors, 0.07);
    PositiveMask mask = positive_mask(int_labels, anchors.class_labels);
    ClassContrastive cc = class_contrastive_loss(sims, mask);
    Tensor ce = instance_ce_loss(drone.tensor, drone.tensor, drone.tensor, labels, head);
    ImageTextLoss itl = image_text_losses(feats, l2_normalize_rows(text.tensor), mh, 0.07);
    return total_loss(itl.total, ce, cc.total, 0.10);
  };
  store.zero_grads();
  GradMap ad = backward(forward(), store);
  std::vector<Parameter*> plist{&head.bottleneck_w, &head.bottleneck_b, &head.cls_w,
                                &head.cls_b,        &mh.w1,             &mh.b1,
                                &mh.w2,             &mh.b2,             &drone,
                                &text};
  GradMap fd = finite_diff_grad([&]() { return forward().item(); }, plist);
  double worst = 0.0;
  for (const auto& [name, gv] : ad) {
    const auto& fv = fd.at(name);
    for (std::size_t i = 0; i < gv.size(); ++i) worst = std::max(worst, rel_err(gv[i], fv[i]));
  }
  CHECK(worst <= 1e-4);
}

}  // TEST_SUITE
