#pragma once

#include <cstdint>

#include "ttml/rng.hpp"
#include "ttml/tensor.hpp"

namespace ttml {

// Stochastic view generation: random area-scale crop with aspect drawn in
// [3/4, 4/3], bilinear resize, optional horizontal flip, then brightness ->
// contrast -> saturation jitter, clamped to [0, 1]. All draws come from the
// caller-supplied generator, in that fixed order.
struct AugmentConfig {
    float crop_scale_min = 0.5f;  // fraction of source area
    float crop_scale_max = 1.0f;
    int out_h = 256;
    int out_w = 256;
    float brightness = 0.4f;  // additive delta drawn in [-b, b]
    float contrast = 0.4f;    // scale about the per-image mean, factor 1 + [-c, c]
    float saturation = 0.4f;  // blend with per-pixel luma, factor 1 + [-s, s]
    float flip_prob = 0.5f;
    uint64_t seed = 0;

    void validate() const;
};

Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& draw);

// Plain cosine similarity of two nonzero vectors, in [-1, 1].
double cosine_similarity(const Tensor& u, const Tensor& v);

// 2N latent rows where rows 2k and 2k+1 are the two views of image k.
struct ContrastiveBatch {
    Tensor z;          // (2N, dim)
    double tau = 0.5;  // temperature
};

// Normalized-temperature cross entropy over all 2N directed positive pairs;
// the denominator for anchor i runs over every other row (the positive pair
// included). Returns the mean of the 2N directed losses as a differentiable
// rank-0 tensor.
Tensor nt_xent(Graph& g, const Tensor& z, double tau);
Tensor nt_xent(Graph& g, const ContrastiveBatch& batch);

}  // namespace ttml
