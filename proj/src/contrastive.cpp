#include "ttml/contrastive.hpp"

#include <cmath>
#include <string>

#include "ttml/image.hpp"

namespace ttml {

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

void AugmentConfig::validate() const {
    if (!(crop_scale_min > 0.0f) || crop_scale_min > crop_scale_max || crop_scale_max > 1.0f)
        throw UsageError("augment: need 0 < crop_scale_min <= crop_scale_max <= 1");
    if (out_h < 1 || out_w < 1) throw UsageError("augment: output size must be positive");
    for (float s : {brightness, contrast, saturation})
        if (s < 0.0f || s > 1.0f) throw UsageError("augment: jitter strengths must be in [0,1]");
    if (flip_prob < 0.0f || flip_prob > 1.0f)
        throw UsageError("augment: flip_prob must be in [0,1]");
}

namespace {

struct CropRect {
    int64_t x0, y0, w, h;
};

// Up to ten (area, aspect) draws; the first rectangle that fits wins, else
// the full frame. With crop_scale_max == 1 this degrades to the identity
// crop whenever the drawn aspect cannot fit, which keeps the no-op config a
// true no-op.
CropRect draw_crop(int64_t H, int64_t W, const AugmentConfig& cfg, Rng& rng) {
    const double area = double(H) * double(W);
    int64_t w = W, h = H;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
        const double aspect = rng.uniform(3.0 / 4.0, 4.0 / 3.0);
        const int64_t tw = int64_t(std::lround(std::sqrt(target * aspect)));
        const int64_t th = int64_t(std::lround(std::sqrt(target / aspect)));
        if (tw >= 1 && tw <= W && th >= 1 && th <= H) {
            w = tw;
            h = th;
            break;
        }
    }
    CropRect r{0, 0, w, h};
    r.x0 = w < W ? rng.below(W - w + 1) : 0;
    r.y0 = h < H ? rng.below(H - h + 1) : 0;
    return r;
}

}  // namespace

Tensor augment(const Tensor& image, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    if (image.rank() != 3 || image.shape[2] != 3)
        throw ShapeError("augment: need (H,W,3), got " + shape_str(image.shape));
    const float* src = image.ptr();
    for (int64_t i = 0; i < image.size(); ++i)
        if (src[i] < 0.0f || src[i] > 1.0f)
            throw DomainError("augment: pixel value " + std::to_string(src[i]) +
                              " outside [0,1] at flat index " + std::to_string(i));

    const int64_t H = image.shape[0], W = image.shape[1];
    const CropRect crop = draw_crop(H, W, cfg, rng);

    Tensor cropped = zeros({crop.h, crop.w, 3});
    {
        float* dst = cropped.mut();
        for (int64_t y = 0; y < crop.h; ++y)
            for (int64_t x = 0; x < crop.w; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    dst[(y * crop.w + x) * 3 + c] =
                        src[((y + crop.y0) * W + (x + crop.x0)) * 3 + c];
    }
    Tensor out = (crop.h == cfg.out_h && crop.w == cfg.out_w)
                     ? cropped
                     : resize_bilinear(cropped, cfg.out_h, cfg.out_w);

    if (rng.uniform() < double(cfg.flip_prob)) {
        float* p = out.mut();
        for (int64_t y = 0; y < cfg.out_h; ++y)
            for (int64_t x = 0; x < cfg.out_w / 2; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    std::swap(p[(y * cfg.out_w + x) * 3 + c],
                              p[(y * cfg.out_w + (cfg.out_w - 1 - x)) * 3 + c]);
    }

    float* p = out.mut();
    const int64_t n = out.size();

    const float b_delta = rng.uniformf(-cfg.brightness, cfg.brightness);
    if (b_delta != 0.0f)
        for (int64_t i = 0; i < n; ++i) p[i] += b_delta;

    const float c_factor = 1.0f + rng.uniformf(-cfg.contrast, cfg.contrast);
    if (c_factor != 1.0f) {
        double mean = 0.0;
        for (int64_t i = 0; i < n; ++i) mean += p[i];
        const float m = float(mean / double(n));
        for (int64_t i = 0; i < n; ++i) p[i] = m + c_factor * (p[i] - m);
    }

    const float s_factor = 1.0f + rng.uniformf(-cfg.saturation, cfg.saturation);
    if (s_factor != 1.0f) {
        for (int64_t i = 0; i < n; i += 3) {
            const float luma = 0.299f * p[i] + 0.587f * p[i + 1] + 0.114f * p[i + 2];
            for (int64_t c = 0; c < 3; ++c) p[i + c] = luma + s_factor * (p[i + c] - luma);
        }
    }

    for (int64_t i = 0; i < n; ++i) p[i] = std::min(std::max(p[i], 0.0f), 1.0f);
    return out;
}

// ---------------------------------------------------------------------------
// Cosine similarity / NT-Xent
// ---------------------------------------------------------------------------

double cosine_similarity(const Tensor& u, const Tensor& v) {
    if (u.rank() != 1 || v.rank() != 1 || u.shape[0] != v.shape[0])
        throw ShapeError("cosine_similarity: need equal-length vectors, got " +
                         shape_str(u.shape) + " and " + shape_str(v.shape));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    const float* up = u.ptr();
    const float* vp = v.ptr();
    for (int64_t i = 0; i < u.size(); ++i) {
        dot += double(up[i]) * double(vp[i]);
        nu += double(up[i]) * double(up[i]);
        nv += double(vp[i]) * double(vp[i]);
    }
    if (nu == 0.0 || nv == 0.0) throw DomainError("cosine_similarity: zero-norm vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

Tensor nt_xent(Graph& g, const Tensor& z, double tau) {
    if (!(tau > 0.0)) throw DomainError("nt_xent: temperature must be positive");
    if (z.rank() != 2) throw ShapeError("nt_xent: need (2N, dim), got " + shape_str(z.shape));
    const int64_t rows = z.shape[0];
    if (rows < 2 || rows % 2 != 0)
        throw ShapeError("nt_xent: row count must be even and >= 2, got " +
                         std::to_string(rows));

    // Row norms, floored at 1e-12 like the usual guarded l2-normalize: a
    // degenerate all-zero view then contributes flat similarities instead of
    // killing the training step.
    Tensor sumsq = g.clamp(g.sum(g.mul(z, z), 1), 1e-12, 3.4e38);  // (2N)

    // Cosine similarity matrix: S = (z z^T) scaled by the outer product of
    // the reciprocal norms. rsqrt is exp(-log/2) to stay within the op set.
    Tensor inv_norm = g.exp(g.scale(g.log(sumsq), -0.5));
    Tensor gram = g.contract(z, z, {{1, 1}});
    Tensor sim = g.mul(gram, g.contract(inv_norm, inv_norm, {}));

    // Stabilize exponentiation with the (constant) row maximum. The shift
    // cancels identically between the two loss terms.
    Tensor row_max = g.max(sim, 1).detached();
    Tensor ones = full({rows}, 1.0f);
    Tensor shifted = g.scale(g.sub(sim, g.contract(row_max, ones, {})), 1.0 / tau);

    // Denominator over every other row; k == i masked out.
    Tensor off_diag = full({rows, rows}, 1.0f);
    Tensor pair_mask = zeros({rows, rows});
    for (int64_t i = 0; i < rows; ++i) {
        (*off_diag.data)[size_t(i * rows + i)] = 0.0f;
        (*pair_mask.data)[size_t(i * rows + (i ^ 1))] = 1.0f;
    }
    Tensor denom = g.log(g.sum(g.mul(g.exp(shifted), off_diag), 1));
    Tensor positive = g.sum(g.mul(shifted, pair_mask), 1);
    return g.mean(g.sub(denom, positive));
}

Tensor nt_xent(Graph& g, const ContrastiveBatch& batch) {
    return nt_xent(g, batch.z, batch.tau);
}

}  // namespace ttml
