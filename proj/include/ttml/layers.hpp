#pragma once

#include <cstdint>
#include <vector>

#include "ttml/rng.hpp"
#include "ttml/tensor.hpp"

namespace ttml {

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

struct DenseLayer {
    Tensor weight;  // (in, out)
    Tensor bias;    // (out)
    bool trainable = true;

    int64_t in_dim() const { return weight.shape[0]; }
    int64_t out_dim() const { return weight.shape[1]; }
};

DenseLayer dense_init(int64_t in, int64_t out, uint64_t seed);
Tensor dense_forward(Graph& g, const DenseLayer& layer, const Tensor& x);

// ---------------------------------------------------------------------------
// Tensor-train factorized dense layer: the (in, out) weight matrix is held
// as two rank-3 cores sharing a bond index of size r. With in = a*b and
// out = c*d, W[(a,b),(c,d)] = sum_r core1[a,c,r] * core2[b,d,r].
// ---------------------------------------------------------------------------

struct TTDenseSpec {
    int64_t in_a = 1, in_b = 1;    // input split, a*b == in_dim
    int64_t out_c = 1, out_d = 1;  // output split, c*d == out_dim
    int64_t bond = 1;              // shared index size r

    int64_t in_dim() const { return in_a * in_b; }
    int64_t out_dim() const { return out_c * out_d; }
    void validate() const;
};

struct TTDenseLayer {
    TTDenseSpec spec;
    Tensor core1;  // (a, c, r)
    Tensor core2;  // (b, d, r)
    Tensor bias;   // (c*d)
    bool trainable = true;
};

// Weight-only parameter count: a*c*r + b*d*r.
int64_t tt_weight_params(const TTDenseSpec& spec);

// Cores i.i.d. uniform in [-s, s], s = sqrt(6 / (in + out)) / sqrt(r), so
// the materialized-weight variance stays flat across bond dimensions. Bias
// starts at zero.
TTDenseLayer tt_init(const TTDenseSpec& spec, uint64_t seed);

// Two-step contraction, x first against core1 then core2; never goes
// through the materialized matrix.
Tensor tt_forward(Graph& g, const TTDenseLayer& layer, const Tensor& x);

// Contracts the cores into the full (in, out) matrix. Correctness oracle
// and analysis aid only; not differentiable.
Tensor tt_materialize(const TTDenseLayer& layer);

// ---------------------------------------------------------------------------
// Dense-block convolutional encoder: within a stage every layer's output is
// concatenated onto its input channels; stages end in 2x2 average pooling
// and the whole thing in a global average pool.
// ---------------------------------------------------------------------------

struct EncoderStage {
    int num_layers = 1;
    int growth = 8;  // channels appended per layer
};

struct EncoderConfig {
    std::vector<EncoderStage> stages;
    int kernel = 3;  // odd
};

struct ConvLayer {
    Tensor kernel;  // (k, k, c_in, c_out)
    Tensor bias;    // (c_out)
    bool trainable = true;
};

struct Encoder {
    EncoderConfig cfg;
    int in_channels = 3;
    std::vector<ConvLayer> layers;  // stage-major order
};

int64_t encoder_out_channels(const EncoderConfig& cfg, int in_channels);
Encoder encoder_init(const EncoderConfig& cfg, int in_channels, uint64_t seed);

// images (B, H, W, C) with H, W divisible by 2^(number of stages);
// returns (B, encoder_out_channels).
Tensor encoder_forward(Graph& g, const Encoder& enc, const Tensor& images);

// ---------------------------------------------------------------------------
// Differentiable building blocks used by the layers above
// ---------------------------------------------------------------------------

// Stride-1 same-padded conv, kernel extent odd. x (B, H, W, Cin), k (k, k,
// Cin, Cout) -> (B, H, W, Cout).
Tensor conv2d_same(Graph& g, const Tensor& x, const Tensor& kernel);

// x (..., C) + v (C), added along the last axis.
Tensor add_lastdim(Graph& g, const Tensor& x, const Tensor& v);

// Concatenate along the last axis; leading extents must match.
Tensor concat_lastdim(Graph& g, const Tensor& a, const Tensor& b);

// (B, H, W, C) -> (B, H/2, W/2, C); H, W even.
Tensor avg_pool2x2(Graph& g, const Tensor& x);

// (B, H, W, C) -> (B, C).
Tensor global_avg_pool(Graph& g, const Tensor& x);

}  // namespace ttml
