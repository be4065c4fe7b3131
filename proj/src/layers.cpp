#include "ttml/layers.hpp"

#include <cmath>
#include <string>

namespace ttml {

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

DenseLayer dense_init(int64_t in, int64_t out, uint64_t seed) {
    if (in <= 0 || out <= 0) throw ShapeError("dense_init: dims must be positive");
    DenseLayer layer;
    layer.weight = zeros({in, out});
    layer.bias = zeros({out});
    Rng rng(seed);
    const float s = float(std::sqrt(6.0 / double(in + out)));
    for (auto& w : *layer.weight.data) w = rng.uniformf(-s, s);
    layer.weight.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    return layer;
}

Tensor dense_forward(Graph& g, const DenseLayer& layer, const Tensor& x) {
    if (x.rank() != 2 || x.shape[1] != layer.in_dim())
        throw ShapeError("dense_forward: input " + shape_str(x.shape) + " does not match weight " +
                         shape_str(layer.weight.shape));
    Tensor y = g.contract(x, layer.weight, {{1, 0}});
    return add_lastdim(g, y, layer.bias);
}

// ---------------------------------------------------------------------------
// TT dense
// ---------------------------------------------------------------------------

void TTDenseSpec::validate() const {
    if (in_a <= 0 || in_b <= 0 || out_c <= 0 || out_d <= 0)
        throw ShapeError("tt spec: split factors must be positive");
    if (bond < 1) throw ShapeError("tt spec: bond must be >= 1");
}

int64_t tt_weight_params(const TTDenseSpec& spec) {
    return spec.in_a * spec.out_c * spec.bond + spec.in_b * spec.out_d * spec.bond;
}

TTDenseLayer tt_init(const TTDenseSpec& spec, uint64_t seed) {
    spec.validate();
    TTDenseLayer layer;
    layer.spec = spec;
    layer.core1 = zeros({spec.in_a, spec.out_c, spec.bond});
    layer.core2 = zeros({spec.in_b, spec.out_d, spec.bond});
    layer.bias = zeros({spec.out_dim()});
    Rng rng(seed);
    const float s = float(std::sqrt(6.0 / double(spec.in_dim() + spec.out_dim())) /
                          std::sqrt(double(spec.bond)));
    for (auto& w : *layer.core1.data) w = rng.uniformf(-s, s);
    for (auto& w : *layer.core2.data) w = rng.uniformf(-s, s);
    layer.core1.set_requires_grad(true);
    layer.core2.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    return layer;
}

Tensor tt_forward(Graph& g, const TTDenseLayer& layer, const Tensor& x) {
    const TTDenseSpec& s = layer.spec;
    if (x.rank() != 2 || x.shape[1] != s.in_dim())
        throw ShapeError("tt_forward: input " + shape_str(x.shape) + " does not match in_dim " +
                         std::to_string(s.in_dim()));
    const int64_t batch = x.shape[0];
    Tensor x3 = g.reshape(x, {batch, s.in_a, s.in_b});
    // T[B, b, c, r] = sum_a X[B, a, b] * core1[a, c, r]
    Tensor t = g.contract(x3, layer.core1, {{1, 0}});
    // Y[B, c, d] = sum_{b, r} T[B, b, c, r] * core2[b, d, r]
    Tensor y = g.contract(t, layer.core2, {{1, 0}, {3, 2}});
    Tensor flat = g.reshape(y, {batch, s.out_dim()});
    return add_lastdim(g, flat, layer.bias);
}

Tensor tt_materialize(const TTDenseLayer& layer) {
    const TTDenseSpec& s = layer.spec;
    Tensor w = zeros({s.in_dim(), s.out_dim()});
    const float* c1 = layer.core1.ptr();
    const float* c2 = layer.core2.ptr();
    float* wp = w.mut();
    for (int64_t a = 0; a < s.in_a; ++a)
        for (int64_t b = 0; b < s.in_b; ++b)
            for (int64_t c = 0; c < s.out_c; ++c)
                for (int64_t d = 0; d < s.out_d; ++d) {
                    double acc = 0.0;
                    for (int64_t r = 0; r < s.bond; ++r)
                        acc += double(c1[(a * s.out_c + c) * s.bond + r]) *
                               double(c2[(b * s.out_d + d) * s.bond + r]);
                    wp[(a * s.in_b + b) * s.out_dim() + c * s.out_d + d] = float(acc);
                }
    return w;
}

// ---------------------------------------------------------------------------
// Differentiable building blocks
// ---------------------------------------------------------------------------

Tensor conv2d_same(Graph& g, const Tensor& x, const Tensor& kernel) {
    if (x.rank() != 4 || kernel.rank() != 4)
        throw ShapeError("conv2d_same: need x (B,H,W,C) and kernel (k,k,Cin,Cout)");
    const int64_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
    const int64_t K = kernel.shape[0], Cout = kernel.shape[3];
    if (kernel.shape[1] != K || K % 2 == 0)
        throw ShapeError("conv2d_same: kernel must be square with odd extent, got " +
                         shape_str(kernel.shape));
    if (kernel.shape[2] != C)
        throw ShapeError("conv2d_same: kernel input channels " + std::to_string(kernel.shape[2]) +
                         " != image channels " + std::to_string(C));
    const int64_t P = K / 2;

    Tensor out = zeros({B, H, W, Cout});
    {
        const float* xp = x.ptr();
        const float* kp = kernel.ptr();
        float* op = out.mut();
        std::vector<double> acc(static_cast<size_t>(Cout));
        for (int64_t b = 0; b < B; ++b)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t xx = 0; xx < W; ++xx) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int64_t ky = 0; ky < K; ++ky) {
                        const int64_t sy = y + ky - P;
                        if (sy < 0 || sy >= H) continue;
                        for (int64_t kx = 0; kx < K; ++kx) {
                            const int64_t sx = xx + kx - P;
                            if (sx < 0 || sx >= W) continue;
                            const float* px = xp + ((b * H + sy) * W + sx) * C;
                            const float* kr = kp + (ky * K + kx) * C * Cout;
                            for (int64_t c = 0; c < C; ++c) {
                                const double v = px[c];
                                const float* ko = kr + c * Cout;
                                for (int64_t o = 0; o < Cout; ++o) acc[size_t(o)] += v * ko[o];
                            }
                        }
                    }
                    float* orow = op + ((b * H + y) * W + xx) * Cout;
                    for (int64_t o = 0; o < Cout; ++o) orow[o] = float(acc[size_t(o)]);
                }
    }
    add_macs(uint64_t(B * H * W * K * K * C * Cout));

    if (g.recording() && (x.requires_grad || kernel.requires_grad)) {
        g.prepare_output(out);
        Tensor xv = x, kv = kernel, ov = out;
        g.register_node("conv2d", out, [xv, kv, ov, B, H, W, C, K, Cout, P] {
            const float* gp = ov.grad->data();
            const float* xp = xv.ptr();
            const float* kp = kv.ptr();
            float* xg = xv.grad ? xv.grad->data() : nullptr;
            std::vector<double> kacc;
            if (kv.grad) kacc.assign(kv.grad->size(), 0.0);
            for (int64_t b = 0; b < B; ++b)
                for (int64_t y = 0; y < H; ++y)
                    for (int64_t xx = 0; xx < W; ++xx) {
                        const float* grow = gp + ((b * H + y) * W + xx) * Cout;
                        for (int64_t ky = 0; ky < K; ++ky) {
                            const int64_t sy = y + ky - P;
                            if (sy < 0 || sy >= H) continue;
                            for (int64_t kx = 0; kx < K; ++kx) {
                                const int64_t sx = xx + kx - P;
                                if (sx < 0 || sx >= W) continue;
                                const int64_t pix = ((b * H + sy) * W + sx) * C;
                                const int64_t kbase = (ky * K + kx) * C * Cout;
                                for (int64_t c = 0; c < C; ++c) {
                                    const float* ko = kp + kbase + c * Cout;
                                    if (xg) {
                                        double s = 0.0;
                                        for (int64_t o = 0; o < Cout; ++o)
                                            s += double(grow[o]) * double(ko[o]);
                                        xg[pix + c] += float(s);
                                    }
                                    if (kv.grad) {
                                        const double v = xp[pix + c];
                                        double* ka = kacc.data() + kbase + c * Cout;
                                        for (int64_t o = 0; o < Cout; ++o)
                                            ka[o] += v * double(grow[o]);
                                    }
                                }
                            }
                        }
                    }
            add_macs(uint64_t((xv.grad ? 1 : 0) + (kv.grad ? 1 : 0)) *
                     uint64_t(B * H * W * K * K * C * Cout));
            if (kv.grad)
                for (size_t i = 0; i < kacc.size(); ++i) (*kv.grad)[i] += float(kacc[i]);
        });
    }
    return out;
}

Tensor add_lastdim(Graph& g, const Tensor& x, const Tensor& v) {
    if (x.rank() < 1 || v.rank() != 1 || x.shape.back() != v.shape[0])
        throw ShapeError("add_lastdim: last extent of " + shape_str(x.shape) +
                         " does not match vector " + shape_str(v.shape));
    const int64_t C = v.shape[0];
    const int64_t rows = x.size() / C;
    Tensor out = zeros(x.shape);
    {
        const float* xp = x.ptr();
        const float* vp = v.ptr();
        float* op = out.mut();
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < C; ++c) op[r * C + c] = xp[r * C + c] + vp[c];
    }
    if (g.recording() && (x.requires_grad || v.requires_grad)) {
        g.prepare_output(out);
        Tensor xv = x, vv = v, ov = out;
        g.register_node("add_lastdim", out, [xv, vv, ov, rows, C] {
            const float* gp = ov.grad->data();
            if (xv.grad)
                for (size_t i = 0; i < ov.grad->size(); ++i) (*xv.grad)[i] += gp[i];
            if (vv.grad) {
                std::vector<double> acc(size_t(C), 0.0);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < C; ++c) acc[size_t(c)] += gp[r * C + c];
                for (int64_t c = 0; c < C; ++c) (*vv.grad)[size_t(c)] += float(acc[size_t(c)]);
            }
        });
    }
    return out;
}

Tensor concat_lastdim(Graph& g, const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1)
        throw ShapeError("concat_lastdim: rank mismatch");
    for (int i = 0; i + 1 < a.rank(); ++i)
        if (a.shape[size_t(i)] != b.shape[size_t(i)])
            throw ShapeError("concat_lastdim: leading extents differ, " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
    const int64_t Ca = a.shape.back(), Cb = b.shape.back();
    Shape out_shape = a.shape;
    out_shape.back() = Ca + Cb;
    const int64_t rows = a.size() / Ca;
    Tensor out = zeros(out_shape);
    {
        const float* ap = a.ptr();
        const float* bp = b.ptr();
        float* op = out.mut();
        for (int64_t r = 0; r < rows; ++r) {
            std::copy(ap + r * Ca, ap + (r + 1) * Ca, op + r * (Ca + Cb));
            std::copy(bp + r * Cb, bp + (r + 1) * Cb, op + r * (Ca + Cb) + Ca);
        }
    }
    if (g.recording() && (a.requires_grad || b.requires_grad)) {
        g.prepare_output(out);
        Tensor av = a, bv = b, ov = out;
        g.register_node("concat_lastdim", out, [av, bv, ov, rows, Ca, Cb] {
            const float* gp = ov.grad->data();
            for (int64_t r = 0; r < rows; ++r) {
                if (av.grad)
                    for (int64_t c = 0; c < Ca; ++c)
                        (*av.grad)[size_t(r * Ca + c)] += gp[r * (Ca + Cb) + c];
                if (bv.grad)
                    for (int64_t c = 0; c < Cb; ++c)
                        (*bv.grad)[size_t(r * Cb + c)] += gp[r * (Ca + Cb) + Ca + c];
            }
        });
    }
    return out;
}

Tensor avg_pool2x2(Graph& g, const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("avg_pool2x2: need (B,H,W,C)");
    const int64_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3];
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("avg_pool2x2: spatial extents must be even, got " + shape_str(x.shape));
    Tensor split = g.reshape(x, {B, H / 2, 2, W / 2, 2, C});
    Tensor rows = g.mean(split, 2);        // (B, H/2, W/2, 2, C)
    return g.mean(rows, 3);                // (B, H/2, W/2, C)
}

Tensor global_avg_pool(Graph& g, const Tensor& x) {
    if (x.rank() != 4) throw ShapeError("global_avg_pool: need (B,H,W,C)");
    Tensor flat = g.reshape(x, {x.shape[0], x.shape[1] * x.shape[2], x.shape[3]});
    return g.mean(flat, 1);
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

int64_t encoder_out_channels(const EncoderConfig& cfg, int in_channels) {
    int64_t c = in_channels;
    for (const auto& st : cfg.stages) c += int64_t(st.num_layers) * st.growth;
    return c;
}

Encoder encoder_init(const EncoderConfig& cfg, int in_channels, uint64_t seed) {
    if (cfg.stages.empty()) throw ShapeError("encoder: need at least one stage");
    if (cfg.kernel < 1 || cfg.kernel % 2 == 0)
        throw ShapeError("encoder: kernel extent must be odd and positive");
    Encoder enc;
    enc.cfg = cfg;
    enc.in_channels = in_channels;
    Rng rng(seed);
    int64_t c = in_channels;
    for (const auto& st : cfg.stages) {
        if (st.num_layers < 1 || st.growth < 1)
            throw ShapeError("encoder: stage layers and growth must be positive");
        for (int l = 0; l < st.num_layers; ++l) {
            ConvLayer layer;
            layer.kernel = zeros({cfg.kernel, cfg.kernel, c, st.growth});
            layer.bias = zeros({st.growth});
            const double fan = double(cfg.kernel) * cfg.kernel * double(c + st.growth);
            const float s = float(std::sqrt(6.0 / fan));
            for (auto& w : *layer.kernel.data) w = rng.uniformf(-s, s);
            layer.kernel.set_requires_grad(true);
            layer.bias.set_requires_grad(true);
            enc.layers.push_back(std::move(layer));
            c += st.growth;
        }
    }
    return enc;
}

Tensor encoder_forward(Graph& g, const Encoder& enc, const Tensor& images) {
    if (images.rank() != 4 || images.shape[3] != enc.in_channels)
        throw ShapeError("encoder_forward: need (B,H,W," + std::to_string(enc.in_channels) +
                         "), got " + shape_str(images.shape));
    const int64_t H = images.shape[1], W = images.shape[2];
    const int64_t div = int64_t(1) << enc.cfg.stages.size();
    if (H % div != 0 || W % div != 0)
        throw ShapeError("encoder_forward: spatial extents " + shape_str(images.shape) +
                         " not divisible by 2^" + std::to_string(enc.cfg.stages.size()));
    Tensor x = images;
    size_t li = 0;
    for (const auto& st : enc.cfg.stages) {
        for (int l = 0; l < st.num_layers; ++l, ++li) {
            const ConvLayer& cl = enc.layers[li];
            Tensor y = conv2d_same(g, x, cl.kernel);
            y = add_lastdim(g, y, cl.bias);
            y = g.relu(y);
            x = concat_lastdim(g, x, y);
        }
        x = avg_pool2x2(g, x);
    }
    return global_avg_pool(g, x);
}

}  // namespace ttml
