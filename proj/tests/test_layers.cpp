#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ttml/layers.hpp"

using namespace ttml;

namespace {

// Quadruple-loop materialization oracle, independent of tt_materialize.
Tensor materialize_oracle(const TTDenseLayer& layer) {
    const auto& s = layer.spec;
    Tensor w = zeros({s.in_dim(), s.out_dim()});
    for (int64_t a = 0; a < s.in_a; ++a)
        for (int64_t b = 0; b < s.in_b; ++b)
            for (int64_t c = 0; c < s.out_c; ++c)
                for (int64_t d = 0; d < s.out_d; ++d) {
                    double acc = 0;
                    for (int64_t r = 0; r < s.bond; ++r)
                        acc += double(layer.core1.at((a * s.out_c + c) * s.bond + r)) *
                               double(layer.core2.at((b * s.out_d + d) * s.bond + r));
                    (*w.data)[size_t((a * s.in_b + b) * s.out_dim() + c * s.out_d + d)] =
                        float(acc);
                }
    return w;
}

// Singular values via one-sided Jacobi rotations (double precision).
std::vector<double> singular_values(const Tensor& m) {
    const int64_t rows = m.shape[0], cols = m.shape[1];
    std::vector<std::vector<double>> a(static_cast<size_t>(rows),
                                       std::vector<double>(static_cast<size_t>(cols)));
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) a[size_t(i)][size_t(j)] = m.at(i * cols + j);
    // rotate pairs of rows of A (A = U S V^T acting on the row space)
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0;
        for (int64_t p = 0; p < rows; ++p)
            for (int64_t q = p + 1; q < rows; ++q) {
                double app = 0, aqq = 0, apq = 0;
                for (int64_t k = 0; k < cols; ++k) {
                    app += a[size_t(p)][size_t(k)] * a[size_t(p)][size_t(k)];
                    aqq += a[size_t(q)][size_t(k)] * a[size_t(q)][size_t(k)];
                    apq += a[size_t(p)][size_t(k)] * a[size_t(q)][size_t(k)];
                }
                off += apq * apq;
                if (std::abs(apq) < 1e-300) continue;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                for (int64_t k = 0; k < cols; ++k) {
                    const double vp = a[size_t(p)][size_t(k)], vq = a[size_t(q)][size_t(k)];
                    a[size_t(p)][size_t(k)] = c * vp - s * vq;
                    a[size_t(q)][size_t(k)] = s * vp + c * vq;
                }
            }
        if (off < 1e-24) break;
    }
    std::vector<double> sv;
    for (int64_t p = 0; p < rows; ++p) {
        double norm = 0;
        for (int64_t k = 0; k < cols; ++k)
            norm += a[size_t(p)][size_t(k)] * a[size_t(p)][size_t(k)];
        sv.push_back(std::sqrt(norm));
    }
    std::sort(sv.rbegin(), sv.rend());
    return sv;
}

}  // namespace

TEST_CASE("tt_init is deterministic and sized by the spec") {
    const TTDenseSpec spec{2, 4, 2, 3, 2};
    TTDenseLayer l1 = tt_init(spec, 42);
    TTDenseLayer l2 = tt_init(spec, 42);
    CHECK(l1.core1.shape == Shape{2, 2, 2});
    CHECK(l1.core2.shape == Shape{4, 3, 2});
    CHECK(tt_weight_params(spec) == 32);
    CHECK(l1.core1.size() + l1.core2.size() == 32);
    CHECK(*l1.core1.data == *l2.core1.data);  // bitwise
    CHECK(*l1.core2.data == *l2.core2.data);
    for (float v : *l1.bias.data) CHECK(v == 0.0f);

    TTDenseLayer l3 = tt_init(spec, 43);
    CHECK(*l1.core1.data != *l3.core1.data);
}

TEST_CASE("rank-1 all-ones cores materialize to the all-ones matrix") {
    TTDenseLayer layer;
    layer.spec = {2, 2, 2, 2, 1};
    layer.core1 = full({2, 2, 1}, 1.0f);
    layer.core2 = full({2, 2, 1}, 1.0f);
    layer.bias = zeros({4});
    Tensor w = tt_materialize(layer);
    REQUIRE(w.shape == Shape{4, 4});
    for (int64_t i = 0; i < w.size(); ++i) CHECK(w.at(i) == 1.0f);

    Graph g;
    Tensor y = tt_forward(g, layer, full({1, 4}, 1.0f));
    REQUIRE(y.shape == Shape{1, 4});
    for (int64_t i = 0; i < 4; ++i) CHECK(y.at(i) == doctest::Approx(4.0f));
}

TEST_CASE("tt_materialize matches the quadruple-loop oracle") {
    TTDenseLayer layer = tt_init({2, 4, 2, 3, 2}, 7);
    Tensor got = tt_materialize(layer);
    Tensor want = materialize_oracle(layer);
    REQUIRE(got.shape == Shape{8, 6});
    for (int64_t i = 0; i < got.size(); ++i)
        CHECK(got.at(i) == doctest::Approx(want.at(i)).epsilon(1e-6));
}

TEST_CASE("tt_forward equals dense forward through the materialized matrix") {
    Rng rng(2025);
    const TTDenseSpec specs[] = {
        {2, 2, 2, 2, 1}, {2, 4, 2, 3, 2}, {4, 4, 8, 8, 3}, {8, 8, 4, 16, 5}, {3, 5, 2, 7, 4},
    };
    for (const auto& spec : specs) {
        TTDenseLayer layer = tt_init(spec, rng.next());
        for (auto& v : *layer.bias.data) v = rng.uniformf(-0.5f, 0.5f);
        Tensor x = oracle::random_tensor({3, spec.in_dim()}, rng, -1.0f, 1.0f);

        Graph g;
        Tensor fast = tt_forward(g, layer, x);

        DenseLayer dense;
        dense.weight = tt_materialize(layer);
        dense.bias = layer.bias;
        Tensor slow = dense_forward(g, dense, x);

        REQUIRE(fast.shape == slow.shape);
        for (int64_t i = 0; i < fast.size(); ++i)
            CHECK(fast.at(i) == doctest::Approx(slow.at(i))
                                    .epsilon(1e-5)
                                    .scale(std::abs(slow.at(i)) + 1e-4));
    }
}

TEST_CASE("zero input returns the bias") {
    TTDenseLayer layer = tt_init({2, 2, 2, 2, 2}, 5);
    Rng rng(6);
    for (auto& v : *layer.bias.data) v = rng.uniformf(-1, 1);
    Graph g;
    Tensor y = tt_forward(g, layer, zeros({2, 4}));
    for (int64_t row = 0; row < 2; ++row)
        for (int64_t j = 0; j < 4; ++j) CHECK(y.at(row * 4 + j) == layer.bias.at(j));
}

TEST_CASE("tt_forward rejects mismatched inputs") {
    TTDenseLayer layer = tt_init({2, 2, 2, 2, 2}, 5);
    Graph g;
    CHECK_THROWS_AS(tt_forward(g, layer, zeros({2, 5})), ShapeError);
}

TEST_CASE("dense layer basics") {
    Graph g;
    DenseLayer ident;
    ident.weight = from_vec({2, 2}, {1, 0, 0, 1});
    ident.bias = zeros({2});
    Tensor x = from_vec({2, 2}, {3, -1, 0.5f, 2});
    Tensor y = dense_forward(g, ident, x);
    for (int64_t i = 0; i < 4; ++i) CHECK(y.at(i) == x.at(i));

    DenseLayer zero;
    zero.weight = zeros({2, 3});
    zero.bias = from_vec({3}, {5, 6, 7});
    Tensor yz = dense_forward(g, zero, x);
    for (int64_t row = 0; row < 2; ++row)
        for (int64_t j = 0; j < 3; ++j) CHECK(yz.at(row * 3 + j) == zero.bias.at(j));

    DenseLayer small;
    small.weight = from_vec({2, 2}, {1, 2, 3, 4});
    small.bias = zeros({2});
    Tensor h = dense_forward(g, small, from_vec({1, 2}, {1, 1}));
    CHECK(h.at(0) == 4.0f);  // 1*1 + 1*3
    CHECK(h.at(1) == 6.0f);  // 1*2 + 1*4
}

TEST_CASE("materialized matrix rearranged by (a,c)x(b,d) has numerical rank <= bond") {
    Rng rng(99);
    for (int64_t bond : {1, 2}) {
        TTDenseLayer layer = tt_init({2, 4, 2, 3, bond}, rng.next());
        Tensor w = tt_materialize(layer);
        const auto& s = layer.spec;
        Tensor re = zeros({s.in_a * s.out_c, s.in_b * s.out_d});
        for (int64_t a = 0; a < s.in_a; ++a)
            for (int64_t b = 0; b < s.in_b; ++b)
                for (int64_t c = 0; c < s.out_c; ++c)
                    for (int64_t d = 0; d < s.out_d; ++d)
                        (*re.data)[size_t((a * s.out_c + c) * (s.in_b * s.out_d) +
                                          b * s.out_d + d)] =
                            w.at((a * s.in_b + b) * s.out_dim() + c * s.out_d + d);
        const auto sv = singular_values(re);
        int numerical_rank = 0;
        for (double v : sv)
            if (v > 1e-4 * sv[0]) ++numerical_rank;
        CHECK(numerical_rank <= bond);
        CHECK(numerical_rank >= 1);
    }
}

TEST_CASE("tt core gradients match finite differences on spec (2,2,2,2,2)") {
    Rng rng(303);
    TTDenseLayer layer = tt_init({2, 2, 2, 2, 2}, rng.next());
    // positive fixed operands keep the Jacobian entries away from zero
    layer.core1 = oracle::random_tensor({2, 2, 2}, rng, 0.3f, 1.0f);
    layer.core2 = oracle::random_tensor({2, 2, 2}, rng, 0.3f, 1.0f);
    layer.core1.set_requires_grad(true);
    layer.core2.set_requires_grad(true);
    Tensor x = oracle::random_tensor({2, 4}, rng, 0.3f, 1.0f);

    auto with_core1 = [&](Graph& g, const Tensor& probe) {
        TTDenseLayer l = layer;
        l.core1 = probe;
        return tt_forward(g, l, x);
    };
    auto with_core2 = [&](Graph& g, const Tensor& probe) {
        TTDenseLayer l = layer;
        l.core2 = probe;
        return tt_forward(g, l, x);
    };
    CHECK(oracle::jacobian_mismatches(with_core1,
                                      oracle::random_tensor_floored({2, 2, 2}, rng, 0.3f, 1.0f)) ==
          0);
    CHECK(oracle::jacobian_mismatches(with_core2,
                                      oracle::random_tensor_floored({2, 2, 2}, rng, 0.3f, 1.0f)) ==
          0);
}

TEST_CASE("tt_forward performs exactly abcr + bcdr multiply-adds per sample") {
    const TTDenseSpec spec{4, 8, 2, 13, 3};
    TTDenseLayer layer = tt_init(spec, 1);
    const int64_t batch = 5;
    Tensor x = zeros({batch, spec.in_dim()});
    Graph g(false);
    reset_mac_count();
    tt_forward(g, layer, x);
    const int64_t per_sample = spec.in_a * spec.in_b * spec.out_c * spec.bond +
                               spec.in_b * spec.out_c * spec.out_d * spec.bond;
    CHECK(mac_count() == uint64_t(batch * per_sample));

    DenseLayer dense = dense_init(spec.in_dim(), spec.out_dim(), 2);
    reset_mac_count();
    dense_forward(g, dense, x);
    CHECK(mac_count() == uint64_t(batch * spec.in_dim() * spec.out_dim()));
    reset_mac_count();
}

TEST_CASE("2x2 average pooling of [[1,2],[3,4]] is 2.5") {
    Graph g;
    Tensor x = from_vec({1, 2, 2, 1}, {1, 2, 3, 4});
    Tensor p = avg_pool2x2(g, x);
    REQUIRE(p.shape == Shape{1, 1, 1, 1});
    CHECK(p.at(0) == doctest::Approx(2.5f));
    CHECK_THROWS_AS(avg_pool2x2(g, zeros({1, 3, 2, 1})), ShapeError);
}

TEST_CASE("identity-like 1x1 passthrough reproduces channel means after global pool") {
    EncoderConfig cfg;
    cfg.stages = {{1, 3}};
    cfg.kernel = 1;
    Encoder enc = encoder_init(cfg, 3, 11);
    // identity kernel, zero bias: conv output == input, concat doubles channels
    std::fill(enc.layers[0].kernel.data->begin(), enc.layers[0].kernel.data->end(), 0.0f);
    for (int c = 0; c < 3; ++c) (*enc.layers[0].kernel.data)[size_t(c * 3 + c)] = 1.0f;
    std::fill(enc.layers[0].bias.data->begin(), enc.layers[0].bias.data->end(), 0.0f);

    Rng rng(17);
    Tensor img = oracle::random_tensor({1, 4, 4, 3}, rng, 0.0f, 1.0f);
    Graph g;
    Tensor feat = encoder_forward(g, enc, img);
    REQUIRE(feat.shape == Shape{1, 6});

    for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (int p = 0; p < 16; ++p) mean += img.at(p * 3 + c);
        mean /= 16.0;
        CHECK(feat.at(c) == doctest::Approx(mean).epsilon(1e-5));      // original channels
        CHECK(feat.at(3 + c) == doctest::Approx(mean).epsilon(1e-5));  // passthrough copy
    }
}

TEST_CASE("constant image gives a constant feature vector") {
    EncoderConfig cfg;
    cfg.stages = {{2, 4}};
    cfg.kernel = 3;
    Encoder enc = encoder_init(cfg, 3, 5);
    Graph g;
    Tensor feat1 = encoder_forward(g, enc, full({1, 8, 8, 3}, 0.25f));
    Tensor feat2 = encoder_forward(g, enc, full({1, 8, 8, 3}, 0.25f));
    REQUIRE(feat1.shape == Shape{1, 11});
    for (int64_t i = 0; i < feat1.size(); ++i) CHECK(feat1.at(i) == feat2.at(i));
}

TEST_CASE("encoder rejects non-divisible spatial extents") {
    EncoderConfig cfg;
    cfg.stages = {{1, 2}, {1, 2}};
    Encoder enc = encoder_init(cfg, 3, 5);
    Graph g;
    CHECK_THROWS_AS(encoder_forward(g, enc, zeros({1, 6, 8, 3})), ShapeError);
    CHECK(encoder_forward(g, enc, zeros({1, 8, 8, 3})).shape == Shape{1, 7});
}

TEST_CASE("conv2d and concat gradients match finite differences") {
    Rng rng(404);
    Tensor img = oracle::random_tensor_floored({1, 3, 3, 2}, rng, 0.3f, 1.0f);
    Tensor kernel = oracle::random_tensor_floored({3, 3, 2, 2}, rng, 0.3f, 0.8f);

    auto conv_wrt_img = [&](Graph& g, const Tensor& p) { return conv2d_same(g, p, kernel); };
    auto conv_wrt_kernel = [&](Graph& g, const Tensor& p) { return conv2d_same(g, img, p); };
    CHECK(oracle::jacobian_mismatches(conv_wrt_img, img.clone()) == 0);
    CHECK(oracle::jacobian_mismatches(conv_wrt_kernel, kernel.clone()) == 0);

    Tensor other = oracle::random_tensor_floored({2, 3}, rng);
    auto cat = [&](Graph& g, const Tensor& p) { return concat_lastdim(g, p, other); };
    CHECK(oracle::jacobian_mismatches(cat, oracle::random_tensor_floored({2, 2}, rng)) == 0);

    Tensor vec = oracle::random_tensor_floored({3}, rng);
    auto bias_add = [&](Graph& g, const Tensor& p) { return add_lastdim(g, p, vec); };
    CHECK(oracle::jacobian_mismatches(bias_add, oracle::random_tensor_floored({2, 3}, rng)) ==
          0);
    auto bias_wrt_vec = [&](Graph& g, const Tensor& p) {
        return add_lastdim(g, other, p);
    };
    CHECK(oracle::jacobian_mismatches(bias_wrt_vec, vec.clone()) == 0);
}
