#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ttml/contrastive.hpp"

using namespace ttml;

namespace {

AugmentConfig identity_cfg(int h, int w) {
    AugmentConfig cfg;
    cfg.crop_scale_min = cfg.crop_scale_max = 1.0f;
    cfg.out_h = h;
    cfg.out_w = w;
    cfg.brightness = cfg.contrast = cfg.saturation = 0.0f;
    cfg.flip_prob = 0.0f;
    return cfg;
}

}  // namespace

TEST_CASE("augment with no-op settings is the identity") {
    Rng data_rng(1);
    Tensor img = oracle::random_tensor({6, 8, 3}, data_rng, 0.0f, 1.0f);
    Rng draw = Rng::stream(9, 0, 0);
    Tensor out = augment(img, identity_cfg(6, 8), draw);
    REQUIRE(out.shape == img.shape);
    for (int64_t i = 0; i < img.size(); ++i) CHECK(out.at(i) == img.at(i));  // bitwise
}

TEST_CASE("augment is deterministic for identical rng state") {
    Rng data_rng(2);
    Tensor img = oracle::random_tensor({16, 16, 3}, data_rng, 0.0f, 1.0f);
    AugmentConfig cfg;
    cfg.out_h = cfg.out_w = 8;
    Rng d1 = Rng::stream(7, 3, 5);
    Rng d2 = Rng::stream(7, 3, 5);
    Tensor a = augment(img, cfg, d1);
    Tensor b = augment(img, cfg, d2);
    CHECK(*a.data == *b.data);

    Rng d3 = Rng::stream(7, 3, 6);
    Tensor c = augment(img, cfg, d3);
    CHECK(*a.data != *c.data);
}

TEST_CASE("brightness shifts a constant image additively") {
    AugmentConfig cfg = identity_cfg(4, 4);
    cfg.brightness = 0.2f;

    Rng d1 = Rng::stream(21, 0, 0);
    Tensor out1 = augment(full({4, 4, 3}, 0.5f), cfg, d1);
    for (int64_t i = 1; i < out1.size(); ++i) CHECK(out1.at(i) == out1.at(0));
    const float delta = out1.at(0) - 0.5f;
    CHECK(std::abs(delta) <= 0.2f);

    // same stream on a different base: the same delta is applied
    Rng d2 = Rng::stream(21, 0, 0);
    Tensor out2 = augment(full({4, 4, 3}, 0.3f), cfg, d2);
    CHECK(out2.at(0) == doctest::Approx(0.3f + delta).epsilon(1e-6));
}

TEST_CASE("contrast rescales about the per-image mean") {
    AugmentConfig cfg = identity_cfg(1, 2);
    cfg.contrast = 0.5f;
    std::vector<float> px = {0.4f, 0.4f, 0.4f, 0.6f, 0.6f, 0.6f};  // mean 0.5
    Rng draw = Rng::stream(33, 1, 1);
    Tensor out = augment(from_vec({1, 2, 3}, px), cfg, draw);
    const double mean = (out.at(0) + out.at(3)) / 2.0;
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-5));  // mean preserved
    const double factor = (out.at(3) - out.at(0)) / 0.2;
    CHECK(factor >= 0.5);
    CHECK(factor <= 1.5);
}

TEST_CASE("saturation leaves gray pixels untouched") {
    AugmentConfig cfg = identity_cfg(2, 2);
    cfg.saturation = 1.0f;
    Rng draw = Rng::stream(5, 0, 1);
    Tensor out = augment(full({2, 2, 3}, 0.42f), cfg, draw);
    for (int64_t i = 0; i < out.size(); ++i)
        CHECK(out.at(i) == doctest::Approx(0.42f).epsilon(1e-6));
}

TEST_CASE("augment validates its inputs") {
    Rng draw(1);
    AugmentConfig bad = identity_cfg(2, 2);
    bad.crop_scale_min = 0.0f;
    CHECK_THROWS_AS(augment(zeros({2, 2, 3}), bad, draw), UsageError);
    CHECK_THROWS_AS(augment(full({2, 2, 3}, 1.5f), identity_cfg(2, 2), draw), DomainError);
}

TEST_CASE("cosine similarity endpoints") {
    Tensor u = from_vec({3}, {1, 2, 3});
    CHECK(cosine_similarity(u, u) == doctest::Approx(1.0));
    Tensor v = from_vec({3}, {-1, -2, -3});
    CHECK(cosine_similarity(u, v) == doctest::Approx(-1.0));
    Tensor w = from_vec({3}, {0, 3, -2});  // orthogonal to u
    CHECK(cosine_similarity(u, w) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK_THROWS_AS(cosine_similarity(u, zeros({3})), DomainError);
}

TEST_CASE("nt_xent is zero for a single positive pair") {
    Graph g;
    Rng rng(44);
    Tensor z = oracle::random_tensor({2, 5}, rng, -1.0f, 1.0f);
    CHECK(std::abs(nt_xent(g, z, 0.5).item()) < 1e-6);
}

TEST_CASE("nt_xent N=2 axis-aligned case evaluates to log((e+2)/e)") {
    Graph g;
    Tensor z = from_vec({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    const double want = std::log((std::exp(1.0) + 2.0) / std::exp(1.0));  // 0.55144...
    CHECK(nt_xent(g, z, 1.0).item() == doctest::Approx(want).epsilon(1e-5));
    CHECK(want == doctest::Approx(0.5514).epsilon(1e-3));
}

TEST_CASE("nt_xent matches the brute-force oracle for N <= 4") {
    Rng rng(1234);
    for (int n = 1; n <= 4; ++n) {
        for (int trial = 0; trial < 20; ++trial) {
            Tensor z = oracle::random_tensor({2 * n, 6}, rng, -1.5f, 1.5f);
            Graph g;
            const double got = nt_xent(g, z, 0.5).item();
            const double want = oracle::nt_xent(z, 0.5);
            CHECK(got == doctest::Approx(want).epsilon(1e-5));
        }
    }
}

TEST_CASE("nt_xent is invariant under per-vector positive rescaling") {
    Rng rng(77);
    Tensor z = oracle::random_tensor({6, 4}, rng, -1.0f, 1.0f);
    Tensor scaled = z.clone();
    for (int64_t i = 0; i < 6; ++i) {
        const float f = rng.uniformf(0.1f, 10.0f);
        for (int64_t d = 0; d < 4; ++d) (*scaled.data)[size_t(i * 4 + d)] *= f;
    }
    Graph g;
    CHECK(nt_xent(g, scaled, 0.5).item() ==
          doctest::Approx(nt_xent(g, z, 0.5).item()).epsilon(1e-4));

    Tensor tens = z.clone();
    for (auto& v : *tens.data) v *= 10.0f;
    CHECK(nt_xent(g, tens, 0.5).item() ==
          doctest::Approx(nt_xent(g, z, 0.5).item()).epsilon(1e-5));
}

TEST_CASE("nt_xent is invariant under pair-preserving permutation of images") {
    Rng rng(78);
    Tensor z = oracle::random_tensor({8, 4}, rng, -1.0f, 1.0f);
    const int perm[4] = {2, 0, 3, 1};
    Tensor shuffled = zeros({8, 4});
    for (int k = 0; k < 4; ++k)
        for (int v = 0; v < 2; ++v)
            for (int64_t d = 0; d < 4; ++d)
                (*shuffled.data)[size_t((2 * perm[k] + v) * 4 + d)] = z.at((2 * k + v) * 4 + d);
    Graph g;
    CHECK(nt_xent(g, shuffled, 0.7).item() ==
          doctest::Approx(nt_xent(g, z, 0.7).item()).epsilon(1e-5));
}

TEST_CASE("nt_xent gradient matches finite differences at N=2, dim=3") {
    Rng rng(555);
    Tensor z = oracle::random_tensor_floored({4, 3}, rng, 0.4f, 1.2f);
    auto loss = [](Graph& g, const Tensor& p) { return nt_xent(g, p, 0.5); };
    CHECK(oracle::jacobian_mismatches(loss, z, 1e-3, 1e-5) == 0);
}

TEST_CASE("nt_xent rejects bad batches and survives a degenerate row") {
    Graph g;
    CHECK_THROWS_AS(nt_xent(g, zeros({3, 4}), 0.5), ShapeError);  // odd row count
    CHECK_THROWS_AS(nt_xent(g, full({4, 4}, 0.5f), 0.0), DomainError);
    CHECK_THROWS_AS(nt_xent(g, full({4, 4}, 0.5f), -1.0), DomainError);
    // an all-zero view degrades to flat similarities via the norm floor
    Tensor with_zero_row = full({4, 3}, 1.0f);
    for (int64_t d = 0; d < 3; ++d) (*with_zero_row.data)[size_t(3 + d)] = 0.0f;
    const float loss = nt_xent(g, with_zero_row, 0.5).item();
    CHECK(std::isfinite(loss));
}

TEST_CASE("ContrastiveBatch wrapper forwards to the same loss") {
    Rng rng(81);
    Tensor z = oracle::random_tensor({4, 3}, rng, -1.0f, 1.0f);
    Graph g;
    ContrastiveBatch batch{z, 0.6};
    CHECK(nt_xent(g, batch).item() == nt_xent(g, z, 0.6).item());
}
