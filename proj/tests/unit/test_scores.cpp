#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dh/errors.hpp"
#include "dh/models.hpp"
#include "dh/scores.hpp"

using namespace dh;

namespace {

TeacherCache random_cache(Prng& rng, std::size_t n, std::size_t k, std::size_t p) {
    TeacherCache c(n, k, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : c.logits(i)) v = 3.0 * rng.normal();
        for (double& v : c.latent(i)) v = std::abs(rng.normal());
    }
    return c;
}

Dense random_head(Prng& rng, std::size_t k, std::size_t p) {
    Dense d{Matrix(k, p), Vector(k, 0.0)};
    for (double& w : d.weight.values()) w = rng.normal();
    return d;
}

}  // namespace

TEST(T1000, Examples) {
    EXPECT_DOUBLE_EQ(t1000(Vector{0.0, 0.0}), 0.5);
    const double e = std::exp(0.01);
    EXPECT_NEAR(t1000(Vector{10.0, 0.0}), e / (e + 1.0), 1e-15);
    EXPECT_NEAR(t1000(Vector{10.0, 0.0}), 0.502500, 1e-6);
    EXPECT_THROW(t1000(Vector{INFINITY, 0.0}), InvalidArgument);
}

TEST(T1000, TranslationInvariantAndMonotoneInMargin) {
    Prng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const double a = 20.0 * rng.normal(), b = 20.0 * rng.normal(), c = 50.0 * rng.normal();
        EXPECT_NEAR(t1000(Vector{a, b}), t1000(Vector{a + c, b + c}), 1e-12);
        const double m1 = std::abs(a - b), m2 = m1 + 0.5 + 10.0 * rng.uniform();
        EXPECT_LT(t1000(Vector{m1, 0.0}), t1000(Vector{0.0, m2}));
    }
}

TEST(OneCSum, IdenticalSamplesScoreZero) {
    TeacherCache c(2, 2, 3);
    for (std::size_t i = 0; i < 2; ++i) {
        c.logits(i)[0] = 1.0;
        c.logits(i)[1] = -1.0;
        for (double& v : c.latent(i)) v = 0.5;
    }
    Prng rng(2);
    auto s = score_one_c_sum(c, random_head(rng, 2, 3));
    EXPECT_EQ(s.values, (Vector{0.0, 0.0}));
    EXPECT_EQ(s.id, ScoreId::one_c_sum);
}

TEST(OneCSum, DominantSampleScoresHighest) {
    // Sample 0 has the most confident logits and a latent aligned with the winning row.
    TeacherCache c(4, 2, 2);
    const double logits[4][2] = {{9.0, -9.0}, {1.0, 0.5}, {0.2, 0.0}, {-0.5, 0.6}};
    const double latents[4][2] = {{1.0, 0.0}, {0.7, 0.7}, {0.2, 0.9}, {0.9, 0.1}};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            c.logits(i)[j] = logits[i][j];
            c.latent(i)[j] = latents[i][j];
        }
    Dense head{Matrix(2, 2, std::vector<double>{1, 0, 0, 1}), Vector{0.0, 0.0}};
    const auto comp = one_c_sum_components(c, head);
    for (std::size_t i = 1; i < 4; ++i) {
        ASSERT_GT(comp.t1000[0], comp.t1000[i]);
        ASSERT_GT(comp.neg_entropy[0], comp.neg_entropy[i]);
        ASSERT_GT(comp.head_cosine[0], comp.head_cosine[i]);
    }
    const auto s = score_one_c_sum(c, head);
    EXPECT_EQ(argmax(s.values), 0u);
}

TEST(OneCSum, ZeroLatentHasZeroCosine) {
    TeacherCache c(2, 2, 2);
    c.logits(0)[0] = 1.0;
    c.latent(1)[0] = 1.0;
    Dense head{Matrix(2, 2, std::vector<double>{1, 0, 0, 1}), Vector{0.0, 0.0}};
    const auto comp = one_c_sum_components(c, head);
    EXPECT_EQ(comp.head_cosine[0], 0.0);
    EXPECT_EQ(comp.head_cosine[1], 1.0);
}

TEST(OneCSum, InvariantToPositiveAffineRescalingOfAComponent) {
    Prng rng(3);
    auto cache = random_cache(rng, 200, 3, 5);
    auto head = random_head(rng, 3, 5);
    const auto comp = one_c_sum_components(cache, head);
    const std::vector<Vector> base{comp.t1000, comp.neg_entropy, comp.head_cosine};
    const auto reference = sum_of_standardized(base);
    for (std::size_t which = 0; which < 3; ++which) {
        auto modified = base;
        const double a = 0.01 + 50.0 * rng.uniform(), b = 100.0 * rng.normal();
        for (double& v : modified[which]) v = a * v + b;
        const auto got = sum_of_standardized(modified);
        for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], reference[i], 1e-9);
    }
}

TEST(OneCSum, StandardizedSumHasZeroMean) {
    Prng rng(4);
    auto cache = random_cache(rng, 100, 4, 3);
    const auto s = score_one_c_sum(cache, random_head(rng, 4, 3));
    EXPECT_NEAR(mean(s.values), 0.0, 1e-12);
}

TEST(OneCSum, NeedsTwoSamples) {
    Prng rng(5);
    auto cache = random_cache(rng, 1, 2, 2);
    EXPECT_THROW(score_one_c_sum(cache, random_head(rng, 2, 2)), InvalidArgument);
    auto cache2 = random_cache(rng, 3, 2, 2);
    EXPECT_THROW(score_one_c_sum(cache2, random_head(rng, 2, 3)), InvalidArgument);
}

TEST(Cache, SingleSampleMatchesForward) {
    Prng rng(6);
    auto net = init_params(std::vector<std::size_t>{3, 6, 4}, 2, rng);
    Samples s{{Vector{0.3, -1.0, 2.0}, std::nullopt, SourceTag::unknown}};
    const auto cache = build_cache(net, s);
    const auto rec = forward(net, s[0].features);
    ASSERT_EQ(cache.size(), 1u);
    EXPECT_EQ(Vector(cache.logits(0).begin(), cache.logits(0).end()), rec.logits);
    EXPECT_EQ(Vector(cache.latent(0).begin(), cache.latent(0).end()), rec.latent());
    Samples bad{{Vector{0.3, -1.0}, std::nullopt, SourceTag::unknown}};
    EXPECT_THROW(build_cache(net, bad), InvalidArgument);
}

TEST(ScoreNames, ParseAndPrint) {
    EXPECT_EQ(parse_score_id("t1000"), ScoreId::t1000);
    EXPECT_EQ(parse_score_id("1c-sum"), ScoreId::one_c_sum);
    EXPECT_EQ(score_name(ScoreId::one_c_sum), "1c-sum");
    EXPECT_THROW(parse_score_id("odin"), InvalidArgument);
}
