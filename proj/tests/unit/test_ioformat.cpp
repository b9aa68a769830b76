#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "dh/errors.hpp"
#include "dh/ioformat.hpp"

using namespace dh;
using namespace dh::io;

namespace {

Samples random_samples(Prng& rng, std::size_t n, std::size_t dim) {
    Samples s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i].features.resize(dim);
        for (double& v : s[i].features) v = static_cast<float>(rng.normal());
        if (i % 2 == 0) s[i].label = static_cast<int>(rng.index(3));
        s[i].tag = static_cast<SourceTag>(rng.index(3));
    }
    return s;
}

TeacherCache random_cache(Prng& rng, std::size_t n, std::size_t k, std::size_t p) {
    TeacherCache c(n, k, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : c.logits(i)) v = static_cast<float>(rng.normal());
        for (double& v : c.latent(i)) v = static_cast<float>(std::abs(rng.normal()));
    }
    return c;
}

NetworkParams random_model(Prng& rng) {
    auto p = init_params(std::vector<std::size_t>{5, 7, 4}, 3, rng);
    auto round = [](Dense& d) {
        for (double& w : d.weight.values()) w = static_cast<float>(w);
        for (double& b : d.bias) b = static_cast<float>(b + 0.1);
    };
    for (auto& l : p.extractor) round(l);
    round(p.head);
    return p;
}

SamplingPlan random_plan(Prng& rng, std::size_t n) {
    Vector s(n);
    for (double& v : s) v = rng.normal();
    auto plan = build_plan(ScoreVector{ScoreId::t1000, s}, 5.0);
    for (int i = 0; i < 50; ++i) plan.draw(rng);
    return plan;
}

void put_u32(Bytes& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

// Every decode of a damaged file either succeeds or throws FormatError.
void fuzz(const Bytes& good, const std::function<void(std::span<const std::uint8_t>)>& decode, std::uint64_t seed) {
    Prng rng(seed);
    for (std::size_t cut = 0; cut < good.size(); ++cut) {
        EXPECT_THROW(decode(std::span(good.data(), cut)), FormatError) << "truncated at " << cut;
    }
    for (int trial = 0; trial < 2000; ++trial) {
        Bytes bad = good;
        const int flips = 1 + static_cast<int>(rng.index(4));
        for (int f = 0; f < flips; ++f) bad[rng.index(bad.size())] ^= static_cast<std::uint8_t>(1u << rng.index(8));
        if (rng.index(4) == 0) bad.push_back(static_cast<std::uint8_t>(rng.index(256)));
        try {
            decode(bad);
        } catch (const FormatError& e) {
            EXPECT_LE(e.offset(), bad.size());
        } catch (const std::exception& e) {
            ADD_FAILURE() << "unstructured error: " << e.what();
        }
    }
}

}  // namespace

TEST(CollectionFile, RoundTripIsIdentity) {
    Prng rng(1);
    const auto s = random_samples(rng, 3, 4);
    const auto bytes = encode_collection(s, 3);
    const auto c = decode_collection(bytes);
    EXPECT_EQ(c.samples, s);
    EXPECT_EQ(c.class_count, 3u);
    EXPECT_EQ(encode_collection(c.samples, c.class_count), bytes);
    EXPECT_EQ(bytes.size(), kCollectionHeaderBytes + 3 * (4 * 4 + 5));
}

TEST(CollectionFile, BadMagicAtOffsetZero) {
    Prng rng(2);
    auto bytes = encode_collection(random_samples(rng, 2, 2), 3);
    std::memcpy(bytes.data(), "XXXX", 4);
    try {
        decode_collection(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
}

TEST(CollectionFile, EmptyCollectionRejected) {
    Prng rng(3);
    auto bytes = encode_collection(random_samples(rng, 1, 2), 3);
    put_u32(bytes, 8, 0);
    bytes.resize(kCollectionHeaderBytes);
    try {
        decode_collection(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 8u);
    }
    EXPECT_THROW(encode_collection(Samples{}, 3), InvalidArgument);
}

TEST(CollectionFile, HugeDeclaredSizeRejectedBeforeAllocation) {
    Prng rng(4);
    auto bytes = encode_collection(random_samples(rng, 1, 2), 3);
    put_u32(bytes, 8, 0xFFFFFFFFu);
    put_u32(bytes, 12, 0xFFFFFFFFu);
    EXPECT_THROW(decode_collection(bytes), FormatError);
}

TEST(CollectionFile, VersionMismatchNamesOffsetFour) {
    Prng rng(5);
    auto bytes = encode_collection(random_samples(rng, 1, 2), 3);
    put_u32(bytes, 4, 2);
    try {
        decode_collection(bytes);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
}

TEST(CollectionFile, Fuzz) {
    Prng rng(6);
    const auto good = encode_collection(random_samples(rng, 4, 3), 3);
    fuzz(good, [](auto b) { decode_collection(b); }, 60);
}

TEST(CacheFile, SizeArithmeticAndRoundTrip) {
    Prng rng(7);
    const auto c = random_cache(rng, 5, 3, 4);
    const auto bytes = encode_cache(c);
    EXPECT_EQ(bytes.size(), kCacheHeaderBytes + 5 * (3 + 4) * 4);
    EXPECT_EQ(decode_cache(bytes), c);
    fuzz(bytes, [](auto b) { decode_cache(b); }, 70);
}

TEST(ScoreFile, RoundTripAndFuzz) {
    Prng rng(8);
    ScoreVector s{ScoreId::one_c_sum, Vector{0.1, -2.5, 1e-300, 3.0}};
    const auto bytes = encode_scores(s);
    EXPECT_EQ(decode_scores(bytes), s);
    EXPECT_EQ(bytes.size(), 4u + 4 + 1 + 4 + 4 * 8);
    fuzz(bytes, [](auto b) { decode_scores(b); }, 80);
}

TEST(DistributionFile, RoundTripIsExact) {
    Prng rng(9);
    const auto plan = random_plan(rng, 20);
    const auto bytes = encode_distribution(plan);
    const auto back = decode_distribution(bytes);
    EXPECT_EQ(back.probabilities(), plan.probabilities());
    EXPECT_EQ(back.draw_counts(), plan.draw_counts());
    EXPECT_EQ(back.lambda(), plan.lambda());
    EXPECT_EQ(back.iqpr(), plan.iqpr());
    EXPECT_EQ(encode_distribution(back), bytes);
}

TEST(DistributionFile, ProbabilitiesSummingToPointNineRejected) {
    auto plan = SamplingPlan::from_probabilities(Vector{0.5, 0.5}, 0.0, 1.0);
    auto bytes = encode_distribution(plan);
    const double q = 0.4;
    std::uint64_t raw;
    std::memcpy(&raw, &q, 8);
    for (int i = 0; i < 8; ++i) bytes[28 + i] = static_cast<std::uint8_t>(raw >> (8 * i));
    try {
        decode_distribution(bytes);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 28u);
    }
}

TEST(DistributionFile, Fuzz) {
    Prng rng(10);
    fuzz(encode_distribution(random_plan(rng, 6)), [](auto b) { decode_distribution(b); }, 100);
}

TEST(ModelFile, RoundTripAndFuzz) {
    Prng rng(11);
    const auto m = random_model(rng);
    const auto bytes = encode_model(m);
    EXPECT_EQ(decode_model(bytes), m);
    EXPECT_EQ(encode_model(decode_model(bytes)), bytes);
    fuzz(bytes, [](auto b) { decode_model(b); }, 110);
}

TEST(ModelFile, WrongMagicForFormat) {
    Prng rng(12);
    const auto bytes = encode_cache(random_cache(rng, 2, 2, 2));
    EXPECT_THROW(decode_model(bytes), FormatError);
    EXPECT_THROW(decode_collection(bytes), FormatError);
}

TEST(Files, AtomicWriteThenReadWithPathInMessage) {
    const auto dir = std::filesystem::temp_directory_path() / "dh_io_test";
    std::filesystem::create_directories(dir);
    Prng rng(13);
    const auto s = random_samples(rng, 3, 2);
    write_collection(dir / "c.dhuc", s, 3);
    EXPECT_EQ(read_collection(dir / "c.dhuc").samples, s);
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        EXPECT_EQ(entry.path().filename(), "c.dhuc") << "temp file left behind";
    Bytes junk{'D', 'H', 'U', 'C', 1};
    write_file_atomic(dir / "bad.dhuc", junk);
    try {
        read_collection(dir / "bad.dhuc");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.dhuc"), std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST(CrossFile, ShapeMismatchesDetected) {
    Prng rng(14);
    Collection coll{random_samples(rng, 5, 5), 3};
    const auto model = random_model(rng);
    EXPECT_NO_THROW(check_model_collection(model, coll));
    Collection narrow{random_samples(rng, 5, 4), 3};
    EXPECT_THROW(check_model_collection(model, narrow), CrossFileError);
    EXPECT_THROW(check_cache_collection(random_cache(rng, 4, 3, 4), coll), CrossFileError);
    EXPECT_NO_THROW(check_cache_model(random_cache(rng, 5, 3, 4), model));
    EXPECT_THROW(check_cache_model(random_cache(rng, 5, 3, 6), model), CrossFileError);
    EXPECT_THROW(check_sample_count("score file", 6, coll), CrossFileError);
    EXPECT_NO_THROW(check_sample_count("score file", 5, coll));
}
