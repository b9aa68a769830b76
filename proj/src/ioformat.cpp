#include "dh/ioformat.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <unistd.h>

#include "dh/errors.hpp"

namespace dh::io {

namespace {

class Writer {
public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void reserve(std::size_t n) { bytes_.reserve(n); }
    Bytes take() { return std::move(bytes_); }

private:
    Bytes bytes_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::string_view format) : bytes_(bytes), format_(format) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }
    [[noreturn]] void fail_at(const std::string& what, std::size_t offset) const {
        throw FormatError(std::string(format_) + ": " + what, offset);
    }

    void expect_magic() {
        need(4, "magic");
        if (std::memcmp(bytes_.data(), format_.data(), 4) != 0) fail("bad magic, expected '" + std::string(format_) + "'");
        pos_ += 4;
        const std::size_t at = pos_;
        const std::uint32_t version = u32();
        if (version != kFormatVersion) fail_at("unsupported version " + std::to_string(version), at);
    }

    std::uint8_t u8() {
        need(1, "u8");
        return bytes_[pos_++];
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8, "u64");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f32() {
        const std::size_t at = pos_;
        const float v = std::bit_cast<float>(u32());
        if (!std::isfinite(v)) fail_at("non-finite value", at);
        return v;
    }
    double f64() {
        const std::size_t at = pos_;
        const double v = std::bit_cast<double>(u64());
        if (!std::isfinite(v)) fail_at("non-finite value", at);
        return v;
    }

    /// The payload must be exactly `payload` bytes from here on.
    void expect_payload(std::uint64_t payload) {
        if (payload != remaining()) {
            fail("header declares " + std::to_string(payload) + " payload bytes but " + std::to_string(remaining()) +
                 " are present");
        }
    }

    void finish() const {
        if (pos_ != bytes_.size()) fail("trailing bytes");
    }

private:
    void need(std::size_t n, const char* what) const {
        if (remaining() < n) fail(std::string("truncated while reading ") + what);
    }

    std::span<const std::uint8_t> bytes_;
    std::string_view format_;
    std::size_t pos_ = 0;
};

// Multiplies declared dimensions without wrapping; anything past 2^48 bytes is nonsense here.
std::uint64_t checked_product(Reader& r, std::initializer_list<std::uint64_t> factors) {
    constexpr std::uint64_t limit = std::uint64_t{1} << 48;
    std::uint64_t total = 1;
    for (auto f : factors) {
        if (f != 0 && total > limit / f) r.fail("declared dimensions overflow");
        total *= f;
    }
    return total;
}

std::uint32_t to_u32(std::size_t v, const char* what) {
    if (v > 0xFFFFFFFFu) throw InvalidArgument(std::string(what) + " does not fit the file format");
    return static_cast<std::uint32_t>(v);
}

void write_dense(Writer& w, const Dense& d) {
    for (double v : d.weight.values()) w.f32(v);
    for (double v : d.bias) w.f32(v);
}

Dense read_dense(Reader& r, std::size_t in, std::size_t out) {
    Dense d{Matrix(out, in), Vector(out)};
    for (double& v : d.weight.values()) v = r.f32();
    for (double& v : d.bias) v = r.f32();
    return d;
}

}  // namespace

std::vector<SourceTag> Collection::tags() const {
    std::vector<SourceTag> t(samples.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = samples[i].tag;
    return t;
}

Bytes encode_collection(std::span<const TaggedSample> samples, std::uint32_t class_count) {
    if (samples.empty()) throw InvalidArgument("collection: refusing to write an empty collection");
    const std::size_t dim = samples.front().features.size();
    if (dim == 0) throw InvalidArgument("collection: zero feature dimension");
    Writer w;
    w.reserve(kCollectionHeaderBytes + samples.size() * (dim * 4 + 5));
    w.magic("DHUC");
    w.u32(kFormatVersion);
    w.u32(to_u32(samples.size(), "sample count"));
    w.u32(to_u32(dim, "feature dimension"));
    w.u32(class_count);
    for (const auto& s : samples) {
        if (s.features.size() != dim) throw InvalidArgument("collection: samples have differing dimensions");
        if (s.label && (*s.label < 0 || static_cast<std::uint32_t>(*s.label) >= class_count)) {
            throw InvalidArgument("collection: label outside [0, K)");
        }
        for (double v : s.features) w.f32(v);
        w.i32(s.label ? *s.label : -1);
        w.u8(static_cast<std::uint8_t>(s.tag));
    }
    return w.take();
}

Collection decode_collection(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "DHUC");
    r.expect_magic();
    const std::size_t n_at = r.offset();
    const std::uint32_t n = r.u32();
    const std::uint32_t dim = r.u32();
    const std::uint32_t k = r.u32();
    if (n == 0) r.fail_at("empty collection", n_at);
    if (dim == 0) r.fail_at("zero feature dimension", n_at + 4);
    r.expect_payload(checked_product(r, {n, std::uint64_t{dim} * 4 + 5}));
    Collection c;
    c.class_count = k;
    c.samples.resize(n);
    for (auto& s : c.samples) {
        s.features.resize(dim);
        for (double& v : s.features) v = r.f32();
        const std::size_t label_at = r.offset();
        const std::int32_t label = r.i32();
        if (label < -1 || (label >= 0 && static_cast<std::uint32_t>(label) >= k)) r.fail_at("label outside [-1, K)", label_at);
        if (label >= 0) s.label = label;
        const std::size_t tag_at = r.offset();
        const std::uint8_t tag = r.u8();
        if (tag > 2 && tag != 255) r.fail_at("unknown source tag " + std::to_string(tag), tag_at);
        s.tag = static_cast<SourceTag>(tag);
    }
    r.finish();
    return c;
}

Bytes encode_cache(const TeacherCache& cache) {
    if (cache.size() == 0) throw InvalidArgument("cache: refusing to write an empty cache");
    Writer w;
    w.reserve(kCacheHeaderBytes + cache.size() * (cache.class_count() + cache.latent_dim()) * 4);
    w.magic("DHTC");
    w.u32(kFormatVersion);
    w.u32(to_u32(cache.size(), "cache size"));
    w.u32(to_u32(cache.class_count(), "class count"));
    w.u32(to_u32(cache.latent_dim(), "latent dimension"));
    for (std::size_t i = 0; i < cache.size(); ++i) {
        for (double v : cache.logits(i)) w.f32(v);
        for (double v : cache.latent(i)) w.f32(v);
    }
    return w.take();
}

TeacherCache decode_cache(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "DHTC");
    r.expect_magic();
    const std::size_t n_at = r.offset();
    const std::uint32_t n = r.u32();
    const std::uint32_t k = r.u32();
    const std::uint32_t p = r.u32();
    if (n == 0) r.fail_at("empty cache", n_at);
    if (k < 2) r.fail_at("class count must be >= 2", n_at + 4);
    if (p == 0) r.fail_at("zero latent dimension", n_at + 8);
    r.expect_payload(checked_product(r, {n, std::uint64_t{k} + p, 4}));
    TeacherCache cache(n, k, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : cache.logits(i)) v = r.f32();
        for (double& v : cache.latent(i)) v = r.f32();
    }
    r.finish();
    return cache;
}

Bytes encode_scores(const ScoreVector& scores) {
    if (scores.values.empty()) throw InvalidArgument("scores: refusing to write an empty score vector");
    Writer w;
    w.magic("DHSC");
    w.u32(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(scores.id));
    w.u32(to_u32(scores.values.size(), "score count"));
    for (double v : scores.values) w.f64(v);
    return w.take();
}

ScoreVector decode_scores(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "DHSC");
    r.expect_magic();
    const std::size_t id_at = r.offset();
    const std::uint8_t id = r.u8();
    if (id > 1) r.fail_at("unknown score id " + std::to_string(id), id_at);
    const std::size_t n_at = r.offset();
    const std::uint32_t n = r.u32();
    if (n == 0) r.fail_at("empty score vector", n_at);
    r.expect_payload(checked_product(r, {n, 8}));
    ScoreVector s{static_cast<ScoreId>(id), Vector(n)};
    for (double& v : s.values) v = r.f64();
    r.finish();
    return s;
}

Bytes encode_distribution(const SamplingPlan& plan) {
    if (plan.size() == 0) throw InvalidArgument("distribution: refusing to write an empty plan");
    Writer w;
    w.magic("DHQD");
    w.u32(kFormatVersion);
    w.u32(to_u32(plan.size(), "distribution size"));
    w.f64(plan.lambda());
    w.f64(plan.iqpr());
    for (double q : plan.probabilities()) w.f64(q);
    for (auto c : plan.draw_counts()) w.u64(c);
    return w.take();
}

SamplingPlan decode_distribution(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "DHQD");
    r.expect_magic();
    const std::size_t n_at = r.offset();
    const std::uint32_t n = r.u32();
    if (n == 0) r.fail_at("empty distribution", n_at);
    const double lambda = r.f64();
    const double iqpr = r.f64();
    r.expect_payload(checked_product(r, {n, 16}));
    const std::size_t q_at = r.offset();
    Vector q(n);
    for (double& v : q) v = r.f64();
    std::vector<std::uint64_t> counts(n);
    for (auto& c : counts) c = r.u64();
    r.finish();
    try {
        return SamplingPlan::from_probabilities(std::move(q), lambda, iqpr, std::move(counts));
    } catch (const InvalidArgument& e) {
        r.fail_at(std::string("invalid probabilities: ") + e.what(), q_at);
    }
}

Bytes encode_model(const NetworkParams& params) {
    params.validate();
    const auto widths = params.widths();
    Writer w;
    w.reserve(16 + 4 * widths.size() + 4 * params.parameter_count());
    w.magic("DHNM");
    w.u32(kFormatVersion);
    w.u32(to_u32(widths.size(), "layer count"));
    for (auto width : widths) w.u32(to_u32(width, "layer width"));
    w.u32(to_u32(params.class_count(), "class count"));
    for (const auto& layer : params.extractor) write_dense(w, layer);
    write_dense(w, params.head);
    return w.take();
}

NetworkParams decode_model(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "DHNM");
    r.expect_magic();
    const std::size_t l_at = r.offset();
    const std::uint32_t n_widths = r.u32();
    if (n_widths < 2) r.fail_at("need at least 2 layer widths", l_at);
    if (std::uint64_t{n_widths} * 4 > r.remaining()) r.fail_at("layer count exceeds file size", l_at);
    std::vector<std::size_t> widths(n_widths);
    for (auto& width : widths) {
        const std::size_t at = r.offset();
        width = r.u32();
        if (width == 0) r.fail_at("zero layer width", at);
    }
    const std::size_t k_at = r.offset();
    const std::uint32_t k = r.u32();
    if (k < 2) r.fail_at("class count must be >= 2", k_at);
    std::uint64_t count = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        count += checked_product(r, {widths[i] + 1, widths[i + 1]});
    }
    count += checked_product(r, {widths.back() + 1, k});
    r.expect_payload(checked_product(r, {count, 4}));
    NetworkParams p;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) p.extractor.push_back(read_dense(r, widths[i], widths[i + 1]));
    p.head = read_dense(r, widths.back(), k);
    r.finish();
    return p;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("error reading '" + path.string() + "'");
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("error writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

namespace {

template <class F>
auto with_path(const std::filesystem::path& path, F&& decode) {
    const Bytes bytes = read_file(path);
    try {
        return decode(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

}  // namespace

Collection read_collection(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_collection(b); });
}
void write_collection(const std::filesystem::path& path, std::span<const TaggedSample> samples,
                      std::uint32_t class_count) {
    write_file_atomic(path, encode_collection(samples, class_count));
}
TeacherCache read_cache(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_cache(b); });
}
void write_cache(const std::filesystem::path& path, const TeacherCache& cache) {
    write_file_atomic(path, encode_cache(cache));
}
ScoreVector read_scores(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_scores(b); });
}
void write_scores(const std::filesystem::path& path, const ScoreVector& scores) {
    write_file_atomic(path, encode_scores(scores));
}
SamplingPlan read_distribution(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_distribution(b); });
}
void write_distribution(const std::filesystem::path& path, const SamplingPlan& plan) {
    write_file_atomic(path, encode_distribution(plan));
}
NetworkParams read_model(const std::filesystem::path& path) {
    return with_path(path, [](const Bytes& b) { return decode_model(b); });
}
void write_model(const std::filesystem::path& path, const NetworkParams& params) {
    write_file_atomic(path, encode_model(params));
}

void check_model_collection(const NetworkParams& model, const Collection& collection) {
    if (model.input_dim() != collection.dim()) {
        throw CrossFileError("model expects " + std::to_string(model.input_dim()) +
                             " features but collection has " + std::to_string(collection.dim()));
    }
    if (collection.class_count != 0 && collection.class_count != model.class_count()) {
        throw CrossFileError("model has " + std::to_string(model.class_count()) + " classes but collection declares " +
                             std::to_string(collection.class_count));
    }
}

void check_cache_collection(const TeacherCache& cache, const Collection& collection) {
    check_sample_count("teacher cache", cache.size(), collection);
}

void check_cache_model(const TeacherCache& cache, const NetworkParams& model) {
    if (cache.class_count() != model.class_count() || cache.latent_dim() != model.latent_dim()) {
        throw CrossFileError("teacher cache (K=" + std::to_string(cache.class_count()) +
                             ", p=" + std::to_string(cache.latent_dim()) + ") does not match model (K=" +
                             std::to_string(model.class_count()) + ", p=" + std::to_string(model.latent_dim()) + ")");
    }
}

void check_sample_count(std::string_view what, std::size_t n, const Collection& collection) {
    if (n != collection.size()) {
        throw CrossFileError(std::string(what) + " has " + std::to_string(n) + " entries but collection has " +
                             std::to_string(collection.size()) + " samples");
    }
}

}  // namespace dh::io
