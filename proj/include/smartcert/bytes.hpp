#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace smartcert {

using Bytes = std::vector<uint8_t>;

/// Thrown when structured input runs short or carries impossible lengths.
/// Callers that must not propagate (wire-facing decoders) catch this and
/// degrade to an explicit decode-error result.
class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

template <size_t N>
struct FixedBytes {
    std::array<uint8_t, N> b{};

    auto operator<=>(const FixedBytes&) const = default;

    const uint8_t* data() const { return b.data(); }
    uint8_t* data() { return b.data(); }
    uint8_t operator[](size_t i) const { return b[i]; }
    uint8_t& operator[](size_t i) { return b[i]; }
    static constexpr size_t size() { return N; }

    bool isZero() const {
        return std::all_of(b.begin(), b.end(), [](uint8_t x) { return x == 0; });
    }

    std::string hex() const {
        static const char* d = "0123456789abcdef";
        std::string s;
        s.reserve(2 * N);
        for (uint8_t x : b) {
            s.push_back(d[x >> 4]);
            s.push_back(d[x & 0xf]);
        }
        return s;
    }

    static std::optional<FixedBytes> fromHex(const std::string& s) {
        if (s.size() != 2 * N) return std::nullopt;
        FixedBytes out;
        for (size_t i = 0; i < N; i++) {
            auto nib = [](char c) -> int {
                if (c >= '0' && c <= '9') return c - '0';
                if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                if (c >= 'A' && c <= 'F') return c - 'A' + 10;
                return -1;
            };
            int hi = nib(s[2 * i]), lo = nib(s[2 * i + 1]);
            if (hi < 0 || lo < 0) return std::nullopt;
            out.b[i] = static_cast<uint8_t>(hi << 4 | lo);
        }
        return out;
    }

    Bytes toBytes() const { return Bytes(b.begin(), b.end()); }
};

using Digest = FixedBytes<32>;
using Address = FixedBytes<20>;

inline std::string toHex(const Bytes& v) {
    static const char* d = "0123456789abcdef";
    std::string s;
    s.reserve(2 * v.size());
    for (uint8_t x : v) {
        s.push_back(d[x >> 4]);
        s.push_back(d[x & 0xf]);
    }
    return s;
}

inline std::optional<Bytes> fromHex(const std::string& s) {
    if (s.size() % 2) return std::nullopt;
    Bytes out;
    out.reserve(s.size() / 2);
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    for (size_t i = 0; i < s.size(); i += 2) {
        int hi = nib(s[i]), lo = nib(s[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<uint8_t>(hi << 4 | lo));
    }
    return out;
}

/// Append-only big-endian serializer. All multi-byte integers on every wire
/// format in this project are big-endian.
class ByteWriter {
public:
    void u8(uint8_t v) { out_.push_back(v); }
    void u16(uint16_t v) {
        out_.push_back(static_cast<uint8_t>(v >> 8));
        out_.push_back(static_cast<uint8_t>(v));
    }
    void u32(uint32_t v) {
        for (int i = 3; i >= 0; i--) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 7; i >= 0; i--) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void raw(const uint8_t* p, size_t n) { out_.insert(out_.end(), p, p + n); }
    void raw(const Bytes& v) { raw(v.data(), v.size()); }
    template <size_t N>
    void raw(const FixedBytes<N>& v) { raw(v.data(), N); }
    void str(const std::string& s) { raw(reinterpret_cast<const uint8_t*>(s.data()), s.size()); }

    /// Length-prefixed variants used by the tx/args encodings.
    void lp16(const Bytes& v) {
        if (v.size() > 0xffff) throw DecodeError("lp16 overflow");
        u16(static_cast<uint16_t>(v.size()));
        raw(v);
    }
    void lp16(const std::string& s) {
        if (s.size() > 0xffff) throw DecodeError("lp16 overflow");
        u16(static_cast<uint16_t>(s.size()));
        str(s);
    }
    void lp32(const Bytes& v) {
        if (v.size() > 0xffffffffULL) throw DecodeError("lp32 overflow");
        u32(static_cast<uint32_t>(v.size()));
        raw(v);
    }

    Bytes take() { return std::move(out_); }
    const Bytes& peek() const { return out_; }

private:
    Bytes out_;
};

/// Bounds-checked cursor over a byte string. Throws DecodeError instead of
/// reading past the end. Constructed from an rvalue it keeps the buffer
/// alive itself, so reading straight out of a function result is safe.
class ByteReader {
public:
    ByteReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}
    explicit ByteReader(const Bytes& v) : p_(v.data()), n_(v.size()) {}
    explicit ByteReader(Bytes&& v) : own_(std::move(v)), p_(own_.data()), n_(own_.size()) {}

    ByteReader(const ByteReader&) = delete;
    ByteReader& operator=(const ByteReader&) = delete;
    ByteReader(ByteReader&& o) noexcept {
        bool owned = !o.own_.empty();
        own_ = std::move(o.own_);
        p_ = owned ? own_.data() : o.p_;
        n_ = o.n_;
        pos_ = o.pos_;
    }

    uint8_t u8() { return take(1)[0]; }
    uint16_t u16() {
        const uint8_t* p = take(2);
        return static_cast<uint16_t>(p[0] << 8 | p[1]);
    }
    uint32_t u32() {
        const uint8_t* p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++) v = v << 8 | p[i];
        return v;
    }
    uint64_t u64() {
        const uint8_t* p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; i++) v = v << 8 | p[i];
        return v;
    }
    Bytes bytes(size_t n) {
        const uint8_t* p = take(n);
        return Bytes(p, p + n);
    }
    template <size_t N>
    FixedBytes<N> fixed() {
        const uint8_t* p = take(N);
        FixedBytes<N> out;
        std::memcpy(out.b.data(), p, N);
        return out;
    }
    std::string str(size_t n) {
        const uint8_t* p = take(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    Bytes lp16() { return bytes(u16()); }
    Bytes lp32() { return bytes(u32()); }
    std::string lpstr16() { return str(u16()); }

    size_t remaining() const { return n_ - pos_; }
    bool done() const { return pos_ == n_; }
    void expectDone() const {
        if (!done()) throw DecodeError("trailing bytes");
    }

private:
    const uint8_t* take(size_t n) {
        if (n_ - pos_ < n) throw DecodeError("input truncated");
        const uint8_t* p = p_ + pos_;
        pos_ += n;
        return p;
    }
    Bytes own_;  // only filled when constructed from an rvalue
    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
};

}  // namespace smartcert
