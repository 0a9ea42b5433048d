#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace copra {

using Bytes = std::vector<std::uint8_t>;
using BytesView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

std::string hex_encode(BytesView data);

// Big-endian append helpers used by all wire encodings.
inline void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

inline void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
    put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_i64(Bytes& out, std::int64_t v) {
    put_u64(out, static_cast<std::uint64_t>(v));
}

inline void put_bytes(Bytes& out, BytesView data) {
    out.insert(out.end(), data.begin(), data.end());
}

class ByteReaderError : public std::runtime_error {
public:
    explicit ByteReaderError(const std::string& what) : std::runtime_error(what) {}
};

// Bounds-checked sequential reader over an immutable buffer.
class ByteReader {
public:
    explicit ByteReader(BytesView data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return remaining() == 0; }

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t hi = u32();
        return hi << 32 | u32();
    }

    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

    Bytes take(std::size_t n) {
        need(n);
        Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }

    void expect_done() const {
        if (!done()) throw ByteReaderError("trailing bytes in message payload");
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw ByteReaderError("message payload truncated");
    }

    BytesView data_;
    std::size_t pos_ = 0;
};

}  // namespace copra
