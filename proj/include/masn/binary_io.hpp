#pragma once

// Little-endian byte encoding helpers shared by the episode and checkpoint
// file formats, plus atomic (temp + rename) file writes.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "masn/errors.hpp"
#include "masn/real.hpp"

namespace masn::io {

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    template <typename T>
    void scalar(T v) {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        buf_.insert(buf_.end(), raw, raw + sizeof(T));
    }

    // Each value is stored as an IEEE float64.
    void doubles(std::span<const Real> values) {
        for (Real v : values) scalar(static_cast<double>(v));
    }

    const std::vector<char>& buffer() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const char> data) : data_(data) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        std::string_view out(data_.data() + pos_, n);
        pos_ += n;
        return out;
    }

    template <typename T>
    T scalar() {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, data_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, raw, sizeof(T));
        return v;
    }

    void doubles(std::span<Real> out) {
        need(out.size() * sizeof(double));
        for (Real& v : out) v = scalar<double>();
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw TruncatedError("unexpected end of file");
    }

    std::span<const char> data_;
    std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::string& path);
// Writes to `path + ".tmp"` and renames over `path`.
void write_file_atomic(const std::string& path, std::span<const char> data);
void write_text_atomic(const std::string& path, std::string_view text);

}  // namespace masn::io
