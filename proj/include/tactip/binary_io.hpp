#pragma once

// Little-endian byte streams with position tracking for format diagnostics.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "tactip/error.hpp"

namespace tactip {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void magic(std::string_view m) { buf_.insert(buf_.end(), m.begin(), m.end()); }
    void bytes(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

    const std::vector<std::uint8_t>& data() const { return buf_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw IoError("write failed: " + path);
    }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(std::vector<std::uint8_t> data, std::string name) : buf_(std::move(data)), name_(std::move(name)) {}

    static ByteReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data), path);
    }

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1, "u8")); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2, "u16")); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4, "u32")); }
    std::uint64_t u64() { return get(8, "u64"); }
    double f64() { return std::bit_cast<double>(u64()); }

    void expect_magic(std::string_view m) {
        require(m.size(), "magic");
        if (std::memcmp(buf_.data() + pos_, m.data(), m.size()) != 0)
            throw FormatError(name_ + ": bad magic, expected \"" + std::string(m) + "\"", pos_);
        pos_ += m.size();
    }

    void bytes(std::uint8_t* dst, std::size_t n) {
        require(n, "payload");
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::string& name() const { return name_; }

    void expect_end() const {
        if (pos_ != buf_.size()) throw FormatError(name_ + ": trailing bytes", pos_);
    }

private:
    void require(std::size_t n, const char* what) const {
        if (buf_.size() - pos_ < n) throw FormatError(name_ + ": truncated while reading " + what, pos_);
    }
    std::uint64_t get(int n, const char* what) {
        require(static_cast<std::size_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::vector<std::uint8_t> buf_;
    std::string name_;
    std::size_t pos_ = 0;
};

} // namespace tactip
