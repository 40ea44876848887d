#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "xrsel/error.hpp"

namespace xrsel::detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value)
{
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            out.push_back(bytes[sizeof(T) - 1 - i]);
    } else {
        out.insert(out.end(), bytes, bytes + sizeof(T));
    }
}

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, const char* what) : bytes_(bytes), what_(what) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        std::uint8_t raw[sizeof(T)];
        if constexpr (std::endian::native == std::endian::big) {
            for (std::size_t i = 0; i < sizeof(T); ++i)
                raw[i] = bytes_[pos_ + sizeof(T) - 1 - i];
        } else {
            std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        }
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::string get_string(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            throw Error(ErrorKind::Parse, std::string(what_) + ": truncated file");
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    const char* what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

}  // namespace xrsel::detail
