#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mov3d {

using Bytes = std::vector<std::uint8_t>;

// Little-endian serializer used by every binary container.
class ByteWriter {
  public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    void f32(float v);
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    const Bytes& bytes() const { return bytes_; }
    Bytes take() { return std::move(bytes_); }

  private:
    Bytes bytes_;
};

// Bounds-checked reader; every overrun raises FormatError naming `what`.
class ByteReader {
  public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    float f32();
    std::string raw(std::size_t n);
    void expect_magic(std::string_view magic);

    std::size_t remaining() const { return bytes_.size() - pos_; }
    bool done() const { return pos_ == bytes_.size(); }

  private:
    void need(std::size_t n);

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

Bytes read_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames over `path`, so readers never
// observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mov3d
