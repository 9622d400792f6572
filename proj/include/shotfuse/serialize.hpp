#pragma once

// Little-endian byte streams with a trailing CRC32, shared by the landmark,
// clip and checkpoint formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shotfuse/errors.hpp"

namespace shotfuse {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

class ByteWriter {
 public:
  void put_bytes(const void* data, std::size_t n);
  void put_u8(std::uint8_t v) { bytes_.push_back(v); }
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f32(float v);
  void put_f64(double v);
  /// u32 length prefix followed by the raw bytes.
  void put_string(const std::string& s);
  /// Appends the CRC32 of everything written so far and returns the buffer.
  std::vector<std::uint8_t> finish();
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  /// `what` names the source in error messages.
  ByteReader(std::span<const std::uint8_t> bytes, std::string what);

  void get_bytes(void* out, std::size_t n);
  std::uint8_t get_u8();
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  float get_f32();
  double get_f64();
  std::string get_string();
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }
  /// Throws FormatError unless the next bytes equal `magic`.
  void expect_magic(const std::string& magic);

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

/// Splits off and verifies the trailing CRC32; returns the covered content.
std::span<const std::uint8_t> checked_content(std::span<const std::uint8_t> file, const std::string& what);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename so readers never see partial files.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace shotfuse
