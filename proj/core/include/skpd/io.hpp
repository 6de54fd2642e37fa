#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "skpd/error.hpp"
#include "skpd/ndarray.hpp"

namespace skpd {

/// SKT layout: "SKPD", u16 version, u16 ndim, ndim x u64 dims, f64 payload; little endian.
inline constexpr std::uint16_t kSktVersion = 1;

class SktBadMagic : public IoError {
 public:
  using IoError::IoError;
};

class SktBadVersion : public IoError {
 public:
  SktBadVersion(const std::string& what, std::uint16_t version) : IoError(what), version_(version) {}
  std::uint16_t version() const noexcept { return version_; }

 private:
  std::uint16_t version_;
};

class SktTruncated : public IoError {
 public:
  SktTruncated(const std::string& what, std::uint64_t expected, std::uint64_t actual)
      : IoError(what), expected_(expected), actual_(actual) {}
  std::uint64_t expected_bytes() const noexcept { return expected_; }
  std::uint64_t actual_bytes() const noexcept { return actual_; }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

std::vector<unsigned char> encode_skt(const NdArray& a);
NdArray decode_skt(const std::vector<unsigned char>& bytes, const std::string& source = "<memory>");
void write_skt(const std::string& path, const NdArray& a);
NdArray read_skt(const std::string& path);

/// 8-bit binary PGM (P5), min -> 0, max -> 255, constant -> 128.
void write_pgm(const std::string& path, const NdArray& image);
/// Reads P5 (maxval <= 255) as raw gray levels.
NdArray read_pgm(const std::string& path);
/// Writes a 0/1 mask as 0/255.
void write_mask_pgm(const std::string& path, const NdArray& mask);

void write_csv(const std::string& path, const NdArray& image);
NdArray read_csv(const std::string& path);

/// 2D slice of a 3D array along `axis` at `index`.
NdArray slice(const NdArray& volume, std::size_t axis, std::size_t index);

/// Writes a heatmap as pgm or csv; 3D input is sliced through the middle of axis 0.
void export_heatmap(const NdArray& c, const std::string& path, const std::string& format);

/// Ordered key=value text file.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  ///< throws IoError when missing
  std::string get_or(const std::string& key, const std::string& fallback) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(const std::string& path) const;
  static Manifest read(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Bundled butterfly mask; SKPD_BUTTERFLY overrides the compiled-in location.
std::string default_butterfly_path();

}  // namespace skpd
