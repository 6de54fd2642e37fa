#include "skpd/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace skpd {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_all(const std::string& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::vector<unsigned char> encode_skt(const NdArray& a) {
  std::vector<unsigned char> out;
  out.reserve(8 + 8 * a.rank() + 8 * a.size());
  for (char c : {'S', 'K', 'P', 'D'}) out.push_back(static_cast<unsigned char>(c));
  put_le<std::uint16_t>(out, kSktVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(a.rank()));
  for (std::size_t d : a.dims()) put_le<std::uint64_t>(out, d);
  for (double v : a.values()) put_le<double>(out, v);
  return out;
}

NdArray decode_skt(const std::vector<unsigned char>& bytes, const std::string& source) {
  if (bytes.size() < 8) {
    throw SktTruncated(source + ": truncated header: expected at least 8 bytes, got " +
                           std::to_string(bytes.size()),
                       8, bytes.size());
  }
  if (std::memcmp(bytes.data(), "SKPD", 4) != 0) throw SktBadMagic(source + ": bad magic (not an SKT file)");
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kSktVersion) {
    throw SktBadVersion(source + ": unsupported SKT version " + std::to_string(version), version);
  }
  const auto ndim = get_le<std::uint16_t>(bytes.data() + 6);
  if (ndim < 1 || ndim > 4) throw IoError(source + ": ndim " + std::to_string(ndim) + " outside 1..4");
  const std::uint64_t header = 8 + 8ull * ndim;
  if (bytes.size() < header) {
    throw SktTruncated(source + ": truncated dims: expected " + std::to_string(header) +
                           " header bytes, got " + std::to_string(bytes.size()),
                       header, bytes.size());
  }
  Dims dims(ndim);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = static_cast<std::size_t>(get_le<std::uint64_t>(bytes.data() + 8 + 8 * i));
    if (dims[i] == 0) throw IoError(source + ": zero dimension");
    count *= dims[i];
  }
  const std::uint64_t expected = header + 8 * count;
  if (bytes.size() != expected) {
    throw SktTruncated(source + ": payload size mismatch: expected " + std::to_string(expected) +
                           " bytes, got " + std::to_string(bytes.size()),
                       expected, bytes.size());
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = get_le<double>(bytes.data() + header + 8 * i);
  return NdArray(std::move(dims), std::move(data));
}

void write_skt(const std::string& path, const NdArray& a) {
  const auto bytes = encode_skt(a);
  write_all(path, bytes.data(), bytes.size());
}

NdArray read_skt(const std::string& path) { return decode_skt(read_all(path), path); }

void write_pgm(const std::string& path, const NdArray& image) {
  if (image.rank() != 2) throw ShapeError("write_pgm: 2D input required");
  const auto [lo, hi] = std::minmax_element(image.values().begin(), image.values().end());
  const double mn = *lo;
  const double mx = *hi;
  std::string out = "P5\n" + std::to_string(image.dims()[1]) + " " + std::to_string(image.dims()[0]) + "\n255\n";
  for (double v : image.values()) {
    int level = 128;
    if (mx > mn) level = static_cast<int>(std::lround((v - mn) / (mx - mn) * 255.0));
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0, 255))));
  }
  write_all(path, out.data(), out.size());
}

void write_mask_pgm(const std::string& path, const NdArray& mask) {
  if (mask.rank() != 2) throw ShapeError("write_mask_pgm: 2D input required");
  std::string out = "P5\n" + std::to_string(mask.dims()[1]) + " " + std::to_string(mask.dims()[0]) + "\n255\n";
  for (double v : mask.values()) out.push_back(static_cast<char>(v != 0.0 ? 255 : 0));
  write_all(path, out.data(), out.size());
}

NdArray read_pgm(const std::string& path) {
  const auto bytes = read_all(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") throw IoError(path + ": not a binary PGM (P5)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::logic_error&) {
    throw IoError(path + ": malformed PGM header");
  }
  if (maxval == 0 || maxval > 255 || w == 0 || h == 0) throw IoError(path + ": unsupported PGM header");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos + w * h) throw IoError(path + ": truncated PGM raster");
  NdArray out({h, w});
  for (std::size_t i = 0; i < w * h; ++i) out[i] = static_cast<double>(bytes[pos + i]);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const NdArray& image) {
  if (image.rank() != 2) throw ShapeError("write_csv: 2D input required");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < image.dims()[0]; ++i) {
    for (std::size_t j = 0; j < image.dims()[1]; ++j) {
      if (j) out << ',';
      out << format_double(image(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

NdArray read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) throw IoError(path + ": bad number '" + cell + "'");
      data.push_back(v);
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw IoError(path + ": ragged CSV at row " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw IoError(path + ": empty CSV");
  return NdArray({rows, cols}, std::move(data));
}

NdArray slice(const NdArray& volume, std::size_t axis, std::size_t index) {
  if (volume.rank() != 3 || axis > 2 || index >= volume.dims()[axis]) {
    throw ShapeError("slice: need a 3D array and a valid axis/index");
  }
  Dims out_dims;
  for (std::size_t ax = 0; ax < 3; ++ax) {
    if (ax != axis) out_dims.push_back(volume.dims()[ax]);
  }
  NdArray out(out_dims);
  std::size_t k = 0;
  for (std::size_t i = 0; i < volume.dims()[0]; ++i) {
    for (std::size_t j = 0; j < volume.dims()[1]; ++j) {
      for (std::size_t l = 0; l < volume.dims()[2]; ++l) {
        const std::size_t at[3] = {i, j, l};
        if (at[axis] == index) out[k++] = volume(i, j, l);
      }
    }
  }
  return out;
}

void export_heatmap(const NdArray& c, const std::string& path, const std::string& format) {
  const NdArray plane = c.rank() == 3 ? slice(c, 0, c.dims()[0] / 2) : c;
  if (format == "pgm") {
    write_pgm(path, plane);
  } else if (format == "csv") {
    write_csv(path, plane);
  } else {
    throw InvalidArgument("export_heatmap: unknown format '" + format + "'");
  }
}

void Manifest::set(const std::string& key, const std::string& value) {
  if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
    throw InvalidArgument("Manifest: key/value may not contain '=' or newlines");
  }
  for (auto& kv : entries_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

bool Manifest::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& kv) { return kv.first == key; });
}

const std::string& Manifest::get(const std::string& key) const {
  for (const auto& kv : entries_) {
    if (kv.first == key) return kv.second;
  }
  throw IoError("manifest key '" + key + "' missing");
}

std::string Manifest::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

void Manifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
  if (!out) throw IoError("write failed for " + path);
}

Manifest Manifest::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path + ":" + std::to_string(lineno) + ": expected key=value");
    m.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return m;
}

std::string default_butterfly_path() {
  if (const char* env = std::getenv("SKPD_BUTTERFLY")) return env;
#ifdef SKPD_DEFAULT_BUTTERFLY
  if (std::filesystem::exists(SKPD_DEFAULT_BUTTERFLY)) return SKPD_DEFAULT_BUTTERFLY;
#endif
#ifdef SKPD_INSTALLED_BUTTERFLY
  return SKPD_INSTALLED_BUTTERFLY;
#else
  return "butterfly_128.pgm";
#endif
}

}  // namespace skpd
