#pragma once

// IDX reader/writer (the MNIST container format).
//
//   images: [0x00000803][count][rows][cols] then count*rows*cols unsigned bytes
//   labels: [0x00000801][count]             then count unsigned bytes
//
// All header fields are big-endian 32-bit. Files starting with the gzip magic
// are inflated transparently.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "gdo/domains.hpp"
#include "gdo/errors.hpp"

namespace gdo {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

using Bytes = std::vector<std::uint8_t>;

/// Image set as read from IDX: pixels scaled to [0,1], image geometry kept so
/// the set can be written back.
struct IdxDataset {
  Dataset data;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

namespace detail {

inline std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

inline std::uint32_t read_be32(const Bytes& b, std::size_t pos) {
  return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) |
         (std::uint32_t{b[pos + 2]} << 8) | std::uint32_t{b[pos + 3]};
}

inline void write_be32(Bytes& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline bool is_gzip(const Bytes& b) { return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b; }

inline Bytes gunzip(const Bytes& in, const std::string& name) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("zlib init failed for " + name);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  Bytes out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  do {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("corrupt or truncated gzip stream in " + name);
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("truncated gzip stream in " + name);
  return out;
}

inline void check_header_size(const Bytes& b, std::size_t need, const std::string& name) {
  if (b.size() < need)
    throw IoError(name + ": truncated header (" + std::to_string(b.size()) + " of " +
                  std::to_string(need) + " bytes)");
}

inline void check_magic(std::uint32_t seen, std::uint32_t want, const std::string& name) {
  if (seen != want)
    throw FormatError(name + ": bad magic " + hex32(seen) + ", expected " + hex32(want));
}

inline void check_payload(std::size_t have, std::uint64_t declared, const std::string& name) {
  if (have != declared)
    throw FormatError(name + ": header declares " + std::to_string(declared) +
                      " payload bytes but file has " + std::to_string(have));
}

}  // namespace detail

inline Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on " + path.string());
  return b;
}

inline void write_file_bytes(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write error on " + path.string());
}

/// Parsed image file: count x (rows*cols) raw pixel bytes.
struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  Bytes pixels;
};

inline IdxImages parse_idx_images(const Bytes& raw, const std::string& name = "images") {
  const Bytes& b = detail::is_gzip(raw) ? detail::gunzip(raw, name) : raw;
  detail::check_header_size(b, 16, name);
  detail::check_magic(detail::read_be32(b, 0), kIdxImageMagic, name);
  IdxImages img{detail::read_be32(b, 4), detail::read_be32(b, 8), detail::read_be32(b, 12), {}};
  if (img.rows == 0 || img.cols == 0)
    throw FormatError(name + ": zero image dimension " + std::to_string(img.rows) + "x" +
                      std::to_string(img.cols));
  std::uint64_t declared = std::uint64_t{img.count} * img.rows * img.cols;
  detail::check_payload(b.size() - 16, declared, name);
  img.pixels.assign(b.begin() + 16, b.end());
  return img;
}

inline Bytes parse_idx_labels(const Bytes& raw, const std::string& name = "labels") {
  const Bytes& b = detail::is_gzip(raw) ? detail::gunzip(raw, name) : raw;
  detail::check_header_size(b, 8, name);
  detail::check_magic(detail::read_be32(b, 0), kIdxLabelMagic, name);
  detail::check_payload(b.size() - 8, detail::read_be32(b, 4), name);
  return Bytes(b.begin() + 8, b.end());
}

/// Combines parsed image and label payloads; pixels are divided by 255.
inline IdxDataset idx_to_dataset(const IdxImages& img, const Bytes& labels) {
  if (img.count != labels.size())
    throw ConsistencyError("image file has " + std::to_string(img.count) + " items, label file " +
                           std::to_string(labels.size()));
  const std::size_t d = img.rows * img.cols;
  IdxDataset out;
  out.rows = img.rows;
  out.cols = img.cols;
  out.data.x = DenseMatrix(img.count, d);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.data.x.data()[i] = img.pixels[i] / 255.0;
  Labels y(labels.begin(), labels.end());
  std::size_t k = 0;
  for (std::size_t l : y) k = std::max(k, l + 1);
  out.data.y = std::move(y);
  out.data.num_classes = std::max<std::size_t>(k, 10);
  return out;
}

inline IdxDataset load_idx(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path) {
  IdxImages img = parse_idx_images(read_file_bytes(images_path), images_path.string());
  Bytes labels = parse_idx_labels(read_file_bytes(labels_path), labels_path.string());
  return idx_to_dataset(img, labels);
}

inline Bytes encode_idx_images(const IdxDataset& ds) {
  if (ds.rows * ds.cols != ds.data.dim()) throw ShapeError("encode_idx_images: geometry does not match features");
  Bytes b;
  b.reserve(16 + ds.data.x.size());
  detail::write_be32(b, kIdxImageMagic);
  detail::write_be32(b, static_cast<std::uint32_t>(ds.data.size()));
  detail::write_be32(b, static_cast<std::uint32_t>(ds.rows));
  detail::write_be32(b, static_cast<std::uint32_t>(ds.cols));
  for (double v : ds.data.x.data()) {
    double p = std::round(v * 255.0);
    if (!(p >= 0.0 && p <= 255.0)) throw ArgumentError("encode_idx_images: pixel outside [0,1]");
    b.push_back(static_cast<std::uint8_t>(p));
  }
  return b;
}

inline Bytes encode_idx_labels(const Dataset& ds) {
  if (!ds.y) throw ContractError("encode_idx_labels: dataset has no labels");
  Bytes b;
  b.reserve(8 + ds.y->size());
  detail::write_be32(b, kIdxLabelMagic);
  detail::write_be32(b, static_cast<std::uint32_t>(ds.y->size()));
  for (std::size_t l : *ds.y) {
    if (l > 255) throw ArgumentError("encode_idx_labels: label exceeds one byte");
    b.push_back(static_cast<std::uint8_t>(l));
  }
  return b;
}

/// Writes uncompressed IDX files.
inline void write_idx(const IdxDataset& ds, const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  write_file_bytes(images_path, encode_idx_images(ds));
  write_file_bytes(labels_path, encode_idx_labels(ds.data));
}

}  // namespace gdo
