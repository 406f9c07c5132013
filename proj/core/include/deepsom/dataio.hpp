#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deepsom/topology.hpp"

namespace deepsom {

// IDX layout: two zero bytes, a type code, a dimension count, one
// big-endian uint32 per dimension, then the raw payload. Only unsigned
// bytes (type 0x08) are supported.
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// A decoded IDX file of unsigned bytes.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::uint32_t magic() const { return 0x00000800u | static_cast<std::uint32_t>(dims.size()); }
  friend bool operator==(const IdxArray&, const IdxArray&) = default;
};

/// Reads a whole file, transparently inflating it when the name ends in ".gz".
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Decodes an IDX byte buffer; `source` names it in error messages.
IdxArray parse_idx(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
std::vector<std::uint8_t> serialize_idx(const IdxArray& array);

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// Labelled grayscale images with pixels scaled into [0, 1].
struct Dataset {
  ImageShape shape{};
  std::vector<double> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> image(std::size_t index) const {
    return std::span<const double>(pixels).subspan(index * shape.size(), shape.size());
  }
  int label(std::size_t index) const { return labels[index]; }
};

/// Builds a dataset from an image array (magic 0x803) and a label array
/// (magic 0x801). Throws DataError on shape, count or label-range problems.
Dataset make_dataset(const IdxArray& images, const IdxArray& labels);
Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path);

/// Inverse of make_dataset; pixels are rounded back to bytes.
IdxArray images_to_idx(const Dataset& dataset);
IdxArray labels_to_idx(const Dataset& dataset);

/// Picks `count` distinct indices out of [0, population) by a seeded shuffle,
/// keeping them in shuffled order.
std::vector<std::size_t> select_subset(std::size_t population, std::size_t count, std::uint64_t seed);

/// Endless sequence over a pool of sample indices. Each epoch is a fresh
/// seeded permutation of the pool; the cursor counts draws from the start.
class SampleStream {
 public:
  SampleStream(std::vector<std::size_t> pool, std::uint64_t seed, std::uint64_t cursor = 0,
               std::uint64_t limit = 0);

  /// Next dataset index. Wraps into a new permutation at every epoch end.
  std::size_t next();

  /// Draws remaining before the block limit (unbounded streams return max).
  std::uint64_t remaining() const;
  bool exhausted() const { return remaining() == 0; }

  std::uint64_t cursor() const { return cursor_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::size_t>& pool() const { return pool_; }

 private:
  void load_epoch(std::uint64_t epoch);

  std::vector<std::size_t> pool_;
  std::vector<std::size_t> order_;
  std::uint64_t seed_;
  std::uint64_t cursor_;
  std::uint64_t start_;
  std::uint64_t limit_;
  std::uint64_t epoch_ = ~std::uint64_t{0};
};

/// Training block `block_index`: `block_size` draws starting at
/// block_index * block_size of the stream over `pool`.
SampleStream take_block(const std::vector<std::size_t>& pool, std::size_t block_size,
                        std::uint64_t seed, std::uint64_t block_index);

}  // namespace deepsom
