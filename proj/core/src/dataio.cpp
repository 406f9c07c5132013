#include "deepsom/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "deepsom/error.hpp"
#include "deepsom/random.hpp"

namespace deepsom {
namespace {

bool has_gzip_extension(const std::filesystem::path& path) { return path.extension() == ".gz"; }

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t value) {
  out.push_back(static_cast<std::uint8_t>(value >> 24));
  out.push_back(static_cast<std::uint8_t>(value >> 16));
  out.push_back(static_cast<std::uint8_t>(value >> 8));
  out.push_back(static_cast<std::uint8_t>(value));
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  if (has_gzip_extension(path)) {
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> out;
    std::uint8_t buffer[1 << 16];
    int got;
    while ((got = gzread(file, buffer, sizeof buffer)) > 0) out.insert(out.end(), buffer, buffer + got);
    const bool failed = got < 0;
    gzclose(file);
    if (failed) throw DataError("gzip stream error in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

IdxArray parse_idx(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < 4) {
    std::ostringstream msg;
    msg << source << ": truncated IDX header (" << bytes.size() << " bytes, need at least 4)";
    throw DataError(msg.str());
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if ((magic & 0xffffff00u) != 0x00000800u) {
    std::ostringstream msg;
    msg << source << ": bad IDX magic 0x" << std::hex << magic << " at offset 0"
        << " (only unsigned-byte arrays are supported)";
    throw DataError(msg.str());
  }
  const std::size_t rank = magic & 0xffu;
  if (rank == 0) throw DataError(source + ": IDX array with zero dimensions");
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    std::ostringstream msg;
    msg << source << ": truncated IDX header, " << header << " bytes expected, " << bytes.size() << " present";
    throw DataError(msg.str());
  }

  IdxArray out;
  std::size_t payload = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * d));
    payload *= out.dims.back();
  }
  if (bytes.size() != header + payload) {
    std::ostringstream msg;
    msg << source << ": payload starting at offset " << header << " should hold " << payload
        << " bytes but " << bytes.size() - header << " are present";
    throw DataError(msg.str());
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& array) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * array.dims.size() + array.payload.size());
  write_be32(out, array.magic());
  for (const auto d : array.dims) write_be32(out, d);
  out.insert(out.end(), array.payload.begin(), array.payload.end());
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_idx(bytes, path.string());
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  const auto bytes = serialize_idx(array);
  if (has_gzip_extension(path)) {
    gzFile file = gzopen(path.c_str(), "wb");
    if (file == nullptr) throw DataError("cannot write " + path.string());
    const int wrote = gzwrite(file, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(file);
    if (wrote != static_cast<int>(bytes.size())) throw DataError("short gzip write to " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

Dataset make_dataset(const IdxArray& images, const IdxArray& labels) {
  if (images.magic() != kIdxImageMagic) throw DataError("image file is not a 3-dimensional IDX array");
  if (labels.magic() != kIdxLabelMagic) throw DataError("label file is not a 1-dimensional IDX array");
  if (images.dims[0] != labels.dims[0]) {
    std::ostringstream msg;
    msg << "image count " << images.dims[0] << " does not match label count " << labels.dims[0];
    throw DataError(msg.str());
  }

  Dataset ds;
  ds.shape = {images.dims[1], images.dims[2]};
  ds.pixels.resize(images.payload.size());
  std::transform(images.payload.begin(), images.payload.end(), ds.pixels.begin(),
                 [](std::uint8_t b) { return static_cast<double>(b) / 255.0; });
  ds.labels = labels.payload;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] > 9) {
      std::ostringstream msg;
      msg << "label " << int{ds.labels[i]} << " at offset " << 8 + i << " is outside 0..9";
      throw DataError(msg.str());
    }
  }
  return ds;
}

Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path) {
  return make_dataset(read_idx(image_path), read_idx(label_path));
}

IdxArray images_to_idx(const Dataset& dataset) {
  IdxArray out;
  out.dims = {static_cast<std::uint32_t>(dataset.size()), static_cast<std::uint32_t>(dataset.shape.rows),
              static_cast<std::uint32_t>(dataset.shape.cols)};
  out.payload.resize(dataset.pixels.size());
  std::transform(dataset.pixels.begin(), dataset.pixels.end(), out.payload.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return out;
}

IdxArray labels_to_idx(const Dataset& dataset) {
  IdxArray out;
  out.dims = {static_cast<std::uint32_t>(dataset.size())};
  out.payload = dataset.labels;
  return out;
}

std::vector<std::size_t> select_subset(std::size_t population, std::size_t count, std::uint64_t seed) {
  if (count > population) {
    std::ostringstream msg;
    msg << "cannot select " << count << " samples from " << population;
    throw ConfigError(msg.str());
  }
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b5e7));
  rng.shuffle(std::span<std::size_t>(all));
  all.resize(count);
  return all;
}

SampleStream::SampleStream(std::vector<std::size_t> pool, std::uint64_t seed, std::uint64_t cursor,
                           std::uint64_t limit)
    : pool_(std::move(pool)), seed_(seed), cursor_(cursor), start_(cursor), limit_(limit) {
  if (pool_.empty()) throw ConfigError("sample stream over an empty pool");
}

void SampleStream::load_epoch(std::uint64_t epoch) {
  order_ = pool_;
  Rng rng(derive_seed(seed_, epoch));
  rng.shuffle(std::span<std::size_t>(order_));
  epoch_ = epoch;
}

std::size_t SampleStream::next() {
  const std::uint64_t epoch = cursor_ / pool_.size();
  if (epoch != epoch_) load_epoch(epoch);
  const std::size_t index = order_[cursor_ % pool_.size()];
  ++cursor_;
  return index;
}

std::uint64_t SampleStream::remaining() const {
  if (limit_ == 0) return ~std::uint64_t{0};
  const std::uint64_t used = cursor_ - start_;
  return used >= limit_ ? 0 : limit_ - used;
}

SampleStream take_block(const std::vector<std::size_t>& pool, std::size_t block_size,
                        std::uint64_t seed, std::uint64_t block_index) {
  if (block_size == 0 || block_size > pool.size()) {
    std::ostringstream msg;
    msg << "block size " << block_size << " must be in 1.." << pool.size();
    throw ConfigError(msg.str());
  }
  return SampleStream(pool, seed, block_index * block_size, block_size);
}

}  // namespace deepsom
