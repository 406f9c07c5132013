#include "deepsom/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "deepsom/error.hpp"

namespace deepsom {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::span<const char> chars) {
    for (const char c : chars) bytes_.push_back(static_cast<std::uint8_t>(c));
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1, "a flag byte");
    return bytes_[pos_++];
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  void f64s(std::span<double> out) {
    need(out.size() * 8, "weights");
    for (auto& v : out) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
      v = std::bit_cast<double>(bits);
      pos_ += 8;
    }
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      std::ostringstream msg;
      msg << "checkpoint truncated while reading " << what << " at offset " << pos_ << ": "
          << n - (bytes_.size() - pos_) << " more bytes needed";
      throw CheckpointError(msg.str());
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_topology(Writer& w, const NetworkTopology& topo) {
  w.u64(topo.image.rows);
  w.u64(topo.image.cols);
  w.u64(topo.layer_count());
  for (std::size_t l = 0; l < topo.layer_count(); ++l) {
    const auto& s = topo.layers[l];
    for (const std::uint64_t v : {std::uint64_t{s.map_rows}, std::uint64_t{s.map_cols},
                                  std::uint64_t{s.neurons.rows}, std::uint64_t{s.neurons.cols},
                                  std::uint64_t{s.rf}, std::uint64_t{s.stride}, std::uint64_t{s.pad},
                                  std::uint64_t{topo.input_dims[l]}}) {
      w.u64(v);
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kCheckpointMagic);
  w.u8(kCheckpointVersion);
  const auto& topo = ck.network.topology;
  write_topology(w, topo);
  w.u64(ck.network.seed);
  for (const auto& layer : ck.network.grids) {
    for (const auto& grid : layer) {
      w.u64(grid.guard_seed());
      w.u64(grid.guard_events());
      for (const double v : grid.weights()) w.f64(v);
    }
  }
  w.u8(ck.labels ? 1 : 0);
  if (ck.labels) {
    for (const auto j : ck.labels->class_neurons()) w.u64(j);
  }
  w.u8(ck.cache_samples ? 1 : 0);
  if (ck.cache_samples) {
    for (const auto s : *ck.cache_samples) w.u64(s);
  }
  w.u64(ck.run_seed);
  w.u64(ck.blocks_completed);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const NetworkTopology* expected) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic.data(), 4) != 0) {
    throw CheckpointError("not a checkpoint: magic bytes differ from 'DSOM'");
  }
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    std::ostringstream msg;
    msg << "unsupported checkpoint version " << int{version} << " (expected " << int{kCheckpointVersion} << ")";
    throw CheckpointError(msg.str());
  }

  ImageShape image;
  image.rows = r.u64("image rows");
  image.cols = r.u64("image cols");
  const std::uint64_t layers = r.u64("layer count");
  if (layers == 0 || layers > 64) throw CheckpointError("implausible layer count in checkpoint");
  std::vector<LayerSpec> specs(layers);
  std::vector<std::uint64_t> dims(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    auto& s = specs[l];
    s.map_rows = r.u64("topology");
    s.map_cols = r.u64("topology");
    s.neurons.rows = r.u64("topology");
    s.neurons.cols = r.u64("topology");
    s.rf = r.u64("topology");
    s.stride = r.u64("topology");
    s.pad = r.u64("topology");
    dims[l] = r.u64("topology");
  }

  Checkpoint ck;
  try {
    ck.network.topology = resolve_topology(image, specs);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint topology is inconsistent: ") + e.what());
  }
  const auto& topo = ck.network.topology;
  for (std::size_t l = 0; l < layers; ++l) {
    if (topo.input_dims[l] != dims[l]) {
      std::ostringstream msg;
      msg << "checkpoint layer " << l + 1 << " records fan-in " << dims[l] << " but its geometry implies "
          << topo.input_dims[l];
      throw CheckpointError(msg.str());
    }
  }
  if (expected != nullptr) {
    if (expected->image != topo.image || expected->layers != topo.layers) {
      throw CheckpointError("checkpoint topology does not match the configured network");
    }
  }

  ck.network.seed = r.u64("network seed");
  ck.network.grids.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    auto& grids = ck.network.grids[l];
    grids.reserve(topo.module_count(l));
    for (std::size_t m = 0; m < topo.module_count(l); ++m) {
      const std::uint64_t guard_seed = r.u64("guard seed");
      const std::uint64_t guard_events = r.u64("guard counter");
      grids.emplace_back(topo.layers[l].neurons, topo.input_dims[l], guard_seed);
      grids.back().set_guard_state(guard_seed, guard_events);
      r.f64s(grids.back().weights());
    }
  }

  const std::size_t neurons = topo.layers.back().neurons.size();
  if (r.u8() != 0) {
    std::array<std::size_t, kClassCount> map{};
    for (auto& j : map) j = r.u64("label map");
    try {
      ck.labels = LabelMap(map, neurons);
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("invalid label map: ") + e.what());
    }
  }
  if (r.u8() != 0) {
    std::array<std::size_t, kClassCount> samples{};
    for (auto& s : samples) s = r.u64("advance cache");
    ck.cache_samples = samples;
  }
  ck.run_seed = r.u64("run seed");
  ck.blocks_completed = r.u64("block counter");
  if (r.remaining() != 0) {
    std::ostringstream msg;
    msg << "checkpoint has " << r.remaining() << " trailing bytes after offset " << r.position();
    throw CheckpointError(msg.str());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkTopology* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_checkpoint(bytes, expected);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::size_t checkpoint_header_size(const NetworkTopology& topology) {
  return 4 + 1 + 3 * 8 + topology.layer_count() * 8 * 8 + 8 + 16;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace deepsom
