#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "deepsom/aplearn.hpp"
#include "deepsom/topology.hpp"

namespace deepsom {

// Binary layout, all integers little-endian:
//
//   "DSOM"  u8 version
//   u64 image_rows  u64 image_cols  u64 layer_count
//   per layer: u64 map_rows map_cols neuron_rows neuron_cols rf stride pad input_dim
//   u64 network_seed
//   per layer, per module: u64 guard_seed  u64 guard_events
//                          f64 weights[neurons * input_dim]   (row-major)
//   u8 has_labels   [u64 neuron per class 0..9]
//   u8 has_cache    [u64 training-sample index per class 0..9]
//   u64 run_seed    u64 blocks_completed
inline constexpr std::array<char, 4> kCheckpointMagic{'D', 'S', 'O', 'M'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  Network network;
  std::optional<LabelMap> labels;
  std::optional<std::array<std::size_t, kClassCount>> cache_samples;
  std::uint64_t run_seed = 0;
  std::uint64_t blocks_completed = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);

/// Decodes and validates a checkpoint. When `expected` is given the
/// embedded topology must match it layer for layer.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             const NetworkTopology* expected = nullptr);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkTopology* expected = nullptr);

/// Byte length of everything before the first weight block.
std::size_t checkpoint_header_size(const NetworkTopology& topology);

/// FNV-1a 64 over a byte buffer; used to compare checkpoints cheaply.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace deepsom
