#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deepsom/parallel.hpp"
#include "deepsom/somcore.hpp"

namespace deepsom {

struct ImageShape {
  std::size_t rows = 28;
  std::size_t cols = 28;

  constexpr std::size_t size() const { return rows * cols; }
  friend constexpr bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Geometry of one layer. For the first layer rf, stride and pad are in
/// pixels; for later layers rf and stride count modules of the previous
/// layer and pad must be zero.
struct LayerSpec {
  std::size_t map_rows = 1;
  std::size_t map_cols = 1;
  GridShape neurons{};
  std::size_t rf = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t module_count() const { return map_rows * map_cols; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// How a layer's modules read their input.
enum class WiringKind : std::uint8_t {
  Patches,  ///< square pixel window of the zero-padded image
  Local,    ///< square window of previous-layer modules
  Full,     ///< every module sees the entire previous layer
};

/// Validated layer chain with materialized wiring tables.
struct NetworkTopology {
  ImageShape image{};
  std::vector<LayerSpec> layers;
  std::vector<WiringKind> kinds;
  std::vector<std::size_t> input_dims;
  /// wiring[l][m]: padded-image pixel offsets (first layer) or ordered source
  /// module indices of layer l-1 (later layers).
  std::vector<std::vector<std::vector<std::size_t>>> wiring;

  std::size_t layer_count() const { return layers.size(); }
  std::size_t module_count(std::size_t layer) const { return layers[layer].module_count(); }
  ImageShape padded_image() const;
  std::uint64_t connection_count(std::size_t layer) const;
  std::uint64_t total_connections() const;
};

/// The five-layer MNIST network: 7x7, 5x5, 5x5, 5x5 and 1x1 module maps.
std::vector<LayerSpec> mnist_layer_specs();

/// Validates the geometry and builds the wiring. Throws ConfigError naming
/// the offending layer (1-based) when the shapes do not tile.
NetworkTopology resolve_topology(ImageShape image, std::vector<LayerSpec> specs);

/// A topology together with its SOM weights; grids[l][m] is module m of layer l.
struct Network {
  NetworkTopology topology;
  std::vector<std::vector<SomGrid>> grids;
  std::uint64_t seed = 0;

  std::size_t layer_count() const { return grids.size(); }
  const SomGrid& grid(std::size_t layer, std::size_t module) const { return grids[layer][module]; }
  SomGrid& grid(std::size_t layer, std::size_t module) { return grids[layer][module]; }
  std::uint64_t weight_count() const;

  friend bool operator==(const Network& a, const Network& b) { return a.seed == b.seed && a.grids == b.grids; }
};

/// Resolves the topology and initializes every row from a seeded uniform
/// draw followed by normalization. Module (l, m) gets its own stream so the
/// result does not depend on evaluation order.
Network build_network(ImageShape image, const std::vector<LayerSpec>& specs, std::uint64_t seed);

/// One layer's outputs at one time step.
struct LayerActivation {
  std::vector<ActivationResult> modules;

  friend bool operator==(const LayerActivation&, const LayerActivation&) = default;
};

enum class PassTag : std::uint8_t { Target, Advance, Blended };

/// Result of a pass through the network. inputs[l][m] is the vector module
/// m of layer l consumed (normalized patch, gathered or blended activations).
struct NetworkState {
  PassTag tag = PassTag::Target;
  std::vector<LayerActivation> layers;
  std::vector<std::vector<std::vector<double>>> inputs;

  std::size_t output_winner() const { return layers.back().modules.front().winner; }
  friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

/// Zero-pads the image, cuts the first-layer windows and L2-normalizes each
/// one; all-zero windows stay zero.
std::vector<std::vector<double>> extract_patches(const NetworkTopology& topology,
                                                 std::span<const double> image);

/// Concatenates the outputs of the source modules wired to (layer, module).
/// layer must be >= 1 and prev must be the activation of layer - 1.
void gather_input(const NetworkTopology& topology, std::size_t layer, std::size_t module,
                  const LayerActivation& prev, std::span<double> out);
std::vector<double> gather_input(const NetworkTopology& topology, std::size_t layer,
                                 std::size_t module, const LayerActivation& prev);

/// Evaluates every module of one layer on the given inputs.
void activate_layer(const Network& network, std::size_t layer,
                    const std::vector<std::vector<double>>& inputs, double sigma,
                    LayerActivation& out);

/// Plain feedforward pass over the first `depth` layers (all when 0).
NetworkState forward(const Network& network, std::span<const double> image,
                     const KernelParams& kernels, std::size_t depth = 0);

/// Forward passes of several images sharing each weight row while it is
/// cache-resident. Results equal forward() image by image.
std::vector<NetworkState> forward_batch(const Network& network,
                                        std::span<const std::span<const double>> images,
                                        const KernelParams& kernels, std::size_t depth = 0);

inline constexpr std::size_t kForwardBatch = 16;

/// Runs forward passes over `count` images (images(i) yields a span) in
/// cache-friendly batches spread across the worker pool and calls
/// visit(i, state) for each one. visit may run concurrently for distinct i.
template <typename Images, typename Visit>
void for_each_forward(const Network& network, const Images& images, std::size_t count,
                      const KernelParams& kernels, Visit&& visit) {
  const std::size_t chunks = (count + kForwardBatch - 1) / kForwardBatch;
  parallel_for(chunks, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kForwardBatch;
    const std::size_t end = std::min(count, begin + kForwardBatch);
    std::vector<std::span<const double>> batch;
    batch.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) batch.push_back(images(i));
    const auto states = forward_batch(network, batch, kernels);
    for (std::size_t i = begin; i < end; ++i) visit(i, states[i - begin]);
  });
}

}  // namespace deepsom
