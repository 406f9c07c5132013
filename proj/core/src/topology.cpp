#include "deepsom/topology.hpp"

#include <sstream>

#include "deepsom/error.hpp"
#include "deepsom/parallel.hpp"
#include "deepsom/random.hpp"

namespace deepsom {
namespace {

[[noreturn]] void geometry_error(std::size_t layer, const std::string& what) {
  std::ostringstream msg;
  msg << "layer " << layer + 1 << ": " << what;
  throw ConfigError(msg.str());
}

// Number of window positions along one axis, or 0 when they do not tile.
std::size_t positions(std::size_t extent, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0 || window > extent) return 0;
  if ((extent - window) % stride != 0) return 0;
  return (extent - window) / stride + 1;
}

}  // namespace

ImageShape NetworkTopology::padded_image() const {
  const std::size_t pad = layers.empty() ? 0 : layers.front().pad;
  return {image.rows + 2 * pad, image.cols + 2 * pad};
}

std::uint64_t NetworkTopology::connection_count(std::size_t layer) const {
  const auto& spec = layers[layer];
  return static_cast<std::uint64_t>(spec.module_count()) * spec.neurons.size() * input_dims[layer];
}

std::uint64_t NetworkTopology::total_connections() const {
  std::uint64_t total = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) total += connection_count(l);
  return total;
}

std::vector<LayerSpec> mnist_layer_specs() {
  const GridShape neurons{10, 10};
  return {
      {7, 7, neurons, 6, 4, 1},
      {5, 5, neurons, 3, 1, 0},
      {5, 5, neurons, 5, 1, 0},
      {5, 5, neurons, 5, 1, 0},
      {1, 1, neurons, 5, 1, 0},
  };
}

NetworkTopology resolve_topology(ImageShape image, std::vector<LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  if (image.size() == 0) throw ConfigError("image shape must be non-empty");

  NetworkTopology topo;
  topo.image = image;
  topo.layers = std::move(specs);
  const std::size_t n = topo.layers.size();
  topo.kinds.resize(n);
  topo.input_dims.resize(n);
  topo.wiring.resize(n);

  for (std::size_t l = 0; l < n; ++l) {
    const auto& spec = topo.layers[l];
    if (spec.module_count() == 0) geometry_error(l, "module map is empty");
    if (spec.neurons.size() == 0) geometry_error(l, "neuron grid is empty");
    auto& wiring = topo.wiring[l];
    wiring.resize(spec.module_count());

    if (l == 0) {
      const std::size_t prows = image.rows + 2 * spec.pad;
      const std::size_t pcols = image.cols + 2 * spec.pad;
      const std::size_t pr = positions(prows, spec.rf, spec.stride);
      const std::size_t pc = positions(pcols, spec.rf, spec.stride);
      if (pr != spec.map_rows || pc != spec.map_cols) {
        std::ostringstream msg;
        msg << spec.rf << "x" << spec.rf << " patches at stride " << spec.stride << " over a "
            << prows << "x" << pcols << " padded image do not form a " << spec.map_rows << "x"
            << spec.map_cols << " map";
        geometry_error(l, msg.str());
      }
      topo.kinds[l] = WiringKind::Patches;
      topo.input_dims[l] = spec.rf * spec.rf;
      for (std::size_t mr = 0; mr < spec.map_rows; ++mr) {
        for (std::size_t mc = 0; mc < spec.map_cols; ++mc) {
          auto& offsets = wiring[mr * spec.map_cols + mc];
          offsets.reserve(spec.rf * spec.rf);
          for (std::size_t y = 0; y < spec.rf; ++y) {
            for (std::size_t x = 0; x < spec.rf; ++x) {
              offsets.push_back((mr * spec.stride + y) * pcols + mc * spec.stride + x);
            }
          }
        }
      }
      continue;
    }

    if (spec.pad != 0) geometry_error(l, "padding is only defined for the first layer");
    const auto& prev = topo.layers[l - 1];
    const std::size_t pr = positions(prev.map_rows, spec.rf, spec.stride);
    const std::size_t pc = positions(prev.map_cols, spec.rf, spec.stride);
    if (pr == 0 || pc == 0) {
      std::ostringstream msg;
      msg << spec.rf << "x" << spec.rf << " receptive field at stride " << spec.stride
          << " does not tile the previous " << prev.map_rows << "x" << prev.map_cols << " map";
      geometry_error(l, msg.str());
    }
    const std::size_t prev_neurons = prev.neurons.size();
    topo.input_dims[l] = spec.rf * spec.rf * prev_neurons;

    if (pr == spec.map_rows && pc == spec.map_cols) {
      topo.kinds[l] = WiringKind::Local;
      for (std::size_t mr = 0; mr < spec.map_rows; ++mr) {
        for (std::size_t mc = 0; mc < spec.map_cols; ++mc) {
          auto& sources = wiring[mr * spec.map_cols + mc];
          for (std::size_t y = 0; y < spec.rf; ++y) {
            for (std::size_t x = 0; x < spec.rf; ++x) {
              sources.push_back((mr * spec.stride + y) * prev.map_cols + mc * spec.stride + x);
            }
          }
        }
      }
    } else if (pr == 1 && pc == 1) {
      // A single window position covering the whole previous map: every
      // module of this layer is fully connected to it.
      topo.kinds[l] = WiringKind::Full;
      for (auto& sources : wiring) {
        for (std::size_t s = 0; s < prev.module_count(); ++s) sources.push_back(s);
      }
    } else {
      std::ostringstream msg;
      msg << "receptive field yields a " << pr << "x" << pc << " position grid but the layer has a "
          << spec.map_rows << "x" << spec.map_cols << " module map";
      geometry_error(l, msg.str());
    }
  }
  return topo;
}

std::uint64_t Network::weight_count() const {
  std::uint64_t total = 0;
  for (const auto& layer : grids) {
    for (const auto& g : layer) total += g.weights().size();
  }
  return total;
}

Network build_network(ImageShape image, const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  Network net;
  net.topology = resolve_topology(image, specs);
  net.seed = seed;
  const auto& topo = net.topology;
  net.grids.resize(topo.layer_count());
  for (std::size_t l = 0; l < topo.layer_count(); ++l) {
    auto& layer = net.grids[l];
    layer.reserve(topo.module_count(l));
    for (std::size_t m = 0; m < topo.module_count(l); ++m) {
      layer.emplace_back(topo.layers[l].neurons, topo.input_dims[l], derive_seed(seed, l, m, 0x67));
      layer.back().randomize(derive_seed(seed, l, m));
    }
  }
  return net;
}

std::vector<std::vector<double>> extract_patches(const NetworkTopology& topology,
                                                 std::span<const double> image) {
  if (image.size() != topology.image.size()) {
    std::ostringstream msg;
    msg << "image has " << image.size() << " pixels, expected " << topology.image.rows << "x"
        << topology.image.cols;
    throw DataError(msg.str());
  }
  const auto padded = topology.padded_image();
  const std::size_t pad = topology.layers.front().pad;
  std::vector<double> canvas(padded.size(), 0.0);
  for (std::size_t r = 0; r < topology.image.rows; ++r) {
    for (std::size_t c = 0; c < topology.image.cols; ++c) {
      canvas[(r + pad) * padded.cols + c + pad] = image[r * topology.image.cols + c];
    }
  }

  const auto& wiring = topology.wiring.front();
  std::vector<std::vector<double>> patches(wiring.size());
  for (std::size_t m = 0; m < wiring.size(); ++m) {
    auto& patch = patches[m];
    patch.reserve(wiring[m].size());
    for (const auto offset : wiring[m]) patch.push_back(canvas[offset]);
    const double norm = l2_norm(patch);
    if (norm > 0.0) {
      for (auto& v : patch) v /= norm;
    }
  }
  return patches;
}

void gather_input(const NetworkTopology& topology, std::size_t layer, std::size_t module,
                  const LayerActivation& prev, std::span<double> out) {
  if (layer == 0 || layer >= topology.layer_count()) {
    throw ConfigError("gather_input applies to layers after the first");
  }
  if (out.size() != topology.input_dims[layer]) throw ConfigError("gather buffer has the wrong length");
  std::size_t pos = 0;
  for (const auto source : topology.wiring[layer][module]) {
    for (const double v : prev.modules[source].values) out[pos++] = v;
  }
}

std::vector<double> gather_input(const NetworkTopology& topology, std::size_t layer,
                                 std::size_t module, const LayerActivation& prev) {
  std::vector<double> out(topology.input_dims[layer]);
  gather_input(topology, layer, module, prev, out);
  return out;
}

void activate_layer(const Network& network, std::size_t layer,
                    const std::vector<std::vector<double>>& inputs, double sigma,
                    LayerActivation& out) {
  const auto& grids = network.grids[layer];
  if (inputs.size() != grids.size()) throw ConfigError("one input vector per module is required");
  out.modules.resize(grids.size());
  parallel_for(grids.size(), [&](std::size_t m) {
    const auto& grid = grids[m];
    std::vector<double> responses(grid.neuron_count());
    inner_products(grid, inputs[m], responses);
    wsa_output(responses, grid.shape(), sigma, out.modules[m]);
  });
}

NetworkState forward(const Network& network, std::span<const double> image,
                     const KernelParams& kernels, std::size_t depth) {
  const auto& topo = network.topology;
  if (depth == 0 || depth > topo.layer_count()) depth = topo.layer_count();

  NetworkState state;
  state.tag = PassTag::Target;
  state.layers.resize(depth);
  state.inputs.resize(depth);
  state.inputs[0] = extract_patches(topo, image);
  activate_layer(network, 0, state.inputs[0], kernels.sigma_out, state.layers[0]);
  for (std::size_t l = 1; l < depth; ++l) {
    auto& inputs = state.inputs[l];
    inputs.assign(topo.module_count(l), std::vector<double>(topo.input_dims[l]));
    for (std::size_t m = 0; m < inputs.size(); ++m) {
      if (topo.kinds[l] == WiringKind::Full && m > 0) {
        inputs[m] = inputs[0];
      } else {
        gather_input(topo, l, m, state.layers[l - 1], inputs[m]);
      }
    }
    activate_layer(network, l, inputs, kernels.sigma_out, state.layers[l]);
  }
  return state;
}

std::vector<NetworkState> forward_batch(const Network& network,
                                        std::span<const std::span<const double>> images,
                                        const KernelParams& kernels, std::size_t depth) {
  const auto& topo = network.topology;
  if (depth == 0 || depth > topo.layer_count()) depth = topo.layer_count();
  const std::size_t batch = images.size();

  std::vector<NetworkState> states(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    states[b].layers.resize(depth);
    states[b].inputs.resize(depth);
    states[b].inputs[0] = extract_patches(topo, images[b]);
  }

  std::vector<double> responses;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t modules = topo.module_count(l);
    if (l > 0) {
      for (auto& state : states) {
        auto& inputs = state.inputs[l];
        inputs.assign(modules, std::vector<double>(topo.input_dims[l]));
        for (std::size_t m = 0; m < modules; ++m) {
          if (topo.kinds[l] == WiringKind::Full && m > 0) {
            inputs[m] = inputs[0];
          } else {
            gather_input(topo, l, m, state.layers[l - 1], inputs[m]);
          }
        }
      }
    }
    for (auto& state : states) state.layers[l].modules.resize(modules);
    for (std::size_t m = 0; m < modules; ++m) {
      const auto& grid = network.grids[l][m];
      const std::size_t neurons = grid.neuron_count();
      responses.assign(batch * neurons, 0.0);
      for (std::size_t j = 0; j < neurons; ++j) {
        const auto row = grid.row(j);
        std::size_t b = 0;
        for (; b + 4 <= batch; b += 4) {
          double out[4];
          dot4(row, states[b].inputs[l][m].data(), states[b + 1].inputs[l][m].data(),
               states[b + 2].inputs[l][m].data(), states[b + 3].inputs[l][m].data(), out);
          for (std::size_t k = 0; k < 4; ++k) responses[(b + k) * neurons + j] = out[k];
        }
        for (; b < batch; ++b) responses[b * neurons + j] = dot(row, states[b].inputs[l][m]);
      }
      for (std::size_t b = 0; b < batch; ++b) {
        wsa_output(std::span<const double>(responses).subspan(b * neurons, neurons), grid.shape(),
                   kernels.sigma_out, states[b].layers[l].modules[m]);
      }
    }
  }
  return states;
}

}  // namespace deepsom
