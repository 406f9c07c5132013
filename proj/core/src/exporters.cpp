#include "deepsom/exporters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "deepsom/error.hpp"
#include "deepsom/parallel.hpp"

namespace deepsom {

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) throw ConfigError("PGM raster size mismatch");
  std::ostringstream header;
  header << "P5 " << image.width << ' ' << image.height << " 255\n";
  const auto text = header.str();
  std::vector<std::uint8_t> out(text.begin(), text.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  const auto bytes = encode_pgm(image);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<std::uint8_t> minmax_to_gray(std::span<const double> values) {
  std::vector<std::uint8_t> out(values.size(), 128);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (values[i] - *lo) / range));
  }
  return out;
}

GrayImage feature_atlas(const SomGrid& grid, std::size_t side) {
  if (side * side != grid.input_dim()) {
    std::ostringstream msg;
    msg << "feature atlas needs " << side << "x" << side << " patches but rows have " << grid.input_dim()
        << " weights";
    throw ConfigError(msg.str());
  }
  const auto shape = grid.shape();
  GrayImage img;
  img.width = shape.cols * side + shape.cols + 1;
  img.height = shape.rows * side + shape.rows + 1;
  img.pixels.assign(img.width * img.height, 0);
  for (std::size_t j = 0; j < grid.neuron_count(); ++j) {
    const auto tile = minmax_to_gray(grid.row(j));
    const std::size_t x0 = (j % shape.cols) * (side + 1) + 1;
    const std::size_t y0 = (j / shape.cols) * (side + 1) + 1;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) img.pixels[(y0 + y) * img.width + x0 + x] = tile[y * side + x];
    }
  }
  return img;
}

std::vector<std::size_t> usage_histogram(const Network& network, const Dataset& dataset,
                                         std::span<const std::size_t> indices,
                                         const KernelParams& kernels) {
  std::vector<std::size_t> winners(indices.size());
  for_each_forward(
      network, [&](std::size_t i) { return dataset.image(indices[i]); }, indices.size(), kernels,
      [&](std::size_t i, const NetworkState& state) { winners[i] = state.output_winner(); });
  std::vector<std::size_t> counts(network.topology.layers.back().neurons.size(), 0);
  for (const auto w : winners) ++counts[w];
  return counts;
}

GrayImage render_usage(std::span<const std::size_t> counts, GridShape shape) {
  if (counts.size() != shape.size()) throw ConfigError("usage counts do not match the neuron grid");
  GrayImage img{shape.cols, shape.rows, std::vector<std::uint8_t>(shape.size(), 0)};
  const std::size_t peak = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  if (peak == 0) return img;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    img.pixels[j] = static_cast<std::uint8_t>(
        std::lround(255.0 * static_cast<double>(counts[j]) / static_cast<double>(peak)));
  }
  return img;
}

double usage_entropy(std::span<const std::size_t> counts) {
  double total = 0.0;
  for (const auto c : counts) total += static_cast<double>(c);
  if (total == 0.0) return 0.0;
  double h = 0.0;
  for (const auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

double assigned_share(std::span<const std::size_t> counts, const LabelMap& labels) {
  double total = 0.0;
  double assigned = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    total += static_cast<double>(counts[j]);
    if (labels.class_of(j) != LabelMap::kUnassigned) assigned += static_cast<double>(counts[j]);
  }
  return total == 0.0 ? 0.0 : assigned / total;
}

std::vector<double> optimal_stimulus(const Network& network, std::size_t layer, std::size_t module,
                                     std::size_t neuron) {
  const auto& topo = network.topology;
  if (layer >= topo.layer_count() || module >= topo.module_count(layer) ||
      neuron >= topo.layers[layer].neurons.size()) {
    throw ConfigError("stimulus target outside the network");
  }

  // coefficients[m][j]: weight of neuron j of module m in the current layer.
  std::vector<std::vector<double>> coefficients(topo.module_count(layer));
  coefficients[module].assign(topo.layers[layer].neurons.size(), 0.0);
  coefficients[module][neuron] = 1.0;

  for (std::size_t l = layer; l > 0; --l) {
    const std::size_t below_neurons = topo.layers[l - 1].neurons.size();
    std::vector<std::vector<double>> below(topo.module_count(l - 1));
    for (std::size_t m = 0; m < coefficients.size(); ++m) {
      if (coefficients[m].empty()) continue;
      const auto& grid = network.grid(l, m);
      const auto& sources = topo.wiring[l][m];
      for (std::size_t j = 0; j < coefficients[m].size(); ++j) {
        const double c = coefficients[m][j];
        if (c == 0.0) continue;
        const auto row = grid.row(j);
        for (std::size_t s = 0; s < sources.size(); ++s) {
          auto& target = below[sources[s]];
          if (target.empty()) target.assign(below_neurons, 0.0);
          const double* w = row.data() + s * below_neurons;
          for (std::size_t k = 0; k < below_neurons; ++k) target[k] += c * w[k];
        }
      }
    }
    coefficients = std::move(below);
  }

  const auto padded = topo.padded_image();
  std::vector<double> canvas(padded.size(), 0.0);
  std::vector<std::size_t> coverage(padded.size(), 0);
  for (std::size_t m = 0; m < coefficients.size(); ++m) {
    if (coefficients[m].empty()) continue;
    const auto& grid = network.grid(0, m);
    const auto& offsets = topo.wiring[0][m];
    std::vector<double> patch(offsets.size(), 0.0);
    bool any = false;
    for (std::size_t j = 0; j < coefficients[m].size(); ++j) {
      const double c = coefficients[m][j];
      if (c == 0.0) continue;
      any = true;
      const auto row = grid.row(j);
      for (std::size_t p = 0; p < patch.size(); ++p) patch[p] += c * row[p];
    }
    if (!any) continue;
    for (std::size_t p = 0; p < offsets.size(); ++p) {
      canvas[offsets[p]] += patch[p];
      ++coverage[offsets[p]];
    }
  }

  const std::size_t pad = topo.layers.front().pad;
  std::vector<double> image(topo.image.size(), 0.0);
  for (std::size_t r = 0; r < topo.image.rows; ++r) {
    for (std::size_t c = 0; c < topo.image.cols; ++c) {
      const std::size_t src = (r + pad) * padded.cols + c + pad;
      if (coverage[src] > 0) image[r * topo.image.cols + c] = canvas[src] / static_cast<double>(coverage[src]);
    }
  }
  return image;
}

}  // namespace deepsom
