#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "deepsom/aplearn.hpp"
#include "deepsom/dataio.hpp"
#include "deepsom/somcore.hpp"
#include "deepsom/topology.hpp"

namespace deepsom {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PGM: the header `P5 <w> <h> 255` and a newline, then raw bytes.
std::vector<std::uint8_t> encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Min-max scales values to 0..255; a constant input maps to 128.
std::vector<std::uint8_t> minmax_to_gray(std::span<const double> values);

/// Tiles the weight rows of a first-layer grid as side x side patches on a
/// neuron-grid mosaic with 1-pixel black separators and borders. Each tile
/// is min-max scaled on its own. The row length must be side * side.
GrayImage feature_atlas(const SomGrid& grid, std::size_t side);

/// Winner frequencies of the last layer over `indices`.
std::vector<std::size_t> usage_histogram(const Network& network, const Dataset& dataset,
                                         std::span<const std::size_t> indices,
                                         const KernelParams& kernels);

/// Counts laid out on the neuron grid, scaled by the maximum count.
GrayImage render_usage(std::span<const std::size_t> counts, GridShape shape);

/// Shannon entropy in bits of a count histogram.
double usage_entropy(std::span<const std::size_t> counts);

/// Share of all winners that fall on the assigned class neurons.
double assigned_share(std::span<const std::size_t> counts, const LabelMap& labels);

/// Backprojects one neuron into image space. First-layer neurons place their
/// weight patch at their receptive field; deeper neurons sum the stimuli of
/// their input neurons weighted by the connecting weights. Pixels reached by
/// several contributing patches are divided by that count. Returns raw
/// values over the unpadded image (use minmax_to_gray to render).
std::vector<double> optimal_stimulus(const Network& network, std::size_t layer, std::size_t module,
                                     std::size_t neuron);

}  // namespace deepsom
