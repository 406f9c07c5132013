#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deepsom/dataio.hpp"
#include "deepsom/somcore.hpp"
#include "deepsom/topology.hpp"

namespace deepsom {

/// Inclusive range of global iterations (1-based) during which a layer is plastic.
struct LayerWindow {
  std::size_t first = 1;
  std::size_t last = 1;

  std::size_t length() const { return last - first + 1; }
  bool contains(std::size_t iteration) const { return iteration >= first && iteration <= last; }
  friend bool operator==(const LayerWindow&, const LayerWindow&) = default;
};

/// Staggered critical periods for unsupervised pre-training. Within its own
/// window every layer sweeps the rate and kernel width linearly from start
/// to end.
struct PretrainSchedule {
  std::size_t iterations = 10000;
  std::vector<std::optional<LayerWindow>> windows;
  double rho_start = 1.0;
  double rho_end = 0.0;
  double sigma_start = 3.5;
  double sigma_end = 0.0;

  /// Layers 1-4 start at 1, 2501, 5001 and 7501 of 10,000; layer 5 is frozen.
  static PretrainSchedule standard();

  /// Same staggering compressed into `iterations` steps for `layers`
  /// layers, the last one frozen.
  static PretrainSchedule staggered(std::size_t iterations, std::size_t layers);

  void validate(std::size_t layer_count) const;
  bool active(std::size_t layer, std::size_t iteration) const;
};

/// start + (end - start) * step / (total - 1); a single-step ramp returns start.
double ramp(std::size_t step, std::size_t total, double start, double end);

struct PretrainProgress {
  std::size_t iteration = 0;
  std::uint32_t active_mask = 0;  ///< bit l set when layer l+1 updated
  std::vector<double> rho;        ///< per layer, NaN when inactive
  std::vector<double> sigma;
};

struct PretrainOptions {
  /// Called after iterations that are multiples of `report_every` (and the last one).
  std::function<void(const PretrainProgress&)> on_progress;
  std::size_t report_every = 0;
};

/// Runs the schedule: each iteration draws one image, forwards it and lets
/// every active layer pull its modules' winners towards their inputs.
void pretrain(Network& network, const Dataset& dataset, SampleStream& stream,
              const PretrainSchedule& schedule, const KernelParams& kernels,
              const PretrainOptions& options = {});

/// Mean cosine similarity over all 4-adjacent neuron pairs of a grid.
double neighbor_similarity(const SomGrid& grid);

/// The `pretrain iter=... layer_active=... rho=... sigma=...` log line.
std::string format_progress(const PretrainProgress& progress);

}  // namespace deepsom
