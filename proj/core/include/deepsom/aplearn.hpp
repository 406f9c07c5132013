#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "deepsom/dataio.hpp"
#include "deepsom/somcore.hpp"
#include "deepsom/topology.hpp"

namespace deepsom {

inline constexpr std::size_t kClassCount = 10;

/// Advance-propagation hyperparameters. `layers` is n in the layer decay
/// r^(n-l); 0 means "use the network depth".
struct ApParams {
  double rho_base = 0.20;
  double beta = 0.4;
  double r = 0.7;
  std::size_t layers = 5;
  /// Scale each Hebbian term to unit length before the update.
  bool unit_hebbian = true;

  void validate() const;
};

/// r^(n-l) for 1-based layer l, with 0^0 = 1.
double layer_decay(double r, std::size_t n, std::size_t layer_1based);

/// Per-class representative neuron of the last layer and its inverse.
class LabelMap {
 public:
  static constexpr int kUnassigned = -1;

  LabelMap() = default;
  explicit LabelMap(std::size_t neurons);
  LabelMap(std::array<std::size_t, kClassCount> class_neurons, std::size_t neurons);

  std::size_t neuron_for(int cls) const { return class_neuron_[static_cast<std::size_t>(cls)]; }
  /// Class coded by `neuron`, or kUnassigned.
  int class_of(std::size_t neuron) const;
  const std::array<std::size_t, kClassCount>& class_neurons() const { return class_neuron_; }
  std::size_t neuron_count() const { return neurons_; }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.neurons_ == b.neurons_ && a.class_neuron_ == b.class_neuron_;
  }

 private:
  std::size_t neurons_ = 0;
  std::array<std::size_t, kClassCount> class_neuron_{};
  std::vector<int> neuron_class_;
};

/// counts[neuron][class] of last-layer winners.
using WinnerCounts = std::vector<std::array<std::size_t, kClassCount>>;

WinnerCounts count_winners(const Network& network, const Dataset& dataset,
                           std::span<const std::size_t> indices, const KernelParams& kernels);

/// Greedy matching: (class, neuron) pairs are taken in descending count
/// order, ties to the lower class and then the lower neuron, skipping any
/// pair whose class or neuron is already taken. Throws CalibrationError
/// when fewer than ten distinct neurons ever won.
LabelMap greedy_assign(const WinnerCounts& counts);

LabelMap assign_labels(const Network& network, const Dataset& dataset,
                       std::span<const std::size_t> indices, const KernelParams& kernels);

/// Predicted class for the winner of the last layer, or LabelMap::kUnassigned.
int predict(const NetworkState& state, const LabelMap& labels);
int classify(const Network& network, std::span<const double> image, const LabelMap& labels,
             const KernelParams& kernels);

/// One stored advance input per class.
class AdvanceCache {
 public:
  struct Entry {
    std::size_t sample = 0;          ///< index into the training dataset
    std::vector<double> image;
    std::uint64_t staleness = 0;     ///< trials of this class since last refresh
  };

  bool has(int cls) const { return entries_[static_cast<std::size_t>(cls)].has_value(); }
  const Entry& at(int cls) const;
  void store(int cls, std::size_t sample, std::span<const double> image);
  /// Counts one trial of `cls` that did not refresh the entry.
  void age(int cls);

  /// Sample indices of every class (throws if any class is empty).
  std::array<std::size_t, kClassCount> sample_indices() const;
  static AdvanceCache from_indices(const Dataset& dataset, const std::array<std::size_t, kClassCount>& indices);

 private:
  std::array<std::optional<Entry>, kClassCount> entries_;
};

/// For each class: the first sample of that class in `indices` that
/// classifies correctly, else the one whose last-layer response at the
/// class neuron is largest. Throws DataError if a class has no sample.
AdvanceCache warm_cache(const Network& network, const Dataset& dataset,
                        std::span<const std::size_t> indices, const LabelMap& labels,
                        const KernelParams& kernels);

/// beta * advance + (1 - beta) * target, elementwise.
std::vector<double> blend(std::span<const double> advance, std::span<const double> target, double beta);

/// Re-runs the target with the after-effect of a preceding advance pass:
/// every layer consumes the blend of the advance pass's input to that
/// layer and the target's input computed from the blended pass below it.
NetworkState ap_pass(const Network& network, std::span<const double> target_image,
                     const NetworkState& advance, const ApParams& params, const KernelParams& kernels);

/// Applies the layer-decayed update r^(n-l) * rho_base around the winners
/// of `state`, using state.inputs as the Hebbian term and sigma_update as
/// the kernel width. Used for the blended update and for the plain
/// positive and negative updates of a trial.
void ap_update(Network& network, const NetworkState& state, const ApParams& params,
               const KernelParams& kernels, UpdateSign sign = UpdateSign::Attract);

struct TrialOutcome {
  int predicted = LabelMap::kUnassigned;
  bool correct = false;
  bool ap_invoked = false;
  bool cache_refreshed = false;
  std::size_t forward_passes = 0;
};

/// One supervised trial on (sample, label). A correct prediction reinforces
/// the plain-pass winners and refreshes the cache; a wrong one repels them,
/// replays the cached advance input and learns on the blended pass.
TrialOutcome learning_trial(Network& network, const Dataset& dataset, std::size_t sample,
                            AdvanceCache& cache, const LabelMap& labels, const ApParams& params,
                            const KernelParams& kernels);

}  // namespace deepsom
