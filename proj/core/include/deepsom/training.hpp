#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepsom/aplearn.hpp"
#include "deepsom/checkpoint.hpp"
#include "deepsom/config.hpp"
#include "deepsom/dataio.hpp"
#include "deepsom/topology.hpp"

namespace deepsom {

struct EvalResult {
  std::size_t errors = 0;
  std::size_t total = 0;
  std::vector<std::size_t> usage;  ///< last-layer winner counts

  double error_rate() const { return total == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(total); }
};

/// Classifies every indexed sample with learning disabled. Unassigned
/// winners count as errors. Samples may be spread over worker threads;
/// the counts do not depend on the split.
EvalResult evaluate(const Network& network, const Dataset& dataset, std::span<const std::size_t> indices,
                    const LabelMap& labels, const KernelParams& kernels);

struct BlockMetrics {
  std::size_t block = 0;
  double error_rate = 0.0;
  std::size_t trials = 0;
  std::size_t ap_invocations = 0;
  double seconds = 0.0;
  std::vector<std::size_t> usage;  ///< validation winner counts, not written to CSV
};

using TrialObserver = std::function<void(std::size_t sample, int label, const TrialOutcome&)>;

/// Runs every trial of the block stream, then scores the validation set.
BlockMetrics run_block(Network& network, const Dataset& train, SampleStream& block,
                       const Dataset& validation, std::span<const std::size_t> validation_indices,
                       AdvanceCache& cache, const LabelMap& labels, const ApParams& params,
                       const KernelParams& kernels, std::size_t block_index,
                       const TrialObserver& observer = {});

/// `trial idx=<i> label=<c> pred=<p> correct=<b> ap=<b>`; unassigned predictions print -1.
std::string format_trial(std::size_t sample, int label, const TrialOutcome& outcome);

/// `block,error_rate,ap_invocations,seconds` with one row per block.
std::string curves_csv(std::span<const BlockMetrics> rows);
void write_curves_csv(const std::filesystem::path& path, std::span<const BlockMetrics> rows);
std::vector<BlockMetrics> read_curves_csv(const std::filesystem::path& path);

/// Training and validation data as selected by a configuration.
struct Datasets {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> validation;
};

Datasets load_datasets(const RunConfig& config);

/// Training pool for a block: the seeded fixed subset, or a fresh draw per
/// block when resample_subset is set.
std::vector<std::size_t> training_pool(const RunConfig& config, std::size_t population, std::uint64_t block);

/// Mutable state of one experiment, convertible to and from checkpoints.
struct Session {
  RunConfig config;
  Network network;
  std::optional<LabelMap> labels;
  std::optional<AdvanceCache> cache;
  std::uint64_t blocks_completed = 0;

  static Session fresh(const RunConfig& config, ImageShape image, const std::vector<LayerSpec>& specs);
  static Session restore(const RunConfig& config, const Checkpoint& checkpoint, const Dataset& train);
  Checkpoint checkpoint() const;
};

/// Seeded pre-training over the training pool; progress lines go to `log`.
void run_pretraining(Session& session, const Dataset& train, std::ostream* log);

/// Label assignment and cache warm-up over the training pool.
void run_calibration(Session& session, const Dataset& train);

/// Baseline evaluation followed by config.n_blocks learning blocks. Row 0
/// of the result is the pre-trial baseline. `on_block` sees each row as it
/// completes; trial traces go to `log` when config.trace_trials is set.
std::vector<BlockMetrics> run_training(Session& session, const Datasets& data, std::ostream* log,
                                       const std::function<void(const BlockMetrics&)>& on_block = {});

/// Writes `<dir>/manifest.txt`: the command line and the resolved config.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& config);

}  // namespace deepsom
