#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deepsom/aplearn.hpp"
#include "deepsom/pretrain.hpp"
#include "deepsom/somcore.hpp"

namespace deepsom {

/// Everything a run depends on. Defaults reproduce the MNIST protocol:
/// a fixed 10,000-sample training subset, 20 blocks, full test set for
/// validation.
struct RunConfig {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::filesystem::path out_dir = "out";
  std::filesystem::path checkpoint_in;
  std::filesystem::path checkpoint_out;

  std::uint64_t seed = 1;
  std::size_t block_size = 10000;
  std::size_t n_blocks = 20;
  std::size_t train_subset = 10000;  ///< size of the fixed training pool
  bool resample_subset = false;      ///< redraw the pool for every block
  std::size_t validation_size = 0;   ///< 0 = whole test set

  ApParams ap{};
  KernelParams kernels{};
  PretrainSchedule schedule = PretrainSchedule::standard();

  std::size_t log_every = 1000;
  bool trace_trials = false;
  bool export_atlas = true;
  bool export_usage = true;
  bool export_stimulus = true;

  /// Sets one key from its text value; throws ConfigError on unknown keys
  /// or unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Applies `key=value` lines; blank lines and `#` comments are skipped.
  void apply_text(const std::string& text, const std::string& source = "<config>");
  void apply_file(const std::filesystem::path& path);

  /// Fills the four MNIST paths from a directory holding the standard file
  /// names, preferring uncompressed files over `.gz`.
  void use_data_dir(const std::filesystem::path& dir);

  void validate() const;

  /// Canonical `key=value` text of every field; parsing it back yields an
  /// identical configuration.
  std::string to_text() const;
};

std::string format_windows(const PretrainSchedule& schedule);
std::vector<std::optional<LayerWindow>> parse_windows(const std::string& text);

}  // namespace deepsom
