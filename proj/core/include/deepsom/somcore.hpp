#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace deepsom {

/// Shape of a neuron grid. Neurons are indexed row-major.
struct GridShape {
  std::size_t rows = 10;
  std::size_t cols = 10;

  constexpr std::size_t size() const { return rows * cols; }
  friend constexpr bool operator==(const GridShape&, const GridShape&) = default;
};

/// Output and update kernel widths. They are kept apart because the
/// activation and the supervised update use different values.
struct KernelParams {
  double sigma_out = 0.8;
  double sigma_update = 0.4;

  void validate() const;
};

enum class KernelSelect { Output, Update };

/// Direction of a competitive update: towards the input or away from it.
enum class UpdateSign : int { Attract = 1, Repel = -1 };

/// Gaussian factors at or below this are treated as zero by updates.
inline constexpr double kKernelCutoff = 1e-12;
/// Rows whose norm drops below this after an update are re-seeded.
inline constexpr double kDegenerateNorm = 1e-12;

/// One self-organizing-map module: a grid of neurons, each holding a
/// unit-norm weight row of length input_dim.
class SomGrid {
 public:
  SomGrid() = default;
  SomGrid(GridShape shape, std::size_t input_dim, std::uint64_t guard_seed = 0);

  const GridShape& shape() const { return shape_; }
  std::size_t neuron_count() const { return shape_.size(); }
  std::size_t input_dim() const { return input_dim_; }

  std::span<double> row(std::size_t neuron);
  std::span<const double> row(std::size_t neuron) const;

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }

  /// Seed and event counter of the degenerate-row guard. Together they fix
  /// the replacement vector of the next guarded row.
  std::uint64_t guard_seed() const { return guard_seed_; }
  std::uint64_t guard_events() const { return guard_events_; }
  void set_guard_state(std::uint64_t seed, std::uint64_t events) {
    guard_seed_ = seed;
    guard_events_ = events;
  }

  /// Fills every row uniformly from (-1, 1) and normalizes it.
  void randomize(std::uint64_t seed);

  /// Replaces the row with a fresh unit vector derived from the guard state.
  void reseed_row(std::size_t neuron);

  friend bool operator==(const SomGrid&, const SomGrid&) = default;

 private:
  GridShape shape_{};
  std::size_t input_dim_ = 0;
  std::vector<double> weights_;
  std::uint64_t guard_seed_ = 0;
  std::uint64_t guard_events_ = 0;
};

/// Winner index and graded WSA output of one module.
struct ActivationResult {
  std::size_t winner = 0;
  std::vector<double> values;

  friend bool operator==(const ActivationResult&, const ActivationResult&) = default;
};

/// output[j] = <row j, input>. Throws ConfigError on a length mismatch.
void inner_products(const SomGrid& grid, std::span<const double> input, std::span<double> output);
std::vector<double> inner_products(const SomGrid& grid, std::span<const double> input);

/// Euclidean distance between two neurons on a non-wrapping grid.
double grid_distance(std::size_t a, std::size_t b, std::size_t cols);
double grid_distance_sq(std::size_t a, std::size_t b, std::size_t cols);

/// exp(-d^2 / (2 sigma^2)); sigma == 0 degenerates to an indicator of d == 0.
double gaussian_kernel(double distance_sq, double sigma);

/// Winners-share-all: the largest response (lowest index on ties) outputs
/// 1.0 and every other neuron the Gaussian of its grid distance to it.
ActivationResult wsa_output(std::span<const double> responses, GridShape shape, double sigma);
ActivationResult wsa_output(std::span<const double> responses, GridShape shape,
                            const KernelParams& params, KernelSelect which);
void wsa_output(std::span<const double> responses, GridShape shape, double sigma,
                ActivationResult& out);

/// Adds sign * rate * kernel(d_j) * input to every row j around the winner
/// and renormalizes the touched rows.
void competitive_update(SomGrid& grid, std::size_t winner, std::span<const double> input,
                        double rate, double sigma, UpdateSign sign = UpdateSign::Attract);

/// Normalizes one row in place; degenerate rows go through the guard.
void normalize_row(SomGrid& grid, std::size_t neuron);
void normalize_rows(SomGrid& grid);

double dot(std::span<const double> a, std::span<const double> b);
/// Four dot products of one row against inputs of the row's length;
/// each result is bit-identical to dot(row, x_i).
void dot4(std::span<const double> row, const double* x0, const double* x1, const double* x2,
          const double* x3, double* out);
double l2_norm(std::span<const double> v);

}  // namespace deepsom
