#include "deepsom/somcore.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "deepsom/error.hpp"
#include "deepsom/random.hpp"

namespace deepsom {

void KernelParams::validate() const {
  if (!(sigma_out > 0.0) || !(sigma_update > 0.0)) {
    std::ostringstream msg;
    msg << "kernel widths must be positive (sigma_out=" << sigma_out
        << ", sigma_update=" << sigma_update << ")";
    throw ConfigError(msg.str());
  }
}

SomGrid::SomGrid(GridShape shape, std::size_t input_dim, std::uint64_t guard_seed)
    : shape_(shape), input_dim_(input_dim), weights_(shape.size() * input_dim, 0.0),
      guard_seed_(guard_seed) {
  if (shape.size() == 0 || input_dim == 0) {
    throw ConfigError("SOM grid needs at least one neuron and one input");
  }
}

std::span<double> SomGrid::row(std::size_t neuron) {
  return std::span<double>(weights_).subspan(neuron * input_dim_, input_dim_);
}

std::span<const double> SomGrid::row(std::size_t neuron) const {
  return std::span<const double>(weights_).subspan(neuron * input_dim_, input_dim_);
}

void SomGrid::randomize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& w : weights_) w = rng.uniform(-1.0, 1.0);
  normalize_rows(*this);
}

void SomGrid::reseed_row(std::size_t neuron) {
  auto r = row(neuron);
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(guard_seed_, guard_events_, neuron, attempt));
    for (auto& w : r) w = rng.uniform(-1.0, 1.0);
    const double norm = l2_norm(r);
    if (norm >= kDegenerateNorm) {
      for (auto& w : r) w /= norm;
      break;
    }
  }
  ++guard_events_;
}

namespace {

// Eight-lane accumulator; lane k sums the products at indices i = k mod 8.
// GCC/Clang vector extensions lower this to whatever SIMD width exists
// without changing the summation order.
using Lanes = double __attribute__((vector_size(64)));
constexpr std::size_t kLanes = 8;

inline Lanes load_lanes(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline double reduce_lanes(const Lanes& l) {
  return ((l[0] + l[4]) + (l[1] + l[5])) + ((l[2] + l[6]) + (l[3] + l[7]));
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  Lanes acc = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) acc += load_lanes(pa + i) * load_lanes(pb + i);
  for (std::size_t k = 0; i < n; ++i, ++k) acc[k] += pa[i] * pb[i];
  return reduce_lanes(acc);
}

void dot4(std::span<const double> row, const double* x0, const double* x1, const double* x2,
          const double* x3, double* out) {
  const std::size_t n = row.size();
  const double* w = row.data();
  Lanes a0 = {}, a1 = {}, a2 = {}, a3 = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const Lanes wv = load_lanes(w + i);
    a0 += wv * load_lanes(x0 + i);
    a1 += wv * load_lanes(x1 + i);
    a2 += wv * load_lanes(x2 + i);
    a3 += wv * load_lanes(x3 + i);
  }
  for (std::size_t k = 0; i < n; ++i, ++k) {
    a0[k] += w[i] * x0[i];
    a1[k] += w[i] * x1[i];
    a2[k] += w[i] * x2[i];
    a3[k] += w[i] * x3[i];
  }
  out[0] = reduce_lanes(a0);
  out[1] = reduce_lanes(a1);
  out[2] = reduce_lanes(a2);
  out[3] = reduce_lanes(a3);
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void inner_products(const SomGrid& grid, std::span<const double> input, std::span<double> output) {
  if (input.size() != grid.input_dim()) {
    std::ostringstream msg;
    msg << "input length " << input.size() << " does not match grid fan-in " << grid.input_dim();
    throw ConfigError(msg.str());
  }
  if (output.size() != grid.neuron_count()) {
    throw ConfigError("output buffer does not match neuron count");
  }
  for (std::size_t j = 0; j < grid.neuron_count(); ++j) output[j] = dot(grid.row(j), input);
}

std::vector<double> inner_products(const SomGrid& grid, std::span<const double> input) {
  std::vector<double> out(grid.neuron_count());
  inner_products(grid, input, out);
  return out;
}

double grid_distance_sq(std::size_t a, std::size_t b, std::size_t cols) {
  const auto ra = static_cast<double>(a / cols), ca = static_cast<double>(a % cols);
  const auto rb = static_cast<double>(b / cols), cb = static_cast<double>(b % cols);
  return (ra - rb) * (ra - rb) + (ca - cb) * (ca - cb);
}

double grid_distance(std::size_t a, std::size_t b, std::size_t cols) {
  return std::sqrt(grid_distance_sq(a, b, cols));
}

double gaussian_kernel(double distance_sq, double sigma) {
  if (sigma == 0.0) return distance_sq == 0.0 ? 1.0 : 0.0;
  return std::exp(-distance_sq / (2.0 * sigma * sigma));
}

void wsa_output(std::span<const double> responses, GridShape shape, double sigma,
                ActivationResult& out) {
  if (responses.empty() || responses.size() != shape.size()) {
    throw ConfigError("response vector does not match the neuron grid");
  }
  std::size_t winner = 0;
  for (std::size_t j = 0; j < responses.size(); ++j) {
    if (std::isnan(responses[j])) {
      std::ostringstream msg;
      msg << "NaN response at neuron " << j;
      throw NumericError(msg.str());
    }
    if (responses[j] > responses[winner]) winner = j;
  }
  out.winner = winner;
  out.values.resize(responses.size());
  for (std::size_t j = 0; j < responses.size(); ++j) {
    out.values[j] = j == winner ? 1.0 : gaussian_kernel(grid_distance_sq(j, winner, shape.cols), sigma);
  }
}

ActivationResult wsa_output(std::span<const double> responses, GridShape shape, double sigma) {
  ActivationResult out;
  wsa_output(responses, shape, sigma, out);
  return out;
}

ActivationResult wsa_output(std::span<const double> responses, GridShape shape,
                            const KernelParams& params, KernelSelect which) {
  return wsa_output(responses, shape, which == KernelSelect::Output ? params.sigma_out : params.sigma_update);
}

void normalize_row(SomGrid& grid, std::size_t neuron) {
  auto r = grid.row(neuron);
  const double norm = l2_norm(r);
  if (!(norm >= kDegenerateNorm) || !std::isfinite(norm)) {
    grid.reseed_row(neuron);
    return;
  }
  for (auto& w : r) w /= norm;
}

void normalize_rows(SomGrid& grid) {
  for (std::size_t j = 0; j < grid.neuron_count(); ++j) normalize_row(grid, j);
}

void competitive_update(SomGrid& grid, std::size_t winner, std::span<const double> input,
                        double rate, double sigma, UpdateSign sign) {
  if (input.size() != grid.input_dim()) {
    std::ostringstream msg;
    msg << "update input length " << input.size() << " does not match grid fan-in " << grid.input_dim();
    throw ConfigError(msg.str());
  }
  if (winner >= grid.neuron_count()) throw ConfigError("winner index outside the grid");
  if (rate < 0.0) throw ConfigError("learning rate must be non-negative");
  if (rate == 0.0) return;

  const double direction = static_cast<double>(static_cast<int>(sign));
  const std::size_t cols = grid.shape().cols;
  for (std::size_t j = 0; j < grid.neuron_count(); ++j) {
    const double factor = gaussian_kernel(grid_distance_sq(j, winner, cols), sigma);
    if (factor < kKernelCutoff) continue;
    const double step = direction * rate * factor;
    auto r = grid.row(j);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += step * input[i];
    normalize_row(grid, j);
  }
}

}  // namespace deepsom
