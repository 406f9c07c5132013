#include "deepsom/pretrain.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "deepsom/error.hpp"
#include "deepsom/parallel.hpp"

namespace deepsom {

PretrainSchedule PretrainSchedule::standard() { return staggered(10000, 5); }

PretrainSchedule PretrainSchedule::staggered(std::size_t iterations, std::size_t layers) {
  if (layers == 0) throw ConfigError("schedule needs at least one layer");
  PretrainSchedule s;
  s.iterations = iterations;
  s.windows.assign(layers, std::nullopt);
  const std::size_t trained = layers > 1 ? layers - 1 : 1;
  for (std::size_t l = 0; l < trained; ++l) {
    const std::size_t first = l * iterations / 4 + 1;
    if (first <= iterations) s.windows[l] = LayerWindow{first, iterations};
  }
  return s;
}

void PretrainSchedule::validate(std::size_t layer_count) const {
  if (windows.size() != layer_count) {
    std::ostringstream msg;
    msg << "schedule covers " << windows.size() << " layers, network has " << layer_count;
    throw ConfigError(msg.str());
  }
  for (std::size_t l = 0; l < windows.size(); ++l) {
    if (!windows[l]) continue;
    if (windows[l]->first == 0 || windows[l]->first > windows[l]->last || windows[l]->last > iterations) {
      std::ostringstream msg;
      msg << "layer " << l + 1 << ": window " << windows[l]->first << ".." << windows[l]->last
          << " is not inside 1.." << iterations;
      throw ConfigError(msg.str());
    }
  }
  if (rho_start < 0.0 || rho_end < 0.0 || sigma_start < 0.0 || sigma_end < 0.0) {
    throw ConfigError("pre-training rates and widths must be non-negative");
  }
}

bool PretrainSchedule::active(std::size_t layer, std::size_t iteration) const {
  return layer < windows.size() && windows[layer] && windows[layer]->contains(iteration);
}

double ramp(std::size_t step, std::size_t total, double start, double end) {
  if (total <= 1) return start;
  return start + (end - start) * static_cast<double>(step) / static_cast<double>(total - 1);
}

void pretrain(Network& network, const Dataset& dataset, SampleStream& stream,
              const PretrainSchedule& schedule, const KernelParams& kernels,
              const PretrainOptions& options) {
  const std::size_t layers = network.layer_count();
  schedule.validate(layers);
  kernels.validate();

  std::size_t depth = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    if (schedule.windows[l]) depth = l + 1;
  }
  if (depth == 0) return;

  PretrainProgress progress;
  progress.rho.assign(layers, std::numeric_limits<double>::quiet_NaN());
  progress.sigma.assign(layers, std::numeric_limits<double>::quiet_NaN());

  for (std::size_t iter = 1; iter <= schedule.iterations; ++iter) {
    const std::size_t sample = stream.next();
    const NetworkState state = forward(network, dataset.image(sample), kernels, depth);

    progress.iteration = iter;
    progress.active_mask = 0;
    for (std::size_t l = 0; l < depth; ++l) {
      progress.rho[l] = std::numeric_limits<double>::quiet_NaN();
      progress.sigma[l] = std::numeric_limits<double>::quiet_NaN();
      if (!schedule.active(l, iter)) continue;
      const auto& window = *schedule.windows[l];
      const std::size_t step = iter - window.first;
      const double rho = ramp(step, window.length(), schedule.rho_start, schedule.rho_end);
      const double sigma = ramp(step, window.length(), schedule.sigma_start, schedule.sigma_end);
      progress.active_mask |= 1u << l;
      progress.rho[l] = rho;
      progress.sigma[l] = sigma;

      auto& grids = network.grids[l];
      parallel_for(grids.size(), [&](std::size_t m) {
        competitive_update(grids[m], state.layers[l].modules[m].winner, state.inputs[l][m], rho, sigma,
                           UpdateSign::Attract);
      });
    }

    if (options.on_progress && options.report_every > 0 &&
        (iter % options.report_every == 0 || iter == schedule.iterations)) {
      options.on_progress(progress);
    }
  }
}

double neighbor_similarity(const SomGrid& grid) {
  const auto shape = grid.shape();
  double total = 0.0;
  std::size_t pairs = 0;
  const auto cosine = [&](std::size_t a, std::size_t b) {
    const double na = l2_norm(grid.row(a));
    const double nb = l2_norm(grid.row(b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(grid.row(a), grid.row(b)) / (na * nb);
  };
  for (std::size_t r = 0; r < shape.rows; ++r) {
    for (std::size_t c = 0; c < shape.cols; ++c) {
      const std::size_t j = r * shape.cols + c;
      if (c + 1 < shape.cols) {
        total += cosine(j, j + 1);
        ++pairs;
      }
      if (r + 1 < shape.rows) {
        total += cosine(j, j + shape.cols);
        ++pairs;
      }
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

std::string format_progress(const PretrainProgress& progress) {
  std::ostringstream out;
  out << "pretrain iter=" << progress.iteration << " layer_active=";
  for (std::size_t l = 0; l < progress.rho.size(); ++l) out << ((progress.active_mask >> l) & 1u);
  const auto list = [&](const std::vector<double>& values) {
    std::ostringstream s;
    s.precision(6);
    for (std::size_t l = 0; l < values.size(); ++l) {
      if (l > 0) s << ',';
      if (std::isnan(values[l])) {
        s << '-';
      } else {
        s << values[l];
      }
    }
    return s.str();
  };
  out << " rho=" << list(progress.rho) << " sigma=" << list(progress.sigma);
  return out.str();
}

}  // namespace deepsom
