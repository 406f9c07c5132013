#include "deepsom/aplearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "deepsom/error.hpp"
#include "deepsom/parallel.hpp"

namespace deepsom {

void ApParams::validate() const {
  if (rho_base < 0.0) throw ConfigError("rho_base must be non-negative");
  if (beta < 0.0 || beta > 1.0) throw ConfigError("beta must lie in [0, 1]");
  if (r < 0.0 || r > 1.0) throw ConfigError("layer decay r must lie in [0, 1]");
}

double layer_decay(double r, std::size_t n, std::size_t layer_1based) {
  if (layer_1based == 0 || layer_1based > n) throw ConfigError("layer index outside 1..n");
  const std::size_t exponent = n - layer_1based;
  if (exponent == 0) return 1.0;
  double out = 1.0;
  for (std::size_t k = 0; k < exponent; ++k) out *= r;
  return out;
}

LabelMap::LabelMap(std::size_t neurons) : neurons_(neurons), neuron_class_(neurons, kUnassigned) {}

LabelMap::LabelMap(std::array<std::size_t, kClassCount> class_neurons, std::size_t neurons)
    : LabelMap(neurons) {
  class_neuron_ = class_neurons;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const std::size_t j = class_neurons[c];
    if (j >= neurons) throw ConfigError("label map neuron outside the last layer");
    if (class_of(j) != kUnassigned) throw ConfigError("label map assigns one neuron twice");
    neuron_class_[j] = static_cast<int>(c);
  }
}

int LabelMap::class_of(std::size_t neuron) const {
  if (neuron >= neurons_) return kUnassigned;
  return neuron_class_[neuron];
}

WinnerCounts count_winners(const Network& network, const Dataset& dataset,
                           std::span<const std::size_t> indices, const KernelParams& kernels) {
  const std::size_t neurons = network.topology.layers.back().neurons.size();
  std::vector<std::size_t> winners(indices.size());
  for_each_forward(
      network, [&](std::size_t i) { return dataset.image(indices[i]); }, indices.size(), kernels,
      [&](std::size_t i, const NetworkState& state) { winners[i] = state.output_winner(); });
  WinnerCounts counts(neurons);
  for (auto& row : counts) row.fill(0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    ++counts[winners[i]][static_cast<std::size_t>(dataset.label(indices[i]))];
  }
  return counts;
}

LabelMap greedy_assign(const WinnerCounts& counts) {
  const std::size_t neurons = counts.size();
  std::size_t distinct = 0;
  for (const auto& row : counts) {
    std::size_t sum = 0;
    for (const auto c : row) sum += c;
    if (sum > 0) ++distinct;
  }
  if (distinct < kClassCount) {
    std::ostringstream msg;
    msg << "only " << distinct << " distinct last-layer neurons won on the calibration set; "
        << kClassCount << " are needed";
    throw CalibrationError(msg.str());
  }

  struct Pair {
    std::size_t count;
    std::size_t cls;
    std::size_t neuron;
  };
  std::vector<Pair> pairs;
  pairs.reserve(neurons * kClassCount);
  for (std::size_t j = 0; j < neurons; ++j) {
    for (std::size_t c = 0; c < kClassCount; ++c) pairs.push_back({counts[j][c], c, j});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tuple(b.count, a.cls, a.neuron) < std::tuple(a.count, b.cls, b.neuron);
  });

  std::array<std::size_t, kClassCount> class_neuron{};
  std::array<bool, kClassCount> class_done{};
  std::vector<bool> neuron_taken(neurons, false);
  std::size_t assigned = 0;
  for (const auto& p : pairs) {
    if (class_done[p.cls] || neuron_taken[p.neuron]) continue;
    class_neuron[p.cls] = p.neuron;
    class_done[p.cls] = true;
    neuron_taken[p.neuron] = true;
    if (++assigned == kClassCount) break;
  }
  return LabelMap(class_neuron, neurons);
}

LabelMap assign_labels(const Network& network, const Dataset& dataset,
                       std::span<const std::size_t> indices, const KernelParams& kernels) {
  return greedy_assign(count_winners(network, dataset, indices, kernels));
}

int predict(const NetworkState& state, const LabelMap& labels) {
  return labels.class_of(state.output_winner());
}

int classify(const Network& network, std::span<const double> image, const LabelMap& labels,
             const KernelParams& kernels) {
  return predict(forward(network, image, kernels), labels);
}

const AdvanceCache::Entry& AdvanceCache::at(int cls) const {
  const auto& entry = entries_[static_cast<std::size_t>(cls)];
  if (!entry) {
    std::ostringstream msg;
    msg << "no advance input cached for class " << cls;
    throw ConfigError(msg.str());
  }
  return *entry;
}

void AdvanceCache::store(int cls, std::size_t sample, std::span<const double> image) {
  auto& entry = entries_[static_cast<std::size_t>(cls)];
  entry = Entry{sample, std::vector<double>(image.begin(), image.end()), 0};
}

void AdvanceCache::age(int cls) {
  auto& entry = entries_[static_cast<std::size_t>(cls)];
  if (entry) ++entry->staleness;
}

std::array<std::size_t, kClassCount> AdvanceCache::sample_indices() const {
  std::array<std::size_t, kClassCount> out{};
  for (std::size_t c = 0; c < kClassCount; ++c) out[c] = at(static_cast<int>(c)).sample;
  return out;
}

AdvanceCache AdvanceCache::from_indices(const Dataset& dataset,
                                        const std::array<std::size_t, kClassCount>& indices) {
  AdvanceCache cache;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    if (indices[c] >= dataset.size()) throw DataError("advance cache index outside the dataset");
    cache.store(static_cast<int>(c), indices[c], dataset.image(indices[c]));
  }
  return cache;
}

AdvanceCache warm_cache(const Network& network, const Dataset& dataset,
                        std::span<const std::size_t> indices, const LabelMap& labels,
                        const KernelParams& kernels) {
  struct Candidate {
    std::size_t winner;
    double response;  // last-layer inner product at the sample's class neuron
  };
  std::vector<Candidate> results(indices.size());
  const std::size_t last = network.layer_count() - 1;
  for_each_forward(
      network, [&](std::size_t i) { return dataset.image(indices[i]); }, indices.size(), kernels,
      [&](std::size_t i, const NetworkState& state) {
        const auto neuron = labels.neuron_for(dataset.label(indices[i]));
        results[i] = {state.output_winner(), dot(network.grid(last, 0).row(neuron), state.inputs[last][0])};
      });

  AdvanceCache cache;
  std::array<std::optional<std::size_t>, kClassCount> fallback;
  std::array<double, kClassCount> best{};
  best.fill(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int cls = dataset.label(indices[i]);
    const auto c = static_cast<std::size_t>(cls);
    if (cache.has(cls)) continue;
    if (labels.class_of(results[i].winner) == cls) {
      cache.store(cls, indices[i], dataset.image(indices[i]));
      continue;
    }
    if (results[i].response > best[c]) {
      best[c] = results[i].response;
      fallback[c] = indices[i];
    }
  }
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const int cls = static_cast<int>(c);
    if (cache.has(cls)) continue;
    if (!fallback[c]) {
      std::ostringstream msg;
      msg << "class " << c << " has no sample in the warm-up subset";
      throw DataError(msg.str());
    }
    cache.store(cls, *fallback[c], dataset.image(*fallback[c]));
  }
  return cache;
}

std::vector<double> blend(std::span<const double> advance, std::span<const double> target, double beta) {
  if (advance.size() != target.size()) {
    std::ostringstream msg;
    msg << "cannot blend vectors of length " << advance.size() << " and " << target.size();
    throw ConfigError(msg.str());
  }
  std::vector<double> out(target.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = beta * advance[i] + (1.0 - beta) * target[i];
  return out;
}

NetworkState ap_pass(const Network& network, std::span<const double> target_image,
                     const NetworkState& advance, const ApParams& params, const KernelParams& kernels) {
  const auto& topo = network.topology;
  const std::size_t depth = topo.layer_count();
  if (advance.layers.size() != depth || advance.inputs.size() != depth) {
    throw ConfigError("advance state must cover every layer");
  }

  NetworkState state;
  state.tag = PassTag::Blended;
  state.layers.resize(depth);
  state.inputs.resize(depth);

  const auto target_patches = extract_patches(topo, target_image);
  auto& first = state.inputs[0];
  first.resize(target_patches.size());
  for (std::size_t m = 0; m < first.size(); ++m) {
    first[m] = blend(advance.inputs[0][m], target_patches[m], params.beta);
  }
  activate_layer(network, 0, first, kernels.sigma_out, state.layers[0]);

  std::vector<double> gathered;
  for (std::size_t l = 1; l < depth; ++l) {
    auto& inputs = state.inputs[l];
    inputs.resize(topo.module_count(l));
    gathered.resize(topo.input_dims[l]);
    for (std::size_t m = 0; m < inputs.size(); ++m) {
      if (topo.kinds[l] == WiringKind::Full && m > 0) {
        inputs[m] = inputs[0];
        continue;
      }
      gather_input(topo, l, m, state.layers[l - 1], gathered);
      inputs[m] = blend(advance.inputs[l][m], gathered, params.beta);
    }
    activate_layer(network, l, inputs, kernels.sigma_out, state.layers[l]);
  }
  return state;
}

void ap_update(Network& network, const NetworkState& state, const ApParams& params,
               const KernelParams& kernels, UpdateSign sign) {
  const std::size_t depth = network.layer_count();
  if (state.layers.size() != depth) throw ConfigError("update state must cover every layer");
  const std::size_t n = params.layers == 0 ? depth : params.layers;
  if (n < depth) throw ConfigError("layer count n is smaller than the network depth");
  for (std::size_t l = 0; l < depth; ++l) {
    const double rate = layer_decay(params.r, n, l + 1 + (n - depth)) * params.rho_base;
    if (rate == 0.0) continue;
    auto& grids = network.grids[l];
    parallel_for(grids.size(), [&](std::size_t m) {
      const auto& input = state.inputs[l][m];
      if (!params.unit_hebbian) {
        competitive_update(grids[m], state.layers[l].modules[m].winner, input, rate,
                           kernels.sigma_update, sign);
        return;
      }
      std::vector<double> unit(input);
      const double norm = l2_norm(unit);
      if (norm > 0.0) {
        for (auto& v : unit) v /= norm;
      }
      competitive_update(grids[m], state.layers[l].modules[m].winner, unit, rate,
                         kernels.sigma_update, sign);
    });
  }
}

TrialOutcome learning_trial(Network& network, const Dataset& dataset, std::size_t sample,
                            AdvanceCache& cache, const LabelMap& labels, const ApParams& params,
                            const KernelParams& kernels) {
  const int label = dataset.label(sample);
  const auto image = dataset.image(sample);

  TrialOutcome outcome;
  const NetworkState plain = forward(network, image, kernels);
  outcome.forward_passes = 1;
  outcome.predicted = predict(plain, labels);
  outcome.correct = outcome.predicted == label;

  if (outcome.correct) {
    ap_update(network, plain, params, kernels, UpdateSign::Attract);
    cache.store(label, sample, image);
    outcome.cache_refreshed = true;
    return outcome;
  }

  const auto& advance_entry = cache.at(label);
  ap_update(network, plain, params, kernels, UpdateSign::Repel);
  NetworkState advance = forward(network, advance_entry.image, kernels);
  advance.tag = PassTag::Advance;
  const NetworkState blended = ap_pass(network, image, advance, params, kernels);
  outcome.forward_passes = 3;
  ap_update(network, blended, params, kernels, UpdateSign::Attract);
  cache.age(label);
  outcome.ap_invoked = true;
  return outcome;
}

}  // namespace deepsom
