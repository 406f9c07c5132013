#include "deepsom/training.hpp"

#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "deepsom/error.hpp"
#include "deepsom/parallel.hpp"
#include "deepsom/random.hpp"

namespace deepsom {
namespace {

constexpr std::uint64_t kSubsetStream = 0x5153;
constexpr std::uint64_t kPretrainStream = 0x7072;
constexpr std::uint64_t kBlockStream = 0x626c;

}  // namespace

EvalResult evaluate(const Network& network, const Dataset& dataset, std::span<const std::size_t> indices,
                    const LabelMap& labels, const KernelParams& kernels) {
  std::vector<std::size_t> winners(indices.size());
  for_each_forward(
      network, [&](std::size_t i) { return dataset.image(indices[i]); }, indices.size(), kernels,
      [&](std::size_t i, const NetworkState& state) { winners[i] = state.output_winner(); });
  EvalResult result;
  result.total = indices.size();
  result.usage.assign(network.topology.layers.back().neurons.size(), 0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    ++result.usage[winners[i]];
    if (labels.class_of(winners[i]) != dataset.label(indices[i])) ++result.errors;
  }
  return result;
}

BlockMetrics run_block(Network& network, const Dataset& train, SampleStream& block,
                       const Dataset& validation, std::span<const std::size_t> validation_indices,
                       AdvanceCache& cache, const LabelMap& labels, const ApParams& params,
                       const KernelParams& kernels, std::size_t block_index,
                       const TrialObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  BlockMetrics metrics;
  metrics.block = block_index;
  while (!block.exhausted()) {
    const std::size_t sample = block.next();
    const auto outcome = learning_trial(network, train, sample, cache, labels, params, kernels);
    ++metrics.trials;
    if (outcome.ap_invoked) ++metrics.ap_invocations;
    if (observer) observer(sample, train.label(sample), outcome);
  }
  auto scored = evaluate(network, validation, validation_indices, labels, kernels);
  metrics.error_rate = scored.error_rate();
  metrics.usage = std::move(scored.usage);
  metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return metrics;
}

std::string format_trial(std::size_t sample, int label, const TrialOutcome& outcome) {
  std::ostringstream out;
  out << "trial idx=" << sample << " label=" << label << " pred=" << outcome.predicted
      << " correct=" << (outcome.correct ? 1 : 0) << " ap=" << (outcome.ap_invoked ? 1 : 0);
  return out.str();
}

std::string curves_csv(std::span<const BlockMetrics> rows) {
  std::ostringstream out;
  out << "block,error_rate,ap_invocations,seconds\n";
  out.setf(std::ios::fixed);
  for (const auto& row : rows) {
    out.precision(6);
    out << row.block << ',' << row.error_rate << ',' << row.ap_invocations << ',';
    out.precision(3);
    out << row.seconds << '\n';
  }
  return out.str();
}

void write_curves_csv(const std::filesystem::path& path, std::span<const BlockMetrics> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << curves_csv(rows);
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<BlockMetrics> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "block,error_rate,ap_invocations,seconds") {
    throw DataError(path.string() + ": missing curve header");
  }
  std::vector<BlockMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    BlockMetrics m;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(fields >> m.block >> c1 >> m.error_rate >> c2 >> m.ap_invocations >> c3 >> m.seconds) ||
        c1 != ',' || c2 != ',' || c3 != ',') {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    rows.push_back(m);
  }
  return rows;
}

Datasets load_datasets(const RunConfig& config) {
  Datasets data;
  data.train = load_idx(config.train_images, config.train_labels);
  data.test = load_idx(config.test_images, config.test_labels);
  if (data.train.shape != data.test.shape) throw DataError("training and test images differ in shape");
  const std::size_t count = config.validation_size == 0 ? data.test.size()
                                                         : std::min(config.validation_size, data.test.size());
  data.validation.resize(count);
  std::iota(data.validation.begin(), data.validation.end(), std::size_t{0});
  return data;
}

std::vector<std::size_t> training_pool(const RunConfig& config, std::size_t population, std::uint64_t block) {
  const std::size_t count = std::min(config.train_subset, population);
  if (config.resample_subset) return select_subset(population, count, derive_seed(config.seed, kSubsetStream, block));
  return select_subset(population, count, derive_seed(config.seed, kSubsetStream));
}

Session Session::fresh(const RunConfig& config, ImageShape image, const std::vector<LayerSpec>& specs) {
  Session s;
  s.config = config;
  s.network = build_network(image, specs, config.seed);
  return s;
}

Session Session::restore(const RunConfig& config, const Checkpoint& checkpoint, const Dataset& train) {
  Session s;
  s.config = config;
  s.network = checkpoint.network;
  s.labels = checkpoint.labels;
  if (checkpoint.cache_samples) s.cache = AdvanceCache::from_indices(train, *checkpoint.cache_samples);
  s.blocks_completed = checkpoint.blocks_completed;
  return s;
}

Checkpoint Session::checkpoint() const {
  Checkpoint ck;
  ck.network = network;
  ck.labels = labels;
  if (cache) ck.cache_samples = cache->sample_indices();
  ck.run_seed = config.seed;
  ck.blocks_completed = blocks_completed;
  return ck;
}

void run_pretraining(Session& session, const Dataset& train, std::ostream* log) {
  const auto& cfg = session.config;
  SampleStream stream(training_pool(cfg, train.size(), 0), derive_seed(cfg.seed, kPretrainStream));
  PretrainOptions options;
  if (log != nullptr && cfg.log_every > 0) {
    options.report_every = cfg.log_every;
    options.on_progress = [log](const PretrainProgress& p) { *log << format_progress(p) << std::endl; };
  }
  pretrain(session.network, train, stream, cfg.schedule, cfg.kernels, options);
}

void run_calibration(Session& session, const Dataset& train) {
  const auto pool = training_pool(session.config, train.size(), 0);
  session.labels = assign_labels(session.network, train, pool, session.config.kernels);
  session.cache = warm_cache(session.network, train, pool, *session.labels, session.config.kernels);
}

std::vector<BlockMetrics> run_training(Session& session, const Datasets& data, std::ostream* log,
                                       const std::function<void(const BlockMetrics&)>& on_block) {
  if (!session.labels || !session.cache) run_calibration(session, data.train);
  const auto& cfg = session.config;
  cfg.validate();

  std::vector<BlockMetrics> rows;
  const auto baseline_start = std::chrono::steady_clock::now();
  BlockMetrics baseline;
  baseline.block = session.blocks_completed;
  auto scored = evaluate(session.network, data.test, data.validation, *session.labels, cfg.kernels);
  baseline.error_rate = scored.error_rate();
  baseline.usage = std::move(scored.usage);
  baseline.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - baseline_start).count();
  rows.push_back(baseline);
  if (on_block) on_block(baseline);

  TrialObserver observer;
  if (log != nullptr && cfg.trace_trials) {
    observer = [log](std::size_t sample, int label, const TrialOutcome& o) {
      *log << format_trial(sample, label, o) << '\n';
    };
  }

  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::uint64_t index = session.blocks_completed;
    const auto pool = training_pool(cfg, data.train.size(), cfg.resample_subset ? index : 0);
    SampleStream block = cfg.resample_subset
                             ? take_block(pool, cfg.block_size, derive_seed(cfg.seed, kBlockStream, index), 0)
                             : take_block(pool, cfg.block_size, derive_seed(cfg.seed, kBlockStream), index);
    auto metrics = run_block(session.network, data.train, block, data.test, data.validation, *session.cache,
                             *session.labels, cfg.ap, cfg.kernels, index + 1, observer);
    ++session.blocks_completed;
    rows.push_back(metrics);
    if (on_block) on_block(metrics);
  }
  return rows;
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.txt");
  out << "# command: " << command << '\n' << config.to_text();
  if (!out) throw DataError("cannot write manifest in " + dir.string());
}

}  // namespace deepsom
