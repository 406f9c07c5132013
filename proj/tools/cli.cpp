#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "deepsom/checkpoint.hpp"
#include "deepsom/config.hpp"
#include "deepsom/error.hpp"
#include "deepsom/exporters.hpp"
#include "deepsom/pretrain.hpp"
#include "deepsom/training.hpp"

namespace deepsom::cli {
namespace fs = std::filesystem;
namespace {

// Flags shared by every subcommand. Unset optionals leave the value from
// the defaults or the --config file in place.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> r;
  std::optional<double> beta;
  std::optional<double> rho_base;
  std::optional<std::size_t> blocks;
  std::optional<std::size_t> block_size;
  std::optional<std::size_t> pretrain_iterations;
  std::optional<std::size_t> validation_size;
  std::optional<std::string> checkpoint_in;
  std::optional<std::string> checkpoint_out;
  std::optional<std::string> out_dir;
  std::optional<std::string> data_dir;
  std::optional<std::string> train_images, train_labels, test_images, test_labels;
  std::optional<std::size_t> log_every;
  bool trace = false;
};

void add_common(CLI::App& app, CommonFlags& f) {
  app.add_option("--config", f.config, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "master random seed");
  app.add_option("--r", f.r, "layer decay coefficient r");
  app.add_option("--beta", f.beta, "after-effect ratio beta");
  app.add_option("--rho-base", f.rho_base, "base learning rate");
  app.add_option("--blocks", f.blocks, "number of learning blocks");
  app.add_option("--block-size", f.block_size, "training samples per block");
  app.add_option("--pretrain-iterations", f.pretrain_iterations,
                 "pre-training length (windows are rescaled to it)");
  app.add_option("--validation-size", f.validation_size, "validation samples (0 = whole test set)");
  app.add_option("--checkpoint-in", f.checkpoint_in, "checkpoint to resume from");
  app.add_option("--checkpoint-out", f.checkpoint_out, "checkpoint to write");
  app.add_option("--out-dir", f.out_dir, "directory for manifests, curves and images");
  app.add_option("--data-dir", f.data_dir, "directory with the four MNIST IDX files");
  app.add_option("--train-images", f.train_images);
  app.add_option("--train-labels", f.train_labels);
  app.add_option("--test-images", f.test_images);
  app.add_option("--test-labels", f.test_labels);
  app.add_option("--log-every", f.log_every, "pre-training progress interval");
  app.add_flag("--trace", f.trace, "log every learning trial");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c;
  if (!f.config.empty()) c.apply_file(f.config);
  if (f.data_dir) c.use_data_dir(*f.data_dir);
  if (f.train_images) c.train_images = *f.train_images;
  if (f.train_labels) c.train_labels = *f.train_labels;
  if (f.test_images) c.test_images = *f.test_images;
  if (f.test_labels) c.test_labels = *f.test_labels;
  if (f.seed) c.seed = *f.seed;
  if (f.r) c.ap.r = *f.r;
  if (f.beta) c.ap.beta = *f.beta;
  if (f.rho_base) c.ap.rho_base = *f.rho_base;
  if (f.blocks) c.n_blocks = *f.blocks;
  if (f.block_size) c.block_size = *f.block_size;
  if (f.pretrain_iterations) {
    c.schedule = PretrainSchedule::staggered(*f.pretrain_iterations, c.schedule.windows.size());
  }
  if (f.validation_size) c.validation_size = *f.validation_size;
  if (f.checkpoint_in) c.checkpoint_in = *f.checkpoint_in;
  if (f.checkpoint_out) c.checkpoint_out = *f.checkpoint_out;
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.log_every) c.log_every = *f.log_every;
  if (f.trace) c.trace_trials = true;
  c.validate();
  return c;
}

std::string join(const std::vector<std::string>& args) {
  std::ostringstream out;
  for (std::size_t i = 0; i < args.size(); ++i) out << (i ? " " : "") << args[i];
  return out.str();
}

fs::path output_checkpoint(const RunConfig& c, const char* fallback) {
  return c.checkpoint_out.empty() ? c.out_dir / fallback : c.checkpoint_out;
}

Checkpoint require_checkpoint(const RunConfig& c) {
  if (c.checkpoint_in.empty()) throw ConfigError("--checkpoint-in is required");
  return load_checkpoint(c.checkpoint_in);
}

void export_atlases(const Network& net, const fs::path& dir, const std::string& prefix) {
  const std::size_t side = net.topology.layers.front().rf;
  for (std::size_t m = 0; m < net.topology.module_count(0); ++m) {
    std::ostringstream name;
    name << prefix << "_m" << std::setw(2) << std::setfill('0') << m << ".pgm";
    write_pgm(dir / name.str(), feature_atlas(net.grid(0, m), side));
  }
}

void write_usage(const fs::path& dir, const std::string& stem, std::span<const std::size_t> counts,
                 GridShape shape) {
  fs::create_directories(dir);
  std::ofstream csv(dir / (stem + ".csv"));
  csv << "neuron,count\n";
  for (std::size_t j = 0; j < counts.size(); ++j) csv << j << ',' << counts[j] << '\n';
  write_pgm(dir / (stem + ".pgm"), render_usage(counts, shape));
}

void write_stimulus(const fs::path& path, const Network& net, std::size_t layer, std::size_t module,
                    std::size_t neuron) {
  const auto raw = optimal_stimulus(net, layer, module, neuron);
  const auto shape = net.topology.image;
  write_pgm(path, GrayImage{shape.cols, shape.rows, minmax_to_gray(raw)});
}

std::vector<double> similarities(const Network& net) {
  std::vector<double> out;
  for (const auto& grid : net.grids.front()) out.push_back(neighbor_similarity(grid));
  return out;
}

int cmd_pretrain(const RunConfig& c, std::ostream& out) {
  const auto data = load_datasets(c);
  Session s = Session::fresh(c, data.train.shape, mnist_layer_specs());
  const auto before = similarities(s.network);
  run_pretraining(s, data.train, &out);
  const auto after = similarities(s.network);

  fs::create_directories(c.out_dir);
  std::ofstream csv(c.out_dir / "similarity.csv");
  csv << "module,before,after\n" << std::setprecision(10);
  for (std::size_t m = 0; m < before.size(); ++m) csv << m << ',' << before[m] << ',' << after[m] << '\n';
  if (c.export_atlas) export_atlases(s.network, c.out_dir / "atlas", "layer1");

  const auto path = output_checkpoint(c, "pretrained.ckpt");
  save_checkpoint(path, s.checkpoint());
  out << "pretrained checkpoint written to " << path.string() << '\n';
  return 0;
}

int cmd_assign(const RunConfig& c, std::ostream& out) {
  const auto ck = require_checkpoint(c);
  const auto train = load_idx(c.train_images, c.train_labels);
  Session s = Session::restore(c, ck, train);
  run_calibration(s, train);
  out << "label map:";
  for (std::size_t k = 0; k < kClassCount; ++k) out << ' ' << k << "->" << s.labels->neuron_for(static_cast<int>(k));
  out << '\n';
  const auto path = output_checkpoint(c, "calibrated.ckpt");
  save_checkpoint(path, s.checkpoint());
  out << "calibrated checkpoint written to " << path.string() << '\n';
  return 0;
}

void write_summary(const fs::path& dir, const Session& s, const std::vector<BlockMetrics>& rows) {
  const auto& first = rows.front();
  const auto& last = rows.back();
  std::ofstream sum(dir / "summary.txt");
  sum << std::setprecision(10);
  sum << "error_before=" << first.error_rate << '\n'
      << "error_after=" << last.error_rate << '\n'
      << "entropy_before=" << usage_entropy(first.usage) << '\n'
      << "entropy_after=" << usage_entropy(last.usage) << '\n'
      << "assigned_share_before=" << assigned_share(first.usage, *s.labels) << '\n'
      << "assigned_share_after=" << assigned_share(last.usage, *s.labels) << '\n';
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const auto data = load_datasets(c);
  Session s = c.checkpoint_in.empty() ? Session::fresh(c, data.train.shape, mnist_layer_specs())
                                      : Session::restore(c, load_checkpoint(c.checkpoint_in), data.train);
  if (c.checkpoint_in.empty()) {
    out << "no --checkpoint-in given; pre-training from scratch\n";
    run_pretraining(s, data.train, &out);
  }
  if (!s.labels || !s.cache) run_calibration(s, data.train);

  const int stimulus_class = 6;
  const std::size_t last = s.network.layer_count() - 1;
  const std::size_t rep = s.labels->neuron_for(stimulus_class);
  if (c.export_stimulus) write_stimulus(c.out_dir / "stimulus_before.pgm", s.network, last, 0, rep);

  const auto rows = run_training(s, data, &out, [&](const BlockMetrics& m) {
    out << "block " << m.block << " error_rate=" << std::fixed << std::setprecision(4) << m.error_rate
        << " ap=" << m.ap_invocations << " seconds=" << std::setprecision(1) << m.seconds << std::endl;
    out.unsetf(std::ios::floatfield);
  });

  write_curves_csv(c.out_dir / "curves.csv", rows);
  const auto shape = s.network.topology.layers.back().neurons;
  if (c.export_usage) {
    write_usage(c.out_dir, "usage_before", rows.front().usage, shape);
    write_usage(c.out_dir, "usage_after", rows.back().usage, shape);
  }
  if (c.export_stimulus) write_stimulus(c.out_dir / "stimulus_after.pgm", s.network, last, 0, rep);
  write_summary(c.out_dir, s, rows);

  const auto path = output_checkpoint(c, "trained.ckpt");
  save_checkpoint(path, s.checkpoint());
  out << "trained checkpoint written to " << path.string() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const auto ck = require_checkpoint(c);
  if (!ck.labels) throw ConfigError("checkpoint has no label map; run assign-labels first");
  const auto data = load_datasets(c);
  const auto result = evaluate(ck.network, data.test, data.validation, *ck.labels, c.kernels);
  out << "error_rate=" << std::setprecision(10) << result.error_rate() << " errors=" << result.errors
      << " total=" << result.total << '\n';
  fs::create_directories(c.out_dir);
  std::ofstream(c.out_dir / "eval.txt") << "error_rate=" << std::setprecision(10) << result.error_rate() << '\n';
  return 0;
}

struct ExportFlags {
  std::string what;
  std::size_t layer = 0;  // 1-based; 0 = last layer
  std::size_t module = 0;
  std::optional<std::size_t> neuron;
  std::optional<int> digit;
  std::vector<std::string> curves;
  std::vector<std::string> labels;
};

int cmd_export(const RunConfig& c, const ExportFlags& e, std::ostream& out) {
  fs::create_directories(c.out_dir);
  if (e.what == "curves") {
    if (e.curves.empty()) throw ConfigError("export curves needs at least one --curve file");
    std::vector<std::vector<BlockMetrics>> all;
    for (const auto& p : e.curves) all.push_back(read_curves_csv(p));
    std::ofstream csv(c.out_dir / "curves_combined.csv");
    csv << "block";
    for (std::size_t i = 0; i < all.size(); ++i) csv << ',' << (i < e.labels.size() ? e.labels[i] : e.curves[i]);
    csv << '\n' << std::fixed << std::setprecision(6);
    std::size_t rows = 0;
    for (const auto& a : all) rows = std::max(rows, a.size());
    for (std::size_t r = 0; r < rows; ++r) {
      csv << r;
      for (const auto& a : all) {
        csv << ',';
        if (r < a.size()) csv << a[r].error_rate;
      }
      csv << '\n';
    }
    out << "wrote " << (c.out_dir / "curves_combined.csv").string() << '\n';
    return 0;
  }

  const auto ck = require_checkpoint(c);
  const auto& net = ck.network;
  if (e.what == "atlas") {
    export_atlases(net, c.out_dir / "atlas", "layer1");
    out << "wrote " << net.topology.module_count(0) << " atlases to " << (c.out_dir / "atlas").string() << '\n';
    return 0;
  }
  if (e.what == "usage") {
    const auto data = load_datasets(c);
    const auto counts = usage_histogram(net, data.test, data.validation, c.kernels);
    write_usage(c.out_dir, "usage", counts, net.topology.layers.back().neurons);
    out << "entropy_bits=" << usage_entropy(counts);
    if (ck.labels) out << " assigned_share=" << assigned_share(counts, *ck.labels);
    out << '\n';
    return 0;
  }
  if (e.what == "stimulus") {
    const std::size_t layer = e.layer == 0 ? net.layer_count() - 1 : e.layer - 1;
    std::size_t neuron = e.neuron.value_or(0);
    if (e.digit) {
      if (!ck.labels) throw ConfigError("--class needs a checkpoint with a label map");
      neuron = ck.labels->neuron_for(*e.digit);
    }
    std::ostringstream name;
    name << "stimulus_l" << layer + 1 << "_m" << e.module << "_n" << neuron << ".pgm";
    write_stimulus(c.out_dir / name.str(), net, layer, e.module, neuron);
    out << "wrote " << (c.out_dir / name.str()).string() << '\n';
    return 0;
  }
  throw ConfigError("unknown export kind '" + e.what + "'");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep self-organizing map networks with advance-propagation learning", "deepsom"};
  app.require_subcommand(1);

  CommonFlags flags;
  ExportFlags exp;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "build a network and run competitive pre-training");
  auto* assign_cmd = app.add_subcommand("assign-labels", "map digit classes onto last-layer neurons");
  auto* train_cmd = app.add_subcommand("train", "run advance-propagation learning blocks");
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on the validation set");
  auto* export_cmd = app.add_subcommand("export", "write figure data (atlas | usage | stimulus | curves)");
  for (auto* sub : {pretrain_cmd, assign_cmd, train_cmd, eval_cmd, export_cmd}) add_common(*sub, flags);
  export_cmd->add_option("kind", exp.what, "atlas | usage | stimulus | curves")
      ->required()
      ->check(CLI::IsMember({"atlas", "usage", "stimulus", "curves"}));
  export_cmd->add_option("--layer", exp.layer, "1-based layer of the stimulus neuron (default: last)");
  export_cmd->add_option("--module", exp.module, "module of the stimulus neuron");
  export_cmd->add_option("--neuron", exp.neuron, "neuron index of the stimulus");
  export_cmd->add_option("--class", exp.digit, "use the representative neuron of this digit")
      ->check(CLI::Range(0, 9));
  export_cmd->add_option("--curve", exp.curves, "curve CSV written by train (repeatable)");
  export_cmd->add_option("--label", exp.labels, "column label for the matching --curve");

  std::vector<std::string> argv(args.rbegin(), args.rend() - 1);
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 2;
  }

  try {
    const RunConfig config = resolve(flags);
    auto* sub = app.get_subcommands().front();
    write_manifest(config.out_dir, join(args), config);
    if (sub == pretrain_cmd) return cmd_pretrain(config, out);
    if (sub == assign_cmd) return cmd_assign(config, out);
    if (sub == train_cmd) return cmd_train(config, out);
    if (sub == eval_cmd) return cmd_eval(config, out);
    return cmd_export(config, exp, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 1;
  }
}

}  // namespace deepsom::cli
