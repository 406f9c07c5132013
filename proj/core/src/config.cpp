#include "deepsom/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "deepsom/error.hpp"

namespace deepsom {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value '" + value + "' for " + key);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value);
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value);
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, value);
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

std::string show(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string format_windows(const PretrainSchedule& schedule) {
  std::ostringstream out;
  for (std::size_t l = 0; l < schedule.windows.size(); ++l) {
    if (l > 0) out << ',';
    if (schedule.windows[l]) {
      out << schedule.windows[l]->first << '-' << schedule.windows[l]->last;
    } else {
      out << '-';
    }
  }
  return out.str();
}

std::vector<std::optional<LayerWindow>> parse_windows(const std::string& text) {
  std::vector<std::optional<LayerWindow>> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item == "-") {
      out.emplace_back(std::nullopt);
      continue;
    }
    const auto dash = item.find('-');
    if (dash == std::string::npos) bad_value("pretrain_windows", text);
    out.emplace_back(LayerWindow{to_u64("pretrain_windows", item.substr(0, dash)),
                                 to_u64("pretrain_windows", item.substr(dash + 1))});
  }
  if (out.empty()) bad_value("pretrain_windows", text);
  return out;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"train_images", [](RunConfig& c, const std::string& v) { c.train_images = v; }},
      {"train_labels", [](RunConfig& c, const std::string& v) { c.train_labels = v; }},
      {"test_images", [](RunConfig& c, const std::string& v) { c.test_images = v; }},
      {"test_labels", [](RunConfig& c, const std::string& v) { c.test_labels = v; }},
      {"data_dir", [](RunConfig& c, const std::string& v) { c.use_data_dir(v); }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"checkpoint_in", [](RunConfig& c, const std::string& v) { c.checkpoint_in = v; }},
      {"checkpoint_out", [](RunConfig& c, const std::string& v) { c.checkpoint_out = v; }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); }},
      {"block_size", [](RunConfig& c, const std::string& v) { c.block_size = to_u64("block_size", v); }},
      {"n_blocks", [](RunConfig& c, const std::string& v) { c.n_blocks = to_u64("n_blocks", v); }},
      {"train_subset", [](RunConfig& c, const std::string& v) { c.train_subset = to_u64("train_subset", v); }},
      {"resample_subset", [](RunConfig& c, const std::string& v) { c.resample_subset = to_bool("resample_subset", v); }},
      {"validation_size", [](RunConfig& c, const std::string& v) { c.validation_size = to_u64("validation_size", v); }},
      {"rho_base", [](RunConfig& c, const std::string& v) { c.ap.rho_base = to_double("rho_base", v); }},
      {"beta", [](RunConfig& c, const std::string& v) { c.ap.beta = to_double("beta", v); }},
      {"r", [](RunConfig& c, const std::string& v) { c.ap.r = to_double("r", v); }},
      {"unit_hebbian", [](RunConfig& c, const std::string& v) { c.ap.unit_hebbian = to_bool("unit_hebbian", v); }},
      {"n_layers", [](RunConfig& c, const std::string& v) { c.ap.layers = to_u64("n_layers", v); }},
      {"sigma_out", [](RunConfig& c, const std::string& v) { c.kernels.sigma_out = to_double("sigma_out", v); }},
      {"sigma_update", [](RunConfig& c, const std::string& v) { c.kernels.sigma_update = to_double("sigma_update", v); }},
      {"pretrain_iterations", [](RunConfig& c, const std::string& v) { c.schedule.iterations = to_u64("pretrain_iterations", v); }},
      {"pretrain_windows", [](RunConfig& c, const std::string& v) { c.schedule.windows = parse_windows(v); }},
      {"rho_pre_start", [](RunConfig& c, const std::string& v) { c.schedule.rho_start = to_double("rho_pre_start", v); }},
      {"rho_pre_end", [](RunConfig& c, const std::string& v) { c.schedule.rho_end = to_double("rho_pre_end", v); }},
      {"sigma_pre_start", [](RunConfig& c, const std::string& v) { c.schedule.sigma_start = to_double("sigma_pre_start", v); }},
      {"sigma_pre_end", [](RunConfig& c, const std::string& v) { c.schedule.sigma_end = to_double("sigma_pre_end", v); }},
      {"log_every", [](RunConfig& c, const std::string& v) { c.log_every = to_u64("log_every", v); }},
      {"trace_trials", [](RunConfig& c, const std::string& v) { c.trace_trials = to_bool("trace_trials", v); }},
      {"export_atlas", [](RunConfig& c, const std::string& v) { c.export_atlas = to_bool("export_atlas", v); }},
      {"export_usage", [](RunConfig& c, const std::string& v) { c.export_usage = to_bool("export_usage", v); }},
      {"export_stimulus", [](RunConfig& c, const std::string& v) { c.export_stimulus = to_bool("export_stimulus", v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second(*this, value);
}

void RunConfig::apply_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << source << ":" << number << ": expected key=value";
      throw ConfigError(msg.str());
    }
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      std::ostringstream msg;
      msg << source << ":" << number << ": " << e.what();
      throw ConfigError(msg.str());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_text(buffer.str(), path.string());
}

void RunConfig::use_data_dir(const std::filesystem::path& dir) {
  const auto pick = [&](const std::string& name) {
    const auto raw = dir / name;
    if (std::filesystem::exists(raw)) return raw;
    const auto gz = dir / (name + ".gz");
    if (std::filesystem::exists(gz)) return gz;
    return raw;
  };
  train_images = pick("train-images-idx3-ubyte");
  train_labels = pick("train-labels-idx1-ubyte");
  test_images = pick("t10k-images-idx3-ubyte");
  test_labels = pick("t10k-labels-idx1-ubyte");
}

void RunConfig::validate() const {
  ap.validate();
  kernels.validate();
  if (block_size == 0) throw ConfigError("block_size must be positive");
  if (train_subset == 0) throw ConfigError("train_subset must be positive");
  if (block_size > train_subset) throw ConfigError("block_size cannot exceed train_subset");
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "train_images=" << train_images.string() << '\n'
      << "train_labels=" << train_labels.string() << '\n'
      << "test_images=" << test_images.string() << '\n'
      << "test_labels=" << test_labels.string() << '\n'
      << "out_dir=" << out_dir.string() << '\n'
      << "checkpoint_in=" << checkpoint_in.string() << '\n'
      << "checkpoint_out=" << checkpoint_out.string() << '\n'
      << "seed=" << seed << '\n'
      << "block_size=" << block_size << '\n'
      << "n_blocks=" << n_blocks << '\n'
      << "train_subset=" << train_subset << '\n'
      << "resample_subset=" << (resample_subset ? "true" : "false") << '\n'
      << "validation_size=" << validation_size << '\n'
      << "rho_base=" << show(ap.rho_base) << '\n'
      << "beta=" << show(ap.beta) << '\n'
      << "r=" << show(ap.r) << '\n'
      << "n_layers=" << ap.layers << '\n'
      << "unit_hebbian=" << (ap.unit_hebbian ? "true" : "false") << '\n'
      << "sigma_out=" << show(kernels.sigma_out) << '\n'
      << "sigma_update=" << show(kernels.sigma_update) << '\n'
      << "pretrain_iterations=" << schedule.iterations << '\n'
      << "pretrain_windows=" << format_windows(schedule) << '\n'
      << "rho_pre_start=" << show(schedule.rho_start) << '\n'
      << "rho_pre_end=" << show(schedule.rho_end) << '\n'
      << "sigma_pre_start=" << show(schedule.sigma_start) << '\n'
      << "sigma_pre_end=" << show(schedule.sigma_end) << '\n'
      << "log_every=" << log_every << '\n'
      << "trace_trials=" << (trace_trials ? "true" : "false") << '\n'
      << "export_atlas=" << (export_atlas ? "true" : "false") << '\n'
      << "export_usage=" << (export_usage ? "true" : "false") << '\n'
      << "export_stimulus=" << (export_stimulus ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace deepsom
