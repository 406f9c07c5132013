// Acceptance runner: prints one PASS/FAIL line per criterion.
//
// Criteria 1 and 6 read the recorded full-scale runs under --results
// (pretrain/, r07/, r00/); the rest compute their evidence in-process.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "deepsom/aplearn.hpp"
#include "deepsom/checkpoint.hpp"
#include "deepsom/config.hpp"
#include "deepsom/dataio.hpp"
#include "deepsom/error.hpp"
#include "deepsom/exporters.hpp"
#include "deepsom/pretrain.hpp"
#include "deepsom/training.hpp"
#include "property_checks.hpp"
#include "test_paths.hpp"
#include "toy_oracle.hpp"

namespace fs = std::filesystem;
using namespace deepsom;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::map<std::string, double> read_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::map<std::string, double> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return out;
}

// ---- 1: full-scale pipeline ---------------------------------------------

Verdict full_scale_pipeline(const fs::path& results) {
  const auto r07 = read_curves_csv(results / "r07" / "curves.csv");
  const auto r00 = read_curves_csv(results / "r00" / "curves.csv");
  if (r07.size() != 21 || r00.size() != 21) {
    return {false, "expected baseline plus 20 blocks in both curves"};
  }
  const double pre = r07.front().error_rate;
  const double f07 = r07.back().error_rate;
  const double f00 = r00.back().error_rate;
  const double late_slope = (r00[5].error_rate - r00[20].error_rate) / 15.0;
  const bool a = pre >= 0.45 && pre <= 0.85;
  const bool b = f07 <= 0.12;
  const bool c = f00 - f07 >= 0.05;
  const bool d = late_slope < 0.005;
  std::ostringstream msg;
  msg << "pre-AP " << fmt(pre) << (a ? "" : " (outside [0.45,0.85])") << ", r=0.7 final " << fmt(f07)
      << (b ? "" : " (> 0.12)") << ", r=0 final " << fmt(f00) << " gap " << fmt(f00 - f07)
      << (c ? "" : " (< 0.05)") << ", r=0 improvement after block 5 " << fmt(late_slope)
      << "/block" << (d ? "" : " (>= 0.005)");
  return {a && b && c && d, msg.str()};
}

// ---- 2: toy oracle equivalence -------------------------------------------

double max_gap(std::span<const double> a, const std::vector<double>& b) {
  double gap = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
  return gap;
}

double state_gap(const NetworkState& s, const toy::Pass& p) {
  double gap = 0.0;
  for (std::size_t m = 0; m < toy::kModules; ++m) {
    if (s.layers[0].modules[m].winner != p.a1[m].winner) return INFINITY;
    gap = std::max(gap, max_gap(s.inputs[0][m], p.in1[m]));
    gap = std::max(gap, max_gap(s.layers[0].modules[m].values, p.a1[m].values));
  }
  if (s.output_winner() != p.a2.winner) return INFINITY;
  gap = std::max(gap, max_gap(s.inputs[1][0], p.in2));
  return std::max(gap, max_gap(s.layers[1].modules[0].values, p.a2.values));
}

double weight_gap(const Network& net, const toy::Weights& w) {
  double gap = 0.0;
  for (std::size_t m = 0; m < toy::kModules; ++m) {
    for (std::size_t j = 0; j < toy::kNeurons; ++j) gap = std::max(gap, max_gap(net.grids[0][m].row(j), w.w1[m][j]));
  }
  for (std::size_t j = 0; j < toy::kNeurons; ++j) gap = std::max(gap, max_gap(net.grids[1][0].row(j), w.w2[j]));
  return gap;
}

Verdict toy_oracle() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto net = build_network(toy::image_shape(), toy::specs(), seed);
    Rng rng(seed ^ 0x5eed);
    std::vector<double> target(9), adv(9);
    for (auto& v : target) v = rng.uniform01();
    for (auto& v : adv) v = rng.uniform01();
    ApParams p;
    p.layers = 2;
    p.beta = rng.uniform01();
    p.r = rng.uniform01();
    p.rho_base = rng.uniform(0.01, 0.5);
    p.unit_hebbian = seed % 2 == 0;
    const KernelParams k{rng.uniform(0.3, 2.0), rng.uniform(0.2, 1.0)};
    auto w = toy::copy_weights(net);

    const auto adv_state = forward(net, adv, k);
    const auto ref_adv = toy::forward(w, adv, k.sigma_out);
    worst = std::max(worst, state_gap(adv_state, ref_adv));

    const auto blended = blend(adv_state.inputs[1][0], forward(net, target, k).inputs[1][0], p.beta);
    worst = std::max(worst, max_gap(blended, toy::mix(ref_adv.in2, toy::forward(w, target, k.sigma_out).in2, p.beta)));

    const auto state = ap_pass(net, target, adv_state, p, k);
    const auto ref = toy::ap_pass(w, target, ref_adv, p.beta, k.sigma_out);
    worst = std::max(worst, state_gap(state, ref));

    const auto sign = seed % 3 == 0 ? UpdateSign::Repel : UpdateSign::Attract;
    ap_update(net, state, p, k, sign);
    toy::update(w, ref, p.rho_base, p.r, k.sigma_update, sign == UpdateSign::Repel ? -1.0 : 1.0, p.unit_hebbian);
    worst = std::max(worst, weight_gap(net, w));
  }
  return {worst <= 1e-10, "100 seeded cases, max deviation " + (std::isfinite(worst) ? fmt(worst, 17) : "winner mismatch")};
}

// ---- 3: toy convergence ----------------------------------------------------

// Greedy (count desc, class asc, neuron asc) matching restricted to the
// classes present; absent classes take the lowest unused neurons.
LabelMap calibrate_two_classes(const Network& net, const Dataset& ds, std::span<const std::size_t> all) {
  const auto counts = count_winners(net, ds, all, {});
  struct Pair {
    std::size_t count, neuron;
    int cls;
  };
  std::vector<Pair> pairs;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    for (int c = 0; c < 2; ++c) pairs.push_back({counts[j][static_cast<std::size_t>(c)], j, c});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.cls != b.cls) return a.cls < b.cls;
    return a.neuron < b.neuron;
  });
  std::array<std::size_t, kClassCount> chosen{};
  std::vector<bool> class_done(kClassCount, false), neuron_used(counts.size(), false);
  for (const auto& p : pairs) {
    if (class_done[static_cast<std::size_t>(p.cls)] || neuron_used[p.neuron]) continue;
    chosen[static_cast<std::size_t>(p.cls)] = p.neuron;
    class_done[static_cast<std::size_t>(p.cls)] = true;
    neuron_used[p.neuron] = true;
  }
  std::size_t next = 0;
  for (std::size_t c = 2; c < kClassCount; ++c) {
    while (neuron_used[next]) ++next;
    chosen[c] = next;
    neuron_used[next] = true;
  }
  return LabelMap(chosen, counts.size());
}

// First correctly classified sample per class, else the sample with the
// largest response at the class neuron.
AdvanceCache warm_two_classes(const Network& net, const Dataset& ds, const LabelMap& labels) {
  AdvanceCache cache;
  for (int c = 0; c < 2; ++c) {
    std::optional<std::size_t> pick;
    double best = -INFINITY;
    std::size_t fallback = 0;
    for (std::size_t i = 0; i < ds.size() && !pick; ++i) {
      if (ds.label(i) != c) continue;
      const auto state = forward(net, ds.image(i), {});
      if (predict(state, labels) == c) pick = i;
      const double u = inner_products(net.grids[0][0], state.inputs[0][0])[labels.neuron_for(c)];
      if (u > best) {
        best = u;
        fallback = i;
      }
    }
    const std::size_t i = pick.value_or(fallback);
    cache.store(c, i, ds.image(i));
  }
  return cache;
}

bool train_two_prototypes(std::uint64_t seed, std::size_t& trials_needed) {
  const ImageShape shape{4, 4};
  auto net = build_network(shape, {{1, 1, {4, 4}, 4, 1, 0}}, seed);
  Rng rng(seed * 31 + 7);
  Dataset ds;
  ds.shape = shape;
  for (std::size_t i = 0; i < 20; ++i) {
    const std::size_t cls = i % 2;
    for (std::size_t p = 0; p < 16; ++p) {
      const bool on = cls == 0 ? p % 4 < 2 : p % 4 >= 2;  // left or right half
      ds.pixels.push_back((on ? 1.0 : 0.0) + 0.2 * rng.uniform01());
    }
    ds.labels.push_back(static_cast<std::uint8_t>(cls));
  }
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  const LabelMap labels = calibrate_two_classes(net, ds, all);
  AdvanceCache cache = warm_two_classes(net, ds, labels);
  ApParams p;
  p.layers = 1;
  for (std::size_t t = 0; t <= 200; ++t) {
    if (evaluate(net, ds, all, labels, {}).errors == 0) {
      trials_needed = t;
      return true;
    }
    if (t < 200) learning_trial(net, ds, rng.below(ds.size()), cache, labels, p, {});
  }
  return false;
}

Verdict toy_convergence() {
  std::size_t ok = 0, worst = 0, learned = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::size_t needed = 0;
    if (train_two_prototypes(seed, needed)) {
      ++ok;
      worst = std::max(worst, needed);
      learned += needed > 0 ? 1 : 0;
    }
  }
  return {ok == 10, std::to_string(ok) + "/10 seeds reached 100% training accuracy (" + std::to_string(learned) +
                        " needed learning trials, slowest after " + std::to_string(worst) + ")"};
}

// ---- 4: invariants -----------------------------------------------------------

Verdict invariants() {
  const std::vector<std::pair<const char*, std::function<std::string()>>> checks{
      {"unit rows", [] { return properties::unit_rows_after_updates(); }},
      {"unit rows through trials", [] { return properties::unit_rows_through_trials(); }},
      {"WSA shape and scaling", [] { return properties::wsa_shape_and_scaling(); }},
      {"beta=0 forward", [] { return properties::beta_zero_is_forward(); }},
      {"near inverse", [] { return properties::repel_attract_near_inverse(); }},
      {"evaluation purity", [] { return properties::evaluation_is_pure(); }},
      {"determinism", [] { return properties::manifests_fix_checkpoints(); }},
  };
  std::string failures;
  for (const auto& [name, check] : checks) {
    const auto msg = check();
    if (!msg.empty()) failures += std::string(failures.empty() ? "" : "; ") + name + ": " + msg;
  }
  if (failures.empty()) return {true, std::to_string(checks.size()) + " property groups hold"};
  return {false, failures};
}

// ---- 5: topographic ordering ----------------------------------------------

std::string similarity_summary(const std::vector<double>& before, const std::vector<double>& after, bool& ok) {
  double gain = 0.0;
  std::size_t rising = 0;
  for (std::size_t m = 0; m < before.size(); ++m) {
    gain += after[m] - before[m];
    rising += after[m] > before[m] ? 1 : 0;
  }
  gain /= static_cast<double>(before.size());
  ok = rising == before.size() && gain >= 0.1;
  return std::to_string(rising) + "/" + std::to_string(before.size()) + " grids rose, mean gain " + fmt(gain);
}

Verdict topographic_ordering(const fs::path& mnist, const fs::path& results) {
  RunConfig c;
  c.use_data_dir(mnist);
  c.schedule = PretrainSchedule::staggered(2000, 5);
  const auto train = load_idx(c.train_images, c.train_labels);
  Session s = Session::fresh(c, train.shape, mnist_layer_specs());
  const auto grids = [&] {
    std::vector<double> out;
    for (const auto& g : s.network.grids.front()) out.push_back(neighbor_similarity(g));
    return out;
  };
  const auto before = grids();
  run_pretraining(s, train, nullptr);
  bool ok = false;
  std::string detail = "2000-iteration run: " + similarity_summary(before, grids(), ok);

  std::ifstream csv(results / "pretrain" / "similarity.csv");
  if (csv) {
    std::string line;
    std::getline(csv, line);
    std::vector<double> full_before, full_after;
    while (std::getline(csv, line)) {
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      std::size_t m = 0;
      double b = 0, a = 0;
      if (row >> m >> b >> a) {
        full_before.push_back(b);
        full_after.push_back(a);
      }
    }
    bool full_ok = false;
    detail += "; full pre-training: " + similarity_summary(full_before, full_after, full_ok);
    ok = ok && full_ok;
  }
  return {ok, detail};
}

// ---- 6: representation reorganization -------------------------------------

Verdict reorganization(const fs::path& results) {
  const auto s = read_summary(results / "r07" / "summary.txt");
  const double eb = s.at("entropy_before"), ea = s.at("entropy_after");
  const double share = s.at("assigned_share_after");
  const bool ok = ea < eb && share >= 0.8;
  return {ok, "usage entropy " + fmt(eb) + " -> " + fmt(ea) + " bits, assigned share " +
                  fmt(s.at("assigned_share_before")) + " -> " + fmt(share)};
}

// ---- 7: format golden files -------------------------------------------------

std::vector<std::uint8_t> golden(const char* name) { return read_file_bytes(fs::path(DEEPSOM_GOLDEN_DIR) / name); }

Verdict formats() {
  std::vector<std::string> problems;

  testing_support::TempDir dir;
  Rng rng(11);
  IdxArray images;
  images.dims = {7, 5, 3};
  for (std::size_t i = 0; i < 7 * 5 * 3; ++i) images.payload.push_back(static_cast<std::uint8_t>(rng.below(256)));
  IdxArray labels;
  labels.dims = {7};
  for (std::size_t i = 0; i < 7; ++i) labels.payload.push_back(static_cast<std::uint8_t>(rng.below(10)));
  std::vector<std::uint8_t> raw{0, 0, 8, 3, 0, 0, 0, 7, 0, 0, 0, 5, 0, 0, 0, 3};
  raw.insert(raw.end(), images.payload.begin(), images.payload.end());
  if (serialize_idx(images) != raw) problems.push_back("IDX serialization differs from hand-built bytes");
  for (const char* name : {"img.idx", "img.idx.gz"}) {
    write_idx(dir / name, images);
    if (read_idx(dir / name) != images) problems.push_back(std::string("IDX file round trip failed for ") + name);
  }
  write_idx(dir / "lbl.idx", labels);
  const auto ds = load_idx(dir / "img.idx", dir / "lbl.idx");
  if (images_to_idx(ds).payload != images.payload || labels_to_idx(ds).payload != labels.payload) {
    problems.push_back("dataset round trip changed bytes");
  }

  SomGrid atlas_grid({10, 10}, 36, 1);
  atlas_grid.randomize(1);
  const auto atlas = encode_pgm(feature_atlas(atlas_grid, 6));
  const auto atlas_header = golden("atlas_header.bin");
  if (!std::equal(atlas_header.begin(), atlas_header.end(), atlas.begin()) ||
      atlas.size() != atlas_header.size() + 71 * 71) {
    problems.push_back("atlas PGM header differs from fixture");
  }
  if (encode_pgm(GrayImage{3, 2, {0, 1, 127, 128, 254, 255}}) != golden("small.pgm")) {
    problems.push_back("PGM bytes differ from fixture");
  }

  Checkpoint ck;
  ck.network = build_network(toy::image_shape(), toy::specs(), 42);
  ck.network.grids[0][0].set_guard_state(0x1122334455667788ULL, 3);
  const auto bytes = encode_checkpoint(ck);
  const auto header = golden("toy_checkpoint_header.bin");
  if (header.size() != checkpoint_header_size(ck.network.topology) ||
      !std::equal(header.begin(), header.end(), bytes.begin())) {
    problems.push_back("checkpoint header differs from fixture");
  }

  if (problems.empty()) return {true, "IDX round trips exact; PGM and checkpoint headers match fixtures"};
  std::string msg;
  for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
  return {false, msg};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the deep SOM library", "deepsom_acceptance"};
  fs::path results = "results";
  fs::path mnist = testing_support::mnist_dir();
  std::vector<int> only;
  std::vector<int> expect_fail;
  app.add_option("--results", results, "directory with pretrain/, r07/ and r00/ run outputs");
  app.add_option("--mnist", mnist, "directory with the MNIST IDX files");
  app.add_option("--only", only, "run only these criteria");
  app.add_option("--expect-fail", expect_fail,
                 "criteria known to fail; they still print FAIL, and passing them is an error");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"full-scale pipeline", [&] { return full_scale_pipeline(results); }},
      {"toy oracle equivalence", [] { return toy_oracle(); }},
      {"toy convergence", [] { return toy_convergence(); }},
      {"invariant suite", [] { return invariants(); }},
      {"topographic ordering", [&] { return topographic_ordering(mnist, results); }},
      {"representation reorganization", [&] { return reorganization(results); }},
      {"format golden files", [] { return formats(); }},
  };

  const auto listed = [](const std::vector<int>& ids, int id) {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
  };
  int failed = 0, unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !listed(only, id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const bool expected_failure = listed(expect_fail, id);
    failed += v.pass ? 0 : 1;
    unexpected += v.pass == expected_failure ? 1 : 0;
    std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
              << v.detail;
    if (expected_failure) std::cout << (v.pass ? "  [listed as expected failure]" : "  [expected failure]");
    std::cout << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed");
  if (!expect_fail.empty()) std::cout << ", " << unexpected << " outcome(s) differ from expectations";
  std::cout << '\n';
  return unexpected == 0 ? 0 : 1;
}
