#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "deepsom/dataio.hpp"
#include "deepsom/error.hpp"
#include "deepsom/pretrain.hpp"
#include "deepsom/random.hpp"
#include "toy_oracle.hpp"

using namespace deepsom;

namespace {

Dataset random_dataset(ImageShape shape, std::size_t count, std::uint64_t seed) {
  Dataset ds;
  ds.shape = shape;
  Rng rng(seed);
  ds.pixels.resize(count * shape.size());
  for (auto& p : ds.pixels) p = rng.uniform01();
  for (std::size_t i = 0; i < count; ++i) ds.labels.push_back(static_cast<std::uint8_t>(i % 10));
  return ds;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(Ramp, Examples) {
  EXPECT_EQ(ramp(0, 100, 1.0, 0.0), 1.0);
  EXPECT_EQ(ramp(99, 100, 1.0, 0.0), 0.0);
  EXPECT_NEAR(ramp(4999, 10000, 3.5, 0.0), 3.5 - 3.5 * 4999.0 / 9999.0, 1e-15);
  EXPECT_NEAR(ramp(4999, 10000, 3.5, 0.0), 1.7501750175017502, 1e-14);
  EXPECT_EQ(ramp(0, 1, 2.0, 0.0), 2.0);
}

TEST(Schedule, StandardWindows) {
  const auto s = PretrainSchedule::standard();
  ASSERT_EQ(s.windows.size(), 5u);
  EXPECT_EQ(s.windows[0], (LayerWindow{1, 10000}));
  EXPECT_EQ(s.windows[1], (LayerWindow{2501, 10000}));
  EXPECT_EQ(s.windows[2], (LayerWindow{5001, 10000}));
  EXPECT_EQ(s.windows[3], (LayerWindow{7501, 10000}));
  EXPECT_FALSE(s.windows[4].has_value());
  EXPECT_EQ(s.windows[0]->length(), 10000u);
  EXPECT_EQ(s.windows[1]->length(), 7500u);
  EXPECT_EQ(s.windows[2]->length(), 5000u);
  EXPECT_EQ(s.windows[3]->length(), 2500u);
  EXPECT_EQ(s.rho_start, 1.0);
  EXPECT_EQ(s.rho_end, 0.0);
  EXPECT_EQ(s.sigma_start, 3.5);
  EXPECT_EQ(s.sigma_end, 0.0);
}

TEST(Schedule, StaggeredCompressesWindows) {
  const auto s = PretrainSchedule::staggered(2000, 5);
  EXPECT_EQ(s.windows[0], (LayerWindow{1, 2000}));
  EXPECT_EQ(s.windows[3], (LayerWindow{1501, 2000}));
  EXPECT_FALSE(s.windows[4].has_value());
  EXPECT_TRUE(s.active(1, 501));
  EXPECT_FALSE(s.active(1, 500));
  EXPECT_FALSE(s.active(4, 2000));
}

TEST(Schedule, ValidateRejectsBadWindows) {
  auto s = PretrainSchedule::standard();
  EXPECT_THROW(s.validate(4), ConfigError);
  s.windows[1] = LayerWindow{3000, 12000};
  EXPECT_THROW(s.validate(5), ConfigError);
  s = PretrainSchedule::standard();
  s.rho_start = -1;
  EXPECT_THROW(s.validate(5), ConfigError);
}

TEST(Pretrain, WindowsGateUpdatesExactly) {
  auto net = build_network(toy::image_shape(), toy::specs(), 4);
  const auto ds = random_dataset(toy::image_shape(), 30, 2);
  SampleStream stream(all_indices(ds.size()), 7);
  PretrainSchedule s;
  s.iterations = 10;
  s.windows = {LayerWindow{1, 10}, LayerWindow{6, 10}};
  const auto initial_top = net.grids[1];
  std::vector<bool> top_unchanged;
  PretrainOptions opts;
  opts.report_every = 1;
  opts.on_progress = [&](const PretrainProgress& p) {
    if (p.iteration <= 5) {
      top_unchanged.push_back(net.grids[1] == initial_top);
      EXPECT_EQ(p.active_mask, 1u);
    } else {
      EXPECT_EQ(p.active_mask, 3u);
    }
  };
  pretrain(net, ds, stream, s, {}, opts);
  EXPECT_EQ(top_unchanged, std::vector<bool>(5, true));
  EXPECT_FALSE(net.grids[1] == initial_top);
}

TEST(Pretrain, FrozenLastLayerAndUnitRows) {
  auto net = build_network(toy::image_shape(), toy::specs(), 5);
  const auto ds = random_dataset(toy::image_shape(), 20, 3);
  SampleStream stream(all_indices(ds.size()), 1);
  const auto before_top = net.grids[1];
  const auto before_first = net.grids[0];
  pretrain(net, ds, stream, PretrainSchedule::staggered(200, 2), {});
  EXPECT_TRUE(net.grids[1] == before_top);
  EXPECT_FALSE(net.grids[0] == before_first);
  for (const auto& g : net.grids[0]) {
    for (std::size_t j = 0; j < g.neuron_count(); ++j) EXPECT_NEAR(l2_norm(g.row(j)), 1.0, 1e-9);
  }
  EXPECT_EQ(stream.cursor(), 200u);
}

TEST(Pretrain, RatesNonIncreasingWithinWindow) {
  auto net = build_network(toy::image_shape(), toy::specs(), 6);
  const auto ds = random_dataset(toy::image_shape(), 10, 4);
  SampleStream stream(all_indices(ds.size()), 1);
  double last_rho = 2.0, last_sigma = 10.0;
  PretrainOptions opts;
  opts.report_every = 1;
  opts.on_progress = [&](const PretrainProgress& p) {
    EXPECT_LE(p.rho[0], last_rho);
    EXPECT_LE(p.sigma[0], last_sigma);
    last_rho = p.rho[0];
    last_sigma = p.sigma[0];
  };
  pretrain(net, ds, stream, PretrainSchedule::staggered(50, 2), {}, opts);
  EXPECT_EQ(last_rho, 0.0);
  EXPECT_EQ(last_sigma, 0.0);
}

TEST(Pretrain, DeterministicForSeed) {
  const auto ds = random_dataset(toy::image_shape(), 20, 3);
  auto run = [&] {
    auto net = build_network(toy::image_shape(), toy::specs(), 5);
    SampleStream stream(all_indices(ds.size()), 1);
    pretrain(net, ds, stream, PretrainSchedule::staggered(100, 2), {});
    return net;
  };
  EXPECT_TRUE(run() == run());
}

TEST(NeighborSimilarity, IdenticalAndOrthonormalRows) {
  SomGrid same({2, 2}, 3);
  for (std::size_t j = 0; j < 4; ++j) {
    auto r = same.row(j);
    r[0] = 0.6;
    r[2] = 0.8;
  }
  EXPECT_NEAR(neighbor_similarity(same), 1.0, 1e-15);
  SomGrid ortho({2, 2}, 4);
  for (std::size_t j = 0; j < 4; ++j) ortho.row(j)[(j * 3) % 4] = 1.0;
  EXPECT_EQ(neighbor_similarity(ortho), 0.0);
}

TEST(NeighborSimilarity, ChainHandValue) {
  // rows e0, (e0+e1)/sqrt2, e1 on a 1x3 strip: cosines 1/sqrt2 twice
  SomGrid g({1, 3}, 2);
  g.row(0)[0] = 1;
  g.row(1)[0] = g.row(1)[1] = std::sqrt(0.5);
  g.row(2)[1] = 1;
  EXPECT_NEAR(neighbor_similarity(g), std::sqrt(0.5), 1e-15);
}

TEST(FormatProgress, LogLine) {
  PretrainProgress p;
  p.iteration = 2501;
  p.active_mask = 3;
  p.rho = {0.75, 1.0, std::nan(""), std::nan(""), std::nan("")};
  p.sigma = {2.625, 3.5, std::nan(""), std::nan(""), std::nan("")};
  EXPECT_EQ(format_progress(p), "pretrain iter=2501 layer_active=11000 rho=0.75,1,-,-,- sigma=2.625,3.5,-,-,-");
}
