#include <cmath>

#include <gtest/gtest.h>

#include "e3dnas/e3dnas.hpp"
#include "support/nets.hpp"

namespace {

using namespace e3d;
using fixtures::make_layer;

// Reference values from a 40-digit scalar evaluation.
constexpr double kD155Large = 5.6146214699250956;   // S=(13,40,40), K=(1,5,5)
constexpr double kD333Small = 2.2760937268093977;   // S=(13,5,5),   K=(3,3,3)
constexpr double kD333Large = 2.5911218727494503;   // S=(13,40,40), K=(3,3,3)
constexpr double kD155Small = 0.90663649335160517;  // S=(13,5,5),   K=(1,5,5)
constexpr double kLn432 = 6.0684255882441103;
constexpr double kLog10_432 = 2.6354837468149121;
constexpr double kNegLnEps = 13.815510557964274;

constexpr double kTight = 1e-12;

TEST(Refinement, ReferenceValues) {
  EXPECT_NEAR(cosine_similarity({13, 40, 40}, {1, 5, 5}), 0.99635581112782686, kTight);
  EXPECT_NEAR(refinement({13, 40, 40}, {1, 5, 5}, LogBase::Natural, kDefaultEpsilon), kD155Large,
              kTight);
  EXPECT_NEAR(refinement({13, 5, 5}, {3, 3, 3}, LogBase::Natural, kDefaultEpsilon), kD333Small,
              kTight);
  EXPECT_NEAR(refinement({13, 40, 40}, {3, 3, 3}, LogBase::Natural, kDefaultEpsilon), kD333Large,
              kTight);
  EXPECT_NEAR(refinement({13, 5, 5}, {1, 5, 5}, LogBase::Natural, kDefaultEpsilon), kD155Small,
              kTight);
  EXPECT_NEAR(refinement({13, 40, 40}, {1, 5, 5}, LogBase::Base10, kDefaultEpsilon),
              kD155Large / std::log(10.0), kTight);
}

TEST(Refinement, ParallelVectorsHitTheClamp) {
  EXPECT_NEAR(refinement({10, 10, 10}, {5, 5, 5}, LogBase::Natural, kDefaultEpsilon), kNegLnEps,
              1e-9);
}

TEST(Refinement, SymmetryAndScaleInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 64), side(0, 2);
  const int odd[] = {1, 3, 5};
  for (int i = 0; i < 500; ++i) {
    const Shape3d s{dim(rng), dim(rng), dim(rng)};
    const Kernel3d k{odd[side(rng)], odd[side(rng)], odd[side(rng)]};
    const double d = refinement(s, k, LogBase::Natural, kDefaultEpsilon);
    EXPECT_GT(d, 0.0);
    EXPECT_NEAR(d, refinement({s.frames, s.width, s.height}, {k.t, k.w, k.h}, LogBase::Natural,
                              kDefaultEpsilon),
                1e-9);
    EXPECT_NEAR(d, refinement({3 * s.frames, 3 * s.height, 3 * s.width}, k, LogBase::Natural,
                              kDefaultEpsilon),
                1e-9);
  }
}

TEST(Refinement, KernelPreferenceCrossover) {
  const auto prefers_wide = [](int n) {
    return refinement({13, n, n}, {1, 5, 5}, LogBase::Natural, kDefaultEpsilon) >
           refinement({13, n, n}, {3, 3, 3}, LogBase::Natural, kDefaultEpsilon);
  };
  EXPECT_TRUE(prefers_wide(40));
  EXPECT_FALSE(prefers_wide(5));
  int threshold = 0;
  for (int n = 1; n <= 200; ++n) {
    if (prefers_wide(n) && threshold == 0) threshold = n;
    if (threshold != 0) {
      EXPECT_TRUE(prefers_wide(n)) << "n = " << n;
    }
  }
  EXPECT_GT(threshold, 5);
  EXPECT_LE(threshold, 40);
}

TEST(HomoScore, SingleLayers) {
  ConvChain unit{{4, 4, 4}, 1, {make_layer("pw", ConvKind::Pointwise, {1, 1, 1}, 1, 8)}};
  EXPECT_EQ(homo_score(unit).total, 0.0);

  ConvChain reg{{4, 4, 4}, 16, {make_layer("c", ConvKind::Regular, {3, 3, 3}, 16, 16)}};
  EXPECT_NEAR(homo_score(reg, {LogBase::Natural}).total, kLn432, kTight);
  EXPECT_NEAR(homo_score(reg, {LogBase::Base10}).total, kLog10_432, kTight);

  ConvChain dw{{4, 4, 4}, 16, {make_layer("d", ConvKind::Depthwise, {3, 3, 3}, 16, 16)}};
  const auto b = homo_score(dw, {LogBase::Natural});
  EXPECT_EQ(b.per_layer[0].effective_in_channels, 1);
  EXPECT_NEAR(b.total, std::log(27.0), kTight);
}

TEST(HomoScore, Fig4Composition) {
  const double expected[] = {11.613603032723673, 13.693044574403509, 15.772486116083345,
                             17.851927657763181};
  int i = 0;
  for (int c : {16, 32, 64, 128}) {
    const auto chain = fixtures::fig4_chain(c);
    EXPECT_NEAR(homo_score(chain, {LogBase::Natural}).total, expected[i++], 1e-11);
  }
  const auto b = homo_score(fixtures::fig4_chain(16), {LogBase::Natural});
  EXPECT_DOUBLE_EQ(b.total, std::log(16.0) + std::log(27.0 * 16) + std::log(16.0));
}

TEST(StScore, SingleLayerComposition) {
  ConvChain reg{{13, 5, 5}, 16, {make_layer("c", ConvKind::Regular, {3, 3, 3}, 16, 16)}};
  const auto b = st_score(reg, {LogBase::Natural, LogBase::Natural});
  EXPECT_NEAR(b.total, std::log(432.0 * kD333Small), kTight);
  EXPECT_NEAR(b.per_layer[0].refinement, kD333Small, kTight);
}

TEST(Score, TotalIsOrderedSumOfTerms) {
  for (auto metric : {Metric::Homo, Metric::STEntr}) {
    for (auto name : presets::kNames) {
      const auto net = *presets::by_name(name);
      const auto b = score(net, metric);
      double sum = 0.0;
      for (const auto& t : b.per_layer) {
        sum += t.term;
        if (metric == Metric::Homo) {
          EXPECT_EQ(t.refinement, 1.0);
        }
      }
      EXPECT_EQ(b.total, sum);
      EXPECT_EQ(score_total(net, metric), b.total);
      EXPECT_EQ(b.per_layer.size(), flatten(net).size());
    }
  }
}

TEST(Score, UnitPointwiseInsertionLeavesHomoUnchanged) {
  auto chain = fixtures::fig4_chain(16);
  chain.input_channels = 1;
  chain.layers.insert(chain.layers.begin(),
                      make_layer("unit", ConvKind::Pointwise, {1, 1, 1}, 1, 1));
  chain.layers[1].in_channels = 1;
  const double before = homo_score(ConvChain{chain.input, 1, {chain.layers.begin() + 1, chain.layers.end()}}).total;
  EXPECT_EQ(homo_score(chain).total, before);
}

TEST(Score, HomoIsBlindToKernelPlacement) {
  const NetworkSpec base = presets::e3d_s();
  NetworkSpec swapped = base;
  swapped.stages[0].blocks[0].dw_kernel = {3, 3, 3};
  swapped.stages[4].blocks[0].dw_kernel = {1, 5, 5};
  const double h0 = homo_score(base).total, h1 = homo_score(swapped).total;
  EXPECT_LT(std::abs(h0 - h1) / h0, 1e-3);
  EXPECT_GT(std::abs(st_score(base).total - st_score(swapped).total), 0.1);

  NetworkSpec stages = base;
  for (auto& b : stages.stages[0].blocks) b.dw_kernel = {3, 3, 3};
  for (auto& b : stages.stages[4].blocks) b.dw_kernel = {1, 5, 5};
  EXPECT_LT(std::abs(h0 - homo_score(stages).total) / h0, 1e-3);
  EXPECT_GT(st_score(base).total, st_score(stages).total);
}

TEST(Calibration, DefaultConfigIsTheWinner) {
  const auto ranked = calibrate(presets::e3d_s(), 202.86);
  ASSERT_EQ(ranked.size(), 16u);
  const ScoreConfig defaults;
  EXPECT_EQ(ranked.front().config.log_base, defaults.log_base);
  EXPECT_EQ(ranked.front().config.refinement_log_base, defaults.refinement_log_base);
  EXPECT_EQ(ranked.front().config.include_classifier, defaults.include_classifier);
  EXPECT_EQ(ranked.front().config.refinement_scope, defaults.refinement_scope);
  EXPECT_NEAR(ranked.front().score, 201.69089318394919, 1e-9);
  EXPECT_LT(ranked.front().relative_error, 0.02);
}

TEST(Calibration, DepthwiseOnlyScopeRefinesFewerLayers) {
  ScoreConfig cfg;
  cfg.refinement_scope = RefinementScope::DepthwiseOnly;
  const auto b = st_score(presets::e3d_s(), cfg);
  const auto layers = flatten(presets::e3d_s());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind != ConvKind::Depthwise) {
      EXPECT_EQ(b.per_layer[i].refinement, 1.0);
    }
  }
}

}  // namespace
