#include <gtest/gtest.h>

#include "e3dnas/e3dnas.hpp"
#include "support/nets.hpp"

namespace {

using namespace e3d;

TEST(SamePadding, CeilDivision) {
  EXPECT_EQ(same_padding_output({13, 160, 160}, 2, 1), (Shape3d{13, 80, 80}));
  EXPECT_EQ(same_padding_output({16, 39, 39}, 2, 1), (Shape3d{16, 20, 20}));
  EXPECT_EQ(same_padding_output({16, 10, 10}, 2, 2), (Shape3d{8, 5, 5}));
}

TEST(Flatten, LayerCounts) {
  EXPECT_EQ(flatten(presets::init_s()).size(), 17u);
  EXPECT_EQ(flatten(presets::e3d_s()).size(), 83u);
  EXPECT_EQ(flatten(presets::e3d_m()).size(), 83u);
  EXPECT_EQ(flatten(presets::e3d_l()).size(), 167u);
  EXPECT_EQ(depth(presets::e3d_s()), 83u);
  EXPECT_EQ(flatten(presets::e3d_s(), {true}).size(), 85u);
}

TEST(Flatten, BlockLayout) {
  const auto layers = flatten(presets::init_s());
  EXPECT_EQ(layers[0].id, "stem");
  EXPECT_EQ(layers[0].kind, ConvKind::Regular);
  EXPECT_EQ(layers[1].id, "stages[0].blocks[0].expand");
  EXPECT_EQ(layers[1].kind, ConvKind::Pointwise);
  EXPECT_EQ(layers[1].in_channels, 24);
  EXPECT_EQ(layers[1].out_channels, 48);
  EXPECT_EQ(layers[2].kind, ConvKind::Depthwise);
  EXPECT_EQ(layers[2].groups(), 48);
  EXPECT_EQ(layers[2].spatial_stride, 2);
  EXPECT_EQ(layers[3].id, "stages[0].blocks[0].project");
  EXPECT_EQ(layers[3].out_channels, 24);
  EXPECT_EQ(layers.back().id, "head");
  EXPECT_EQ(layers.back().out_channels, 512);

  const auto with_cls = flatten(presets::init_s(), {true});
  EXPECT_TRUE(with_cls[with_cls.size() - 2].pooled_input);
  EXPECT_EQ(with_cls.back().id, "classifier.logits");
  EXPECT_EQ(with_cls.back().out_channels, 174);
}

TEST(PropagateShapes, InitialTable) {
  const auto stages = stage_output_shapes(presets::init_s());
  const std::vector<Shape3d> expected{{13, 40, 40}, {13, 20, 20}, {13, 10, 10}, {13, 10, 10}, {13, 5, 5}};
  EXPECT_EQ(stages, expected);
  EXPECT_EQ(propagate_shapes(presets::init_s()).front().output, (Shape3d{13, 80, 80}));
}

TEST(PropagateShapes, FamilyTable) {
  EXPECT_EQ(stage_output_shapes(presets::e3d_m()).back(), (Shape3d{16, 7, 7}));
  const std::vector<Shape3d> large{{16, 78, 78}, {16, 39, 39}, {16, 20, 20}, {16, 20, 20}, {16, 10, 10}};
  EXPECT_EQ(stage_output_shapes(presets::e3d_l()), large);
  const auto with_cls = propagate_shapes(presets::e3d_s(), {true});
  EXPECT_EQ(with_cls.back().output, (Shape3d{1, 1, 1}));
}

TEST(Validate, RejectsChannelsOffGrid) {
  auto net = presets::init_s();
  net.stages[1].blocks[0].out_channels = 13;
  try {
    validate(net);
    FAIL() << "expected InvariantError";
  } catch (const InvariantError& e) {
    EXPECT_EQ(e.path(), "stages[1].blocks[0].out_channels");
  }
}

TEST(Validate, RejectsEvenKernelsAndEmptyStages) {
  auto net = presets::init_s();
  net.stages[0].blocks[0].dw_kernel = {1, 2, 3};
  EXPECT_THROW(validate(net), InvariantError);
  net = presets::init_s();
  net.stages[2].blocks.clear();
  EXPECT_THROW(validate(net), InvariantError);
}

TEST(Flatten, NoStagesLeavesStemAndHead) {
  auto net = presets::init_s();
  net.stages.clear();
  EXPECT_NO_THROW(validate(net));
  const auto layers = flatten(net);
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[1].in_channels, net.stem.out_channels);
}

TEST(Validate, ChainRules) {
  using fixtures::make_layer;
  ConvChain chain{{4, 4, 4}, 8, {make_layer("a", ConvKind::Regular, {3, 3, 3}, 8, 16),
                                 make_layer("b", ConvKind::Depthwise, {3, 3, 3}, 16, 16)}};
  EXPECT_NO_THROW(validate(chain));
  chain.layers[1].out_channels = 8;
  EXPECT_THROW(validate(chain), InvariantError);
  chain.layers[1].out_channels = 16;
  chain.layers[1].in_channels = 8;
  EXPECT_THROW(validate(chain), InvariantError);
  chain.layers[1] = make_layer("b", ConvKind::Pointwise, {3, 1, 1}, 16, 16);
  EXPECT_THROW(validate(chain), InvariantError);
  chain.layers[1] = make_layer("b", ConvKind::Regular, {3, 3, 3}, 16, 16, 3);
  EXPECT_THROW(validate(chain), InvariantError);
}

TEST(Presets, LookupByName) {
  for (auto name : presets::kNames) EXPECT_TRUE(presets::by_name(name).has_value()) << name;
  EXPECT_FALSE(presets::by_name("e3d-xl").has_value());
  EXPECT_EQ(*presets::by_name("e3d-m"), presets::e3d_m());
}

}  // namespace
