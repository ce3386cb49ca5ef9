#include <catch2/catch_amalgamated.hpp>

#include "pixdesc/augment.hpp"
#include "test_util.hpp"

using namespace pixdesc;

namespace {

ImageU8 noise_image(int w, int h, std::uint64_t seed) {
  ImageU8 img(w, h, 3);
  Rng rng(seed);
  for (auto& e : img.data) e = std::uint8_t(rng.uniform_index(256));
  return img;
}

AugmentConfig all_off() {
  AugmentConfig c;
  c.resize_crop_prob = c.perspective_prob = c.affine_prob = c.hflip_prob =
      c.vflip_prob = c.rotation_prob = c.blur_prob = c.color_jitter_prob =
          c.grayscale_prob = 0;
  return c;
}

}  // namespace

TEST_CASE("sample: zero probabilities give the identity spec") {
  Rng rng(1);
  AugmentationSpec spec = sample_augmentation_sequence(all_off(), 64, 64, rng);
  CHECK(spec.steps.empty());
  CHECK(!spec.has_geometric());
  CHECK((spec.forward_map - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("sample: hflip probability 1 with the rest 0 gives [hflip]") {
  AugmentConfig c = all_off();
  c.hflip_prob = 1;
  Rng rng(2);
  AugmentationSpec spec = sample_augmentation_sequence(c, 64, 64, rng);
  REQUIRE(spec.steps.size() == 1);
  CHECK(std::holds_alternative<HFlipParams>(spec.steps[0]));
}

TEST_CASE("sample: fixed seed with defaults matches golden") {
  AugmentConfig c;
  Rng rng(997);
  std::ostringstream os;
  for (int i = 0; i < 4; ++i)
    os << "--- draw " << i << "\n"
       << sample_augmentation_sequence(c, 64, 64, rng).to_string();
  CHECK(testutil::check_golden("augment_spec_seed997.txt", os.str()));
}

TEST_CASE("apply: identity spec is bit-identical") {
  ImageU8 img = noise_image(32, 24, 5);
  AugmentationSpec spec = AugmentationSpec::identity(32, 24);
  CHECK(apply_augmentation(img, spec) == img);
}

TEST_CASE("apply: hflip reverses columns") {
  ImageU8 img = noise_image(16, 8, 6);
  AugmentationSpec spec = AugmentationSpec::identity(16, 8);
  spec.steps.emplace_back(HFlipParams{});
  spec.rebuild_map();
  ImageU8 out = apply_augmentation(img, spec);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 16; ++u)
      for (int ch = 0; ch < 3; ++ch)
        CHECK(out.at(u, v, ch) == img.at(15 - u, v, ch));
}

TEST_CASE("apply: grayscale sets all channels to rounded luma") {
  ImageU8 img = noise_image(8, 8, 7);
  AugmentationSpec spec = AugmentationSpec::identity(8, 8);
  spec.steps.emplace_back(GrayscaleParams{});
  ImageU8 out = apply_augmentation(img, spec);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      float luma = 0.299f * img.at(u, v, 0) + 0.587f * img.at(u, v, 1) +
                   0.114f * img.at(u, v, 2);
      int expect = int(std::lround(luma));
      for (int ch = 0; ch < 3; ++ch) CHECK(int(out.at(u, v, ch)) == expect);
    }
}

TEST_CASE("apply: blur keeps a constant image constant") {
  ImageU8 img(16, 16, 3, 137);
  AugmentationSpec spec = AugmentationSpec::identity(16, 16);
  spec.steps.emplace_back(BlurParams{5, 1.3});
  CHECK(apply_augmentation(img, spec) == img);
}

TEST_CASE("apply: size mismatch throws") {
  ImageU8 img = noise_image(16, 16, 8);
  AugmentationSpec spec = AugmentationSpec::identity(8, 8);
  CHECK_THROWS_AS(apply_augmentation(img, spec), DimensionMismatch);
}

TEST_CASE("remap: identity specs leave pairs unchanged and valid") {
  AugmentationSpec id = AugmentationSpec::identity(64, 64);
  std::vector<PixelPair> pairs{{{3, 4}, {10, 20}}, {{63, 0}, {0, 63}}};
  RemappedPairs out = remap_correspondences(pairs, id, id);
  CHECK(out.pairs == pairs);
  CHECK(out.valid == std::vector<std::uint8_t>{1, 1});
}

TEST_CASE("remap: hflip on a 64-wide image maps u=10 to 53") {
  AugmentationSpec flip = AugmentationSpec::identity(64, 64);
  flip.steps.emplace_back(HFlipParams{});
  flip.rebuild_map();
  AugmentationSpec id = AugmentationSpec::identity(64, 64);
  RemappedPairs out = remap_correspondences({{{10, 20}, {10, 20}}}, flip, id);
  CHECK(out.pairs[0].a == Pixel{53, 20});
  CHECK(out.pairs[0].b == Pixel{10, 20});
  CHECK(out.valid[0] == 1);
}

TEST_CASE("remap: photometric-only specs are the identity map") {
  AugmentationSpec photo = AugmentationSpec::identity(64, 64);
  photo.steps.emplace_back(BlurParams{5, 0.8});
  photo.steps.emplace_back(ColorJitterParams{1.2, 0.9, 1.1, 0.05});
  photo.steps.emplace_back(GrayscaleParams{});
  photo.rebuild_map();
  std::vector<PixelPair> pairs{{{7, 9}, {30, 40}}};
  RemappedPairs out = remap_correspondences(pairs, photo, photo);
  CHECK(out.pairs == pairs);
  CHECK(out.valid[0] == 1);
}

TEST_CASE("remap: 90-degree rotation moves pixels onto matching colors") {
  ImageU8 img = noise_image(64, 64, 11);
  AugmentationSpec rot = AugmentationSpec::identity(64, 64);
  rot.steps.emplace_back(RotationParams{M_PI / 2});
  rot.rebuild_map();
  ImageU8 warped = apply_augmentation(img, rot);

  int agree = 0, total = 0;
  AugmentationSpec id = AugmentationSpec::identity(64, 64);
  for (int v = 0; v < 64; v += 3)
    for (int u = 0; u < 64; u += 3) {
      RemappedPairs out = remap_correspondences({{{u, v}, {0, 0}}}, rot, id);
      if (!out.valid[0]) continue;
      ++total;
      Pixel q = out.pairs[0].a;
      bool same = true;
      for (int ch = 0; ch < 3; ++ch)
        same = same && warped.at(q.u, q.v, ch) == img.at(u, v, ch);
      agree += same;
    }
  REQUIRE(total > 400);
  CHECK(double(agree) / double(total) >= 0.99);
}

TEST_CASE("geometric specs invert to better than half a pixel") {
  AugmentConfig c;
  c.blur = c.color_jitter = c.grayscale = false;
  c.resize_crop_prob = c.perspective_prob = c.affine_prob = c.hflip_prob =
      c.vflip_prob = c.rotation_prob = 1.0;
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    AugmentationSpec spec = sample_augmentation_sequence(c, 64, 64, rng);
    REQUIRE(spec.has_geometric());
    Eigen::Matrix3d inv = spec.forward_map.inverse();
    for (int v = 0; v < 64; v += 7)
      for (int u = 0; u < 64; u += 7) {
        Eigen::Vector2d fwd = hom::apply(spec.forward_map, u, v);
        Eigen::Vector2d back = hom::apply(inv, fwd.x(), fwd.y());
        CHECK(std::hypot(back.x() - u, back.y() - v) < 0.5);
      }
  }
}

TEST_CASE("resize_crop invalidation stays within the crop-area bound") {
  AugmentConfig c = all_off();
  c.resize_crop_prob = 1.0;
  Rng rng(17);
  AugmentationSpec id = AugmentationSpec::identity(64, 64);
  for (int trial = 0; trial < 8; ++trial) {
    AugmentationSpec spec = sample_augmentation_sequence(c, 64, 64, rng);
    REQUIRE(spec.steps.size() == 1);
    const auto& rc = std::get<ResizeCropParams>(spec.steps[0]);
    double area_ratio = (rc.cw * rc.ch) / (64.0 * 64.0);

    std::vector<PixelPair> pairs;
    for (int v = 0; v < 64; ++v)
      for (int u = 0; u < 64; ++u) pairs.push_back({{u, v}, {u, v}});
    RemappedPairs out = remap_correspondences(pairs, spec, id);
    std::size_t invalid = 0;
    for (auto ok : out.valid) invalid += ok == 0;
    double frac = double(invalid) / double(pairs.size());
    CHECK(frac <= 1.0 - area_ratio + 0.05);
  }
}
