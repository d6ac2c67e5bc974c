#include "pici/augment.hpp"

#include <gtest/gtest.h>

using namespace pici;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w, 3);
    Rng rng(seed);
    for (double& v : img.pixels()) v = rng.uniform();
    return img;
}

AugmentPolicy inert_strong(int target) {
    AugmentPolicy p = AugmentPolicy::strong(target);
    p.crop_scale_min = p.crop_scale_max = 1.0;
    p.jitter_strength = 0.0;
    p.grayscale_prob = p.flip_prob = p.blur_prob = 0.0;
    return p;
}

}  // namespace

TEST(WeakAugment, SameSizeUnitNormalizationIsIdentity) {
    const Image img = random_image(224, 224, 1);
    EXPECT_EQ(weak_augment(img, AugmentPolicy::weak(224)), img);
}

TEST(WeakAugment, OutputShapeMatchesTarget) {
    const Image out = weak_augment(random_image(180, 260, 2), AugmentPolicy::weak(224));
    EXPECT_EQ(out.height(), 224);
    EXPECT_EQ(out.width(), 224);
    EXPECT_EQ(out.channels(), 3);
}

TEST(WeakAugment, ConstantImageNormalizesAffinely) {
    AugmentPolicy p = AugmentPolicy::weak(16);
    p.normalize_mean = {0.1, 0.2, 0.3};
    p.normalize_std = {0.5, 0.25, 2.0};
    const Image out = weak_augment(Image(40, 24, 3, 0.7), p);
    for (int r = 0; r < out.height(); ++r)
        for (int c = 0; c < out.width(); ++c)
            for (int ch = 0; ch < 3; ++ch)
                EXPECT_NEAR(out.at(r, c, ch), (0.7 - p.normalize_mean[ch]) / p.normalize_std[ch], 1e-12);
}

TEST(WeakAugment, RejectsZeroAreaImage) {
    EXPECT_THROW(weak_augment(Image(), AugmentPolicy::weak(8)), InvalidImage);
    EXPECT_THROW(Image(0, 4, 3), InvalidImage);
}

TEST(WeakAugment, RequiresWeakPolicy) {
    EXPECT_THROW(weak_augment(random_image(8, 8, 3), AugmentPolicy::strong(8)), ConfigError);
}

TEST(StrongAugment, InertPolicyEqualsWeak) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Image img = random_image(30, 50, seed);
        EXPECT_EQ(strong_augment(img, inert_strong(32), seed), weak_augment(img, AugmentPolicy::weak(32)));
    }
}

TEST(StrongAugment, SameSeedSameOutput) {
    const Image img = random_image(40, 40, 4);
    const AugmentPolicy p = AugmentPolicy::strong(32);
    EXPECT_EQ(strong_augment(img, p, 77), strong_augment(img, p, 77));
}

TEST(StrongAugment, DifferentSeedsUsuallyDiffer) {
    const Image img = random_image(40, 40, 5);
    const AugmentPolicy p = AugmentPolicy::strong(32);
    int distinct = 0;
    for (std::uint64_t s = 0; s < 10; ++s) distinct += !(strong_augment(img, p, s) == strong_augment(img, p, s + 100));
    EXPECT_GE(distinct, 8);
}

TEST(StrongAugment, CertainFlipMirrorsAndIsAnInvolution) {
    const Image img = random_image(16, 16, 6);
    AugmentPolicy p = inert_strong(16);
    p.flip_prob = 1.0;
    const Image once = strong_augment(img, p, 1);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
            for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(once.at(r, c, ch), img.at(r, 15 - c, ch));
    EXPECT_EQ(strong_augment(once, p, 2), img);
}

TEST(StrongAugment, OutputFiniteAndShaped) {
    const AugmentPolicy p = AugmentPolicy::strong(24);
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Image out = strong_augment(random_image(20 + static_cast<int>(s), 33, s), p, s);
        EXPECT_EQ(out.height(), 24);
        EXPECT_EQ(out.width(), 24);
        EXPECT_TRUE(out.all_finite());
    }
}

TEST(StrongAugment, RequiresStrongPolicy) {
    EXPECT_THROW(strong_augment(random_image(8, 8, 7), AugmentPolicy::weak(8), 0), ConfigError);
}

TEST(Transforms, GrayscaleEqualizesChannels) {
    const Image g = to_grayscale(random_image(5, 7, 8));
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 7; ++c) {
            EXPECT_EQ(g.at(r, c, 0), g.at(r, c, 1));
            EXPECT_EQ(g.at(r, c, 1), g.at(r, c, 2));
        }
}

TEST(Transforms, JitterStaysInUnitRange) {
    const Image j = color_jitter(random_image(9, 9, 9), 1.4, 0.6, 1.4);
    EXPECT_TRUE(j.in_unit_range());
}

TEST(Transforms, NeutralJitterIsIdentity) {
    const Image img = random_image(9, 9, 10);
    const Image j = color_jitter(img, 1.0, 1.0, 1.0);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(j.pixels()[i], img.pixels()[i], 1e-12);
}

TEST(Transforms, BlurPreservesConstantImage) {
    const Image b = gaussian_blur(Image(12, 12, 3, 0.3), 1.5);
    for (double v : b.pixels()) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(Transforms, CenterCropSquare) {
    const Image img = random_image(10, 16, 11);
    const Image sq = center_crop_square(img);
    EXPECT_EQ(sq.height(), 10);
    EXPECT_EQ(sq.width(), 10);
    EXPECT_EQ(sq.at(0, 0, 0), img.at(0, 3, 0));
}

TEST(Transforms, CropWindowStaysInsideImage) {
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        const CropWindow w = sample_crop_window(37, 23, 0.5, 1.0, rng);
        EXPECT_GE(w.top, 0);
        EXPECT_GE(w.left, 0);
        EXPECT_LE(w.top + w.height, 37);
        EXPECT_LE(w.left + w.width, 23);
        EXPECT_GT(w.height, 0);
        EXPECT_GT(w.width, 0);
    }
}

TEST(Transforms, ImpossibleCropFallsBackToFullImage) {
    Rng rng(13);
    const CropWindow w = sample_crop_window(1, 40, 1.0, 1.0, rng);
    EXPECT_EQ(w.height, 1);
    EXPECT_EQ(w.width, 40);
}

TEST(Policy, ValidateRejectsBadValues) {
    AugmentPolicy p = AugmentPolicy::strong(32);
    p.flip_prob = 1.5;
    EXPECT_THROW(p.validate(), ConfigError);
    p = AugmentPolicy::strong(0);
    EXPECT_THROW(p.validate(), ConfigError);
    p = AugmentPolicy::strong(32);
    p.crop_scale_min = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
}
