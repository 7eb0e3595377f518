#include "gdr/tdg.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "double_ref.hpp"
#include "gdr/rng.hpp"
#include "test_util.hpp"

using namespace gdr;
using namespace gdr::tdg;
using tape::constant;
using tape::Var;

namespace {

Net identity_net() {
    return [](const Var& x) { return tape::mul_scalar(x, 1.0f); };
}

GuidanceConfig basic_cfg() {
    GuidanceConfig cfg;
    cfg.b1 = 600;
    cfg.b2 = 50;
    cfg.s = 1.0f;
    return cfg;
}

}  // namespace

TEST(StageOf, PaperBoundaries) {
    const GuidanceConfig cfg = basic_cfg();
    EXPECT_EQ(stage_of(999, cfg, 1000), Stage::First);
    EXPECT_EQ(stage_of(601, cfg, 1000), Stage::First);
    EXPECT_EQ(stage_of(600, cfg, 1000), Stage::Second);  // boundary -> later stage
    EXPECT_EQ(stage_of(51, cfg, 1000), Stage::Second);
    EXPECT_EQ(stage_of(50, cfg, 1000), Stage::Third);
    EXPECT_EQ(stage_of(0, cfg, 1000), Stage::Third);
    EXPECT_THROW(stage_of(1000, cfg, 1000), ValueError);
    EXPECT_THROW(stage_of(-1, cfg, 1000), ValueError);
}

TEST(StageOf, PartitionsTimesteps) {
    GuidanceConfig cfg = basic_cfg();
    cfg.b1 = 13;
    cfg.b2 = 4;
    const int T = 20;
    int count[3] = {0, 0, 0};
    for (int t = 0; t < T; ++t) count[static_cast<int>(stage_of(t, cfg, T))]++;
    EXPECT_EQ(count[0] + count[1] + count[2], T);
    EXPECT_EQ(count[0], T - 1 - cfg.b1);  // (b1, T-1]
    EXPECT_EQ(count[1], cfg.b1 - cfg.b2);
    EXPECT_EQ(count[2], cfg.b2 + 1);  // [0, b2]

    GuidanceConfig bad = cfg;
    bad.b2 = 15;
    EXPECT_THROW(bad.validate(T), ValueError);
}

TEST(Stage1, ZeroGammaAndAttainedMinimum) {
    Rng rng(1);
    const Tensor x0 = rng.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);
    const Tensor y = rng.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);

    const Tensor g0 = guidance_stage1(x0, y, identity_net(), 0.0f);
    for (float v : g0.data) EXPECT_FLOAT_EQ(v, 0.0f);

    // phi = identity and y = x0: gradient at the minimum is 0.
    const Tensor gmin = guidance_stage1(x0, x0, identity_net(), 1.0f);
    for (float v : gmin.data) EXPECT_FLOAT_EQ(v, 0.0f);
}

TEST(Stage1, ScalarHandValue) {
    // x0=1, y=0, phi=id, gamma=1: d/dx (x-y)^2 = 2.
    const Tensor x0 = Tensor::scalar(1.0f);
    const Tensor y = Tensor::scalar(0.0f);
    const Tensor g = guidance_stage1(x0, y, identity_net(), 1.0f);
    EXPECT_FLOAT_EQ(g.item(), 2.0f);
}

TEST(Stage1, MatchesFiniteDifferenceThroughPhi) {
    Rng nr(2);
    const nn::DegradationNet phi(nr);
    Rng rng(3);
    const float gamma = 1.7f;

    for (int fixture = 0; fixture < 3; ++fixture) {
        const Tensor x0 = rng.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);
        const Tensor y = rng.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);
        const dref::DTensor yd = dref::DTensor::from(y);
        const auto loss_at = [&](const dref::DTensor& xv) {
            return gamma * dref::mse(yd, dref::phi_forward(phi, xv));
        };
        const Tensor numeric = dref::finite_diff_d(loss_at, x0);
        const Tensor analytic =
            guidance_stage1(x0, y, [&](const Var& v) { return phi(v); }, gamma);
        EXPECT_LT(testutil::rel_err(analytic, numeric), 1e-3) << "fixture " << fixture;
    }
}

TEST(Stage2, AllZeroGammasGiveZero) {
    Rng rng(4);
    const Tensor x0g = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor x0r = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const nn::FeatureExtractor vfeat;
    Rng dr(5);
    nn::Discriminator dres(dr);
    tape::AdamState opt;

    GuidanceConfig cfg = basic_cfg();
    cfg.gamma2 = cfg.gamma3 = cfg.gamma4 = 0.0f;
    const auto out = guidance_stage2(x0g, x0r, y, identity_net(), vfeat, dres, opt, cfg);
    for (float v : out.G.data) EXPECT_FLOAT_EQ(v, 0.0f);
    EXPECT_FALSE(out.dres_updated);
    EXPECT_EQ(opt.step_count, 0);
}

TEST(Stage2, Gamma4ZeroSkipsDresEntirely) {
    Rng rng(6);
    const Tensor x0g = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor x0r = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const nn::FeatureExtractor vfeat;
    Rng dr(7);
    nn::Discriminator dres(dr);
    const Tensor w_before = dres.c1.w->value;
    tape::AdamState opt;

    GuidanceConfig cfg = basic_cfg();
    cfg.gamma2 = 1.0f;
    cfg.gamma3 = 0.5f;
    cfg.gamma4 = 0.0f;  // dehazing preset shape
    const auto out = guidance_stage2(x0g, x0r, y, identity_net(), vfeat, dres, opt, cfg);
    EXPECT_FALSE(out.dres_updated);
    EXPECT_EQ(opt.step_count, 0);
    EXPECT_EQ(dres.c1.w->value.data, w_before.data);
    EXPECT_GT(out.loss_rec, 0.0);
}

TEST(Stage2, OnlyGamma2EqualsStage1) {
    Rng rng(8);
    const Tensor x0g = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor x0r = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const nn::FeatureExtractor vfeat;
    Rng nr(9);
    const nn::DegradationNet phi(nr);
    const Net phi_net = [&](const Var& v) { return phi(v); };
    Rng dr(10);
    nn::Discriminator dres(dr);
    tape::AdamState opt;

    GuidanceConfig cfg = basic_cfg();
    cfg.gamma2 = 0.8f;
    const auto s2 = guidance_stage2(x0g, x0r, y, phi_net, vfeat, dres, opt, cfg);
    const Tensor s1 = guidance_stage1(x0g, y, phi_net, 0.8f);
    for (int64_t i = 0; i < s1.numel(); ++i)
        EXPECT_NEAR(s2.G.data[i], s1.data[i], 1e-7);
}

TEST(Stage2, DresUpdatesWhenAdversarialTermActive) {
    Rng rng(11);
    const Tensor x0g = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor x0r = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const nn::FeatureExtractor vfeat;
    Rng dr(12);
    nn::Discriminator dres(dr);
    const Tensor w_before = dres.c1.w->value;
    tape::AdamState opt;

    GuidanceConfig cfg = basic_cfg();
    cfg.gamma2 = 1.0f;
    cfg.gamma4 = 0.1f;
    const auto out = guidance_stage2(x0g, x0r, y, identity_net(), vfeat, dres, opt, cfg);
    EXPECT_TRUE(out.dres_updated);
    EXPECT_EQ(opt.step_count, 1);
    EXPECT_NE(dres.c1.w->value.data, w_before.data);
    EXPECT_TRUE(std::isfinite(out.dres_loss));
}

TEST(Stage3, Gamma5ZeroEqualsStage2) {
    Rng rng(13);
    const Tensor x0g = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor x0r = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -0.9, 0.9);
    const nn::FeatureExtractor vfeat;
    Rng nr(14);
    const nn::DegradationNet phi(nr);
    const Net phi_net = [&](const Var& v) { return phi(v); };

    GuidanceConfig cfg = basic_cfg();
    cfg.gamma2 = 1.0f;
    cfg.gamma3 = 0.2f;
    cfg.gamma5 = 0.0f;

    Rng d1(15);
    nn::Discriminator dres_a(d1);
    tape::AdamState opt_a;
    const auto s2 = guidance_stage2(x0g, x0r, y, phi_net, vfeat, dres_a, opt_a, cfg);

    Rng d2(15);
    nn::Discriminator dres_b(d2);
    tape::AdamState opt_b;
    const auto s3 = guidance_stage3(x0g, x0r, y, phi_net, vfeat, dres_b, opt_b, cfg);
    EXPECT_EQ(s2.G.data, s3.G.data);
}

TEST(Stage3, ConstantImageTvContributesNothing) {
    const Tensor x0g = Tensor::full({1, 3, 8, 8}, 0.25f);
    const Tensor y = Tensor::full({1, 3, 8, 8}, 0.1f);
    const nn::FeatureExtractor vfeat;
    Rng dr(16);
    nn::Discriminator dres(dr);
    tape::AdamState opt;

    GuidanceConfig cfg = basic_cfg();
    cfg.gamma5 = 10.0f;  // only TV active
    const auto out = guidance_stage3(x0g, Tensor(), y, identity_net(), vfeat, dres,
                                     opt, cfg);
    EXPECT_NEAR(out.loss_tv, 0.0, 1e-9);
    // Subgradient at ties is 0, so G is exactly zero.
    for (float v : out.G.data) EXPECT_FLOAT_EQ(v, 0.0f);
}

TEST(Stage3, FullGuidanceMatchesFiniteDifference) {
    Rng rng(17);
    const Tensor x0g = rng.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);
    const Tensor x0r = rng.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);
    const Tensor y = rng.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);
    const nn::FeatureExtractor vfeat;
    Rng nr(18);
    const nn::DegradationNet phi(nr);
    const Net phi_net = [&](const Var& v) { return phi(v); };

    GuidanceConfig cfg = basic_cfg();
    cfg.gamma2 = 1.3f;
    cfg.gamma3 = 0.4f;
    cfg.gamma4 = 0.2f;
    cfg.gamma5 = 0.6f;

    Rng d1(19);
    nn::Discriminator dres(d1);
    tape::AdamState opt;
    const auto out = guidance_stage3(x0g, x0r, y, phi_net, vfeat, dres, opt, cfg);

    // Rebuild the scalar loss with the *pre-update* dres weights: reinit
    // from the same seed so the finite-difference target matches.
    Rng d2(19);
    nn::Discriminator dres_fd(d2);
    const dref::DTensor yd = dref::DTensor::from(y);
    const auto loss_at = [&](const dref::DTensor& xv) {
        double acc = cfg.gamma2 * dref::mse(yd, dref::phi_forward(phi, xv));
        acc += cfg.gamma3 * dref::mse(dref::vfeat_forward(vfeat, yd),
                                      dref::vfeat_forward(vfeat, dref::phi_forward(phi, xv)));
        acc += cfg.gamma4 *
               dref::log_one_minus_mean(dref::disc_probs(dres_fd, dref::sub(xv, yd)));
        acc += cfg.gamma5 * dref::tv(xv);
        return acc;
    };
    const Tensor numeric = dref::finite_diff_d(loss_at, x0g);
    EXPECT_LT(testutil::rel_err(out.G, numeric), 1e-3);
}
