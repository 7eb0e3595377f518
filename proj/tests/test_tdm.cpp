#include "gdr/tdm.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gdr/degrade.hpp"
#include "gdr/pipeline.hpp"
#include "gdr/rng.hpp"
#include "test_util.hpp"

using namespace gdr;
using namespace gdr::tdm;
using tape::constant;
using tape::Var;

namespace {

Net identity_net() {
    return [](const Var& x) { return tape::mul_scalar(x, 1.0f); };
}

Net constant_prob_net(float p) {
    return [p](const Var& x) {
        return tape::mul_scalar(
            tape::add_scalar(tape::mul_scalar(tape::mean_per_item(x), 0.0f), p), 1.0f);
    };
}

Tensor model_range_image(uint64_t seed) {
    Rng r(seed);
    return pipeline::to_model_range(degrade::shapes32_image(r));
}

}  // namespace

TEST(TdmLossesOp, IdentityPhiZeroesRecAndPec) {
    Rng rng(1);
    const Tensor g = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);
    const Tensor r = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);

    const nn::FeatureExtractor vfeat;
    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    cfg.lambda2 = 1.0f;
    cfg.lambda3 = 1.0f;
    const auto losses = tdm_losses(g, r, y, identity_net(), constant_prob_net(0.5f),
                                   [&](const Var& x) { return vfeat(x); }, cfg);
    EXPECT_NEAR(losses.rec, 0.0, 1e-10);
    EXPECT_NEAR(losses.pec, 0.0, 1e-10);
    EXPECT_NEAR(losses.gan, std::log(0.5), 1e-6);
}

TEST(TdmLossesOp, WeightSelection) {
    Rng rng(2);
    const Tensor g = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);
    const Tensor r = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);
    Rng nr(3);
    const nn::DegradationNet phi(nr);
    const nn::FeatureExtractor vfeat;

    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    cfg.lambda2 = 0.0f;
    cfg.lambda3 = 0.0f;
    const auto losses = tdm_losses(g, r, y, [&](const Var& x) { return phi(x); },
                                   constant_prob_net(0.5f),
                                   [&](const Var& x) { return vfeat(x); }, cfg);
    EXPECT_NEAR(losses.phi, losses.rec, 1e-9);
    EXPECT_GT(losses.rec, 0.0);

    TdmConfig bad;
    bad.lambda1 = bad.lambda2 = bad.lambda3 = 0.0f;
    EXPECT_THROW(bad.validate(), ValueError);
}

TEST(DiscriminatorLossOp, HandValues) {
    Rng rng(4);
    const Tensor y = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);
    const Tensor fake = rng.uniform_tensor({1, 3, 8, 8}, -1.0, 1.0);

    // D(y)=0.99, D(fake)=0.01: -ln 0.99 - ln 0.99.
    int call = 0;
    const Net d_sharp = [&call](const Var& x) {
        const float p = call++ == 0 ? 0.99f : 0.01f;
        return tape::add_scalar(tape::mul_scalar(tape::mean_per_item(x), 0.0f), p);
    };
    EXPECT_NEAR(discriminator_loss(y, fake, d_sharp), -2.0 * std::log(0.99), 1e-5);

    EXPECT_NEAR(discriminator_loss(y, fake, constant_prob_net(0.5f)),
                2.0 * std::log(2.0), 1e-5);

    // D(y) -> 0 saturates at the 1e-6 clamp.
    EXPECT_NEAR(discriminator_loss(y, fake, constant_prob_net(0.0f)),
                -std::log(1e-6) - std::log(1.0 - 1e-6), 1e-3);
}

TEST(TdmStep, ZeroStepsNoChange) {
    TdmConfig cfg;
    cfg.steps_per_timestep = 0;
    Tdm tdm(cfg, 5);
    const nn::FeatureExtractor vfeat;
    const Tensor w_before = tdm.phi().c1.w->value;

    const Tensor g = model_range_image(10);
    const Tensor y = model_range_image(11);
    const auto rec = tdm.step(g, Tensor(), y, vfeat, 500);
    EXPECT_EQ(rec.steps_run, 0);
    EXPECT_EQ(tdm.phi().c1.w->value.data, w_before.data);
}

TEST(TdmStep, RecLossNonIncreasingOnFixedBatch) {
    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    cfg.lambda2 = 0.0f;
    cfg.lambda3 = 0.0f;
    Tdm tdm(cfg, 6);
    const nn::FeatureExtractor vfeat;

    const Tensor g = model_range_image(20);
    const Tensor r = model_range_image(21);
    const Tensor y = model_range_image(22);

    double first = 0.0, last = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto rec = tdm.step(g, r, y, vfeat, i);
        if (i == 0) first = rec.losses.rec;
        last = rec.losses.rec;
    }
    EXPECT_LT(last, first * 1.05);  // non-increasing within 5%
    EXPECT_LT(last, first);         // and in practice clearly decreasing
}

TEST(TdmStep, InputsNeverMutated) {
    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    cfg.lambda2 = 0.5f;
    cfg.lambda3 = 0.2f;
    Tdm tdm(cfg, 7);
    const nn::FeatureExtractor vfeat;
    const Tensor g = model_range_image(30);
    const Tensor r = model_range_image(31);
    const Tensor y = model_range_image(32);
    const Tensor g0 = g, r0 = r, y0 = y;
    tdm.step(g, r, y, vfeat, 3);
    EXPECT_EQ(g.data, g0.data);
    EXPECT_EQ(r.data, r0.data);
    EXPECT_EQ(y.data, y0.data);
}

TEST(TdmStep, ReferredImageChangesPhiGradient) {
    // On asymmetric inputs the concatenated referred image must change the
    // phi gradient: run one backward with and without it and compare.
    Rng nr(8);
    nn::DegradationNet phi(nr);
    const nn::FeatureExtractor vfeat;
    const Tensor g = model_range_image(40);
    const Tensor r = model_range_image(41);

    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    const auto grad_of = [&](bool with_referred) {
        const auto params = phi.params();
        tape::zero_grads(params);
        Var cat = constant(g);
        if (with_referred) cat = tape::concat_batch(constant(g), constant(r));
        const Var loss = tape::mse(cat, phi(cat));
        tape::backward(loss);
        return phi.c1.w->grad();
    };
    const Tensor with = grad_of(true);
    const Tensor without = grad_of(false);
    double diff = 0;
    for (int64_t i = 0; i < with.numel(); ++i)
        diff = std::max(diff, std::abs(static_cast<double>(with.data[i]) - without.data[i]));
    EXPECT_GT(diff, 1e-6);
}

TEST(TdmStep, PhiParamGradientsPassFiniteDifference) {
    Rng nr(9);
    nn::DegradationNet phi(nr);
    const nn::FeatureExtractor vfeat;
    Rng ir(10);
    const Tensor g = ir.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);
    const Tensor r = ir.uniform_tensor({1, 3, 6, 6}, -0.9, 0.9);

    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    cfg.lambda2 = 0.3f;
    cfg.lambda3 = 0.0f;

    const auto loss_value = [&](const Tensor& w4) {
        phi.c4.w->value = w4;
        const Var cat = tape::concat_batch(constant(g), constant(r));
        const Var phi_out = phi(cat);
        const Var rec = tape::mse(cat, phi_out);
        const Var pec = tape::mse(vfeat(cat), vfeat(phi_out));
        return tape::add(tape::mul_scalar(rec, cfg.lambda1),
                         tape::mul_scalar(pec, cfg.lambda2))
            ->scalar();
    };

    const Tensor w0 = phi.c4.w->value;
    tape::zero_grads(phi.params());
    const Var cat = tape::concat_batch(constant(g), constant(r));
    const Var phi_out = phi(cat);
    const Var loss = tape::add(tape::mul_scalar(tape::mse(cat, phi_out), cfg.lambda1),
                               tape::mul_scalar(tape::mse(vfeat(cat), vfeat(phi_out)),
                                                cfg.lambda2));
    tape::backward(loss);
    const Tensor analytic = phi.c4.w->grad();
    const Tensor numeric = testutil::finite_diff(loss_value, w0);
    phi.c4.w->value = w0;
    EXPECT_LT(testutil::rel_err(analytic, numeric), 1e-3);
}

TEST(TdmStandalone, GammaDegradedTargetHalvesLoss) {
    // Acceptance-style fixture at reduced step count: clean shapes batch
    // vs a gamma-0.5 brightened target.
    Rng dr(50);
    std::vector<Tensor> clean;
    for (int i = 0; i < 4; ++i) {
        Rng r(Rng::mix(50, static_cast<uint64_t>(i)));
        clean.push_back(pipeline::to_model_range(degrade::shapes32_image(r)));
    }
    Rng yr(51);
    Tensor y01 = degrade::shapes32_image(yr);
    for (auto& v : y01.data) v = std::pow(v, 0.5f);
    const Tensor y = pipeline::to_model_range(y01);

    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    cfg.lambda2 = 0.05f;
    cfg.lambda3 = 0.01f;
    Tdm tdm(cfg, 52);
    const nn::FeatureExtractor vfeat;
    const auto trace = standalone_train(tdm, vfeat, clean, y, 120);
    ASSERT_EQ(trace.losses.size(), 120u);
    EXPECT_LT(trace.losses.back().phi, 0.5 * trace.losses.front().phi);
}

TEST(TdmStandalone, IdentityTargetsReduceRec) {
    // lambda = (1,0,0), targets equal inputs: phi drifts toward identity.
    std::vector<Tensor> clean;
    for (int i = 0; i < 2; ++i) {
        Rng r(Rng::mix(60, static_cast<uint64_t>(i)));
        clean.push_back(pipeline::to_model_range(degrade::shapes32_image(r)));
    }
    TdmConfig cfg;
    cfg.lambda1 = 1.0f;
    Tdm tdm(cfg, 61);
    const nn::FeatureExtractor vfeat;
    const auto trace = standalone_train(tdm, vfeat, clean, clean[0], 60);
    EXPECT_LT(trace.losses.back().rec, trace.losses.front().rec);
}

TEST(TdmStep, NonFiniteLossAborts) {
    TdmConfig cfg;
    Tdm tdm(cfg, 70);
    const nn::FeatureExtractor vfeat;
    Tensor g = model_range_image(71);
    g.data[0] = std::numeric_limits<float>::infinity();
    const Tensor y = model_range_image(72);
    EXPECT_THROW(tdm.step(g, Tensor(), y, vfeat, 42), std::runtime_error);
}
