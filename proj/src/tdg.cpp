#include "gdr/tdg.hpp"

#include <cmath>

namespace gdr::tdg {

using namespace tape;

Stage stage_of(int t, const GuidanceConfig& cfg, int T) {
    cfg.validate(T);
    if (t < 0 || t >= T)
        throw ValueError("stage_of: t=" + std::to_string(t) + " outside [0, " +
                         std::to_string(T - 1) + "]");
    if (t > cfg.b1) return Stage::First;
    if (t > cfg.b2) return Stage::Second;
    return Stage::Third;
}

double tv_loss(const Tensor& x) { return tv(constant(x))->value.item(); }

Tensor guidance_stage1(const Tensor& x0_hat, const Tensor& y, const Net& phi,
                       float gamma1) {
    check_same_shape(x0_hat, y, "guidance_stage1");
    if (gamma1 == 0.0f) return Tensor(x0_hat.shape);
    const Var x = leaf(x0_hat, true);
    const Var loss = mul_scalar(mse(constant(y), phi(x)), gamma1);
    backward(loss);
    return x->grad();
}

namespace {

void check_finite_guidance(const Tensor& G, const char* where) {
    if (!G.all_finite())
        throw std::runtime_error(std::string(where) + ": non-finite guidance tensor");
}

StageGuidance stage23_impl(const Tensor& x0g_hat, const Tensor& x0r_hat,
                           const Tensor& y, const Net& phi,
                           const nn::FeatureExtractor& vfeat,
                           nn::Discriminator& dres, tape::AdamState& dres_opt,
                           const GuidanceConfig& cfg, bool with_tv) {
    check_same_shape(x0g_hat, y, "guidance_stage2");
    StageGuidance out;

    const bool any = cfg.gamma2 != 0 || cfg.gamma3 != 0 || cfg.gamma4 != 0 ||
                     (with_tv && cfg.gamma5 != 0);
    const Var xg = leaf(x0g_hat, true);
    const Var yc = constant(y);
    Var total;

    const Var rec = mse(yc, phi(xg));
    out.loss_rec = rec->value.item();
    if (cfg.gamma2 != 0) total = mul_scalar(rec, cfg.gamma2);

    if (cfg.gamma3 != 0) {
        const Var pec = mse(vfeat(yc), vfeat(phi(xg)));
        out.loss_pec = pec->value.item();
        const Var term = mul_scalar(pec, cfg.gamma3);
        total = total ? add(total, term) : term;
    }

    if (cfg.gamma4 != 0) {
        const Var adv = log_one_minus_mean(dres(sub(xg, yc)));
        out.loss_adv = adv->value.item();
        const Var term = mul_scalar(adv, cfg.gamma4);
        total = total ? add(total, term) : term;
    }

    if (with_tv && cfg.gamma5 != 0) {
        const Var tvl = tv(xg);
        out.loss_tv = tvl->value.item();
        const Var term = mul_scalar(tvl, cfg.gamma5);
        total = total ? add(total, term) : term;
    }

    if (any && total) {
        const auto dres_params = dres.params();
        zero_grads(dres_params);  // adv term routed grads into Dres; discard
        backward(total);
        out.G = xg->grad();
    } else {
        out.G = Tensor(x0g_hat.shape);
    }
    check_finite_guidance(out.G, "guidance_stage2/3");

    if (cfg.gamma4 != 0) {
        // One Adam step on Eq-style L_dis with detached residuals:
        // fake = x0g - y, real = [x0g, x0r] - phi([x0g, x0r]).
        Tensor fake(x0g_hat.shape);
        for (int64_t i = 0; i < fake.numel(); ++i)
            fake.data[i] = x0g_hat.data[i] - y.data[i];

        Var cat = constant(x0g_hat);
        if (x0r_hat.numel() > 0) cat = concat_batch(cat, constant(x0r_hat));
        const Tensor phi_out = phi(cat)->value;
        Tensor real(cat->value.shape);
        for (int64_t i = 0; i < real.numel(); ++i)
            real.data[i] = cat->value.data[i] - phi_out.data[i];

        const auto dres_params = dres.params();
        const Var dloss = mul_scalar(
            add(log_one_minus_mean(dres(constant(fake))), log_mean(dres(constant(real)))),
            -1.0f);
        out.dres_loss = dloss->value.item();
        if (!std::isfinite(out.dres_loss))
            throw std::runtime_error("guidance_stage2: non-finite Dres loss");
        zero_grads(dres_params);
        backward(dloss);
        adam_step(dres_opt, dres_params);
        out.dres_updated = true;
    }
    return out;
}

}  // namespace

StageGuidance guidance_stage2(const Tensor& x0g_hat, const Tensor& x0r_hat,
                              const Tensor& y, const Net& phi,
                              const nn::FeatureExtractor& vfeat,
                              nn::Discriminator& dres, tape::AdamState& dres_opt,
                              const GuidanceConfig& cfg) {
    return stage23_impl(x0g_hat, x0r_hat, y, phi, vfeat, dres, dres_opt, cfg, false);
}

StageGuidance guidance_stage3(const Tensor& x0g_hat, const Tensor& x0r_hat,
                              const Tensor& y, const Net& phi,
                              const nn::FeatureExtractor& vfeat,
                              nn::Discriminator& dres, tape::AdamState& dres_opt,
                              const GuidanceConfig& cfg) {
    return stage23_impl(x0g_hat, x0r_hat, y, phi, vfeat, dres, dres_opt, cfg, true);
}

Tdg::Tdg(GuidanceConfig cfg, uint64_t seed) : cfg_(cfg), dres_([&] {
          Rng r(Rng::mix(seed, 3));
          return nn::Discriminator(r);
      }()) {
    opt_.lr = 1e-3f;
}

void Tdg::reinit(uint64_t seed) {
    Rng r(Rng::mix(seed, 3));
    dres_ = nn::Discriminator(r);
    opt_ = tape::AdamState{};
    opt_.lr = 1e-3f;
}

StageGuidance Tdg::guided(Stage stage, const Tensor& x0g_hat, const Tensor& x0r_hat,
                          const Tensor& y, const Net& phi,
                          const nn::FeatureExtractor& vfeat) {
    switch (stage) {
        case Stage::First: {
            StageGuidance out;
            out.G = guidance_stage1(x0g_hat, y, phi, cfg_.gamma1);
            check_finite_guidance(out.G, "guidance_stage1");
            return out;
        }
        case Stage::Second:
            return guidance_stage2(x0g_hat, x0r_hat, y, phi, vfeat, dres_, opt_, cfg_);
        case Stage::Third:
        default:
            return guidance_stage3(x0g_hat, x0r_hat, y, phi, vfeat, dres_, opt_, cfg_);
    }
}

Tensor Tdg::referred(const Tensor& x0r_item, const Tensor& y, const Net& phi) const {
    return guidance_stage1(x0r_item, y, phi, cfg_.gamma1);
}

}  // namespace gdr::tdg
