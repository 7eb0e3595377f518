#include "gdr/tdm.hpp"

#include <cmath>

namespace gdr::tdm {

using namespace tape;

namespace {

Var concat_estimates(const Tensor& x0g, const Tensor& x0r) {
    Var g = constant(x0g);
    if (x0r.shape.n == 0 || x0r.empty()) return g;
    return concat_batch(g, constant(x0r));
}

struct PhiLossGraph {
    Var rec, pec, gan, total;
    Var phi_out;
};

PhiLossGraph build_phi_losses(const Var& cat, const Net& phi, const Net& dis,
                              const Net& vfeat, const TdmConfig& cfg) {
    PhiLossGraph g;
    g.phi_out = phi(cat);
    g.rec = mse(cat, g.phi_out);
    g.pec = mse(vfeat(cat), vfeat(g.phi_out));
    g.gan = log_one_minus_mean(dis(g.phi_out));
    g.total = mul_scalar(g.rec, cfg.lambda1);
    if (cfg.lambda2 != 0.0f) g.total = add(g.total, mul_scalar(g.pec, cfg.lambda2));
    if (cfg.lambda3 != 0.0f) g.total = add(g.total, mul_scalar(g.gan, cfg.lambda3));
    return g;
}

}  // namespace

TdmLosses tdm_losses(const Tensor& x0g_hat, const Tensor& x0r_hat, const Tensor& y,
                     const Net& phi, const Net& dis, const Net& vfeat,
                     const TdmConfig& cfg) {
    cfg.validate();
    if (x0r_hat.numel() > 0 &&
        (x0r_hat.shape.c != x0g_hat.shape.c || x0r_hat.shape.h != x0g_hat.shape.h ||
         x0r_hat.shape.w != x0g_hat.shape.w))
        throw ShapeError("tdm_losses: referred " + x0r_hat.shape.str() +
                         " vs guided " + x0g_hat.shape.str());
    check_same_shape(x0g_hat, y, "tdm_losses(y)");
    const Var cat = concat_estimates(x0g_hat, x0r_hat);
    const PhiLossGraph g = build_phi_losses(cat, phi, dis, vfeat, cfg);
    TdmLosses out;
    out.rec = g.rec->value.item();
    out.pec = g.pec->value.item();
    out.gan = g.gan->value.item();
    out.phi = static_cast<double>(cfg.lambda1) * out.rec +
              static_cast<double>(cfg.lambda2) * out.pec +
              static_cast<double>(cfg.lambda3) * out.gan;
    return out;
}

double discriminator_loss(const Tensor& y, const Tensor& phi_out, const Net& dis) {
    const Var d_real = dis(constant(y));
    const Var d_fake = dis(constant(phi_out));
    const Var loss =
        mul_scalar(add(log_mean(d_real), log_one_minus_mean(d_fake)), -1.0f);
    return loss->value.item();
}

Tdm::Tdm(TdmConfig cfg, uint64_t seed) : cfg_(cfg), phi_([&] {
          Rng r(Rng::mix(seed, 1));
          return nn::DegradationNet(r);
      }()),
      dis_([&] {
          Rng r(Rng::mix(seed, 2));
          return nn::Discriminator(r);
      }()) {
    cfg_.validate();
    opt_phi_.lr = cfg_.lr;
    opt_dis_.lr = cfg_.lr;
}

void Tdm::reinit(uint64_t seed) {
    Rng r1(Rng::mix(seed, 1));
    phi_ = nn::DegradationNet(r1);
    Rng r2(Rng::mix(seed, 2));
    dis_ = nn::Discriminator(r2);
    opt_phi_ = tape::AdamState{};
    opt_phi_.lr = cfg_.lr;
    opt_dis_ = tape::AdamState{};
    opt_dis_.lr = cfg_.lr;
}

Net Tdm::phi_net() const {
    return [this](const Var& x) { return phi_(x); };
}

Net Tdm::dis_net() const {
    return [this](const Var& x) { return dis_(x); };
}

Tensor Tdm::apply_phi(const Tensor& x) const { return phi_(constant(x))->value; }

Tdm::StepRecord Tdm::step(const Tensor& x0g_hat, const Tensor& x0r_hat,
                          const Tensor& y, const nn::FeatureExtractor& vfeat,
                          int timestep) {
    if (!x0g_hat.all_finite() || !x0r_hat.all_finite() || !y.all_finite())
        throw std::runtime_error("tdm_step: non-finite input at t=" +
                                 std::to_string(timestep));
    StepRecord rec;
    const Net phi = phi_net();
    const Net dis = dis_net();
    const Net vf = [&vfeat](const Var& x) { return vfeat(x); };

    const auto phi_params = phi_.params();
    const auto dis_params = dis_.params();

    for (int i = 0; i < cfg_.steps_per_timestep; ++i) {
        const Var cat = concat_estimates(x0g_hat, x0r_hat);
        const PhiLossGraph g = build_phi_losses(cat, phi, dis, vf, cfg_);
        rec.losses.rec = g.rec->value.item();
        rec.losses.pec = g.pec->value.item();
        rec.losses.gan = g.gan->value.item();
        rec.losses.phi = g.total->value.item();
        if (!std::isfinite(rec.losses.phi))
            throw std::runtime_error("tdm_step: non-finite L_phi at t=" +
                                     std::to_string(timestep));

        zero_grads(phi_params);
        zero_grads(dis_params);  // gradient also flows through D; discard it
        backward(g.total);
        adam_step(opt_phi_, phi_params);

        // Discriminator step against the updated phi's (detached) output.
        const Tensor phi_out_now = apply_phi(cat->value);
        const Var d_real = dis(constant(y));
        const Var d_fake = dis(constant(phi_out_now));
        const Var dloss =
            mul_scalar(add(log_mean(d_real), log_one_minus_mean(d_fake)), -1.0f);
        rec.dis_loss = dloss->value.item();
        if (!std::isfinite(rec.dis_loss))
            throw std::runtime_error("tdm_step: non-finite L_dis at t=" +
                                     std::to_string(timestep));
        zero_grads(dis_params);
        backward(dloss);
        adam_step(opt_dis_, dis_params);
        ++rec.steps_run;
    }
    return rec;
}

StandaloneTrace standalone_train(Tdm& tdm, const nn::FeatureExtractor& vfeat,
                                 std::span<const Tensor> clean_model_range,
                                 const Tensor& y_model_range, int steps) {
    if (clean_model_range.empty())
        throw ValueError("standalone_train: no clean inputs");
    StandaloneTrace trace;
    const size_t n = clean_model_range.size();
    for (int i = 0; i < steps; ++i) {
        const Tensor& g = clean_model_range[static_cast<size_t>(i) % n];
        const Tensor& r = clean_model_range[(static_cast<size_t>(i) + 1) % n];
        const auto rec = tdm.step(g, n > 1 ? r : Tensor(), y_model_range, vfeat, i);
        trace.losses.push_back(rec.losses);
        trace.dis_losses.push_back(rec.dis_loss);
    }
    return trace;
}

}  // namespace gdr::tdm
