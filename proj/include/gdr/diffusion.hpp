#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gdr/nn.hpp"
#include "gdr/rng.hpp"
#include "gdr/tensor.hpp"

namespace gdr::diffusion {

// Per-timestep tables, 1-based: index t in {1..T}, index 0 holds the
// alpha_bar(0) = 1 sentinel so the posterior variance at t=1 is exactly 0.
struct NoiseSchedule {
    int T = 0;
    std::vector<float> beta;           // beta[t]
    std::vector<float> alpha;          // 1 - beta[t]
    std::vector<float> alpha_bar;      // prod alpha[1..t]
    std::vector<float> posterior_var;  // (1-ab[t-1])/(1-ab[t]) * beta[t]
    std::vector<float> sqrt_alpha_bar;
    std::vector<float> sqrt_one_minus_alpha_bar;
    // Double copies for coefficient math; 1-alpha_bar computed in float
    // loses most of its digits at small beta.
    std::vector<double> beta_d, alpha_bar_d;

    void check_t(int t) const {
        if (t < 1 || t > T)
            throw ValueError("timestep " + std::to_string(t) + " outside [1, " +
                             std::to_string(T) + "]");
    }
};

NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end);

// Forward corruption: sqrt(ab_t) x0 + sqrt(1-ab_t) eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s);

// (x_t - sqrt(1-ab_t) eps_hat) / sqrt(ab_t), clamped to [-1,1].
Tensor estimate_x0(const Tensor& x_t, const Tensor& eps_hat, int t,
                   const NoiseSchedule& s);

Tensor posterior_mean(const Tensor& x_t, const Tensor& x0_hat, int t,
                      const NoiseSchedule& s);

// One reverse step; no noise at t=1.
Tensor sample_step(const Tensor& x_t, const Tensor& x0_hat, int t,
                   const NoiseSchedule& s, Rng& rng);

// Guided step: mean shifted by -s_scale * posterior_var * G, where G is the
// gradient of the guidance loss (the shift descends it). s_scale == 0 is
// bit-identical to sample_step on the same rng stream.
Tensor guided_sample_step(const Tensor& x_t, const Tensor& x0_hat, int t,
                          const NoiseSchedule& s, const Tensor& G, float s_scale,
                          Rng& rng);

struct Denoiser {
    virtual ~Denoiser() = default;
    // Deterministic; output shape equals input shape. Batched inputs allowed.
    virtual Tensor predict_eps(const Tensor& x_t, int t) const = 0;
};

// Diagonal Gaussian mixture prior over flattened images; the analytic
// verification oracle for the sampler.
struct GmmPrior {
    std::vector<double> weights;
    std::vector<Tensor> means;      // each shaped (1,C,H,W)
    std::vector<Tensor> variances;  // per-dimension, strictly positive

    void validate() const;
};

// Exact MMSE eps-prediction under the mixture prior:
// eps_hat = (x_t - sqrt(ab_t) E[x0|x_t]) / sqrt(1-ab_t).
Tensor gmm_predict_eps(const GmmPrior& prior, const Tensor& x_t, int t,
                       const NoiseSchedule& s);

class GmmDenoiser final : public Denoiser {
public:
    GmmDenoiser(GmmPrior prior, NoiseSchedule sched)
        : prior_(std::move(prior)), sched_(std::move(sched)) {
        prior_.validate();
    }
    Tensor predict_eps(const Tensor& x_t, int t) const override {
        return gmm_predict_eps(prior_, x_t, t, sched_);
    }
    const GmmPrior& prior() const { return prior_; }

private:
    GmmPrior prior_;
    NoiseSchedule sched_;
};

class TinyDenoiserModel final : public Denoiser {
public:
    TinyDenoiserModel(nn::TinyDenoiserConfig cfg, Rng& rng) : net_(cfg, rng) {}
    Tensor predict_eps(const Tensor& x_t, int t) const override {
        return net_.predict(x_t, t);
    }
    nn::TinyDenoiser& net() { return net_; }
    const nn::TinyDenoiser& net() const { return net_; }

private:
    nn::TinyDenoiser net_;
};

using StepObserver = std::function<void(int t, const Tensor& x_prev)>;

// Plain reverse sampling from x_T ~ N(0,I) down to x_0 (the clamped final
// x0 estimate at t=1).
Tensor sample_unguided(const Denoiser& den, const NoiseSchedule& s, Shape4 shape,
                       Rng& rng, const StepObserver& observer = {});

struct DenoiserTrainResult {
    std::vector<float> loss_trace;
};

// Minimizes mean ||eps - model(q_sample(x0,t,eps), t)||^2 over random t via
// Adam, one batch per step. Dataset values must be in model range [-1,1].
DenoiserTrainResult train_tiny_denoiser(nn::TinyDenoiser& model,
                                        std::span<const Tensor> dataset,
                                        const NoiseSchedule& sched, int steps,
                                        int batch_size, float lr, Rng& rng);

}  // namespace gdr::diffusion
