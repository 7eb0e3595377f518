#include "gdr/diffusion.hpp"

#include <cmath>

#include "gdr/kernels.hpp"

namespace gdr::diffusion {

NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 2) throw ValueError("schedule: T must be >= 2, got " + std::to_string(T));
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ValueError("schedule: need 0 < beta_start <= beta_end < 1, got [" +
                         std::to_string(beta_start) + ", " + std::to_string(beta_end) +
                         "]");
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(T + 1, 0.0f);
    s.alpha.assign(T + 1, 1.0f);
    s.alpha_bar.assign(T + 1, 1.0f);
    s.posterior_var.assign(T + 1, 0.0f);
    s.sqrt_alpha_bar.assign(T + 1, 1.0f);
    s.sqrt_one_minus_alpha_bar.assign(T + 1, 0.0f);
    s.beta_d.assign(T + 1, 0.0);
    s.alpha_bar_d.assign(T + 1, 1.0);

    double ab = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double b =
            beta_start + (beta_end - beta_start) * static_cast<double>(t - 1) /
                             static_cast<double>(T - 1);
        const double ab_prev = ab;
        ab *= 1.0 - b;
        s.beta[t] = static_cast<float>(b);
        s.alpha[t] = static_cast<float>(1.0 - b);
        s.alpha_bar[t] = static_cast<float>(ab);
        s.posterior_var[t] = static_cast<float>((1.0 - ab_prev) / (1.0 - ab) * b);
        s.sqrt_alpha_bar[t] = static_cast<float>(std::sqrt(ab));
        s.sqrt_one_minus_alpha_bar[t] = static_cast<float>(std::sqrt(1.0 - ab));
        s.beta_d[t] = b;
        s.alpha_bar_d[t] = ab;
    }
    return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s) {
    s.check_t(t);
    check_same_shape(x0, eps, "q_sample");
    const float sa = s.sqrt_alpha_bar[t];
    const float sb = s.sqrt_one_minus_alpha_bar[t];
    Tensor out(x0.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = sa * x0.data[i] + sb * eps.data[i];
    return out;
}

Tensor estimate_x0(const Tensor& x_t, const Tensor& eps_hat, int t,
                   const NoiseSchedule& s) {
    s.check_t(t);
    check_same_shape(x_t, eps_hat, "estimate_x0");
    const float sa = s.sqrt_alpha_bar[t];
    const float sb = s.sqrt_one_minus_alpha_bar[t];
    Tensor out(x_t.shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        const float v = (x_t.data[i] - sb * eps_hat.data[i]) / sa;
        out.data[i] = std::min(std::max(v, -1.0f), 1.0f);
    }
    return out;
}

Tensor posterior_mean(const Tensor& x_t, const Tensor& x0_hat, int t,
                      const NoiseSchedule& s) {
    s.check_t(t);
    check_same_shape(x_t, x0_hat, "posterior_mean");
    const double ab_prev = s.alpha_bar_d[t - 1];
    const double ab = s.alpha_bar_d[t];
    const double b = s.beta_d[t];
    const double a = 1.0 - b;
    const float c0 = static_cast<float>(std::sqrt(ab_prev) * b / (1.0 - ab));
    const float ct = static_cast<float>(std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab));
    Tensor out(x_t.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = c0 * x0_hat.data[i] + ct * x_t.data[i];
    return out;
}

Tensor sample_step(const Tensor& x_t, const Tensor& x0_hat, int t,
                   const NoiseSchedule& s, Rng& rng) {
    Tensor out = posterior_mean(x_t, x0_hat, t, s);
    if (t > 1) {
        const float sigma = std::sqrt(s.posterior_var[t]);
        for (auto& v : out.data) v += sigma * static_cast<float>(rng.normal());
    }
    return out;
}

Tensor guided_sample_step(const Tensor& x_t, const Tensor& x0_hat, int t,
                          const NoiseSchedule& s, const Tensor& G, float s_scale,
                          Rng& rng) {
    check_same_shape(x_t, G, "guided_sample_step");
    if (s_scale == 0.0f) return sample_step(x_t, x0_hat, t, s, rng);
    Tensor out = posterior_mean(x_t, x0_hat, t, s);
    const float shift = s_scale * s.posterior_var[t];
    kernels::active().axpy(-shift, G.ptr(), out.ptr(), out.numel());
    if (t > 1) {
        const float sigma = std::sqrt(s.posterior_var[t]);
        for (auto& v : out.data) v += sigma * static_cast<float>(rng.normal());
    }
    return out;
}

void GmmPrior::validate() const {
    if (weights.empty() || weights.size() != means.size() ||
        weights.size() != variances.size())
        throw ValueError("gmm: component count mismatch");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ValueError("gmm: negative component weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw ValueError("gmm: weights sum to " + std::to_string(wsum) + ", not 1");
    for (size_t k = 0; k < means.size(); ++k) {
        check_same_shape(means[k], means[0], "gmm means");
        check_same_shape(variances[k], means[k], "gmm variance");
        for (float v : variances[k].data)
            if (!(v > 0.0f))
                throw ValueError("gmm: degenerate component variance (must be > 0)");
    }
}

Tensor gmm_predict_eps(const GmmPrior& prior, const Tensor& x_t, int t,
                       const NoiseSchedule& s) {
    prior.validate();
    s.check_t(t);
    const Shape4 item_shape = prior.means[0].shape;
    const int64_t d = item_shape.numel();
    if (x_t.shape.c != item_shape.c || x_t.shape.h != item_shape.h ||
        x_t.shape.w != item_shape.w)
        throw ShapeError("gmm_predict_eps: input " + x_t.shape.str() +
                         " does not match prior item " + item_shape.str());

    const double ab = s.alpha_bar_d[t];
    const double sa = std::sqrt(ab);
    const double sb = std::sqrt(1.0 - ab);
    const size_t K = prior.weights.size();

    Tensor eps(x_t.shape);
    std::vector<double> logp(K);
    for (int64_t n = 0; n < x_t.shape.n; ++n) {
        const float* x = x_t.ptr() + n * d;

        for (size_t k = 0; k < K; ++k) {
            const float* m = prior.means[k].ptr();
            const float* v = prior.variances[k].ptr();
            double acc = std::log(prior.weights[k] > 0.0 ? prior.weights[k] : 1e-300);
            for (int64_t i = 0; i < d; ++i) {
                const double s2 = ab * v[i] + (1.0 - ab);
                const double diff = x[i] - sa * m[i];
                acc -= 0.5 * (std::log(s2) + diff * diff / s2);
            }
            logp[k] = acc;
        }
        double mx = logp[0];
        for (double lp : logp) mx = std::max(mx, lp);
        double z = 0.0;
        for (double lp : logp) z += std::exp(lp - mx);
        const double logz = mx + std::log(z);

        float* e = eps.ptr() + n * d;
        for (int64_t i = 0; i < d; ++i) e[i] = 0.0f;
        for (size_t k = 0; k < K; ++k) {
            const double r = std::exp(logp[k] - logz);
            if (r == 0.0) continue;
            const float* m = prior.means[k].ptr();
            const float* v = prior.variances[k].ptr();
            for (int64_t i = 0; i < d; ++i) {
                const double s2 = ab * v[i] + (1.0 - ab);
                const double cond_mean = m[i] + sa * v[i] / s2 * (x[i] - sa * m[i]);
                e[i] += static_cast<float>(r * cond_mean);
            }
        }
        // e currently holds E[x0|x_t]; convert to eps.
        for (int64_t i = 0; i < d; ++i)
            e[i] = static_cast<float>((x[i] - sa * e[i]) / sb);
    }
    return eps;
}

Tensor sample_unguided(const Denoiser& den, const NoiseSchedule& s, Shape4 shape,
                       Rng& rng, const StepObserver& observer) {
    Tensor x = rng.normal_tensor(shape);
    for (int t = s.T; t >= 1; --t) {
        const Tensor eps_hat = den.predict_eps(x, t);
        const Tensor x0_hat = estimate_x0(x, eps_hat, t, s);
        x = sample_step(x, x0_hat, t, s, rng);
        if (observer) observer(t, x);
    }
    return x;
}

DenoiserTrainResult train_tiny_denoiser(nn::TinyDenoiser& model,
                                        std::span<const Tensor> dataset,
                                        const NoiseSchedule& sched, int steps,
                                        int batch_size, float lr, Rng& rng) {
    if (dataset.empty()) throw ValueError("train_tiny_denoiser: empty dataset");
    if (batch_size < 1) throw ValueError("train_tiny_denoiser: batch_size < 1");
    const Shape4 item = dataset[0].shape;
    for (const Tensor& im : dataset) check_same_shape(im, dataset[0], "dataset");

    DenoiserTrainResult res;
    res.loss_trace.reserve(static_cast<size_t>(std::max(steps, 0)));
    auto params = model.params();
    tape::AdamState opt;
    opt.lr = lr;

    for (int step = 0; step < steps; ++step) {
        Tensor xb({batch_size, item.c, item.h, item.w});
        Tensor epsb(xb.shape);
        std::vector<int> ts(static_cast<size_t>(batch_size));
        const int64_t stride = item.numel();
        for (int i = 0; i < batch_size; ++i) {
            const Tensor& x0 = dataset[static_cast<size_t>(
                rng.uniform_int(static_cast<int64_t>(dataset.size())))];
            const int t = static_cast<int>(rng.uniform_int(sched.T)) + 1;
            ts[static_cast<size_t>(i)] = t;
            const float sa = sched.sqrt_alpha_bar[t];
            const float sb = sched.sqrt_one_minus_alpha_bar[t];
            float* xp = xb.ptr() + i * stride;
            float* ep = epsb.ptr() + i * stride;
            for (int64_t j = 0; j < stride; ++j) {
                const float e = static_cast<float>(rng.normal());
                ep[j] = e;
                xp[j] = sa * x0.data[j] + sb * e;
            }
        }
        const tape::Var pred = model.forward(tape::constant(std::move(xb)), ts);
        const tape::Var loss = tape::mse(pred, tape::constant(std::move(epsb)));
        tape::zero_grads(params);
        tape::backward(loss);
        tape::adam_step(opt, params);
        res.loss_trace.push_back(loss->value.item());
    }
    return res;
}

}  // namespace gdr::diffusion
