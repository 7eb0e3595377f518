#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gdr/rng.hpp"
#include "gdr/tape.hpp"
#include "gdr/tensor.hpp"

namespace gdr::nn {

using tape::Var;

Tensor he_normal(Shape4 s, Rng& rng);

struct Conv2d {
    Var w, b;
    int64_t stride = 1;
    int64_t pad = 1;

    Conv2d() = default;
    Conv2d(int64_t ic, int64_t oc, int64_t k, int64_t stride, int64_t pad, Rng& rng,
           bool trainable = true);

    Var operator()(const Var& x) const { return tape::conv2d(x, w, b, stride, pad); }
    void collect(std::vector<Var>& out) const {
        out.push_back(w);
        out.push_back(b);
    }
    int64_t param_count() const { return w->value.numel() + b->value.numel(); }
};

// Degradation model phi: 4 conv layers 3-16-16-16-3, leaky-relu between,
// linear output clamped to model range [-1,1].
struct DegradationNet {
    Conv2d c1, c2, c3, c4;
    float slope = 0.2f;

    explicit DegradationNet(Rng& rng);
    Var operator()(const Var& x) const;
    std::vector<Var> params() const;
};

// 4 conv layers with stride-2 downsampling, global mean + sigmoid head;
// one probability per batch item, shape (N,1,1,1).
struct Discriminator {
    Conv2d c1, c2, c3, c4;
    float slope = 0.2f;

    explicit Discriminator(Rng& rng);
    Var operator()(const Var& x) const;
    std::vector<Var> params() const;
};

// Frozen random conv+relu stack used as the perceptual feature map.
// Same seed, same features, forever.
struct FeatureExtractor {
    Conv2d c1, c2, c3;

    static constexpr uint64_t kDefaultSeed = 0x7fe21u;
    explicit FeatureExtractor(uint64_t seed = kDefaultSeed);
    Var operator()(const Var& x) const;
};

struct TinyDenoiserConfig {
    int64_t base_channels = 32;
    int64_t temb_dim = 64;
};

// 3-level conv encoder-decoder eps-predictor with additive skips and a
// sinusoidal timestep embedding injected per level as a channel bias.
struct TinyDenoiser {
    TinyDenoiserConfig cfg;
    Conv2d e0a, e0b, down0, e1a, down1, mid_a, mid_b;
    Conv2d d1a, d0a, head;
    Conv2d t_mlp, t0, t1, tmid;  // 1x1 projections of the time embedding
    float slope = 0.1f;

    TinyDenoiser(TinyDenoiserConfig cfg, Rng& rng);

    // Per-item timesteps (1-based); ts.size() must equal batch size.
    Var forward(const Var& x, std::span<const int> ts) const;
    Tensor predict(const Tensor& x, int t) const;

    std::vector<Var> params() const;
    int64_t param_count() const;

    Tensor time_features(std::span<const int> ts) const;
};

inline std::vector<Var> collect_params(std::initializer_list<const Conv2d*> layers) {
    std::vector<Var> out;
    for (const Conv2d* l : layers) l->collect(out);
    return out;
}

}  // namespace gdr::nn
