#include "gdr/nn.hpp"

#include <cmath>

namespace gdr::nn {

using namespace tape;

Tensor he_normal(Shape4 s, Rng& rng) {
    const int64_t fan_in = s.c * s.h * s.w;
    const float std = std::sqrt(2.0f / static_cast<float>(fan_in));
    Tensor t = rng.normal_tensor(s);
    for (auto& v : t.data) v *= std;
    return t;
}

Conv2d::Conv2d(int64_t ic, int64_t oc, int64_t k, int64_t stride, int64_t pad,
               Rng& rng, bool trainable)
    : stride(stride), pad(pad) {
    w = leaf(he_normal({oc, ic, k, k}, rng), trainable);
    b = leaf(Tensor({1, oc, 1, 1}), trainable);
}

DegradationNet::DegradationNet(Rng& rng)
    : c1(3, 16, 3, 1, 1, rng),
      c2(16, 16, 3, 1, 1, rng),
      c3(16, 16, 3, 1, 1, rng),
      c4(16, 3, 3, 1, 1, rng) {}

Var DegradationNet::operator()(const Var& x) const {
    Var h = leaky_relu(c1(x), slope);
    h = leaky_relu(c2(h), slope);
    h = leaky_relu(c3(h), slope);
    return clamp(c4(h), -1.0f, 1.0f);
}

std::vector<Var> DegradationNet::params() const {
    return collect_params({&c1, &c2, &c3, &c4});
}

Discriminator::Discriminator(Rng& rng)
    : c1(3, 16, 3, 2, 1, rng),
      c2(16, 32, 3, 2, 1, rng),
      c3(32, 64, 3, 2, 1, rng),
      c4(64, 1, 3, 1, 1, rng) {}

Var Discriminator::operator()(const Var& x) const {
    Var h = leaky_relu(c1(x), slope);
    h = leaky_relu(c2(h), slope);
    h = leaky_relu(c3(h), slope);
    return sigmoid(mean_per_item(c4(h)));
}

std::vector<Var> Discriminator::params() const {
    return collect_params({&c1, &c2, &c3, &c4});
}

FeatureExtractor::FeatureExtractor(uint64_t seed) {
    Rng rng(seed);
    c1 = Conv2d(3, 16, 3, 1, 1, rng, false);
    c2 = Conv2d(16, 32, 3, 2, 1, rng, false);
    c3 = Conv2d(32, 32, 3, 1, 1, rng, false);
}

Var FeatureExtractor::operator()(const Var& x) const {
    return relu(c3(relu(c2(relu(c1(x))))));
}

TinyDenoiser::TinyDenoiser(TinyDenoiserConfig cfg_, Rng& rng) : cfg(cfg_) {
    const int64_t c = cfg.base_channels;
    const int64_t e = cfg.temb_dim;
    e0a = Conv2d(3, c, 3, 1, 1, rng);
    e0b = Conv2d(c, c, 3, 1, 1, rng);
    down0 = Conv2d(c, 2 * c, 3, 2, 1, rng);
    e1a = Conv2d(2 * c, 2 * c, 3, 1, 1, rng);
    down1 = Conv2d(2 * c, 2 * c, 3, 2, 1, rng);
    mid_a = Conv2d(2 * c, 2 * c, 3, 1, 1, rng);
    mid_b = Conv2d(2 * c, 2 * c, 3, 1, 1, rng);
    d1a = Conv2d(2 * c, 2 * c, 3, 1, 1, rng);
    d0a = Conv2d(2 * c, c, 3, 1, 1, rng);
    head = Conv2d(c, 3, 3, 1, 1, rng);
    t_mlp = Conv2d(e, e, 1, 1, 0, rng);
    t0 = Conv2d(e, c, 1, 1, 0, rng);
    t1 = Conv2d(e, 2 * c, 1, 1, 0, rng);
    tmid = Conv2d(e, 2 * c, 1, 1, 0, rng);
}

Tensor TinyDenoiser::time_features(std::span<const int> ts) const {
    const int64_t half = cfg.temb_dim / 2;
    Tensor f({static_cast<int64_t>(ts.size()), cfg.temb_dim, 1, 1});
    for (size_t n = 0; n < ts.size(); ++n) {
        for (int64_t i = 0; i < half; ++i) {
            const double freq =
                std::exp(-std::log(10000.0) * static_cast<double>(i) /
                         static_cast<double>(half > 1 ? half - 1 : 1));
            const double arg = static_cast<double>(ts[n]) * freq;
            f.data[n * cfg.temb_dim + i] = static_cast<float>(std::sin(arg));
            f.data[n * cfg.temb_dim + half + i] = static_cast<float>(std::cos(arg));
        }
    }
    return f;
}

Var TinyDenoiser::forward(const Var& x, std::span<const int> ts) const {
    if (static_cast<int64_t>(ts.size()) != x->value.shape.n)
        throw ShapeError("TinyDenoiser: " + std::to_string(ts.size()) +
                         " timesteps for batch " + x->value.shape.str());
    const Var tf = relu(t_mlp(constant(time_features(ts))));

    Var h0 = leaky_relu(add_channel_bias(e0a(x), t0(tf)), slope);
    h0 = leaky_relu(e0b(h0), slope);
    Var h1 = leaky_relu(add_channel_bias(e1a(down0(h0)), t1(tf)), slope);
    Var m = leaky_relu(add_channel_bias(mid_a(down1(h1)), tmid(tf)), slope);
    m = leaky_relu(mid_b(m), slope);
    Var u1 = leaky_relu(add(d1a(upsample2x(m)), h1), slope);
    Var u0 = leaky_relu(add(d0a(upsample2x(u1)), h0), slope);
    return head(u0);
}

Tensor TinyDenoiser::predict(const Tensor& x, int t) const {
    std::vector<int> ts(static_cast<size_t>(x.shape.n), t);
    return forward(constant(x), ts)->value;
}

std::vector<Var> TinyDenoiser::params() const {
    return collect_params({&e0a, &e0b, &down0, &e1a, &down1, &mid_a, &mid_b, &d1a,
                           &d0a, &head, &t_mlp, &t0, &t1, &tmid});
}

int64_t TinyDenoiser::param_count() const {
    int64_t total = 0;
    for (const auto& p : params()) total += p->value.numel();
    return total;
}

}  // namespace gdr::nn
