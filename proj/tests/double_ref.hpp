#pragma once

// Test-only double-precision re-implementation of the forward math used by
// the composite losses. Serves as the independent oracle for
// finite-difference checks: float forward noise would otherwise floor the
// achievable FD accuracy near 1e-3, and kink crossings punish large h.
// With doubles, h=1e-5 is clean on both counts.

#include <cmath>
#include <vector>

#include "gdr/nn.hpp"
#include "gdr/tensor.hpp"

namespace gdr::dref {

struct DTensor {
    Shape4 shape{};
    std::vector<double> data;

    DTensor() = default;
    explicit DTensor(Shape4 s) : shape(s), data(static_cast<size_t>(s.numel()), 0.0) {}
    static DTensor from(const Tensor& t) {
        DTensor d(t.shape);
        for (int64_t i = 0; i < t.numel(); ++i) d.data[static_cast<size_t>(i)] = t.data[i];
        return d;
    }
    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    double at(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data[static_cast<size_t>(((n * shape.c + c) * shape.h + h) * shape.w + w)];
    }
    double& at(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data[static_cast<size_t>(((n * shape.c + c) * shape.h + h) * shape.w + w)];
    }
};

inline DTensor conv2d(const DTensor& x, const Tensor& w, const Tensor& b,
                      int64_t stride, int64_t pad) {
    const Shape4 ws = w.shape;
    const int64_t oh = (x.shape.h + 2 * pad - ws.h) / stride + 1;
    const int64_t ow = (x.shape.w + 2 * pad - ws.w) / stride + 1;
    DTensor out({x.shape.n, ws.n, oh, ow});
    for (int64_t n = 0; n < x.shape.n; ++n)
        for (int64_t oc = 0; oc < ws.n; ++oc)
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    double acc = b.empty() ? 0.0 : b.data[static_cast<size_t>(oc)];
                    for (int64_t ic = 0; ic < ws.c; ++ic)
                        for (int64_t ky = 0; ky < ws.h; ++ky) {
                            const int64_t iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= x.shape.h) continue;
                            for (int64_t kx = 0; kx < ws.w; ++kx) {
                                const int64_t ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= x.shape.w) continue;
                                acc += x.at(n, ic, iy, ix) *
                                       w.at(oc, ic, ky, kx);
                            }
                        }
                    out.at(n, oc, oy, ox) = acc;
                }
    return out;
}

inline DTensor conv2d(const DTensor& x, const nn::Conv2d& layer) {
    return conv2d(x, layer.w->value, layer.b->value, layer.stride, layer.pad);
}

inline DTensor lrelu(DTensor x, double slope) {
    for (auto& v : x.data) v = v > 0.0 ? v : slope * v;
    return x;
}

inline DTensor clamp(DTensor x, double lo, double hi) {
    for (auto& v : x.data) v = std::min(std::max(v, lo), hi);
    return x;
}

inline DTensor sub(const DTensor& a, const DTensor& b) {
    DTensor out(a.shape);
    for (int64_t i = 0; i < a.numel(); ++i)
        out.data[static_cast<size_t>(i)] =
            a.data[static_cast<size_t>(i)] - b.data[static_cast<size_t>(i)];
    return out;
}

inline DTensor concat_batch(const DTensor& a, const DTensor& b) {
    if (b.numel() == 0) return a;
    DTensor out({a.shape.n + b.shape.n, a.shape.c, a.shape.h, a.shape.w});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());
    return out;
}

inline double mse(const DTensor& a, const DTensor& b) {
    double acc = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = a.data[static_cast<size_t>(i)] - b.data[static_cast<size_t>(i)];
        acc += d * d;
    }
    return acc / static_cast<double>(a.numel());
}

// Per-item probabilities of the discriminator head: sigmoid(global mean).
inline std::vector<double> disc_probs(const nn::Discriminator& d, const DTensor& x) {
    DTensor h = lrelu(conv2d(x, d.c1), d.slope);
    h = lrelu(conv2d(h, d.c2), d.slope);
    h = lrelu(conv2d(h, d.c3), d.slope);
    h = conv2d(h, d.c4);
    const int64_t per = h.shape.c * h.shape.h * h.shape.w;
    std::vector<double> probs;
    for (int64_t n = 0; n < h.shape.n; ++n) {
        double acc = 0.0;
        for (int64_t i = 0; i < per; ++i)
            acc += h.data[static_cast<size_t>(n * per + i)];
        probs.push_back(1.0 / (1.0 + std::exp(-acc / static_cast<double>(per))));
    }
    return probs;
}

inline double log_mean(const std::vector<double>& probs) {
    double acc = 0.0;
    for (double p : probs) acc += std::log(std::min(std::max(p, 1e-6), 1.0 - 1e-6));
    return acc / static_cast<double>(probs.size());
}

inline double log_one_minus_mean(const std::vector<double>& probs) {
    double acc = 0.0;
    for (double p : probs)
        acc += std::log(1.0 - std::min(std::max(p, 1e-6), 1.0 - 1e-6));
    return acc / static_cast<double>(probs.size());
}

inline DTensor phi_forward(const nn::DegradationNet& phi, const DTensor& x) {
    DTensor h = lrelu(conv2d(x, phi.c1), phi.slope);
    h = lrelu(conv2d(h, phi.c2), phi.slope);
    h = lrelu(conv2d(h, phi.c3), phi.slope);
    return clamp(conv2d(h, phi.c4), -1.0, 1.0);
}

inline DTensor vfeat_forward(const nn::FeatureExtractor& v, const DTensor& x) {
    DTensor h = lrelu(conv2d(x, v.c1), 0.0);
    h = lrelu(conv2d(h, v.c2), 0.0);
    return lrelu(conv2d(h, v.c3), 0.0);
}

inline double tv(const DTensor& x) {
    double acc = 0.0;
    const int64_t planes = x.shape.n * x.shape.c;
    for (int64_t nc = 0; nc < planes; ++nc) {
        const double* p = x.data.data() + nc * x.shape.h * x.shape.w;
        for (int64_t y = 0; y < x.shape.h; ++y)
            for (int64_t xc = 0; xc + 1 < x.shape.w; ++xc)
                acc += std::abs(p[y * x.shape.w + xc + 1] - p[y * x.shape.w + xc]);
        for (int64_t y = 0; y + 1 < x.shape.h; ++y)
            for (int64_t xc = 0; xc < x.shape.w; ++xc)
                acc += std::abs(p[(y + 1) * x.shape.w + xc] - p[y * x.shape.w + xc]);
    }
    return acc / static_cast<double>(planes);
}

// Central finite differences of a double-valued function of a float tensor;
// perturbations happen in double on the promoted copy.
inline Tensor finite_diff_d(const std::function<double(const DTensor&)>& fn,
                            const Tensor& x0, double h = 1e-5) {
    DTensor x = DTensor::from(x0);
    Tensor g(x0.shape);
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double orig = x.data[static_cast<size_t>(i)];
        x.data[static_cast<size_t>(i)] = orig + h;
        const double fp = fn(x);
        x.data[static_cast<size_t>(i)] = orig - h;
        const double fm = fn(x);
        x.data[static_cast<size_t>(i)] = orig;
        g.data[i] = static_cast<float>((fp - fm) / (2.0 * h));
    }
    return g;
}

}  // namespace gdr::dref
